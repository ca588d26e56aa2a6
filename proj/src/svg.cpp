#include "paneliv/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "paneliv/errors.hpp"

namespace paneliv {

namespace {

constexpr double kWidth = 640.0, kHeight = 420.0;
constexpr double kLeft = 60.0, kRight = 20.0, kTop = 30.0, kBottom = 45.0;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

struct Scale {
    double lo, hi, px0, px1;
    double operator()(double v) const {
        if (hi == lo) return (px0 + px1) / 2.0;
        return px0 + (v - lo) / (hi - lo) * (px1 - px0);
    }
};

std::string header(const std::string& title) {
    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
         num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(kWidth / 2) + "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
         title + "</text>\n";
    return s;
}

std::string axes(const Scale& sx, const Scale& sy, const std::string& xlab, const std::string& ylab) {
    std::string s;
    s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kHeight - kBottom) + "\" x2=\"" +
         num(kWidth - kRight) + "\" y2=\"" + num(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
         num(kHeight - kBottom) + "\" stroke=\"black\"/>\n";
    for (double f : {0.0, 0.5, 1.0}) {
        const double xv = sx.lo + f * (sx.hi - sx.lo);
        const double yv = sy.lo + f * (sy.hi - sy.lo);
        s += "<text x=\"" + num(sx(xv)) + "\" y=\"" + num(kHeight - kBottom + 16) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + num(xv) + "</text>\n";
        s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(sy(yv) + 4) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + num(yv) + "</text>\n";
    }
    s += "<text x=\"" + num((kLeft + kWidth - kRight) / 2) + "\" y=\"" + num(kHeight - 8) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + xlab + "</text>\n";
    s += "<text x=\"14\" y=\"" + num((kTop + kHeight - kBottom) / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 " +
         num((kTop + kHeight - kBottom) / 2) + ")\">" + ylab + "</text>\n";
    return s;
}

}  // namespace

std::string svg_event_curve(const EventCurve& curve, const std::string& title) {
    if (curve.points.empty()) throw DataError("cannot render an empty event curve");
    double xlo = curve.points.front().tau, xhi = curve.points.back().tau;
    double ylo = 0.0, yhi = 0.0;
    for (const auto& p : curve.points) {
        ylo = std::min(ylo, p.lo);
        yhi = std::max(yhi, p.hi);
    }
    const double pad = 0.05 * std::max(1e-12, yhi - ylo);
    Scale sx{xlo, xhi, kLeft, kWidth - kRight};
    Scale sy{ylo - pad, yhi + pad, kHeight - kBottom, kTop};

    std::string s = header(title);
    s += axes(sx, sy, "event time", "mean abnormal value");

    std::string band = "<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\" points=\"";
    for (const auto& p : curve.points) band += num(sx(p.tau)) + "," + num(sy(p.hi)) + " ";
    for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it)
        band += num(sx(it->tau)) + "," + num(sy(it->lo)) + " ";
    band += "\"/>\n";
    s += band;

    if (sy.lo < 0.0 && sy.hi > 0.0)
        s += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(sy(0.0)) + "\" x2=\"" +
             num(kWidth - kRight) + "\" y2=\"" + num(sy(0.0)) +
             "\" stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\n";

    std::string line = "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"";
    for (const auto& p : curve.points) line += num(sx(p.tau)) + "," + num(sy(p.mean)) + " ";
    line += "\"/>\n";
    s += line;
    s += "</svg>\n";
    return s;
}

std::string svg_survival_curves(const std::vector<SurvivalCurve>& curves, const std::string& title) {
    if (curves.empty()) throw DataError("cannot render an empty set of survival curves");
    double xhi = 0.0;
    for (const auto& c : curves) {
        if (c.times.empty()) throw DataError("cannot render an empty survival curve");
        xhi = std::max(xhi, c.times.back());
    }
    Scale sx{0.0, xhi, kLeft, kWidth - kRight};
    Scale sy{0.0, 1.0, kHeight - kBottom, kTop};

    static const char* kColors[] = {"#08519c", "#a63603", "#238b45", "#6a51a3"};
    std::string s = header(title);
    s += axes(sx, sy, "time", "survival");
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        const auto& c = curves[ci];
        const char* color = kColors[ci % 4];
        std::string line = "<polyline fill=\"none\" stroke=\"";
        line += color;
        line += "\" stroke-width=\"2\" points=\"";
        double prev_s = 1.0;
        line += num(sx(0.0)) + "," + num(sy(1.0)) + " ";
        for (std::size_t j = 0; j < c.times.size(); ++j) {
            line += num(sx(c.times[j])) + "," + num(sy(prev_s)) + " ";
            line += num(sx(c.times[j])) + "," + num(sy(c.survival[j])) + " ";
            prev_s = c.survival[j];
        }
        line += "\"/>\n";
        s += line;
        s += "<text x=\"" + num(kWidth - kRight - 6) + "\" y=\"" + num(kTop + 16.0 * (ci + 1)) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"";
        s += color;
        s += "\">" + (c.label.empty() ? ("group " + std::to_string(ci + 1)) : c.label) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

}  // namespace paneliv
