#include "paneliv/survival.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "paneliv/errors.hpp"

namespace paneliv {

double SurvivalCurve::survival_at(double t) const {
    // Last row with time <= t; S = 1 before any observed time.
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

SurvivalCurve kaplan_meier(const std::vector<double>& durations,
                           const std::vector<int>& died,
                           std::string label) {
    if (durations.empty()) throw DataError("survival estimate needs at least one duration");
    if (durations.size() != died.size())
        throw DataError("durations and event flags differ in length");
    for (std::size_t i = 0; i < durations.size(); ++i) {
        if (!(durations[i] > 0) || !std::isfinite(durations[i]))
            throw DataError("durations must be positive and finite; found " +
                            std::to_string(durations[i]));
        if (died[i] != 0 && died[i] != 1)
            throw DataError("event flags must be 0 (censored) or 1 (death)");
    }

    std::vector<std::size_t> order(durations.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // Deaths sort before censorings at the same time: a unit censored at t is
    // still at risk for the deaths recorded at t.
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (durations[a] != durations[b]) return durations[a] < durations[b];
        return died[a] > died[b];
    });

    SurvivalCurve out;
    out.label = std::move(label);
    out.n = durations.size();
    int at_risk = static_cast<int>(durations.size());
    double s = 1.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = durations[order[i]];
        int d = 0, c = 0;
        while (i < order.size() && durations[order[i]] == t) {
            (died[order[i]] ? d : c) += 1;
            ++i;
        }
        if (d > 0) s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
        out.times.push_back(t);
        out.at_risk.push_back(at_risk);
        out.deaths.push_back(d);
        out.censored.push_back(c);
        out.survival.push_back(s);
        at_risk -= d + c;
    }
    return out;
}

std::optional<double> median_survival(const SurvivalCurve& curve) {
    for (std::size_t j = 0; j < curve.times.size(); ++j)
        if (curve.survival[j] <= 0.5) return curve.times[j];
    return std::nullopt;
}

SurvivalComparison compare_groups(const SurvivalCurve& a, const SurvivalCurve& b) {
    if (a.times.empty() || b.times.empty())
        throw DataError("cannot compare empty survival curves");
    std::set<double> grid(a.times.begin(), a.times.end());
    grid.insert(b.times.begin(), b.times.end());

    SurvivalComparison out;
    out.median_a = median_survival(a);
    out.median_b = median_survival(b);
    if (out.median_a && out.median_b) out.median_gap = *out.median_b - *out.median_a;
    out.grid_size = grid.size();

    double score = 0.0;
    for (double t : grid) {
        const double sa = a.survival_at(t);
        const double sb = b.survival_at(t);
        if (sa < sb) score += 1.0;
        else if (sa == sb) score += 0.5;
    }
    out.dominance_fraction = score / static_cast<double>(grid.size());
    return out;
}

}  // namespace paneliv
