#include "paneliv/eventstudy.hpp"

#include <algorithm>
#include <cmath>

#include "paneliv/errors.hpp"

namespace paneliv {

PotentialFit fit_potential(const Panel& p, const std::string& outcome,
                           const std::string& aggregate,
                           const std::vector<std::string>& controls,
                           bool year_dummies, bool param_uncertainty) {
    Panel panel = year_dummies ? p.add_year_dummies() : p;
    std::vector<std::string> regs = {aggregate};
    regs.insert(regs.end(), controls.begin(), controls.end());
    if (year_dummies) {
        const std::vector<std::string> dummies = p.year_dummy_names();
        regs.insert(regs.end(), dummies.begin(), dummies.end());
    }

    PotentialFit out;
    out.ols = fit_within_ols(panel, outcome, regs);
    out.param_uncertainty = param_uncertainty;

    const Eigen::VectorXd& y = panel.column(outcome);
    out.fitted = y - out.ols.residuals;

    const auto n = static_cast<Eigen::Index>(out.ols.n_obs);
    out.forecast_var.resize(n);
    if (param_uncertainty) {
        // Var(b) = sigma2 * (X'X)^-1 under homoskedastic forecast errors.
        const Eigen::MatrixXd vb = out.ols.sigma2 * out.ols.xtx_inverse;
        for (Eigen::Index c = 0; c < n; ++c) {
            const Eigen::VectorXd xt = out.ols.demeaned_x.row(c);
            out.forecast_var(c) = out.ols.sigma2 + xt.dot(vb * xt);
        }
    } else {
        out.forecast_var.setConstant(out.ols.sigma2);
    }
    return out;
}

AVPanel abnormal_values(const PotentialFit& fit) {
    AVPanel out;
    out.shape = fit.ols.shape;
    out.outcome = fit.ols.dependent;
    out.av = fit.ols.residuals;
    out.var = fit.forecast_var;
    return out;
}

EventPanel recenter_event_time(const AVPanel& av, const std::map<std::string, int>& event_years) {
    if (event_years.empty()) throw DataError("no event years supplied");
    const auto& times = av.shape.times;
    const int t_lo = times.front();
    const int t_hi = times.back();

    std::string out_of_range;
    for (const auto& [entity, year] : event_years) {
        // Unknown entities are a configuration mistake; out-of-range years are
        // a data problem and are reported together below.
        bool known = false;
        for (const auto& e : av.shape.entities)
            if (e == entity) { known = true; break; }
        if (!known) throw ConfigError("event entity '" + entity + "' is not in the panel");
        if (year < t_lo || year > t_hi) {
            if (!out_of_range.empty()) out_of_range += ", ";
            out_of_range += entity + " (" + std::to_string(year) + ")";
        }
    }
    if (!out_of_range.empty())
        throw DataError("event years outside the panel window " + std::to_string(t_lo) + ".." +
                        std::to_string(t_hi) + ": " + out_of_range);

    EventPanel out;
    const auto T = static_cast<Eigen::Index>(times.size());
    for (std::size_t i = 0; i < av.shape.n_entities(); ++i) {
        const auto it = event_years.find(av.shape.entities[i]);
        if (it == event_years.end()) continue;  // never-treated entities are excluded
        const std::size_t kept_ix = out.entities_kept.size();
        out.entities_kept.push_back(av.shape.entities[i]);
        for (Eigen::Index t = 0; t < T; ++t) {
            const auto c = static_cast<Eigen::Index>(i) * T + t;
            out.obs.push_back(EventObs{kept_ix, times[static_cast<std::size_t>(t)] - it->second,
                                       av.av(c), av.var(c)});
        }
    }
    if (out.obs.empty()) throw DataError("no entities with events remain");
    return out;
}

const EventCurvePoint* EventCurve::at(int tau) const {
    for (const auto& pt : points)
        if (pt.tau == tau) return &pt;
    return nullptr;
}

EventCurve aggregate_av(const EventPanel& ev) {
    if (ev.obs.empty()) throw DataError("no event observations to aggregate");
    std::map<int, EventCurvePoint> by_tau;
    for (const auto& o : ev.obs) {
        EventCurvePoint& pt = by_tau[o.tau];
        pt.tau = o.tau;
        pt.mean += o.av;
        pt.var += o.var;
        ++pt.n;
    }
    EventCurve out;
    for (auto& [tau, pt] : by_tau) {
        const double n = static_cast<double>(pt.n);
        pt.mean /= n;
        pt.var /= n * n;  // variance of a simple average of independent cells
        const double hw = 1.96 * std::sqrt(pt.var);
        pt.lo = pt.mean - hw;
        pt.hi = pt.mean + hw;
        out.points.push_back(pt);
    }
    return out;
}

}  // namespace paneliv
