#include "paneliv/cfiv.hpp"

#include <cmath>
#include <limits>

#include "paneliv/errors.hpp"
#include "paneliv/rng.hpp"

namespace paneliv {

namespace {

struct PreparedSample {
    Panel panel;
    std::vector<std::string> year_dummies;
    double dropped_fraction;
};

// Shared sample construction: complete window over every role column, then
// the all-zero-outcome filter, then year dummies materialized on what is left
// (their base year must come from the estimation window, not the raw panel).
PreparedSample prepare_sample(const Panel& p, const FeatureSpec& spec) {
    spec.validate(p);
    std::vector<std::string> needed = {spec.outcome, spec.endogenous};
    needed.insert(needed.end(), spec.instruments.begin(), spec.instruments.end());
    needed.insert(needed.end(), spec.controls.begin(), spec.controls.end());
    Panel windowed = p.restrict_to_complete_window(needed);
    FilterResult filtered = filter_nonzero_outcome(windowed, spec.outcome);
    PreparedSample out{filtered.panel, {}, filtered.dropped_fraction};
    if (spec.year_dummies) {
        out.year_dummies = out.panel.year_dummy_names();
        out.panel = out.panel.add_year_dummies();
    }
    return out;
}

double tstat(const FEPoissonFit& fit, const ClusteredCov& cov, const std::string& name) {
    const int j = fit.coef_index(name);
    if (j < 0) throw ConfigError("coefficient '" + name + "' is not in the fit");
    const double var = cov.cov(j, j);
    if (!(var > 0)) throw NumericalError("non-positive variance for coefficient '" + name + "'");
    return fit.coef(j) / std::sqrt(var);
}

}  // namespace

CFIVResult run_cf_iv(const Panel& p, const FeatureSpec& spec, const CFIVOptions& opts) {
    if (!(opts.alpha > 0.0 && opts.alpha < 1.0))
        throw ConfigError("alpha must lie strictly between 0 and 1");
    if (opts.residual_column.empty())
        throw ConfigError("residual column name must not be empty");
    if (p.has_column(opts.residual_column))
        throw ConfigError("residual column '" + opts.residual_column + "' already exists in the panel");

    PreparedSample prep = prepare_sample(p, spec);

    CFIVResult res;
    res.spec = spec;
    res.alpha = opts.alpha;
    res.year_dummies = prep.year_dummies;
    res.dropped_fraction = prep.dropped_fraction;
    res.n_obs = prep.panel.n_cells();
    res.n_entities = prep.panel.n_entities();

    std::vector<std::string> stage1 = spec.instruments;
    stage1.insert(stage1.end(), spec.controls.begin(), spec.controls.end());
    stage1.insert(stage1.end(), prep.year_dummies.begin(), prep.year_dummies.end());
    res.first_stage = fit_within_ols(prep.panel, spec.endogenous, stage1);
    res.first_cov = cluster_robust_cov(res.first_stage);
    res.instrument_f = instrument_f_stat(res.first_stage, res.first_cov, spec.instruments);

    // Both stages run on the identical cells, so the residual vector aligns
    // with the second-stage sample by construction.
    Panel with_resid = prep.panel.with_column(opts.residual_column, res.first_stage.residuals);
    std::vector<std::string> stage2 = {spec.endogenous};
    stage2.insert(stage2.end(), spec.controls.begin(), spec.controls.end());
    stage2.insert(stage2.end(), prep.year_dummies.begin(), prep.year_dummies.end());
    stage2.push_back(opts.residual_column);
    res.second_stage = fit_fe_poisson(with_resid, spec.outcome, stage2);
    res.second_cov = poisson_cluster_cov(res.second_stage);

    if (res.first_stage.n_obs != res.second_stage.n_obs)
        throw NumericalError("stage samples diverged; this is a bug in sample construction");

    res.endogeneity = wald_test(res.second_stage, res.second_cov, opts.residual_column, 0.0);
    res.endogenous_at_alpha = res.endogeneity.p_value < opts.alpha;
    return res;
}

NaivePoissonResult run_naive_fe_poisson(const Panel& p, const FeatureSpec& spec) {
    PreparedSample prep = prepare_sample(p, spec);
    std::vector<std::string> regs = {spec.endogenous};
    regs.insert(regs.end(), spec.controls.begin(), spec.controls.end());
    regs.insert(regs.end(), prep.year_dummies.begin(), prep.year_dummies.end());
    NaivePoissonResult out;
    out.fit = fit_fe_poisson(prep.panel, spec.outcome, regs);
    out.cov = poisson_cluster_cov(out.fit);
    out.dropped_fraction = prep.dropped_fraction;
    return out;
}

BootstrapResult bootstrap_instrument_tstat(const Panel& p, const FeatureSpec& spec,
                                           std::size_t reps, std::uint64_t seed,
                                           const CFIVOptions& opts) {
    spec.validate(p);
    if (spec.instruments.size() < 2)
        throw ConfigError("instrument-swap bootstrap needs at least two instruments");
    if (reps < 100)
        throw ConfigError("bootstrap needs at least 100 replications; requested " +
                          std::to_string(reps));

    const std::size_t N = p.n_entities();
    BootstrapResult out;
    out.requested = reps;
    out.seed = seed;
    out.tstat_first.assign(reps, std::numeric_limits<double>::quiet_NaN());
    out.tstat_second.assign(reps, std::numeric_limits<double>::quiet_NaN());

    std::string first_error;
    for (std::size_t r = 0; r < reps; ++r) {
        Rng rng(derive_seed(seed, r));
        std::vector<std::size_t> draw(N);
        for (std::size_t i = 0; i < N; ++i) draw[i] = rng.uniform_int(N);
        const Panel resampled = p.subset_entities(draw);
        try {
            double ts[2];
            for (int v = 0; v < 2; ++v) {
                FeatureSpec variant = spec;
                variant.instruments = {spec.instruments[static_cast<std::size_t>(v)]};
                const CFIVResult fit = run_cf_iv(resampled, variant, opts);
                ts[v] = tstat(fit.second_stage, fit.second_cov, opts.residual_column);
            }
            out.tstat_first[r] = ts[0];
            out.tstat_second[r] = ts[1];
            ++out.completed;
        } catch (const std::exception& e) {
            ++out.failures;
            if (first_error.empty()) first_error = e.what();
        }
    }

    if (static_cast<double>(out.failures) > 0.05 * static_cast<double>(reps))
        throw NumericalError("bootstrap failure rate " + std::to_string(out.failures) + "/" +
                             std::to_string(reps) + " exceeds 5%; first failure: " + first_error);

    double s1 = 0.0, s2 = 0.0, gap = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        if (std::isnan(out.tstat_first[r])) continue;
        s1 += out.tstat_first[r];
        s2 += out.tstat_second[r];
        gap += std::abs(out.tstat_first[r] - out.tstat_second[r]);
    }
    const double m = static_cast<double>(out.completed);
    out.mean_t_first = s1 / m;
    out.mean_t_second = s2 / m;
    out.summary_t = (s1 + s2) / (2.0 * m);
    out.mean_abs_gap = gap / m;
    return out;
}

}  // namespace paneliv
