#include "paneliv/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "paneliv/cfiv.hpp"
#include "paneliv/errors.hpp"
#include "paneliv/rng.hpp"

namespace paneliv {

namespace {

constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();
constexpr double kBaseRoster = 20.0;  // mean initial roster size
constexpr std::size_t kMinRoster = 3;

std::string entity_name(std::size_t i, std::size_t n_total) {
    std::size_t width = 1;
    for (std::size_t v = n_total > 0 ? n_total - 1 : 0; v >= 10; v /= 10) ++width;
    std::string digits = std::to_string(i);
    return "E" + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

std::vector<int> consecutive_years(int first, std::size_t count) {
    std::vector<int> out(count);
    std::iota(out.begin(), out.end(), first);
    return out;
}

}  // namespace

void DGPParams::validate() const {
    if (n_entities < 2) throw ConfigError("simulation needs at least 2 entities");
    if (n_periods < 3) throw ConfigError("simulation needs at least 3 periods");
    if (std::abs(endo_corr) > 1.0) throw ConfigError("endo_corr must lie in [-1, 1]");
    if (std::abs(hetero_corr) > 1.0) throw ConfigError("hetero_corr must lie in [-1, 1]");
    if (sigma_kappa < 0 || sigma_u < 0 || sigma_c < 0 || sigma_c2 < 0 || year_effect_scale < 0)
        throw ConfigError("scale parameters must be non-negative");
    if (recall_intensity < 0) throw ConfigError("recall_intensity must be non-negative");
    if (n_controls < 0) throw ConfigError("n_controls must be non-negative");
}

FeatureSpec SimulatedPanel::default_spec() const {
    FeatureSpec spec;
    spec.outcome = "trials";
    spec.endogenous = "log_market";
    spec.instruments = {"recalls_norm", "recalls_norm_lag"};
    for (int j = 0; j < params.n_controls; ++j)
        spec.controls.push_back("ctrl" + std::to_string(j + 1));
    spec.year_dummies = true;
    return spec;
}

SimulatedPanel simulate_panel(const DGPParams& params) {
    params.validate();
    const std::size_t N = params.n_entities;
    const std::size_t T = params.n_periods;

    Rng rng_roster(derive_seed(params.seed, 1));
    Rng rng_entity(derive_seed(params.seed, 2));
    Rng rng_shock(derive_seed(params.seed, 3));
    Rng rng_ctrl(derive_seed(params.seed, 4));
    Rng rng_year(derive_seed(params.seed, 5));

    // Year effects for the market and outcome equations.
    std::vector<double> xi(T), zeta(T);
    for (std::size_t t = 0; t < T; ++t) xi[t] = params.year_effect_scale * rng_year.normal();
    for (std::size_t t = 0; t < T; ++t) zeta[t] = params.year_effect_scale * rng_year.normal();

    // Rosters and recalls over an extra pre-period so the lagged instrument
    // is defined for the first observed period of the market equation.
    const std::size_t TP = T + 1;  // index 0 is the pre-period
    std::vector<std::vector<std::vector<int>>> roster_all(N);
    std::vector<std::vector<long>> recalls_all(N);
    for (std::size_t i = 0; i < N; ++i) {
        roster_all[i].resize(TP);
        recalls_all[i].resize(TP);
        int next_id = 0;
        std::vector<int>& first = roster_all[i][0];
        const long n0 = 12 + rng_roster.poisson(8.0);
        for (long j = 0; j < n0; ++j) first.push_back(next_id++);
        for (std::size_t t = 1; t < TP; ++t) {
            std::vector<int> cur;
            for (int id : roster_all[i][t - 1])
                if (rng_roster.uniform() >= 0.08) cur.push_back(id);
            while (cur.size() < kMinRoster && cur.size() < roster_all[i][t - 1].size())
                cur.push_back(roster_all[i][t - 1][cur.size()]);
            const long entries = rng_roster.poisson(0.08 * kBaseRoster);
            for (long j = 0; j < entries; ++j) cur.push_back(next_id++);
            roster_all[i][t] = std::move(cur);
        }
        for (std::size_t t = 0; t < TP; ++t)
            recalls_all[i][t] = rng_roster.poisson(
                params.recall_intensity * static_cast<double>(roster_all[i][t].size()) / kBaseRoster);
    }

    // Entity effects; the outcome effect optionally correlates with the
    // entity's mean normalized recalls.
    std::vector<double> zbar(N), raw_c(N), c2(N);
    for (std::size_t i = 0; i < N; ++i) {
        double s = 0.0;
        for (std::size_t t = 1; t < TP; ++t)
            s += normalize_recalls(static_cast<double>(recalls_all[i][t]),
                                   static_cast<double>(roster_all[i][t].size()));
        zbar[i] = s / static_cast<double>(T);
        raw_c[i] = rng_entity.normal();
        c2[i] = params.sigma_c2 * rng_entity.normal();
    }
    double zm = 0.0, zs = 0.0;
    for (double v : zbar) zm += v;
    zm /= static_cast<double>(N);
    for (double v : zbar) zs += (v - zm) * (v - zm);
    zs = std::sqrt(zs / static_cast<double>(N));
    std::vector<double> log_c(N);
    const double h = params.hetero_corr;
    for (std::size_t i = 0; i < N; ++i) {
        const double zstd = zs > 1e-12 ? (zbar[i] - zm) / zs : 0.0;
        log_c[i] = params.sigma_c * (std::sqrt(1.0 - h * h) * raw_c[i] + h * zstd);
    }

    const std::size_t n = N * T;
    Eigen::VectorXd trials(n), log_market(n), recalls(n), n_products(n), recalls_norm(n), lost_next(n);
    std::vector<Eigen::VectorXd> ctrls(static_cast<std::size_t>(params.n_controls), Eigen::VectorXd(n));

    const double rho = params.endo_corr;
    for (std::size_t i = 0; i < N; ++i) {
        std::vector<double> ctrl_entity(static_cast<std::size_t>(params.n_controls));
        for (auto& v : ctrl_entity) v = 0.3 * rng_ctrl.normal();
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t c = i * T + t;
            const std::size_t tp = t + 1;  // roster index for observed period t

            const double a = rng_shock.normal();
            const double bshk = rng_shock.normal();
            const double u = params.sigma_u * a;
            const double kappa =
                params.sigma_kappa * (rho * a + std::sqrt(1.0 - rho * rho) * bshk);

            const double z1 = normalize_recalls(static_cast<double>(recalls_all[i][tp]),
                                                static_cast<double>(roster_all[i][tp].size()));
            const double z2 = normalize_recalls(static_cast<double>(recalls_all[i][tp - 1]),
                                                static_cast<double>(roster_all[i][tp - 1].size()));

            double ctrl_sum = 0.0;
            for (std::size_t j = 0; j < ctrls.size(); ++j) {
                const double x = ctrl_entity[j] + 0.5 * rng_ctrl.normal();
                ctrls[j](static_cast<Eigen::Index>(c)) = x;
                ctrl_sum += x;
            }

            const double m = params.base_market + params.pi1 * z1 + params.pi2 * z2 +
                             params.control_loading_market * ctrl_sum + c2[i] + xi[t] + u;
            const double rate =
                std::exp(log_c[i] + params.beta1 * m + params.control_coef * ctrl_sum + zeta[t] + kappa);
            if (!(rate < 1e9))
                throw NumericalError("explosive outcome mean " + std::to_string(rate) +
                                     "; rescale the simulation parameters");

            trials(static_cast<Eigen::Index>(c)) = static_cast<double>(rng_shock.poisson(rate));
            log_market(static_cast<Eigen::Index>(c)) = m;
            recalls(static_cast<Eigen::Index>(c)) = static_cast<double>(recalls_all[i][tp]);
            n_products(static_cast<Eigen::Index>(c)) = static_cast<double>(roster_all[i][tp].size());
            recalls_norm(static_cast<Eigen::Index>(c)) = z1;
            if (t + 1 < T) {
                long lost = 0;
                const auto& nxt = roster_all[i][tp + 1];
                for (int id : roster_all[i][tp])
                    if (std::find(nxt.begin(), nxt.end(), id) == nxt.end()) ++lost;
                lost_next(static_cast<Eigen::Index>(c)) = static_cast<double>(lost);
            } else {
                lost_next(static_cast<Eigen::Index>(c)) = kAbsent;
            }
        }
    }

    std::vector<std::string> entities(N);
    for (std::size_t i = 0; i < N; ++i) entities[i] = entity_name(i, N);
    std::vector<std::pair<std::string, Eigen::VectorXd>> columns;
    columns.emplace_back("trials", std::move(trials));
    columns.emplace_back("log_market", std::move(log_market));
    columns.emplace_back("recalls", std::move(recalls));
    columns.emplace_back("n_products", std::move(n_products));
    columns.emplace_back("recalls_norm", std::move(recalls_norm));
    columns.emplace_back("lost_next", std::move(lost_next));
    for (std::size_t j = 0; j < ctrls.size(); ++j)
        columns.emplace_back("ctrl" + std::to_string(j + 1), std::move(ctrls[j]));

    Panel panel(std::move(entities), consecutive_years(2001, T), std::move(columns));
    panel = panel.add_lag("recalls_norm", "recalls_norm_lag");

    SimulatedPanel out{std::move(panel), {}, params};
    out.rosters.resize(N);
    for (std::size_t i = 0; i < N; ++i)
        out.rosters[i].assign(roster_all[i].begin() + 1, roster_all[i].end());
    return out;
}

void Ar1Options::validate() const {
    if (n_entities < 2) throw ConfigError("simulation needs at least 2 entities");
    if (n_periods < 3) throw ConfigError("dynamic simulation needs at least 3 periods");
    if (std::abs(phi) >= 1.0) throw ConfigError("phi must lie strictly inside (-1, 1)");
    if (sigma_c < 0 || sigma_e < 0) throw ConfigError("scale parameters must be non-negative");
}

Panel simulate_ar1_panel(const Ar1Options& opts) {
    opts.validate();
    const std::size_t N = opts.n_entities;
    const std::size_t T = opts.n_periods;
    Rng rng(derive_seed(opts.seed, 11));

    // Stationary variance of an AR(1) with MA(1) innovations.
    const double g0 = opts.sigma_e * opts.sigma_e *
                      (1.0 + opts.ma1 * opts.ma1 + 2.0 * opts.phi * opts.ma1) /
                      (1.0 - opts.phi * opts.phi);

    Eigen::VectorXd y(static_cast<Eigen::Index>(N * T));
    for (std::size_t i = 0; i < N; ++i) {
        const double c = opts.sigma_c * rng.normal();
        std::vector<double> eta(T + 1);
        for (auto& e : eta) e = rng.normal();
        double prev = c / (1.0 - opts.phi) + std::sqrt(g0) * rng.normal();
        y(static_cast<Eigen::Index>(i * T)) = prev;
        for (std::size_t t = 1; t < T; ++t) {
            const double e = opts.sigma_e * (eta[t + 1] + opts.ma1 * eta[t]);
            prev = opts.phi * prev + c + e;
            y(static_cast<Eigen::Index>(i * T + t)) = prev;
        }
    }

    std::vector<std::string> entities(N);
    for (std::size_t i = 0; i < N; ++i) entities[i] = entity_name(i, N);
    std::vector<std::pair<std::string, Eigen::VectorXd>> columns;
    columns.emplace_back("y", std::move(y));
    return Panel(std::move(entities), consecutive_years(opts.first_year, T), std::move(columns));
}

void EventDgpOptions::validate() const {
    if (n_entities < 2) throw ConfigError("simulation needs at least 2 entities");
    if (n_treated == 0 || n_treated > n_entities)
        throw ConfigError("treated count must lie in [1, n_entities]");
    if (n_periods < 3) throw ConfigError("simulation needs at least 3 periods");
    if (n_sectors < 2 || n_sectors > n_entities)
        throw ConfigError("sector count must lie in [2, n_entities]");
    if (sigma < 0 || sigma_agg < 0 || sigma_entity < 0 || sigma_year < 0)
        throw ConfigError("scale parameters must be non-negative");
    if (event_lo < 0 || event_hi >= static_cast<int>(n_periods) || event_lo > event_hi)
        throw ConfigError("event window must lie inside the panel periods");
}

SimulatedEventPanel simulate_event_panel(const EventDgpOptions& opts) {
    opts.validate();
    const std::size_t N = opts.n_entities;
    const std::size_t T = opts.n_periods;
    Rng rng(derive_seed(opts.seed, 21));

    std::vector<std::vector<double>> agg(opts.n_sectors, std::vector<double>(T));
    for (std::size_t s = 0; s < opts.n_sectors; ++s)
        for (std::size_t t = 0; t < T; ++t) agg[s][t] = opts.sigma_agg * rng.normal();
    std::vector<double> lambda(T);
    for (auto& v : lambda) v = opts.sigma_year * rng.normal();

    std::vector<std::string> entities(N);
    for (std::size_t i = 0; i < N; ++i) entities[i] = entity_name(i, N);
    const std::vector<int> years = consecutive_years(opts.first_year, T);

    std::map<std::string, int> event_years;
    Eigen::VectorXd growth(static_cast<Eigen::Index>(N * T)), aggcol(static_cast<Eigen::Index>(N * T));
    for (std::size_t i = 0; i < N; ++i) {
        const std::size_t sector = i % opts.n_sectors;
        const double c = opts.sigma_entity * rng.normal();
        int event_t = -1;
        if (i < opts.n_treated) {
            event_t = opts.event_lo +
                      static_cast<int>(rng.uniform_int(
                          static_cast<std::uint64_t>(opts.event_hi - opts.event_lo + 1)));
            event_years[entities[i]] = years[static_cast<std::size_t>(event_t)];
        }
        for (std::size_t t = 0; t < T; ++t) {
            double v = opts.beta_agg * agg[sector][t] + c + lambda[t] + opts.sigma * rng.normal();
            if (static_cast<int>(t) == event_t) v += opts.shock;
            growth(static_cast<Eigen::Index>(i * T + t)) = v;
            aggcol(static_cast<Eigen::Index>(i * T + t)) = agg[sector][t];
        }
    }
    std::vector<std::pair<std::string, Eigen::VectorXd>> columns;
    columns.emplace_back("growth", std::move(growth));
    columns.emplace_back("agg", std::move(aggcol));
    return SimulatedEventPanel{Panel(std::move(entities), years, std::move(columns)),
                               std::move(event_years), opts};
}

MCReport monte_carlo(const DGPParams& params, McPipeline pipeline, std::size_t reps) {
    params.validate();
    if (reps < 50)
        throw ConfigError("Monte Carlo needs at least 50 replications; requested " +
                          std::to_string(reps));

    MCReport rep;
    rep.pipeline = pipeline;
    rep.reps = reps;
    rep.seed = params.seed;

    const std::vector<std::string> keys =
        pipeline == McPipeline::ControlFunction
            ? std::vector<std::string>{"beta_cf", "se_cf", "wald_p", "first_stage_f", "f_p",
                                       "beta_naive", "se_naive"}
            : std::vector<std::string>{"first_stage_f", "f_p"};
    for (const auto& k : keys) rep.draws[k].assign(reps, kAbsent);

    std::string first_error;
    for (std::size_t r = 0; r < reps; ++r) {
        DGPParams pr = params;
        pr.seed = derive_seed(params.seed, 1000 + r);
        try {
            const SimulatedPanel sim = simulate_panel(pr);
            const FeatureSpec spec = sim.default_spec();
            if (pipeline == McPipeline::ControlFunction) {
                const CFIVResult cf = run_cf_iv(sim.panel, spec);
                const int j2 = cf.second_stage.coef_index(spec.endogenous);
                rep.draws["beta_cf"][r] = cf.second_stage.coef(j2);
                rep.draws["se_cf"][r] = std::sqrt(cf.second_cov.cov(j2, j2));
                rep.draws["wald_p"][r] = cf.endogeneity.p_value;
                rep.draws["first_stage_f"][r] = cf.instrument_f.statistic;
                rep.draws["f_p"][r] = cf.instrument_f.p_value;
                const NaivePoissonResult nv = run_naive_fe_poisson(sim.panel, spec);
                const int jn = nv.fit.coef_index(spec.endogenous);
                rep.draws["beta_naive"][r] = nv.fit.coef(jn);
                rep.draws["se_naive"][r] = std::sqrt(nv.cov.cov(jn, jn));
            } else {
                // First stage only: same sample construction as the full pipeline.
                std::vector<std::string> needed = {spec.outcome, spec.endogenous};
                needed.insert(needed.end(), spec.instruments.begin(), spec.instruments.end());
                needed.insert(needed.end(), spec.controls.begin(), spec.controls.end());
                Panel windowed = sim.panel.restrict_to_complete_window(needed);
                FilterResult filtered = filter_nonzero_outcome(windowed, spec.outcome);
                Panel ready = filtered.panel.add_year_dummies();
                std::vector<std::string> regs = spec.instruments;
                regs.insert(regs.end(), spec.controls.begin(), spec.controls.end());
                const auto dummies = filtered.panel.year_dummy_names();
                regs.insert(regs.end(), dummies.begin(), dummies.end());
                const FEOLSFit fit = fit_within_ols(ready, spec.endogenous, regs);
                const ClusteredCov cov = cluster_robust_cov(fit);
                const FTestResult f = instrument_f_stat(fit, cov, spec.instruments);
                rep.draws["first_stage_f"][r] = f.statistic;
                rep.draws["f_p"][r] = f.p_value;
            }
        } catch (const std::exception& e) {
            ++rep.failures;
            if (first_error.empty()) first_error = e.what();
        }
    }
    if (static_cast<double>(rep.failures) > 0.05 * static_cast<double>(reps))
        throw NumericalError("Monte Carlo failure rate " + std::to_string(rep.failures) + "/" +
                             std::to_string(reps) + " exceeds 5%; first failure: " + first_error);

    const auto mean_of = [&](const std::string& key) {
        double s = 0.0;
        std::size_t m = 0;
        for (double v : rep.draws[key])
            if (!std::isnan(v)) {
                s += v;
                ++m;
            }
        return m > 0 ? s / static_cast<double>(m) : kAbsent;
    };
    const auto rate_of = [&](const std::string& key, auto&& pred) {
        double s = 0.0;
        std::size_t m = 0;
        for (double v : rep.draws[key])
            if (!std::isnan(v)) {
                s += pred(v) ? 1.0 : 0.0;
                ++m;
            }
        return m > 0 ? s / static_cast<double>(m) : kAbsent;
    };

    rep.summary["mean_first_stage_f"] = mean_of("first_stage_f");
    rep.summary["f_rejection_rate"] = rate_of("f_p", [](double v) { return v < 0.05; });
    if (pipeline == McPipeline::ControlFunction) {
        double bias = 0.0, mse = 0.0, cov_cf = 0.0, cov_nv = 0.0, bias_nv = 0.0;
        std::size_t m = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            const double b = rep.draws["beta_cf"][r];
            if (std::isnan(b)) continue;
            ++m;
            const double d = b - params.beta1;
            bias += d;
            mse += d * d;
            cov_cf += std::abs(d) <= 1.96 * rep.draws["se_cf"][r] ? 1.0 : 0.0;
            const double dn = rep.draws["beta_naive"][r] - params.beta1;
            bias_nv += dn;
            cov_nv += std::abs(dn) <= 1.96 * rep.draws["se_naive"][r] ? 1.0 : 0.0;
        }
        const double dm = static_cast<double>(m);
        rep.summary["bias_cf"] = bias / dm;
        rep.summary["rmse_cf"] = std::sqrt(mse / dm);
        rep.summary["coverage_cf"] = cov_cf / dm;
        rep.summary["bias_naive"] = bias_nv / dm;
        rep.summary["coverage_naive"] = cov_nv / dm;
        rep.summary["rejection_rate"] =
            rate_of("wald_p", [](double v) { return v < 0.05; });
    }
    return rep;
}

}  // namespace paneliv
