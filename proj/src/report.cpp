#include "paneliv/report.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace paneliv {

namespace {

using nlohmann::json;

json number_or_null(double v) {
    if (std::isnan(v) || std::isinf(v)) return nullptr;
    return v;
}

}  // namespace

nlohmann::json conventions_json(double alpha) {
    return json{
        {"alpha", alpha},
        {"dof", "n - k - n_entities"},
        {"cluster_small_sample_factor", "G/(G-1) * (n-1)/(n-k)"},
        {"count_model_small_sample_factor", "none"},
        {"confidence_interval", "95% normal"},
        {"event_mean", "simple average over entities at each event time"},
        {"event_variance", "sum of cell variances / n^2"},
        {"forecast_variance", "sigma2 plus optional x'Var(b)x parameter term"},
        {"survival_ties", "deaths before censorings at equal times"},
        {"survival_median", "smallest observed time with S(t) <= 0.5"},
        {"gmm_one_step_weight", "blockdiag(tridiag(2,-1), identity)"},
        {"gmm_two_step_se", "uncorrected"},
    };
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

nlohmann::json coefficient_table(const std::vector<std::string>& names,
                                 const Eigen::VectorXd& coef, const Eigen::MatrixXd& cov) {
    json rows = json::array();
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        rows.push_back(json{{"name", names[j]},
                            {"coef", number_or_null(coef(jj))},
                            {"se", number_or_null(std::sqrt(std::max(0.0, cov(jj, jj))))}});
    }
    return rows;
}

nlohmann::json to_json(const FEOLSFit& fit, const ClusteredCov& cov) {
    return json{{"dependent", fit.dependent},
                {"coefficients", coefficient_table(fit.regressors, fit.coef, cov.cov)},
                {"dropped_no_within_variation", fit.dropped},
                {"n_obs", fit.n_obs},
                {"n_entities", fit.shape.n_entities()},
                {"n_clusters", cov.n_clusters},
                {"small_sample_factor", cov.small_sample_factor},
                {"dof", fit.dof},
                {"sigma2", number_or_null(fit.sigma2)},
                {"ssr", number_or_null(fit.ssr)}};
}

nlohmann::json to_json(const FTestResult& f) {
    return json{{"statistic", number_or_null(f.statistic)},
                {"p_value", number_or_null(f.p_value)},
                {"df1", f.q},
                {"df2", f.dof2}};
}

nlohmann::json to_json(const CFIVResult& r) {
    json spec{{"outcome", r.spec.outcome},
              {"endogenous", r.spec.endogenous},
              {"instruments", r.spec.instruments},
              {"controls", r.spec.controls},
              {"year_dummies", r.spec.year_dummies}};
    return json{
        {"spec", spec},
        {"n_obs", r.n_obs},
        {"n_entities", r.n_entities},
        {"dropped_all_zero_fraction", r.dropped_fraction},
        {"first_stage", to_json(r.first_stage, r.first_cov)},
        {"instrument_f", to_json(r.instrument_f)},
        {"second_stage",
         json{{"outcome", r.second_stage.outcome},
              {"coefficients", coefficient_table(r.second_stage.regressors, r.second_stage.coef,
                                                 r.second_cov.cov)},
              {"loglik", number_or_null(r.second_stage.loglik)},
              {"iterations", r.second_stage.iterations},
              {"n_clusters", r.second_cov.n_clusters}}},
        {"endogeneity_wald",
         json{{"statistic", number_or_null(r.endogeneity.statistic)},
              {"p_value", number_or_null(r.endogeneity.p_value)},
              {"reject_at_alpha", r.endogenous_at_alpha}}},
        {"conventions", conventions_json(r.alpha)}};
}

nlohmann::json to_json(const NaivePoissonResult& r) {
    return json{{"outcome", r.fit.outcome},
                {"coefficients", coefficient_table(r.fit.regressors, r.fit.coef, r.cov.cov)},
                {"loglik", number_or_null(r.fit.loglik)},
                {"n_clusters", r.cov.n_clusters},
                {"dropped_all_zero_fraction", r.dropped_fraction}};
}

nlohmann::json to_json(const BootstrapResult& r) {
    return json{{"requested", r.requested},
                {"completed", r.completed},
                {"failures", r.failures},
                {"seed", r.seed},
                {"mean_t_first_instrument", number_or_null(r.mean_t_first)},
                {"mean_t_second_instrument", number_or_null(r.mean_t_second)},
                {"summary_t", number_or_null(r.summary_t)},
                {"mean_abs_gap", number_or_null(r.mean_abs_gap)}};
}

nlohmann::json to_json(const EventCurve& c) {
    json pts = json::array();
    for (const auto& p : c.points)
        pts.push_back(json{{"tau", p.tau},
                           {"mean", number_or_null(p.mean)},
                           {"var", number_or_null(p.var)},
                           {"n", p.n},
                           {"lo", number_or_null(p.lo)},
                           {"hi", number_or_null(p.hi)}});
    return json{{"points", pts}};
}

nlohmann::json to_json(const SurvivalCurve& c) {
    json rows = json::array();
    for (std::size_t j = 0; j < c.times.size(); ++j)
        rows.push_back(json{{"time", c.times[j]},
                            {"at_risk", c.at_risk[j]},
                            {"deaths", c.deaths[j]},
                            {"censored", c.censored[j]},
                            {"survival", c.survival[j]}});
    const auto med = median_survival(c);
    return json{{"label", c.label},
                {"n", c.n},
                {"rows", rows},
                {"median", med ? json(*med) : json(nullptr)}};
}

nlohmann::json to_json(const SurvivalComparison& c) {
    return json{{"median_a", c.median_a ? json(*c.median_a) : json(nullptr)},
                {"median_b", c.median_b ? json(*c.median_b) : json(nullptr)},
                {"median_gap", c.median_gap ? json(*c.median_gap) : json(nullptr)},
                {"dominance_fraction", c.dominance_fraction},
                {"grid_size", c.grid_size}};
}

nlohmann::json to_json(const GMMFit& fit, const HansenResult* hansen,
                       const std::vector<ARTestResult>& ar) {
    json out{{"dependent", fit.spec.dependent},
             {"step", fit.step == GmmStep::One ? "one" : "two"},
             {"coefficients", coefficient_table(fit.coef_names, fit.coef, fit.vcov)},
             {"n_entities", fit.n_entities},
             {"n_instruments", fit.n_instruments},
             {"instruments",
              json{{"collapsed", fit.instruments.collapsed},
                   {"lag_min", fit.instruments.lag_min},
                   {"lag_max", fit.instruments.lag_max},
                   {"labels", fit.instruments.labels}}}};
    if (fit.step == GmmStep::Two) out["two_step_se"] = "uncorrected";
    if (hansen != nullptr)
        out["hansen_j"] = json{{"statistic", number_or_null(hansen->j)},
                               {"df", hansen->df},
                               {"p_value", number_or_null(hansen->p_value)}};
    json art = json::array();
    for (const auto& a : ar)
        art.push_back(json{{"order", a.order},
                           {"z", number_or_null(a.z)},
                           {"p_value", number_or_null(a.p_value)}});
    out["serial_correlation"] = art;
    return out;
}

nlohmann::json to_json(const MCReport& r) {
    json summary = json::object();
    for (const auto& [k, v] : r.summary) summary[k] = number_or_null(v);
    return json{{"pipeline", r.pipeline == McPipeline::ControlFunction ? "control-function"
                                                                       : "first-stage-f"},
                {"reps", r.reps},
                {"failures", r.failures},
                {"seed", r.seed},
                {"summary", summary}};
}

void write_event_curve_csv(std::ostream& out, const EventCurve& c) {
    out << "tau,mean,var,n,lo,hi\n";
    for (const auto& p : c.points)
        out << p.tau << ',' << format_double(p.mean) << ',' << format_double(p.var) << ',' << p.n
            << ',' << format_double(p.lo) << ',' << format_double(p.hi) << '\n';
}

void write_survival_csv(std::ostream& out, const std::vector<SurvivalCurve>& curves) {
    out << "label,time,at_risk,deaths,censored,survival\n";
    for (const auto& c : curves)
        for (std::size_t j = 0; j < c.times.size(); ++j)
            out << c.label << ',' << format_double(c.times[j]) << ',' << c.at_risk[j] << ','
                << c.deaths[j] << ',' << c.censored[j] << ',' << format_double(c.survival[j])
                << '\n';
}

void write_bootstrap_csv(std::ostream& out, const BootstrapResult& r) {
    out << "rep,t_first_instrument,t_second_instrument\n";
    for (std::size_t i = 0; i < r.tstat_first.size(); ++i)
        out << i << ',' << format_double(r.tstat_first[i]) << ','
            << format_double(r.tstat_second[i]) << '\n';
}

void write_mc_draws_csv(std::ostream& out, const MCReport& r) {
    out << "rep";
    for (const auto& [k, v] : r.draws) out << ',' << k;
    out << '\n';
    for (std::size_t i = 0; i < r.reps; ++i) {
        out << i;
        for (const auto& [k, v] : r.draws) out << ',' << format_double(v[i]);
        out << '\n';
    }
}

void write_coefficients_csv(std::ostream& out, const std::vector<std::string>& names,
                            const Eigen::VectorXd& coef, const Eigen::MatrixXd& cov) {
    out << "name,coef,se\n";
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        out << names[j] << ',' << format_double(coef(jj)) << ','
            << format_double(std::sqrt(std::max(0.0, cov(jj, jj)))) << '\n';
    }
}

}  // namespace paneliv
