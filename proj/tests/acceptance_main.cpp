// Acceptance gate.  Each numbered check prints exactly one PASS/FAIL line
// with the measured values and the pinned thresholds, so the whole run can
// be audited from its output alone.  Exits nonzero when any check fails.
//
// Check 5's strong-instrument half is expected to fail by construction: with
// two instruments sized so the population joint F is 15 (noncentrality 28),
// the sampling distribution of the F statistic puts only ~0.82 of its mass
// above 10, so no correct implementation can reach the demanded 95% rate.
// The check is kept faithful rather than resized; see the line it prints.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "paneliv/cfiv.hpp"
#include "paneliv/dgp.hpp"
#include "paneliv/dyngmm.hpp"
#include "paneliv/eventstudy.hpp"
#include "paneliv/linfe.hpp"
#include "paneliv/panel.hpp"
#include "paneliv/poissonfe.hpp"
#include "paneliv/rng.hpp"
#include "paneliv/survival.hpp"

namespace fs = std::filesystem;
using namespace paneliv;

namespace {

int g_failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int number, bool ok, const std::string& text, double elapsed, double budget) {
    const bool in_budget = elapsed < budget;
    if (!ok || !in_budget) ++g_failures;
    std::printf("%s  %d  %s  [%.2f s / limit %.0f s]\n", (ok && in_budget) ? "PASS" : "FAIL",
                number, text.c_str(), elapsed, budget);
    std::fflush(stdout);
}

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof buf, pattern, args);
    va_end(args);
    return buf;
}

// --- 1: within OLS against the entity-dummy OLS oracle ----------------------

void check_within_ols() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(20240801);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n_entities = 3 + rng.uniform_int(6);  // 3..8
        const std::size_t n_times = 3 + rng.uniform_int(4);     // 3..6
        const std::size_t k = 1 + rng.uniform_int(4);           // 1..4
        const testing::RandomPanel rp =
            testing::random_linear_panel(rng, n_entities, n_times, k);
        const FEOLSFit fit = fit_within_ols(rp.panel, "y", rp.regressors);
        const oracle::DummyOLS ref = oracle::dummy_ols(rp.x, rp.y, n_entities, n_times);
        worst = std::max(worst, (fit.coef - ref.slopes).cwiseAbs().maxCoeff());
    }
    report(1, worst <= 1e-8,
           fmt("within OLS matches the entity-dummy OLS oracle on 100 random panels: "
               "max |coef diff| %.2e (limit 1e-8)",
               worst),
           seconds_since(t0), 5.0);
}

// --- 2: conditional Poisson against the entity-dummy Poisson MLE oracle -----

void check_fe_poisson() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(20240802);
    double worst = 0.0, worst_score = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n_entities = 3 + rng.uniform_int(6);
        const std::size_t n_times = 3 + rng.uniform_int(4);
        const std::size_t k = 1 + rng.uniform_int(4);
        const testing::RandomPanel rp =
            testing::random_count_panel(rng, n_entities, n_times, k);
        const FEPoissonFit fit = fit_fe_poisson(rp.panel, "n", rp.regressors);
        const oracle::DummyPoisson ref = oracle::dummy_poisson(rp.x, rp.y, n_entities, n_times);
        worst = std::max(worst, (fit.coef - ref.slopes).cwiseAbs().maxCoeff());
        worst_score = std::max(worst_score, fit.score.cwiseAbs().maxCoeff());
    }
    report(2, worst <= 1e-6 && worst_score <= 1e-8,
           fmt("conditional Poisson matches the entity-dummy MLE oracle on 100 random panels: "
               "max |coef diff| %.2e (limit 1e-6), max score norm %.2e (limit 1e-8)",
               worst, worst_score),
           seconds_since(t0), 30.0);
}

// --- 3: endogeneity Wald size under exogeneity ------------------------------

void check_wald_size() {
    const auto t0 = std::chrono::steady_clock::now();
    DGPParams params;
    params.n_entities = 200;
    params.n_periods = 8;
    params.endo_corr = 0.0;
    params.seed = 501;
    const MCReport mc = monte_carlo(params, McPipeline::ControlFunction, 500);
    const double rate = mc.summary.at("rejection_rate");
    report(3, rate >= 0.03 && rate <= 0.07,
           fmt("endogeneity Wald size at alpha 0.05 with zero true correlation, 500 reps: "
               "rejection %.3f (limits [0.03, 0.07])",
               rate),
           seconds_since(t0), 180.0);
}

// --- 4: power and the bias contrast with the uncontrolled estimator ---------

void check_power_and_coverage() {
    const auto t0 = std::chrono::steady_clock::now();
    DGPParams params;
    params.n_entities = 200;
    params.n_periods = 8;
    params.endo_corr = 0.7;
    params.beta1 = 0.6;
    params.seed = 502;
    const MCReport mc = monte_carlo(params, McPipeline::ControlFunction, 500);
    const double rej = mc.summary.at("rejection_rate");
    const double cov_cf = mc.summary.at("coverage_cf");
    const double cov_naive = mc.summary.at("coverage_naive");
    report(4, rej >= 0.90 && cov_cf >= 0.88 && cov_naive <= 0.50,
           fmt("power and bias contrast at corr 0.7, 500 reps: Wald rejection %.3f (>= 0.90), "
               "control-function coverage %.3f (>= 0.88), uncontrolled coverage %.3f (<= 0.50)",
               rej, cov_cf, cov_naive),
           seconds_since(t0), 300.0);
}

// --- 5: first-stage F calibration -------------------------------------------

void check_first_stage_f() {
    const auto t0 = std::chrono::steady_clock::now();
    DGPParams zero;
    zero.n_entities = 200;
    zero.n_periods = 8;
    zero.pi1 = 0.0;
    zero.pi2 = 0.0;
    zero.seed = 505;
    const MCReport mc0 = monte_carlo(zero, McPipeline::FirstStageF, 500);
    const double size = mc0.summary.at("f_rejection_rate");

    // Loadings scaled so the population joint F statistic is ~15
    // (noncentrality ~28 with two instruments); the mean simulated F
    // lands at 15 as intended.
    DGPParams strong = zero;
    strong.pi1 = -0.0075462;
    strong.pi2 = -0.0071195;
    strong.seed = 506;
    const MCReport mc1 = monte_carlo(strong, McPipeline::FirstStageF, 500);
    const std::vector<double>& fs = mc1.draws.at("first_stage_f");
    double mean_f = 0.0;
    std::size_t above = 0, n = 0;
    for (double f : fs) {
        if (!std::isfinite(f)) continue;
        mean_f += f;
        ++n;
        if (f > 10.0) ++above;
    }
    mean_f /= static_cast<double>(n);
    const double frac = static_cast<double>(above) / static_cast<double>(n);
    report(5, size >= 0.03 && size <= 0.07 && frac >= 0.95,
           fmt("first-stage F calibration: zero-loading rejection %.3f (limits [0.03, 0.07]); "
               "population-F-15 loadings (mean simulated F %.1f): share with F > 10 = %.3f "
               "(demanded >= 0.95; the noncentral-F ceiling at this strength is ~0.82, "
               "so this half cannot pass without overshooting the stated instrument strength)",
               size, mean_f, frac),
           seconds_since(t0), 120.0);
}

// --- 6: planted shock recovered by the abnormal-value pipeline --------------

void check_event_study() {
    const auto t0 = std::chrono::steady_clock::now();
    double sum_av0 = 0.0;
    int n_sims = 0, ci0_excludes = 0;
    long far_cells = 0, far_include = 0;
    for (int rep = 0; rep < 200; ++rep) {
        EventDgpOptions opts;  // 300 entities, 50 treated, shock -20
        opts.seed = 40000 + static_cast<std::uint64_t>(rep);
        const SimulatedEventPanel sim = simulate_event_panel(opts);
        const PotentialFit fit = fit_potential(sim.panel, "growth", "agg", {});
        const EventPanel ev = recenter_event_time(abnormal_values(fit), sim.event_years);
        const EventCurve curve = aggregate_av(ev);
        const EventCurvePoint* at0 = curve.at(0);
        sum_av0 += at0->mean;
        ++n_sims;
        if (at0->lo > 0.0 || at0->hi < 0.0) ++ci0_excludes;
        for (const auto& pt : curve.points) {
            if (std::abs(pt.tau) < 2) continue;
            ++far_cells;
            if (pt.lo <= 0.0 && pt.hi >= 0.0) ++far_include;
        }
    }
    const double mean_av0 = sum_av0 / n_sims;
    const double excl = static_cast<double>(ci0_excludes) / n_sims;
    const double incl = static_cast<double>(far_include) / static_cast<double>(far_cells);
    report(6, std::abs(mean_av0 + 20.0) <= 3.0 && excl >= 0.95 && incl >= 0.90,
           fmt("planted -20 shock, 50 treated, 200 sims: mean abnormal value at event time "
               "%.2f (within -20 +/- 3), interval excludes 0 at event time in %.3f (>= 0.95), "
               "includes 0 at |offset| >= 2 in %.3f (>= 0.90)",
               mean_av0, excl, incl),
           seconds_since(t0), 300.0);
}

// --- 7: survival estimator fixtures and properties --------------------------

void check_survival() {
    const auto t0 = std::chrono::steady_clock::now();
    const SurvivalCurve fixture = kaplan_meier({1.0, 2.0, 3.0}, {1, 1, 1});
    const bool fixture_ok = fixture.survival.size() == 3 &&
                            std::abs(fixture.survival[0] - 2.0 / 3.0) < 1e-15 &&
                            std::abs(fixture.survival[1] - 1.0 / 3.0) < 1e-15 &&
                            fixture.survival[2] == 0.0;

    Rng rng(20240807);
    const auto exponential = [&rng](double rate) {
        double u = rng.uniform();
        while (u == 0.0) u = rng.uniform();
        return -std::log(1.0 - u) / rate;
    };
    const double rate = 0.35;
    std::vector<double> durations(2000);
    std::vector<int> died(2000, 1);
    for (auto& d : durations) d = exponential(rate);
    const double med = median_survival(kaplan_meier(durations, died)).value_or(-1.0);
    const double target = std::log(2.0) / rate;
    const bool median_ok = std::abs(med - target) / target <= 0.10;

    std::vector<double> slow(1500), fast(1500);
    std::vector<int> all_died(1500, 1);
    for (auto& d : slow) d = exponential(0.25);
    for (auto& d : fast) d = exponential(0.50);
    // dominance_fraction counts grid times where the first curve sits below
    // the second, so the faster-dying group goes first.
    const SurvivalComparison cmp = compare_groups(kaplan_meier(fast, all_died, "fast"),
                                                  kaplan_meier(slow, all_died, "slow"));
    const bool dominance_ok = cmp.dominance_fraction >= 0.95;

    report(7, fixture_ok && median_ok && dominance_ok,
           fmt("survival estimator: fixture survival (2/3, 1/3, 0) %s; exponential median "
               "%.3f vs ln2/rate %.3f (within 10%%); ordered-group dominance %.3f (>= 0.95)",
               fixture_ok ? "exact" : "WRONG", med, target, cmp.dominance_fraction),
           seconds_since(t0), 30.0);
}

// --- 8: dynamic-panel estimator calibration ---------------------------------

void check_dynamic_gmm() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> phis, ps;
    int ar1_rej = 0, ar2_rej = 0;
    const int reps = 200;
    for (int rep = 0; rep < reps; ++rep) {
        Ar1Options opts;
        opts.n_entities = 200;
        opts.n_periods = 6;
        opts.phi = 0.5;
        opts.seed = 9000 + static_cast<std::uint64_t>(rep);
        const Panel panel = simulate_ar1_panel(opts);
        GmmSpec spec;
        spec.dependent = "y";
        const GMMFit fit = fit_system_gmm(panel, spec, GmmStep::Two);
        phis.push_back(fit.coef[0]);
        ps.push_back(hansen_j(fit).p_value);
        if (ar_test(fit, 1).p_value < 0.05) ++ar1_rej;
        if (ar_test(fit, 2).p_value < 0.05) ++ar2_rej;
    }
    std::sort(phis.begin(), phis.end());
    std::sort(ps.begin(), ps.end());
    const double median_phi = 0.5 * (phis[99] + phis[100]);
    double ks = 0.0;
    for (int i = 0; i < reps; ++i) {
        ks = std::max(ks, std::abs((i + 1.0) / reps - ps[static_cast<std::size_t>(i)]));
        ks = std::max(ks, std::abs(ps[static_cast<std::size_t>(i)] - static_cast<double>(i) / reps));
    }
    const double r1 = ar1_rej / static_cast<double>(reps);
    const double r2 = ar2_rej / static_cast<double>(reps);
    report(8,
           median_phi >= 0.4 && median_phi <= 0.6 && ks <= 0.1 && r1 >= 0.90 && r2 >= 0.02 &&
               r2 <= 0.08,
           fmt("dynamic-panel estimator, true coefficient 0.5, 200 reps: median estimate %.3f "
               "(in [0.4, 0.6]); overidentification p-values KS %.3f (<= 0.1); first-order "
               "serial-correlation rejection %.3f (>= 0.90); second-order %.3f (in [0.02, 0.08])",
               median_phi, ks, r1, r2),
           seconds_since(t0), 300.0);
}

// --- 9: byte-identical artifacts from repeated CLI runs ---------------------

struct CliRun {
    int exit_code = 0;
    fs::path dir;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CliRun run_cli(const fs::path& root, const std::string& name, const std::string& args) {
    CliRun r;
    r.dir = root / name;
    const std::string cmd = std::string(PANELIV_CLI_PATH) + " " + args + " --out " +
                            r.dir.string() + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

void check_determinism() {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path root = fs::temp_directory_path() / "paneliv_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);

    // Inputs shared by the repeated runs.
    {
        Ar1Options opts;
        opts.n_entities = 60;
        opts.seed = 31;
        std::ofstream out(root / "ar1.csv", std::ios::binary);
        simulate_ar1_panel(opts).write_csv(out);

        EventDgpOptions ev;
        ev.n_entities = 60;
        ev.n_treated = 15;
        ev.n_periods = 16;
        ev.event_lo = 4;
        ev.event_hi = 12;
        ev.seed = 32;
        const SimulatedEventPanel sim = simulate_event_panel(ev);
        std::ofstream panel_out(root / "event_panel.csv", std::ios::binary);
        sim.panel.write_csv(panel_out);
        std::ofstream events_out(root / "events.csv", std::ios::binary);
        events_out << "entity,year\n";
        for (const auto& [entity, year] : sim.event_years)
            events_out << entity << "," << year << "\n";

        std::ofstream durations(root / "durations.csv", std::ios::binary);
        durations << "duration,event,group\n";
        Rng rng(33);
        for (int i = 0; i < 60; ++i) {
            const bool fast = i % 2 == 0;
            durations << -std::log(1.0 - rng.uniform()) / (fast ? 0.5 : 0.25) << ","
                      << (i % 7 == 0 ? 0 : 1) << "," << (fast ? "fast" : "slow") << "\n";
        }
    }

    const std::string panel_csv = (root / "sim_a" / "panel.csv").string();
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"sim", "simulate --entities 50 --periods 8 --endo-corr 0.5 --seed 77"},
        {"fs", "first-stage --input " + panel_csv},
        {"cf", "cf-poisson --input " + panel_csv + " --bootstrap-reps 100 --seed 5"},
        {"ev", "event-study --input " + (root / "event_panel.csv").string() + " --events " +
                   (root / "events.csv").string()},
        {"surv", "survival --input " + (root / "durations.csv").string()},
        {"gmm", "gmm --input " + (root / "ar1.csv").string() + " --dependent y"},
        {"mc", "monte-carlo --reps 60 --pipeline first-stage-f --entities 60 --periods 6 "
               "--seed 13"},
    };

    bool ok = true;
    std::string detail;
    for (const auto& [name, args] : commands) {
        const CliRun a = run_cli(root, name + "_a", args);
        const CliRun b = run_cli(root, name + "_b", args);
        if (a.exit_code != 0 || b.exit_code != 0) {
            ok = false;
            detail += " " + name + ":exit";
            continue;
        }
        for (const auto& entry : fs::directory_iterator(a.dir)) {
            const std::string file = entry.path().filename().string();
            if (slurp(a.dir / file) != slurp(b.dir / file)) {
                ok = false;
                detail += " " + name + ":" + file;
            }
        }
    }
    report(9, ok,
           fmt("repeated runs of all 7 subcommands produce byte-identical artifacts%s",
               ok ? "" : ("; mismatches:" + detail).c_str()),
           seconds_since(t0), 120.0);
    fs::remove_all(root);
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    check_within_ols();
    check_fe_poisson();
    check_wald_size();
    check_power_and_coverage();
    check_first_stage_f();
    check_event_study();
    check_survival();
    check_dynamic_gmm();
    check_determinism();
    const double total = seconds_since(t0);
    std::printf("%s: %d of 9 checks failed, total %.1f s (limit 900 s)\n",
                g_failures == 0 ? "ALL PASS" : "FAILURES", g_failures, total);
    if (total >= 900.0) ++g_failures;
    return g_failures == 0 ? 0 : 1;
}
