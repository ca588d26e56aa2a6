#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "paneliv/panel.hpp"

namespace paneliv {

// Synthetic recall-and-trials panel.  Per entity-year: a product roster
// evolves by random entry/exit, recalls arrive in proportion to roster size,
// log market size responds to normalized recalls (current and lagged) plus an
// idiosyncratic shock u, and the trial count is Poisson with mean
// c_i * exp(beta1 * log_market + controls + year effect + kappa).
// corr(kappa, u) = endo_corr induces idiosyncratic endogeneity;
// hetero_corr ties the entity effect to the entity's mean instrument level
// (the case fixed effects absorb).
struct DGPParams {
    std::size_t n_entities = 200;
    std::size_t n_periods = 8;
    double beta1 = 0.6;            // elasticity on log market size
    double pi1 = -0.0283;          // first-stage loading, current recalls
    double pi2 = -0.0267;          // first-stage loading, lagged recalls
    double endo_corr = 0.0;        // corr(kappa, u) in [-1, 1]
    double sigma_kappa = 0.25;
    double sigma_u = 0.25;
    double sigma_c = 0.4;          // sd of the log entity effect (outcome)
    double sigma_c2 = 0.5;         // sd of the entity effect (market equation)
    double hetero_corr = 0.0;      // corr(log entity effect, mean instruments)
    double base_market = 4.0;
    double control_coef = 0.2;     // outcome loading per control
    double control_loading_market = 0.3;
    int n_controls = 1;
    double year_effect_scale = 0.1;
    double recall_intensity = 0.6; // mean recalls at the base roster size
    std::uint64_t seed = 12345;

    void validate() const;
};

struct SimulatedPanel {
    Panel panel;
    // roster[i][t] = product ids on entity i's roster in period t.
    std::vector<std::vector<std::vector<int>>> rosters;
    DGPParams params;

    FeatureSpec default_spec() const;
};

SimulatedPanel simulate_panel(const DGPParams& params);

// AR(1) panel with entity effects for the dynamic estimator:
// y_it = phi y_i,t-1 + c_i + e_it, initialized at the stationary mean so the
// lagged-difference instruments of the levels equation are valid.
// ma1 adds a first-order moving-average component to e, which induces
// second-order serial correlation in the differenced residuals.
struct Ar1Options {
    std::size_t n_entities = 200;
    std::size_t n_periods = 6;
    double phi = 0.5;
    double sigma_c = 1.0;
    double sigma_e = 1.0;
    double ma1 = 0.0;
    int first_year = 2001;
    std::uint64_t seed = 1;

    void validate() const;
};

Panel simulate_ar1_panel(const Ar1Options& opts);

// Panel for the abnormal-value pipeline: an outcome driven by a sector
// aggregate, entity and year effects, and a one-period shock at each treated
// entity's event year.
struct EventDgpOptions {
    std::size_t n_entities = 300;
    std::size_t n_treated = 50;
    std::size_t n_periods = 31;
    std::size_t n_sectors = 5;
    double shock = -20.0;
    double sigma = 10.0;        // idiosyncratic sd, percentage points
    double beta_agg = 0.8;
    double sigma_agg = 3.0;
    double sigma_entity = 5.0;
    double sigma_year = 2.0;
    int event_lo = 5;           // earliest eligible event period (time index)
    int event_hi = 25;
    int first_year = 1990;
    std::uint64_t seed = 7;

    void validate() const;
};

struct SimulatedEventPanel {
    Panel panel;  // columns: growth, agg
    std::map<std::string, int> event_years;
    EventDgpOptions opts;
};

SimulatedEventPanel simulate_event_panel(const EventDgpOptions& opts);

enum class McPipeline { ControlFunction, FirstStageF };

struct MCReport {
    McPipeline pipeline = McPipeline::ControlFunction;
    std::size_t reps = 0;
    std::size_t failures = 0;
    std::uint64_t seed = 0;
    // Per-replication statistics, NaN where a replication failed.
    std::map<std::string, std::vector<double>> draws;
    std::map<std::string, double> summary;
};

// Simulate-and-estimate loop.  ControlFunction runs the two-step pipeline
// plus the comparison estimator without the control-function residual;
// FirstStageF runs only the within first stage and its instrument F test.
MCReport monte_carlo(const DGPParams& params, McPipeline pipeline, std::size_t reps);

}  // namespace paneliv
