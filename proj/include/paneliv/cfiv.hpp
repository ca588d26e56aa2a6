#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "paneliv/linfe.hpp"
#include "paneliv/panel.hpp"
#include "paneliv/poissonfe.hpp"

namespace paneliv {

struct CFIVOptions {
    double alpha = 0.05;
    std::string residual_column = "cf_residual";
};

// Two-step estimator for a count outcome with one endogenous regressor.
// Step 1: within-OLS of the endogenous column on instruments + controls
// (+ year dummies); step 2: fixed-effects Poisson of the outcome on the
// endogenous column, controls, dummies, and the step-1 residual.  A robust
// Wald test on the residual coefficient diagnoses endogeneity.
struct CFIVResult {
    FeatureSpec spec;
    double alpha = 0.05;

    FEOLSFit first_stage;
    ClusteredCov first_cov;
    FTestResult instrument_f;

    FEPoissonFit second_stage;
    ClusteredCov second_cov;
    WaldResult endogeneity;       // H0: residual coefficient == 0
    bool endogenous_at_alpha = false;

    std::vector<std::string> year_dummies;
    double dropped_fraction = 0.0;  // entities removed by the all-zero filter
    std::size_t n_obs = 0;
    std::size_t n_entities = 0;
};

// Runs both steps on one common sample: the panel is first restricted to the
// window where every needed column is present, then entities with all-zero
// outcomes are removed, and both stages see exactly those cells.
CFIVResult run_cf_iv(const Panel& p, const FeatureSpec& spec, const CFIVOptions& opts = {});

struct NaivePoissonResult {
    FEPoissonFit fit;
    ClusteredCov cov;
    double dropped_fraction = 0.0;
};

// Same sample construction and regressors as step 2, but without the
// control-function residual: the comparison estimator that ignores
// idiosyncratic endogeneity.
NaivePoissonResult run_naive_fe_poisson(const Panel& p, const FeatureSpec& spec);

struct BootstrapResult {
    std::size_t requested = 0;
    std::size_t completed = 0;       // replications where both variants fit
    std::size_t failures = 0;
    std::uint64_t seed = 0;
    // Per replication: t-statistic of the endogeneity coefficient under each
    // single-instrument variant; NaN where the replication failed.
    std::vector<double> tstat_first;
    std::vector<double> tstat_second;
    double mean_t_first = 0.0;
    double mean_t_second = 0.0;
    double summary_t = 0.0;          // pooled mean over both variants
    double mean_abs_gap = 0.0;       // mean |t_first - t_second|
};

// Cluster (entity) bootstrap of the endogeneity t-statistic, run once per
// single-instrument variant on each resampled panel.  Requires at least two
// instruments and 100 replications; errors if more than 5% of replications
// fail to fit.
BootstrapResult bootstrap_instrument_tstat(const Panel& p, const FeatureSpec& spec,
                                           std::size_t reps, std::uint64_t seed,
                                           const CFIVOptions& opts = {});

}  // namespace paneliv
