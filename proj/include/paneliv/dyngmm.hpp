#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "paneliv/linfe.hpp"
#include "paneliv/panel.hpp"

namespace paneliv {

// System GMM for y_it = phi * y_i,t-1 + x_it'b (+ const) + entity effect + e_it.
// Stacks the first-differenced equation (instrumented by lagged levels) with
// the levels equation (instrumented by lagged first differences).
struct GmmSpec {
    std::string dependent;
    std::vector<std::string> exog;  // strictly exogenous regressors, instrument themselves
    int lag_min = 2;
    int lag_max = 0;                // 0: use the deepest available lag, T-1
    enum class Collapse { Auto, On, Off };
    Collapse collapse = Collapse::Auto;  // Auto collapses when columns would exceed entities
    bool intercept = true;               // levels-equation constant
};

// Per-entity instrument matrices plus layout bookkeeping.  Row order within
// an entity: difference equations for periods 3..T, then levels equations
// for periods 2..T.
struct InstrumentBlocks {
    bool collapsed = false;
    int lag_min = 2;
    int lag_max = 0;
    std::size_t n_diff_rows = 0;
    std::size_t n_level_rows = 0;
    std::size_t n_gmm_diff = 0;   // lagged-level columns for the difference equation
    std::size_t n_gmm_level = 0;  // lagged-difference columns for the levels equation
    std::size_t n_exog = 0;       // exogenous + intercept columns
    std::vector<std::string> labels;
    std::vector<Eigen::MatrixXd> z;  // per entity, (n_diff_rows + n_level_rows) x m

    std::size_t n_instruments() const { return labels.size(); }
};

InstrumentBlocks build_gmm_instruments(const Panel& p, const GmmSpec& spec);

enum class GmmStep { One, Two };

struct GMMFit {
    GmmSpec spec;
    GmmStep step = GmmStep::One;
    std::vector<std::string> coef_names;  // lagged dependent, exog..., const
    Eigen::VectorXd coef;
    Eigen::MatrixXd vcov;  // clustered by entity; two-step reported without
                           // a finite-sample correction
    InstrumentBlocks instruments;
    std::size_t n_entities = 0;
    int n_instruments = 0;
    int n_params = 0;

    // Internals reused by the overidentification and serial-correlation
    // tests; all evaluated at this fit's coefficients unless noted.
    std::vector<Eigen::MatrixXd> x_diff;      // difference-equation regressor rows
    std::vector<Eigen::VectorXd> resid_diff;  // difference-equation residuals
    std::vector<Eigen::VectorXd> resid_full;  // stacked residuals, diff then levels
    Eigen::MatrixXd projection;               // (G'WG)^-1 G'W, moment noise -> coef noise
    Eigen::VectorXd j_moment;                 // moment sum at the two-step coefficients
    Eigen::MatrixXd j_weight;                 // inverse one-step moment covariance
    bool j_available = false;
    std::string j_unavailable_reason;

    int coef_index(const std::string& name) const;
};

// Fits the system estimator.  The two-step weighting (and hence the inputs
// of the Hansen test) is computed for either step; `step` selects which
// coefficients and covariance the fit reports.
GMMFit fit_system_gmm(const Panel& p, const GmmSpec& spec, GmmStep step = GmmStep::One);
GMMFit fit_system_gmm(const Panel& p, const GmmSpec& spec, const InstrumentBlocks& blocks,
                      GmmStep step);

struct HansenResult {
    double j = 0.0;
    int df = 0;
    double p_value = 1.0;
};

// Hansen J overidentification test from the stored two-step inputs.
HansenResult hansen_j(const GMMFit& fit);

struct ARTestResult {
    int order = 0;
    double z = 0.0;
    double p_value = 1.0;
};

// Arellano-Bond test for order-m serial correlation in the differenced
// residuals, with the full three-term variance (noise, coefficient
// feedback, and coefficient variance).
ARTestResult ar_test(const GMMFit& fit, int order);

}  // namespace paneliv
