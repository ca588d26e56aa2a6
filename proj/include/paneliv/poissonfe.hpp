#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "paneliv/linfe.hpp"
#include "paneliv/panel.hpp"

namespace paneliv {

// Fixed-effects Poisson fit by the conditional likelihood: entity effects are
// concentrated out, so only the within-entity share of each period's mean is
// estimated.  Equivalent to Poisson MLE with entity dummies.
struct FEPoissonFit {
    std::string outcome;
    std::vector<std::string> regressors;
    Eigen::VectorXd coef;
    Eigen::VectorXd counts;        // outcome, entity-major
    Eigen::VectorXd entity_totals; // per entity
    Eigen::VectorXd shares;        // fitted within-entity shares p_it
    Eigen::MatrixXd demeaned_x;    // n_obs x k
    Eigen::VectorXd score;         // at the optimum
    Eigen::MatrixXd hessian;       // of the conditional log-likelihood
    double loglik = 0.0;
    int iterations = 0;
    double grad_norm = 0.0;        // max-abs score at exit
    bool converged = false;
    std::size_t n_obs = 0;
    PanelShape shape;

    int coef_index(const std::string& name) const;
};

// Newton fit with step halving from a zero start.  Regressors constant
// within entities are an identification error here (unlike the linear
// estimator, there is no residual-variance reason to tolerate them).
FEPoissonFit fit_fe_poisson(const Panel& p, const std::string& outcome,
                            const std::vector<std::string>& regressors);

// Cluster-robust sandwich covariance for the Poisson fit; no finite-sample
// factor is applied (small_sample_factor reported as 1).
ClusteredCov poisson_cluster_cov(const FEPoissonFit& fit);
ClusteredCov poisson_cluster_cov(const FEPoissonFit& fit, const std::vector<int>& cluster_of_entity);

struct WaldResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// Robust Wald test of coef == h0 for one coefficient, chi-squared with 1 dof.
WaldResult wald_test(const FEPoissonFit& fit, const ClusteredCov& cov,
                     const std::string& name, double h0);

}  // namespace paneliv
