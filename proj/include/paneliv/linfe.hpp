#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "paneliv/panel.hpp"

namespace paneliv {

// Shape of the estimation sample, carried by fits so covariance and test
// helpers can recover entity blocks and cluster assignments.
struct PanelShape {
    std::vector<std::string> entities;
    std::vector<int> times;
    std::vector<int> cluster_of_entity;

    std::size_t n_entities() const { return entities.size(); }
    std::size_t n_times() const { return times.size(); }
};

// Within (entity-demeaned) least-squares fit.
struct FEOLSFit {
    std::string dependent;
    std::vector<std::string> regressors;  // surviving columns, fit order
    std::vector<std::string> dropped;     // no within-entity variation
    Eigen::VectorXd coef;
    Eigen::VectorXd residuals;            // entity-major, length n_obs
    Eigen::MatrixXd demeaned_x;           // n_obs x k
    Eigen::VectorXd demeaned_y;
    Eigen::MatrixXd xtx_inverse;          // (X'X)^-1 of demeaned regressors
    Eigen::VectorXd entity_means_y;       // per entity
    Eigen::MatrixXd entity_means_x;       // n_entities x k
    double ssr = 0.0;
    double sigma2 = 0.0;                  // ssr / dof
    long dof = 0;                         // n_obs - k - n_entities
    std::size_t n_obs = 0;
    PanelShape shape;

    // Index of a regressor in `coef`, or -1 if absent (unknown or dropped).
    int coef_index(const std::string& name) const;
};

// Fits dependent ~ regressors with entity fixed effects on a balanced panel.
// Columns with no within-entity variation are dropped (recorded in
// `dropped`); genuine collinearity among the survivors is an error.
FEOLSFit fit_within_ols(const Panel& p, const std::string& dependent,
                        const std::vector<std::string>& regressors);

struct ClusteredCov {
    Eigen::MatrixXd cov;
    int n_clusters = 0;
    double small_sample_factor = 1.0;

    Eigen::VectorXd se() const;
};

// Cluster-robust sandwich covariance with the G/(G-1) * (n-1)/(n-k)
// finite-sample factor.  Clusters default to the fit's entity clustering.
ClusteredCov cluster_robust_cov(const FEOLSFit& fit);
ClusteredCov cluster_robust_cov(const FEOLSFit& fit, const std::vector<int>& cluster_of_entity);

struct FTestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int q = 0;     // restrictions tested
    int dof2 = 0;  // denominator dof, clusters - 1
};

// Wald-form F test that the named coefficients are jointly zero, using the
// supplied clustered covariance.  Degrees of freedom (q, clusters - 1).
FTestResult instrument_f_stat(const FEOLSFit& fit, const ClusteredCov& cov,
                              const std::vector<std::string>& instruments);

}  // namespace paneliv
