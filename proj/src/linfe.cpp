#include "paneliv/linfe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "paneliv/errors.hpp"
#include "paneliv/stats.hpp"

namespace paneliv {

namespace {

// Collects a column from the panel, rejecting absent cells.
Eigen::VectorXd dense_column(const Panel& p, const std::string& name) {
    const Eigen::VectorXd& col = p.column(name);
    for (std::size_t i = 0; i < p.n_entities(); ++i)
        for (std::size_t t = 0; t < p.n_times(); ++t) {
            const double v = col(static_cast<Eigen::Index>(p.cell(i, t)));
            if (Panel::is_absent(v))
                throw DataError("column '" + name + "' absent at (" + p.entities()[i] + ", " +
                                std::to_string(p.times()[t]) + "); restrict the window first");
        }
    return col;
}

std::vector<int> expand_clusters(const PanelShape& shape, const std::vector<int>& cluster_of_entity) {
    if (cluster_of_entity.size() != shape.n_entities())
        throw ConfigError("cluster assignment size does not match entity count");
    for (int c : cluster_of_entity)
        if (c < 0) throw ConfigError("cluster ids must be non-negative");
    return cluster_of_entity;
}

}  // namespace

int FEOLSFit::coef_index(const std::string& name) const {
    for (std::size_t j = 0; j < regressors.size(); ++j)
        if (regressors[j] == name) return static_cast<int>(j);
    return -1;
}

FEOLSFit fit_within_ols(const Panel& p, const std::string& dependent,
                        const std::vector<std::string>& regressors) {
    {
        std::set<std::string> seen;
        for (const auto& r : regressors)
            if (!seen.insert(r).second)
                throw ConfigError("regressor '" + r + "' listed twice");
        if (seen.count(dependent))
            throw ConfigError("dependent column '" + dependent + "' also listed as a regressor");
    }
    if (p.n_times() < 2)
        throw DataError("within estimator needs at least 2 periods per entity");

    const std::size_t N = p.n_entities();
    const std::size_t T = p.n_times();
    const std::size_t n = N * T;

    const Eigen::VectorXd y = dense_column(p, dependent);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(regressors.size()));
    for (std::size_t j = 0; j < regressors.size(); ++j)
        x.col(static_cast<Eigen::Index>(j)) = dense_column(p, regressors[j]);

    const DemeanResult dy = within_demean(y, N, T);
    const DemeanResult dx = within_demean(x, N, T);

    // Drop columns with no within-entity variation; they are absorbed by the
    // fixed effects and carry no identifying variation.
    std::vector<std::size_t> kept;
    std::vector<std::string> dropped;
    for (std::size_t j = 0; j < regressors.size(); ++j) {
        const auto col = dx.demeaned.col(static_cast<Eigen::Index>(j));
        const double scale = std::max(1.0, x.col(static_cast<Eigen::Index>(j)).norm());
        if (col.norm() <= 1e-10 * scale) dropped.push_back(regressors[j]);
        else kept.push_back(j);
    }

    FEOLSFit fit;
    fit.dependent = dependent;
    fit.dropped = std::move(dropped);
    fit.n_obs = n;
    fit.shape = PanelShape{p.entities(), p.times(), p.cluster_of_entity()};
    fit.demeaned_y = dy.demeaned.col(0);
    fit.entity_means_y = dy.entity_means.col(0);

    const auto k = static_cast<Eigen::Index>(kept.size());
    fit.demeaned_x.resize(static_cast<Eigen::Index>(n), k);
    fit.entity_means_x.resize(static_cast<Eigen::Index>(N), k);
    for (Eigen::Index j = 0; j < k; ++j) {
        fit.regressors.push_back(regressors[kept[static_cast<std::size_t>(j)]]);
        fit.demeaned_x.col(j) = dx.demeaned.col(static_cast<Eigen::Index>(kept[static_cast<std::size_t>(j)]));
        fit.entity_means_x.col(j) = dx.entity_means.col(static_cast<Eigen::Index>(kept[static_cast<std::size_t>(j)]));
    }

    fit.dof = static_cast<long>(n) - static_cast<long>(kept.size()) - static_cast<long>(N);
    if (fit.dof <= 0)
        throw DataError("insufficient degrees of freedom: n=" + std::to_string(n) + ", k=" +
                        std::to_string(kept.size()) + ", entities=" + std::to_string(N));

    if (k == 0) {
        fit.coef.resize(0);
        fit.xtx_inverse.resize(0, 0);
        fit.residuals = fit.demeaned_y;
    } else {
        const Eigen::MatrixXd xtx = fit.demeaned_x.transpose() * fit.demeaned_x;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xtx);
        qr.setThreshold(1e-10);
        if (qr.rank() < k) {
            // The rejected pivots name a set of columns involved in the
            // dependency; dropping any one of them restores full rank.
            const auto& perm = qr.colsPermutation().indices();
            std::string cols;
            for (Eigen::Index j = qr.rank(); j < k; ++j) {
                if (!cols.empty()) cols += ", ";
                cols += fit.regressors[static_cast<std::size_t>(perm(j))];
            }
            throw DataError("collinear regressors after demeaning: {" + cols +
                            "}; drop one of these columns");
        }
        fit.coef = qr.solve(fit.demeaned_x.transpose() * fit.demeaned_y);
        fit.xtx_inverse = qr.solve(Eigen::MatrixXd::Identity(k, k));
        fit.residuals = fit.demeaned_y - fit.demeaned_x * fit.coef;
    }

    fit.ssr = fit.residuals.squaredNorm();
    fit.sigma2 = fit.ssr / static_cast<double>(fit.dof);
    return fit;
}

Eigen::VectorXd ClusteredCov::se() const {
    Eigen::VectorXd out(cov.rows());
    for (Eigen::Index j = 0; j < cov.rows(); ++j) out(j) = std::sqrt(std::max(0.0, cov(j, j)));
    return out;
}

ClusteredCov cluster_robust_cov(const FEOLSFit& fit) {
    return cluster_robust_cov(fit, fit.shape.cluster_of_entity);
}

ClusteredCov cluster_robust_cov(const FEOLSFit& fit, const std::vector<int>& cluster_of_entity) {
    const std::vector<int> clusters = expand_clusters(fit.shape, cluster_of_entity);
    const auto k = fit.demeaned_x.cols();
    const auto T = static_cast<Eigen::Index>(fit.shape.n_times());

    std::set<int> ids(clusters.begin(), clusters.end());
    const int G = static_cast<int>(ids.size());
    if (G < 2) throw DataError("clustered covariance needs at least 2 clusters");

    std::map<int, Eigen::VectorXd> score_sum;
    for (int g : ids) score_sum.emplace(g, Eigen::VectorXd::Zero(k));
    for (std::size_t i = 0; i < fit.shape.n_entities(); ++i) {
        const auto r0 = static_cast<Eigen::Index>(i) * T;
        score_sum[clusters[i]] += fit.demeaned_x.middleRows(r0, T).transpose() *
                                  fit.residuals.segment(r0, T);
    }
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (const auto& [g, s] : score_sum) meat += s * s.transpose();

    const double n = static_cast<double>(fit.n_obs);
    const double kk = static_cast<double>(k);
    ClusteredCov out;
    out.n_clusters = G;
    out.small_sample_factor =
        static_cast<double>(G) / (G - 1.0) * (n - 1.0) / (n - kk);
    out.cov = out.small_sample_factor * fit.xtx_inverse * meat * fit.xtx_inverse;
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
    return out;
}

FTestResult instrument_f_stat(const FEOLSFit& fit, const ClusteredCov& cov,
                              const std::vector<std::string>& instruments) {
    if (instruments.empty()) throw ConfigError("instrument F test: empty instrument list");
    std::vector<int> idx;
    for (const auto& name : instruments) {
        const int j = fit.coef_index(name);
        if (j < 0)
            throw ConfigError("instrument '" + name + "' is not among the fitted regressors");
        idx.push_back(j);
    }
    const auto q = static_cast<Eigen::Index>(idx.size());
    Eigen::VectorXd b(q);
    Eigen::MatrixXd v(q, q);
    for (Eigen::Index a = 0; a < q; ++a) {
        b(a) = fit.coef(idx[static_cast<std::size_t>(a)]);
        for (Eigen::Index c = 0; c < q; ++c)
            v(a, c) = cov.cov(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(c)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(v);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible())
        throw NumericalError("singular covariance of the tested coefficients");
    FTestResult res;
    res.q = static_cast<int>(q);
    res.dof2 = cov.n_clusters - 1;
    if (res.dof2 <= 0) throw DataError("instrument F test needs at least 2 clusters");
    res.statistic = b.dot(lu.solve(b)) / static_cast<double>(q);
    res.p_value = f_sf(res.statistic, static_cast<double>(q), static_cast<double>(res.dof2));
    return res;
}

}  // namespace paneliv
