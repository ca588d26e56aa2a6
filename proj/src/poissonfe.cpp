#include "paneliv/poissonfe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "paneliv/errors.hpp"
#include "paneliv/stats.hpp"

namespace paneliv {

namespace {

constexpr double kGradTol = 1e-8;
constexpr double kStepTol = 1e-10;
constexpr int kMaxIter = 100;

struct Likelihood {
    double loglik;
    Eigen::VectorXd score;
    Eigen::MatrixXd hessian;
    Eigen::VectorXd shares;
};

// Conditional Poisson log-likelihood and derivatives at beta.
Likelihood evaluate(const Eigen::MatrixXd& x, const Eigen::VectorXd& counts,
                    const Eigen::VectorXd& entity_totals, std::size_t n_entities,
                    std::size_t n_times, const Eigen::VectorXd& beta, bool with_hessian) {
    const auto k = x.cols();
    const auto T = static_cast<Eigen::Index>(n_times);
    Likelihood out;
    out.loglik = 0.0;
    out.score = Eigen::VectorXd::Zero(k);
    out.hessian = Eigen::MatrixXd::Zero(k, k);
    out.shares.resize(x.rows());
    const Eigen::VectorXd eta = x * beta;
    for (std::size_t i = 0; i < n_entities; ++i) {
        const auto r0 = static_cast<Eigen::Index>(i) * T;
        const auto eta_i = eta.segment(r0, T);
        const double m = eta_i.maxCoeff();
        Eigen::VectorXd w = (eta_i.array() - m).exp();
        const double wsum = w.sum();
        w /= wsum;
        out.shares.segment(r0, T) = w;

        const auto n_i = counts.segment(r0, T);
        out.loglik += n_i.dot(eta_i) - entity_totals(static_cast<Eigen::Index>(i)) * (m + std::log(wsum));

        const auto x_i = x.middleRows(r0, T);
        const Eigen::VectorXd xbar = x_i.transpose() * w;
        out.score += x_i.transpose() * n_i - entity_totals(static_cast<Eigen::Index>(i)) * xbar;
        if (with_hessian) {
            const Eigen::MatrixXd xw = x_i.transpose() * w.asDiagonal() * x_i;
            out.hessian -= entity_totals(static_cast<Eigen::Index>(i)) * (xw - xbar * xbar.transpose());
        }
    }
    return out;
}

}  // namespace

int FEPoissonFit::coef_index(const std::string& name) const {
    for (std::size_t j = 0; j < regressors.size(); ++j)
        if (regressors[j] == name) return static_cast<int>(j);
    return -1;
}

FEPoissonFit fit_fe_poisson(const Panel& p, const std::string& outcome,
                            const std::vector<std::string>& regressors) {
    {
        std::set<std::string> seen;
        for (const auto& r : regressors)
            if (!seen.insert(r).second) throw ConfigError("regressor '" + r + "' listed twice");
        if (seen.count(outcome))
            throw ConfigError("outcome column '" + outcome + "' also listed as a regressor");
    }
    if (regressors.empty()) throw ConfigError("count model needs at least one regressor");
    if (p.n_times() < 2) throw DataError("fixed-effects count model needs at least 2 periods");

    const std::size_t N = p.n_entities();
    const std::size_t T = p.n_times();
    const std::size_t n = N * T;

    FEPoissonFit fit;
    fit.outcome = outcome;
    fit.regressors = regressors;
    fit.n_obs = n;
    fit.shape = PanelShape{p.entities(), p.times(), p.cluster_of_entity()};

    fit.counts = p.column(outcome);
    fit.entity_totals.resize(static_cast<Eigen::Index>(N));
    for (std::size_t i = 0; i < N; ++i) {
        double tot = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            const double v = fit.counts(static_cast<Eigen::Index>(p.cell(i, t)));
            if (Panel::is_absent(v))
                throw DataError("outcome '" + outcome + "' absent at (" + p.entities()[i] + ", " +
                                std::to_string(p.times()[t]) + "); restrict the window first");
            if (v < 0 || std::abs(v - std::round(v)) > 1e-9)
                throw DataError("outcome '" + outcome + "' must hold non-negative integers; found " +
                                std::to_string(v) + " at (" + p.entities()[i] + ", " +
                                std::to_string(p.times()[t]) + ")");
            tot += v;
        }
        if (tot <= 0)
            throw DataError("entity '" + p.entities()[i] +
                            "' has an all-zero outcome; filter such entities out first");
        fit.entity_totals(static_cast<Eigen::Index>(i)) = tot;
    }

    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(regressors.size()));
    for (std::size_t j = 0; j < regressors.size(); ++j) {
        const Eigen::VectorXd& col = p.column(regressors[j]);
        for (Eigen::Index c = 0; c < col.size(); ++c)
            if (Panel::is_absent(col(c)))
                throw DataError("regressor '" + regressors[j] +
                                "' has absent cells; restrict the window first");
        x.col(static_cast<Eigen::Index>(j)) = col;
    }

    // Demeaning leaves shares p_it unchanged and improves conditioning.
    const DemeanResult dx = within_demean(x, N, T);
    fit.demeaned_x = dx.demeaned;
    const auto k = fit.demeaned_x.cols();
    for (Eigen::Index j = 0; j < k; ++j) {
        const double scale = std::max(1.0, x.col(j).norm());
        if (fit.demeaned_x.col(j).norm() <= 1e-10 * scale)
            throw DataError("regressor '" + regressors[static_cast<std::size_t>(j)] +
                            "' is constant within entities; not identified in a fixed-effects model");
    }
    {
        const Eigen::MatrixXd xtx = fit.demeaned_x.transpose() * fit.demeaned_x;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xtx);
        qr.setThreshold(1e-10);
        if (qr.rank() < k) {
            const auto& perm = qr.colsPermutation().indices();
            std::string cols;
            for (Eigen::Index j = qr.rank(); j < k; ++j) {
                if (!cols.empty()) cols += ", ";
                cols += regressors[static_cast<std::size_t>(perm(j))];
            }
            throw DataError("collinear regressors after demeaning: {" + cols +
                            "}; drop one of these columns");
        }
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    Likelihood cur = evaluate(fit.demeaned_x, fit.counts, fit.entity_totals, N, T, beta, true);
    bool converged = cur.score.cwiseAbs().maxCoeff() <= kGradTol;
    int iter = 0;
    while (!converged && iter < kMaxIter) {
        ++iter;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(-cur.hessian);
        if (ldlt.info() != Eigen::Success)
            throw NumericalError("singular Hessian in the count-model Newton step");
        Eigen::VectorXd dir = ldlt.solve(cur.score);
        if (!dir.allFinite())
            throw NumericalError("non-finite Newton direction in the count model");

        double step = 1.0;
        Eigen::VectorXd cand;
        Likelihood next = cur;
        bool improved = false;
        for (int h = 0; h < 40; ++h) {
            cand = beta + step * dir;
            next = evaluate(fit.demeaned_x, fit.counts, fit.entity_totals, N, T, cand, true);
            if (std::isfinite(next.loglik) && next.loglik >= cur.loglik - 1e-12 * std::abs(cur.loglik)) {
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved)
            throw NumericalError("line search failed in the count model; likelihood cannot improve");

        const double rel_step = (cand - beta).cwiseAbs().maxCoeff() /
                                std::max(1.0, beta.cwiseAbs().maxCoeff());
        beta = cand;
        cur = next;
        // A diverging within-entity index means the likelihood has no interior
        // maximum (separation): the rate ratio between periods is exploding.
        if ((fit.demeaned_x * beta).cwiseAbs().maxCoeff() > 15.0)
            throw NumericalError("within-entity index diverging in the count model "
                                 "(possible separation: positive counts only at extreme "
                                 "regressor values)");
        const double grad = cur.score.cwiseAbs().maxCoeff();
        if (grad <= kGradTol) {
            converged = true;
            break;
        }
        if (rel_step <= kStepTol)
            break;  // stalled; converged flag stays false unless gradient is small
    }

    fit.coef = beta;
    fit.loglik = cur.loglik;
    fit.score = cur.score;
    fit.hessian = cur.hessian;
    fit.shares = cur.shares;
    fit.iterations = iter;
    fit.grad_norm = cur.score.cwiseAbs().maxCoeff();
    fit.converged = fit.grad_norm <= kGradTol;
    if (!fit.converged)
        throw NumericalError("count model did not converge in " + std::to_string(iter) +
                             " iterations; max-abs score " + std::to_string(fit.grad_norm));
    return fit;
}

ClusteredCov poisson_cluster_cov(const FEPoissonFit& fit) {
    return poisson_cluster_cov(fit, fit.shape.cluster_of_entity);
}

ClusteredCov poisson_cluster_cov(const FEPoissonFit& fit, const std::vector<int>& cluster_of_entity) {
    if (cluster_of_entity.size() != fit.shape.n_entities())
        throw ConfigError("cluster assignment size does not match entity count");
    const auto k = fit.demeaned_x.cols();
    const auto T = static_cast<Eigen::Index>(fit.shape.n_times());

    std::set<int> ids(cluster_of_entity.begin(), cluster_of_entity.end());
    const int G = static_cast<int>(ids.size());
    if (G < 2) throw DataError("clustered covariance needs at least 2 clusters");

    std::map<int, Eigen::VectorXd> score_sum;
    for (int g : ids) score_sum.emplace(g, Eigen::VectorXd::Zero(k));
    for (std::size_t i = 0; i < fit.shape.n_entities(); ++i) {
        const auto r0 = static_cast<Eigen::Index>(i) * T;
        const auto x_i = fit.demeaned_x.middleRows(r0, T);
        const Eigen::VectorXd resid = fit.counts.segment(r0, T) -
                                      fit.entity_totals(static_cast<Eigen::Index>(i)) *
                                          fit.shares.segment(r0, T);
        score_sum[cluster_of_entity[i]] += x_i.transpose() * resid;
    }
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (const auto& [g, s] : score_sum) meat += s * s.transpose();

    Eigen::LDLT<Eigen::MatrixXd> ldlt(-fit.hessian);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("singular Hessian when forming the sandwich covariance");
    const Eigen::MatrixXd bread = ldlt.solve(Eigen::MatrixXd::Identity(k, k));

    ClusteredCov out;
    out.n_clusters = G;
    out.small_sample_factor = 1.0;
    out.cov = bread * meat * bread;
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
    return out;
}

WaldResult wald_test(const FEPoissonFit& fit, const ClusteredCov& cov,
                     const std::string& name, double h0) {
    const int j = fit.coef_index(name);
    if (j < 0) throw ConfigError("coefficient '" + name + "' is not in the fit");
    const double var = cov.cov(j, j);
    if (!(var > 0)) throw NumericalError("non-positive variance for coefficient '" + name + "'");
    WaldResult res;
    const double d = fit.coef(j) - h0;
    res.statistic = d * d / var;
    res.p_value = chi2_sf(res.statistic, 1.0);
    return res;
}

}  // namespace paneliv
