#include "paneliv/dyngmm.hpp"

#include <cmath>

#include "paneliv/errors.hpp"
#include "paneliv/stats.hpp"

namespace paneliv {

namespace {

struct SystemData {
    std::size_t n_entities = 0;
    std::size_t n_times = 0;
    std::vector<std::string> coef_names;
    std::vector<Eigen::MatrixXd> w;  // per entity, stacked regressor rows
    std::vector<Eigen::VectorXd> q;  // per entity, stacked dependent rows
    std::vector<Eigen::MatrixXd> x_diff;
    std::size_t n_diff_rows = 0;
    std::size_t n_level_rows = 0;
};

Eigen::VectorXd dense_column(const Panel& p, const std::string& name) {
    const Eigen::VectorXd& col = p.column(name);
    for (Eigen::Index c = 0; c < col.size(); ++c)
        if (Panel::is_absent(col(c)))
            throw DataError("column '" + name + "' has absent cells; restrict the window first");
    return col;
}

// Stacked regressors and dependents for the two equations.
SystemData assemble_system(const Panel& p, const GmmSpec& spec) {
    if (spec.dependent.empty()) throw ConfigError("dynamic model: dependent column not set");
    const std::size_t N = p.n_entities();
    const std::size_t T = p.n_times();
    if (T < 3)
        throw DataError("dynamic model needs at least 3 periods; panel has " + std::to_string(T));

    const Eigen::VectorXd y = dense_column(p, spec.dependent);
    std::vector<Eigen::VectorXd> exog_cols;
    for (const auto& name : spec.exog) {
        if (name == spec.dependent)
            throw ConfigError("dependent column '" + name + "' also listed as exogenous");
        exog_cols.push_back(dense_column(p, name));
    }

    SystemData sd;
    sd.n_entities = N;
    sd.n_times = T;
    sd.n_diff_rows = T - 2;
    sd.n_level_rows = T - 1;
    sd.coef_names.push_back("lag_" + spec.dependent);
    for (const auto& name : spec.exog) sd.coef_names.push_back(name);
    if (spec.intercept) sd.coef_names.push_back("const");

    const auto k = static_cast<Eigen::Index>(sd.coef_names.size());
    const auto rows = static_cast<Eigen::Index>(sd.n_diff_rows + sd.n_level_rows);
    for (std::size_t i = 0; i < N; ++i) {
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(rows, k);
        Eigen::VectorXd q(rows);
        Eigen::Index r = 0;
        const auto at = [&](const Eigen::VectorXd& col, std::size_t t) {
            return col(static_cast<Eigen::Index>(p.cell(i, t)));
        };
        for (std::size_t t = 2; t < T; ++t, ++r) {  // difference equation
            q(r) = at(y, t) - at(y, t - 1);
            w(r, 0) = at(y, t - 1) - at(y, t - 2);
            for (std::size_t j = 0; j < exog_cols.size(); ++j)
                w(r, static_cast<Eigen::Index>(1 + j)) = at(exog_cols[j], t) - at(exog_cols[j], t - 1);
        }
        for (std::size_t t = 1; t < T; ++t, ++r) {  // levels equation
            q(r) = at(y, t);
            w(r, 0) = at(y, t - 1);
            for (std::size_t j = 0; j < exog_cols.size(); ++j)
                w(r, static_cast<Eigen::Index>(1 + j)) = at(exog_cols[j], t);
            if (spec.intercept) w(r, k - 1) = 1.0;
        }
        sd.x_diff.push_back(w.topRows(static_cast<Eigen::Index>(sd.n_diff_rows)));
        sd.w.push_back(std::move(w));
        sd.q.push_back(std::move(q));
    }
    return sd;
}

// One-step weighting: tridiagonal (2, -1) for the differenced errors,
// identity for the levels.
Eigen::MatrixXd one_step_h(std::size_t n_diff_rows, std::size_t n_level_rows) {
    const auto nd = static_cast<Eigen::Index>(n_diff_rows);
    const auto nl = static_cast<Eigen::Index>(n_level_rows);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(nd + nl, nd + nl);
    for (Eigen::Index r = 0; r < nd; ++r) {
        h(r, r) = 2.0;
        if (r + 1 < nd) {
            h(r, r + 1) = -1.0;
            h(r + 1, r) = -1.0;
        }
    }
    for (Eigen::Index r = 0; r < nl; ++r) h(nd + r, nd + r) = 1.0;
    return h;
}

Eigen::MatrixXd robust_inverse(const Eigen::MatrixXd& m, const std::string& context) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (!lu.isInvertible()) throw NumericalError(context);
    return lu.inverse();
}

}  // namespace

InstrumentBlocks build_gmm_instruments(const Panel& p, const GmmSpec& spec) {
    if (spec.dependent.empty()) throw ConfigError("dynamic model: dependent column not set");
    const std::size_t N = p.n_entities();
    const std::size_t T = p.n_times();
    if (T < 3)
        throw DataError("dynamic model needs at least 3 periods; panel has " + std::to_string(T));
    if (spec.lag_min < 2)
        throw ConfigError("lag_min must be at least 2; shallower lags correlate with the "
                          "differenced error");
    const int max_avail = static_cast<int>(T) - 1;
    const int lag_max = spec.lag_max == 0 ? max_avail : spec.lag_max;
    if (lag_max > max_avail)
        throw ConfigError("lag_max " + std::to_string(lag_max) + " exceeds the deepest available lag " +
                          std::to_string(max_avail));
    if (spec.lag_min > lag_max)
        throw ConfigError("empty lag window: lag_min " + std::to_string(spec.lag_min) +
                          " exceeds lag_max " + std::to_string(lag_max));

    const Eigen::VectorXd y = dense_column(p, spec.dependent);
    std::vector<Eigen::VectorXd> exog_cols;
    for (const auto& name : spec.exog) exog_cols.push_back(dense_column(p, name));

    // Column layouts for both shapes, then pick per the collapse setting.
    struct Col {
        std::string label;
        int period;  // uncollapsed: the single period served (time index); -1 for all
        int lag;     // diff block: lag depth; level block: unused (1)
        int kind;    // 0 diff-gmm, 1 level-gmm
    };
    std::vector<Col> uncollapsed, collapsed;
    for (std::size_t t = 2; t < T; ++t)
        for (int l = spec.lag_min; l <= std::min(lag_max, static_cast<int>(t)); ++l)
            uncollapsed.push_back(Col{"diff:y(" + std::to_string(p.times()[t]) + ",lag" +
                                          std::to_string(l) + ")",
                                      static_cast<int>(t), l, 0});
    for (std::size_t t = 2; t < T; ++t)
        uncollapsed.push_back(Col{"level:dy(" + std::to_string(p.times()[t]) + ")",
                                  static_cast<int>(t), 1, 1});
    for (int l = spec.lag_min; l <= lag_max; ++l)
        collapsed.push_back(Col{"diff:y(lag" + std::to_string(l) + ")", -1, l, 0});
    collapsed.push_back(Col{"level:dy(lag1)", -1, 1, 1});

    bool use_collapsed;
    switch (spec.collapse) {
        case GmmSpec::Collapse::On: use_collapsed = true; break;
        case GmmSpec::Collapse::Off: use_collapsed = false; break;
        default:
            use_collapsed = uncollapsed.size() + spec.exog.size() + (spec.intercept ? 1 : 0) > N;
    }
    const std::vector<Col>& gmm_cols = use_collapsed ? collapsed : uncollapsed;

    InstrumentBlocks out;
    out.collapsed = use_collapsed;
    out.lag_min = spec.lag_min;
    out.lag_max = lag_max;
    out.n_diff_rows = T - 2;
    out.n_level_rows = T - 1;
    for (const auto& c : gmm_cols) {
        out.labels.push_back(c.label);
        (c.kind == 0 ? out.n_gmm_diff : out.n_gmm_level) += 1;
    }
    for (const auto& name : spec.exog) out.labels.push_back("iv:" + name);
    if (spec.intercept) out.labels.push_back("iv:const");
    out.n_exog = spec.exog.size() + (spec.intercept ? 1 : 0);

    const auto m = static_cast<Eigen::Index>(out.labels.size());
    const auto nd = static_cast<Eigen::Index>(out.n_diff_rows);
    const auto rows = nd + static_cast<Eigen::Index>(out.n_level_rows);
    for (std::size_t i = 0; i < N; ++i) {
        Eigen::MatrixXd z = Eigen::MatrixXd::Zero(rows, m);
        const auto at = [&](const Eigen::VectorXd& col, std::size_t t) {
            return col(static_cast<Eigen::Index>(p.cell(i, t)));
        };
        Eigen::Index j = 0;
        for (const auto& c : gmm_cols) {
            if (c.kind == 0) {
                // Lagged levels instrument the difference equation at row t-2.
                for (std::size_t t = 2; t < T; ++t) {
                    if (c.period >= 0 && c.period != static_cast<int>(t)) continue;
                    const int src = static_cast<int>(t) - c.lag;
                    if (src < 0) continue;  // zero-filled where the lag does not exist
                    z(static_cast<Eigen::Index>(t - 2), j) = at(y, static_cast<std::size_t>(src));
                }
            } else {
                // Lagged differences instrument the levels equation at row nd + t - 1.
                for (std::size_t t = 2; t < T; ++t) {
                    if (c.period >= 0 && c.period != static_cast<int>(t)) continue;
                    z(nd + static_cast<Eigen::Index>(t - 1), j) = at(y, t - 1) - at(y, t - 2);
                }
            }
            ++j;
        }
        for (std::size_t e = 0; e < exog_cols.size(); ++e, ++j) {
            for (std::size_t t = 2; t < T; ++t)
                z(static_cast<Eigen::Index>(t - 2), j) =
                    at(exog_cols[e], t) - at(exog_cols[e], t - 1);
            for (std::size_t t = 1; t < T; ++t)
                z(nd + static_cast<Eigen::Index>(t - 1), j) = at(exog_cols[e], t);
        }
        if (spec.intercept) {
            for (std::size_t t = 1; t < T; ++t) z(nd + static_cast<Eigen::Index>(t - 1), j) = 1.0;
        }
        out.z.push_back(std::move(z));
    }
    return out;
}

int GMMFit::coef_index(const std::string& name) const {
    for (std::size_t j = 0; j < coef_names.size(); ++j)
        if (coef_names[j] == name) return static_cast<int>(j);
    return -1;
}

GMMFit fit_system_gmm(const Panel& p, const GmmSpec& spec, GmmStep step) {
    return fit_system_gmm(p, spec, build_gmm_instruments(p, spec), step);
}

GMMFit fit_system_gmm(const Panel& p, const GmmSpec& spec, const InstrumentBlocks& blocks,
                      GmmStep step) {
    SystemData sd = assemble_system(p, spec);
    const auto k = static_cast<Eigen::Index>(sd.coef_names.size());
    const auto m = static_cast<Eigen::Index>(blocks.n_instruments());
    if (m < k)
        throw ConfigError("underidentified: " + std::to_string(m) + " instruments for " +
                          std::to_string(k) + " coefficients");
    if (blocks.z.size() != sd.n_entities ||
        blocks.n_diff_rows != sd.n_diff_rows || blocks.n_level_rows != sd.n_level_rows)
        throw ConfigError("instrument blocks do not match the panel shape");

    const Eigen::MatrixXd h = one_step_h(sd.n_diff_rows, sd.n_level_rows);
    Eigen::MatrixXd zhz = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, k);
    Eigen::VectorXd mv = Eigen::VectorXd::Zero(m);
    for (std::size_t i = 0; i < sd.n_entities; ++i) {
        const Eigen::MatrixXd& z = blocks.z[i];
        zhz.noalias() += z.transpose() * h * z;
        g.noalias() += z.transpose() * sd.w[i];
        mv.noalias() += z.transpose() * sd.q[i];
    }

    const Eigen::MatrixXd w1 = robust_inverse(
        zhz, "singular one-step weighting matrix; reduce the lag window or collapse instruments");

    const auto solve_at = [&](const Eigen::MatrixXd& wgt) {
        const Eigen::MatrixXd gtwg = g.transpose() * wgt * g;
        const Eigen::MatrixXd bread = robust_inverse(
            gtwg, "singular moment cross-product; regressors or instruments are collinear");
        const Eigen::VectorXd theta = bread * (g.transpose() * (wgt * mv));
        return std::make_pair(theta, bread);
    };

    auto [theta1, bread1] = solve_at(w1);

    const auto moment_cov = [&](const Eigen::VectorXd& theta) {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
        for (std::size_t i = 0; i < sd.n_entities; ++i) {
            const Eigen::VectorXd u = sd.q[i] - sd.w[i] * theta;
            const Eigen::VectorXd zu = blocks.z[i].transpose() * u;
            s.noalias() += zu * zu.transpose();
        }
        return s;
    };
    const Eigen::MatrixXd s1 = moment_cov(theta1);

    GMMFit fit;
    fit.spec = spec;
    fit.step = step;
    fit.coef_names = sd.coef_names;
    fit.instruments = blocks;
    fit.n_entities = sd.n_entities;
    fit.n_instruments = static_cast<int>(m);
    fit.n_params = static_cast<int>(k);
    fit.x_diff = sd.x_diff;

    Eigen::VectorXd theta;
    Eigen::MatrixXd wgt_used;
    try {
        const Eigen::MatrixXd w2 = robust_inverse(
            s1, "singular two-step weighting matrix; reduce the lag window or collapse instruments");
        auto [theta2, bread2] = solve_at(w2);
        fit.j_moment = mv - g * theta2;  // moment sum at the two-step coefficients
        fit.j_weight = w2;
        fit.j_available = true;
        if (step == GmmStep::Two) {
            theta = theta2;
            wgt_used = w2;
            // Uncorrected two-step covariance (G' W2 G)^-1.
            fit.vcov = bread2;
            fit.projection = bread2 * g.transpose() * w2;
        }
    } catch (const NumericalError& e) {
        if (step == GmmStep::Two) throw;
        fit.j_available = false;
        fit.j_unavailable_reason = e.what();
    }
    if (step == GmmStep::One) {
        theta = theta1;
        wgt_used = w1;
        const Eigen::MatrixXd inner = g.transpose() * w1 * s1 * w1 * g;
        fit.vcov = bread1 * inner * bread1;
        fit.projection = bread1 * g.transpose() * w1;
    }
    fit.vcov = 0.5 * (fit.vcov + fit.vcov.transpose()).eval();
    fit.coef = theta;

    for (std::size_t i = 0; i < sd.n_entities; ++i) {
        const Eigen::VectorXd u = sd.q[i] - sd.w[i] * theta;
        fit.resid_diff.push_back(u.head(static_cast<Eigen::Index>(sd.n_diff_rows)));
        fit.resid_full.push_back(u);
    }
    return fit;
}

HansenResult hansen_j(const GMMFit& fit) {
    const int df = fit.n_instruments - fit.n_params;
    if (df <= 0)
        throw ConfigError("Hansen J undefined: the model is exactly identified (" +
                          std::to_string(fit.n_instruments) + " instruments, " +
                          std::to_string(fit.n_params) + " coefficients)");
    if (!fit.j_available)
        throw NumericalError("Hansen J unavailable: " + fit.j_unavailable_reason);
    HansenResult out;
    out.df = df;
    out.j = fit.j_moment.dot(fit.j_weight * fit.j_moment);
    out.p_value = chi2_sf(out.j, static_cast<double>(df));
    return out;
}

ARTestResult ar_test(const GMMFit& fit, int order) {
    if (order < 1) throw ConfigError("serial-correlation order must be at least 1");
    const auto nd = static_cast<Eigen::Index>(fit.instruments.n_diff_rows);
    if (nd <= order)
        throw DataError("panel too short for an order-" + std::to_string(order) +
                        " serial-correlation test (needs at least " + std::to_string(order + 3) +
                        " periods)");

    const auto k = static_cast<Eigen::Index>(fit.n_params);
    const auto m = static_cast<Eigen::Index>(fit.n_instruments);
    double b = 0.0, term1 = 0.0;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd qv = Eigen::VectorXd::Zero(m);
    for (std::size_t i = 0; i < fit.n_entities; ++i) {
        const Eigen::VectorXd& v = fit.resid_diff[i];
        Eigen::VectorXd w = Eigen::VectorXd::Zero(nd);
        for (Eigen::Index r = order; r < nd; ++r) w(r) = v(r - order);
        const double s = w.dot(v);
        b += s;
        term1 += s * s;
        c.noalias() += fit.x_diff[i].transpose() * w;
        const Eigen::MatrixXd& z = fit.instruments.z[i];
        qv.noalias() += z.transpose() * fit.resid_full[i] * s;
    }
    const double term2 = 2.0 * c.dot(fit.projection * qv);
    const double term3 = c.dot(fit.vcov * c);
    const double var = term1 - term2 + term3;
    if (!(var > 0))
        throw NumericalError("serial-correlation test variance is not positive (" +
                             std::to_string(var) + ")");
    ARTestResult out;
    out.order = order;
    out.z = b / std::sqrt(var);
    out.p_value = 2.0 * normal_sf(std::abs(out.z));
    return out;
}

}  // namespace paneliv
