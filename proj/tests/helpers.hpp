#pragma once

// Shared builders for test panels.

#include <string>
#include <utility>
#include <vector>

#include "paneliv/panel.hpp"
#include "paneliv/rng.hpp"

namespace testing {

inline paneliv::Panel make_panel(std::vector<std::string> entities, std::vector<int> years,
                                 std::vector<std::pair<std::string, std::vector<double>>> cols) {
    std::vector<std::pair<std::string, Eigen::VectorXd>> columns;
    for (auto& [name, vals] : cols) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
        for (std::size_t i = 0; i < vals.size(); ++i) v(static_cast<Eigen::Index>(i)) = vals[i];
        columns.emplace_back(name, std::move(v));
    }
    return paneliv::Panel(std::move(entities), std::move(years), std::move(columns));
}

struct RandomPanel {
    paneliv::Panel panel;
    Eigen::MatrixXd x;  // regressor columns, entity-major
    Eigen::VectorXd y;
    std::vector<std::string> regressors;
};

// Small random panel with a continuous outcome "y" and regressors "x1..xk".
inline RandomPanel random_linear_panel(paneliv::Rng& rng, std::size_t n_entities,
                                       std::size_t n_times, std::size_t k) {
    const std::size_t n = n_entities * n_times;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    std::vector<double> effect(n_entities);
    for (auto& e : effect) e = rng.normal();
    for (std::size_t i = 0; i < n_entities; ++i)
        for (std::size_t t = 0; t < n_times; ++t) {
            const auto r = static_cast<Eigen::Index>(i * n_times + t);
            double mean = effect[i];
            for (std::size_t j = 0; j < k; ++j) {
                x(r, static_cast<Eigen::Index>(j)) = rng.normal();
                mean += 0.5 * x(r, static_cast<Eigen::Index>(j));
            }
            y(r) = mean + rng.normal();
        }
    std::vector<std::string> entities(n_entities);
    for (std::size_t i = 0; i < n_entities; ++i) entities[i] = "E" + std::to_string(i);
    std::vector<int> years(n_times);
    for (std::size_t t = 0; t < n_times; ++t) years[t] = 2000 + static_cast<int>(t);
    std::vector<std::pair<std::string, Eigen::VectorXd>> columns;
    columns.emplace_back("y", y);
    std::vector<std::string> regressors;
    for (std::size_t j = 0; j < k; ++j) {
        regressors.push_back("x" + std::to_string(j + 1));
        columns.emplace_back(regressors.back(), x.col(static_cast<Eigen::Index>(j)));
    }
    return RandomPanel{paneliv::Panel(std::move(entities), std::move(years), std::move(columns)),
                       std::move(x), std::move(y), std::move(regressors)};
}

// Random panel with a count outcome "n" (every entity gets at least one
// positive count) and regressors "x1..xk".
inline RandomPanel random_count_panel(paneliv::Rng& rng, std::size_t n_entities,
                                      std::size_t n_times, std::size_t k) {
    for (;;) {
        const std::size_t n = n_entities * n_times;
        Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
        Eigen::VectorXd y(static_cast<Eigen::Index>(n));
        bool all_positive = true;
        std::vector<std::string> entities(n_entities);
        for (std::size_t i = 0; i < n_entities; ++i) {
            entities[i] = "E" + std::to_string(i);
            const double effect = 0.5 * rng.normal();
            double total = 0.0;
            for (std::size_t t = 0; t < n_times; ++t) {
                const auto r = static_cast<Eigen::Index>(i * n_times + t);
                double eta = effect + 1.0;
                for (std::size_t j = 0; j < k; ++j) {
                    x(r, static_cast<Eigen::Index>(j)) = rng.normal();
                    eta += 0.3 * x(r, static_cast<Eigen::Index>(j));
                }
                y(r) = static_cast<double>(rng.poisson(std::exp(eta)));
                total += y(r);
            }
            if (total <= 0) all_positive = false;
        }
        if (!all_positive) continue;
        std::vector<int> years(n_times);
        for (std::size_t t = 0; t < n_times; ++t) years[t] = 2000 + static_cast<int>(t);
        std::vector<std::pair<std::string, Eigen::VectorXd>> columns;
        columns.emplace_back("n", y);
        std::vector<std::string> regressors;
        for (std::size_t j = 0; j < k; ++j) {
            regressors.push_back("x" + std::to_string(j + 1));
            columns.emplace_back(regressors.back(), x.col(static_cast<Eigen::Index>(j)));
        }
        return RandomPanel{paneliv::Panel(std::move(entities), std::move(years), std::move(columns)),
                           std::move(x), std::move(y), std::move(regressors)};
    }
}

}  // namespace testing
