#pragma once

#include <optional>
#include <string>
#include <vector>

namespace paneliv {

// Product-limit survival curve.  One row per distinct observed time,
// ascending; `survival` is S(t) just after the events at that time.
struct SurvivalCurve {
    std::string label;
    std::size_t n = 0;  // sample size
    std::vector<double> times;
    std::vector<int> at_risk;
    std::vector<int> deaths;
    std::vector<int> censored;
    std::vector<double> survival;

    // Step-function evaluation: 1 before the first observed time.
    double survival_at(double t) const;
};

// Kaplan-Meier estimate from durations and event flags (1 = death,
// 0 = censored).  Ties at one time are resolved deaths-first.
SurvivalCurve kaplan_meier(const std::vector<double>& durations,
                           const std::vector<int>& died,
                           std::string label = {});

// Smallest observed time with S(t) <= 0.5; empty when the curve never
// reaches it (heavy censoring).
std::optional<double> median_survival(const SurvivalCurve& curve);

struct SurvivalComparison {
    std::optional<double> median_a;
    std::optional<double> median_b;
    std::optional<double> median_gap;   // b minus a, when both exist
    double dominance_fraction = 0.0;    // share of grid times with S_a < S_b
    std::size_t grid_size = 0;
};

// Compares two curves on the union of their observed times; exact ties in
// survival count one half toward dominance.
SurvivalComparison compare_groups(const SurvivalCurve& a, const SurvivalCurve& b);

}  // namespace paneliv
