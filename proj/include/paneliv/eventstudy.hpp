#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "paneliv/linfe.hpp"
#include "paneliv/panel.hpp"

namespace paneliv {

// Benchmark regression for the abnormal-value analysis: the outcome on an
// aggregate reference series and optional controls, with entity fixed
// effects and year dummies.  Forecast variance per cell is the residual
// variance plus (optionally) the parameter-uncertainty term x' Var(b) x.
struct PotentialFit {
    FEOLSFit ols;
    Eigen::VectorXd fitted;        // expected outcome per cell
    Eigen::VectorXd forecast_var;  // per cell
    bool param_uncertainty = true;
};

PotentialFit fit_potential(const Panel& p, const std::string& outcome,
                           const std::string& aggregate,
                           const std::vector<std::string>& controls,
                           bool year_dummies = true,
                           bool param_uncertainty = true);

// Abnormal value = observed minus expected outcome, with its variance.
struct AVPanel {
    PanelShape shape;
    std::string outcome;
    Eigen::VectorXd av;   // entity-major
    Eigen::VectorXd var;  // forecast variance per cell
};

AVPanel abnormal_values(const PotentialFit& fit);

struct EventObs {
    std::size_t entity;  // index into entities_kept
    int tau;             // year minus the entity's event year
    double av;
    double var;
};

// Calendar time recentred on each entity's event year.  Entities without an
// event are excluded; event years must fall inside the panel.
struct EventPanel {
    std::vector<EventObs> obs;
    std::vector<std::string> entities_kept;
};

EventPanel recenter_event_time(const AVPanel& av, const std::map<std::string, int>& event_years);

struct EventCurvePoint {
    int tau = 0;
    double mean = 0.0;   // simple average of abnormal values at tau
    double var = 0.0;    // sum of cell variances / n^2
    std::size_t n = 0;
    double lo = 0.0, hi = 0.0;  // 95% interval
};

struct EventCurve {
    std::vector<EventCurvePoint> points;  // sorted by tau

    const EventCurvePoint* at(int tau) const;
};

EventCurve aggregate_av(const EventPanel& ev);

}  // namespace paneliv
