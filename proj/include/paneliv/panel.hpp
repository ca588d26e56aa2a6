#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace paneliv {

// Balanced entity-year panel.  Storage is entity-major: the cell for
// (entity i, time index t) lives at row i * n_times() + t of every column.
// Absent values (features undefined at panel edges) are stored as NaN;
// estimators reject NaN cells, so callers restrict the window first.
// Panels are immutable; transforms return new panels sharing nothing.
class Panel {
  public:
    Panel(std::vector<std::string> entities,
          std::vector<int> times,
          std::vector<std::pair<std::string, Eigen::VectorXd>> columns,
          std::vector<int> cluster_of_entity = {});

    std::size_t n_entities() const { return entities_.size(); }
    std::size_t n_times() const { return times_.size(); }
    std::size_t n_cells() const { return entities_.size() * times_.size(); }

    const std::vector<std::string>& entities() const { return entities_; }
    const std::vector<int>& times() const { return times_; }
    const std::vector<std::string>& column_names() const { return names_; }

    // Cluster index of each entity; defaults to one cluster per entity.
    const std::vector<int>& cluster_of_entity() const { return cluster_; }
    int n_clusters() const;

    bool has_column(const std::string& name) const;
    const Eigen::VectorXd& column(const std::string& name) const;
    double value(const std::string& name, std::size_t entity, std::size_t time) const;
    std::size_t cell(std::size_t entity, std::size_t time) const { return entity * times_.size() + time; }
    std::size_t entity_index(const std::string& name) const;

    static bool is_absent(double v);

    Panel with_column(const std::string& name, Eigen::VectorXd values) const;
    Panel with_clusters(std::vector<int> cluster_of_entity) const;

    // One indicator column "year_<t>" per time except the first (the base).
    Panel add_year_dummies() const;
    std::vector<std::string> year_dummy_names() const;

    // value(i, t) = source(i, t-1); absent in the first period.
    Panel add_lag(const std::string& source, const std::string& name) const;

    // Largest contiguous run of periods where every listed column is present
    // for every entity.  Errors if absence is not confined to the edges or no
    // complete period remains.
    Panel restrict_to_complete_window(const std::vector<std::string>& columns) const;

    // Keep periods with from <= year <= to.
    Panel restrict_to_years(int from, int to) const;

    // Entity resample (duplicates allowed).  Copies keep their rows, receive
    // fresh unique ids, and each becomes its own cluster.
    Panel subset_entities(const std::vector<std::size_t>& indices) const;

    void write_csv(std::ostream& out) const;

  private:
    std::vector<std::string> entities_;
    std::vector<int> times_;
    std::vector<std::string> names_;
    std::vector<Eigen::VectorXd> cols_;
    std::vector<int> cluster_;
};

// Column roles for the instrumental-variable pipeline.
struct FeatureSpec {
    std::string outcome;
    std::string endogenous;
    std::vector<std::string> instruments;
    std::vector<std::string> controls;
    bool year_dummies = true;

    // Checks that all names exist in `p` and that roles do not overlap.
    void validate(const Panel& p) const;
};

// CSV loader.  Expects a header with `entity` and `year` columns; every other
// column is numeric (empty cells are rejected; use the literal `nan` for
// absent feature values).  The panel must be balanced on consecutive years.
Panel load_panel(std::istream& in);

struct FilterResult {
    Panel panel;
    double dropped_fraction = 0.0;
    std::vector<std::string> dropped_entities;
};

// Drops entities whose outcome is zero in every period; they carry no
// information for a fixed-effects count model.
FilterResult filter_nonzero_outcome(const Panel& p, const std::string& outcome);

// Recall count per 100 products on the entity's roster.
// Zero recalls map to zero; recalls on an empty roster are an error.
double normalize_recalls(double recalls, double n_products);
Panel add_normalized_recalls(const Panel& p, const std::string& recalls,
                             const std::string& n_products, const std::string& name);

// Herfindahl-Hirschman index of market shares (shares must sum to 1).
double hhi(const Eigen::VectorXd& shares);

// Products lost over (t, t+1] relative to the roster at t-1.
double outflow_rate(double lost_next, double total_prev);
Panel add_outflow_rate(const Panel& p, const std::string& lost_next,
                       const std::string& total, const std::string& name);

// First difference of logs; series must be strictly positive.
Eigen::VectorXd detrend_log_diff(const Eigen::VectorXd& series);
Panel add_detrended_log(const Panel& p, const std::string& source, const std::string& name);

// Natural log of a strictly positive column.
Panel add_log(const Panel& p, const std::string& source, const std::string& name);

struct DemeanResult {
    Eigen::MatrixXd demeaned;      // same shape as input
    Eigen::MatrixXd entity_means;  // n_entities x n_columns
};

// Subtracts entity means from each column of entity-major data.
DemeanResult within_demean(const Eigen::MatrixXd& columns, std::size_t n_entities, std::size_t n_times);

}  // namespace paneliv
