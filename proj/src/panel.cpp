#include "paneliv/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "paneliv/errors.hpp"

namespace paneliv {

namespace {

constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

std::string cell_name(const std::string& entity, int year) {
    return "(" + entity + ", " + std::to_string(year) + ")";
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

double parse_number(const std::string& raw, std::size_t row, const std::string& col) {
    std::string s = trim(raw);
    if (s.empty())
        throw DataError("empty value at data row " + std::to_string(row) + " column '" + col +
                        "' (use 'nan' for absent cells)");
    if (s == "nan" || s == "NaN" || s == "NA") return kAbsent;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
        throw DataError("non-numeric value '" + s + "' at data row " + std::to_string(row) +
                        " column '" + col + "'");
    return v;
}

void format_value(std::string& out, double v) {
    if (Panel::is_absent(v)) {
        out += "nan";
        return;
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    out += buf;
}

}  // namespace

Panel::Panel(std::vector<std::string> entities,
             std::vector<int> times,
             std::vector<std::pair<std::string, Eigen::VectorXd>> columns,
             std::vector<int> cluster_of_entity)
    : entities_(std::move(entities)), times_(std::move(times)) {
    if (entities_.empty()) throw DataError("panel has no entities");
    if (times_.empty()) throw DataError("panel has no periods");
    for (std::size_t j = 1; j < times_.size(); ++j)
        if (times_[j] != times_[j - 1] + 1)
            throw DataError("panel years must be consecutive; gap between " +
                            std::to_string(times_[j - 1]) + " and " + std::to_string(times_[j]));
    {
        std::unordered_set<std::string> seen;
        for (const auto& e : entities_)
            if (!seen.insert(e).second) throw DataError("duplicate entity id '" + e + "'");
    }
    const std::size_t n = n_cells();
    std::unordered_set<std::string> seen_cols;
    for (auto& [name, values] : columns) {
        if (name == "entity" || name == "year")
            throw DataError("column name '" + name + "' is reserved");
        if (!seen_cols.insert(name).second) throw DataError("duplicate column '" + name + "'");
        if (static_cast<std::size_t>(values.size()) != n)
            throw DataError("column '" + name + "' has " + std::to_string(values.size()) +
                            " cells, expected " + std::to_string(n));
        names_.push_back(name);
        cols_.push_back(std::move(values));
    }
    if (cluster_of_entity.empty()) {
        cluster_.resize(entities_.size());
        for (std::size_t i = 0; i < entities_.size(); ++i) cluster_[i] = static_cast<int>(i);
    } else {
        if (cluster_of_entity.size() != entities_.size())
            throw DataError("cluster assignment size does not match entity count");
        for (int c : cluster_of_entity)
            if (c < 0) throw DataError("cluster ids must be non-negative");
        cluster_ = std::move(cluster_of_entity);
    }
}

int Panel::n_clusters() const {
    std::set<int> distinct(cluster_.begin(), cluster_.end());
    return static_cast<int>(distinct.size());
}

bool Panel::has_column(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const Eigen::VectorXd& Panel::column(const std::string& name) const {
    for (std::size_t j = 0; j < names_.size(); ++j)
        if (names_[j] == name) return cols_[j];
    throw DataError("unknown column '" + name + "'");
}

double Panel::value(const std::string& name, std::size_t entity, std::size_t time) const {
    return column(name)(static_cast<Eigen::Index>(cell(entity, time)));
}

std::size_t Panel::entity_index(const std::string& name) const {
    for (std::size_t i = 0; i < entities_.size(); ++i)
        if (entities_[i] == name) return i;
    throw DataError("unknown entity '" + name + "'");
}

bool Panel::is_absent(double v) { return std::isnan(v); }

Panel Panel::with_column(const std::string& name, Eigen::VectorXd values) const {
    std::vector<std::pair<std::string, Eigen::VectorXd>> columns;
    columns.reserve(cols_.size() + 1);
    for (std::size_t j = 0; j < names_.size(); ++j) columns.emplace_back(names_[j], cols_[j]);
    columns.emplace_back(name, std::move(values));
    return Panel(entities_, times_, std::move(columns), cluster_);
}

Panel Panel::with_clusters(std::vector<int> cluster_of_entity) const {
    std::vector<std::pair<std::string, Eigen::VectorXd>> columns;
    for (std::size_t j = 0; j < names_.size(); ++j) columns.emplace_back(names_[j], cols_[j]);
    return Panel(entities_, times_, std::move(columns), std::move(cluster_of_entity));
}

Panel Panel::add_year_dummies() const {
    Panel out = *this;
    for (std::size_t t = 1; t < times_.size(); ++t) {
        Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_cells()));
        for (std::size_t i = 0; i < entities_.size(); ++i)
            d(static_cast<Eigen::Index>(cell(i, t))) = 1.0;
        out = out.with_column("year_" + std::to_string(times_[t]), std::move(d));
    }
    return out;
}

std::vector<std::string> Panel::year_dummy_names() const {
    std::vector<std::string> out;
    for (std::size_t t = 1; t < times_.size(); ++t)
        out.push_back("year_" + std::to_string(times_[t]));
    return out;
}

Panel Panel::add_lag(const std::string& source, const std::string& name) const {
    const Eigen::VectorXd& src = column(source);
    Eigen::VectorXd lagged(static_cast<Eigen::Index>(n_cells()));
    for (std::size_t i = 0; i < entities_.size(); ++i) {
        lagged(static_cast<Eigen::Index>(cell(i, 0))) = kAbsent;
        for (std::size_t t = 1; t < times_.size(); ++t)
            lagged(static_cast<Eigen::Index>(cell(i, t))) =
                src(static_cast<Eigen::Index>(cell(i, t - 1)));
    }
    return with_column(name, std::move(lagged));
}

Panel Panel::restrict_to_complete_window(const std::vector<std::string>& columns) const {
    const std::size_t T = times_.size();
    std::vector<char> complete(T, 1);
    for (const auto& name : columns) {
        const Eigen::VectorXd& col = column(name);
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t i = 0; i < entities_.size(); ++i) {
                if (is_absent(col(static_cast<Eigen::Index>(cell(i, t))))) {
                    complete[t] = 0;
                    break;
                }
            }
        }
    }
    std::size_t lo = 0;
    while (lo < T && !complete[lo]) ++lo;
    if (lo == T) throw DataError("no period where all requested columns are present");
    std::size_t hi = T;
    while (hi > lo && !complete[hi - 1]) --hi;
    for (std::size_t t = lo; t < hi; ++t)
        if (!complete[t])
            throw DataError("absent cells in year " + std::to_string(times_[t]) +
                            " are interior, not confined to the panel edges");
    return restrict_to_years(times_[lo], times_[hi - 1]);
}

Panel Panel::restrict_to_years(int from, int to) const {
    if (from > to) throw ConfigError("year window is empty: " + std::to_string(from) + ":" + std::to_string(to));
    std::vector<std::size_t> keep;
    for (std::size_t t = 0; t < times_.size(); ++t)
        if (times_[t] >= from && times_[t] <= to) keep.push_back(t);
    if (keep.empty())
        throw DataError("no panel years inside window " + std::to_string(from) + ":" + std::to_string(to));
    std::vector<int> new_times;
    for (std::size_t t : keep) new_times.push_back(times_[t]);
    std::vector<std::pair<std::string, Eigen::VectorXd>> columns;
    for (std::size_t j = 0; j < names_.size(); ++j) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(entities_.size() * keep.size()));
        Eigen::Index r = 0;
        for (std::size_t i = 0; i < entities_.size(); ++i)
            for (std::size_t t : keep)
                v(r++) = cols_[j](static_cast<Eigen::Index>(cell(i, t)));
        columns.emplace_back(names_[j], std::move(v));
    }
    return Panel(entities_, std::move(new_times), std::move(columns), cluster_);
}

Panel Panel::subset_entities(const std::vector<std::size_t>& indices) const {
    if (indices.empty()) throw DataError("entity subset is empty");
    for (std::size_t i : indices)
        if (i >= entities_.size())
            throw ConfigError("entity index " + std::to_string(i) + " out of range");
    const std::size_t T = times_.size();
    std::vector<std::string> new_entities;
    std::unordered_map<std::string, int> copies;
    for (std::size_t i : indices) {
        int& c = copies[entities_[i]];
        new_entities.push_back(c == 0 ? entities_[i]
                                      : entities_[i] + "#" + std::to_string(c + 1));
        ++c;
    }
    std::vector<std::pair<std::string, Eigen::VectorXd>> columns;
    for (std::size_t j = 0; j < names_.size(); ++j) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(indices.size() * T));
        Eigen::Index r = 0;
        for (std::size_t i : indices)
            for (std::size_t t = 0; t < T; ++t)
                v(r++) = cols_[j](static_cast<Eigen::Index>(cell(i, t)));
        columns.emplace_back(names_[j], std::move(v));
    }
    // Fresh clustering: each resampled entity is its own cluster.
    return Panel(std::move(new_entities), times_, std::move(columns));
}

void Panel::write_csv(std::ostream& out) const {
    std::string line = "entity,year";
    for (const auto& n : names_) line += "," + n;
    line += "\n";
    out << line;
    for (std::size_t i = 0; i < entities_.size(); ++i) {
        for (std::size_t t = 0; t < times_.size(); ++t) {
            line = entities_[i] + "," + std::to_string(times_[t]);
            for (std::size_t j = 0; j < cols_.size(); ++j) {
                line += ",";
                format_value(line, cols_[j](static_cast<Eigen::Index>(cell(i, t))));
            }
            line += "\n";
            out << line;
        }
    }
}

void FeatureSpec::validate(const Panel& p) const {
    if (outcome.empty()) throw ConfigError("feature spec: outcome column not set");
    if (endogenous.empty()) throw ConfigError("feature spec: endogenous column not set");
    if (instruments.empty()) throw ConfigError("feature spec: at least one instrument required");
    std::vector<std::string> all = {outcome, endogenous};
    all.insert(all.end(), instruments.begin(), instruments.end());
    all.insert(all.end(), controls.begin(), controls.end());
    std::unordered_set<std::string> seen;
    for (const auto& name : all) {
        if (!p.has_column(name)) throw ConfigError("feature spec names unknown column '" + name + "'");
        if (!seen.insert(name).second)
            throw ConfigError("feature spec assigns column '" + name + "' to more than one role");
    }
}

Panel load_panel(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty input: missing CSV header");
    const std::vector<std::string> header = split_csv_line(line);
    std::size_t entity_col = header.size(), year_col = header.size();
    std::vector<std::string> value_names;
    std::vector<std::size_t> value_cols;
    {
        std::unordered_set<std::string> seen;
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (header[j].empty()) throw DataError("empty column name in CSV header");
            if (!seen.insert(header[j]).second)
                throw DataError("duplicate column '" + header[j] + "' in CSV header");
            if (header[j] == "entity") entity_col = j;
            else if (header[j] == "year") year_col = j;
            else {
                value_names.push_back(header[j]);
                value_cols.push_back(j);
            }
        }
    }
    if (entity_col == header.size()) throw DataError("CSV header lacks an 'entity' column");
    if (year_col == header.size()) throw DataError("CSV header lacks a 'year' column");

    struct Row {
        std::string entity;
        int year;
        std::vector<double> values;
    };
    std::vector<Row> rows;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        ++row_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw DataError("data row " + std::to_string(row_no) + " has " +
                            std::to_string(fields.size()) + " fields, header has " +
                            std::to_string(header.size()));
        Row r;
        r.entity = fields[entity_col];
        if (r.entity.empty())
            throw DataError("empty entity id at data row " + std::to_string(row_no));
        {
            const std::string ys = fields[year_col];
            char* end = nullptr;
            const long y = std::strtol(ys.c_str(), &end, 10);
            if (ys.empty() || end != ys.c_str() + ys.size())
                throw DataError("non-integer year '" + ys + "' at data row " + std::to_string(row_no));
            r.year = static_cast<int>(y);
        }
        for (std::size_t j = 0; j < value_cols.size(); ++j)
            r.values.push_back(parse_number(fields[value_cols[j]], row_no, value_names[j]));
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw DataError("CSV contains a header but no data rows");

    std::set<std::string> entity_set;
    std::set<int> year_set;
    for (const auto& r : rows) {
        entity_set.insert(r.entity);
        year_set.insert(r.year);
    }
    std::vector<std::string> entities(entity_set.begin(), entity_set.end());
    std::vector<int> times(year_set.begin(), year_set.end());
    for (std::size_t j = 1; j < times.size(); ++j)
        if (times[j] != times[j - 1] + 1)
            throw DataError("panel years must be consecutive; gap between " +
                            std::to_string(times[j - 1]) + " and " + std::to_string(times[j]));

    std::unordered_map<std::string, std::size_t> entity_ix;
    for (std::size_t i = 0; i < entities.size(); ++i) entity_ix[entities[i]] = i;
    std::unordered_map<int, std::size_t> time_ix;
    for (std::size_t t = 0; t < times.size(); ++t) time_ix[times[t]] = t;

    const std::size_t n = entities.size() * times.size();
    std::vector<Eigen::VectorXd> cols(value_names.size(),
                                      Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), kAbsent));
    std::vector<char> filled(n, 0);
    for (const auto& r : rows) {
        const std::size_t c = entity_ix[r.entity] * times.size() + time_ix[r.year];
        if (filled[c]) throw DataError("duplicate row for " + cell_name(r.entity, r.year));
        filled[c] = 1;
        for (std::size_t j = 0; j < cols.size(); ++j)
            cols[j](static_cast<Eigen::Index>(c)) = r.values[j];
    }
    for (std::size_t i = 0; i < entities.size(); ++i)
        for (std::size_t t = 0; t < times.size(); ++t)
            if (!filled[i * times.size() + t])
                throw DataError("unbalanced panel: missing row for " + cell_name(entities[i], times[t]));

    std::vector<std::pair<std::string, Eigen::VectorXd>> columns;
    for (std::size_t j = 0; j < value_names.size(); ++j)
        columns.emplace_back(value_names[j], std::move(cols[j]));
    return Panel(std::move(entities), std::move(times), std::move(columns));
}

FilterResult filter_nonzero_outcome(const Panel& p, const std::string& outcome) {
    const Eigen::VectorXd& y = p.column(outcome);
    const std::size_t T = p.n_times();
    std::vector<std::size_t> keep;
    std::vector<std::string> dropped;
    for (std::size_t i = 0; i < p.n_entities(); ++i) {
        bool informative = false;
        for (std::size_t t = 0; t < T; ++t) {
            const double v = y(static_cast<Eigen::Index>(p.cell(i, t)));
            if (Panel::is_absent(v))
                throw DataError("outcome '" + outcome + "' absent at " +
                                cell_name(p.entities()[i], p.times()[t]));
            if (v < 0 || std::abs(v - std::round(v)) > 1e-9)
                throw DataError("outcome '" + outcome + "' must hold non-negative integers; found " +
                                std::to_string(v) + " at " + cell_name(p.entities()[i], p.times()[t]));
            if (v > 0) informative = true;
        }
        if (informative) keep.push_back(i);
        else dropped.push_back(p.entities()[i]);
    }
    if (keep.empty())
        throw DataError("every entity has an all-zero outcome '" + outcome + "'; nothing to estimate");
    FilterResult out{keep.size() == p.n_entities() ? p : p.subset_entities(keep),
                     static_cast<double>(dropped.size()) / static_cast<double>(p.n_entities()),
                     std::move(dropped)};
    if (keep.size() < p.n_entities()) {
        // subset_entities resets clusters; restore the original assignment.
        std::vector<int> clusters;
        for (std::size_t i : keep) clusters.push_back(p.cluster_of_entity()[i]);
        out.panel = out.panel.with_clusters(std::move(clusters));
    }
    return out;
}

double normalize_recalls(double recalls, double n_products) {
    if (Panel::is_absent(recalls) || Panel::is_absent(n_products)) return kAbsent;
    if (recalls < 0) throw DataError("recall count must be non-negative; found " + std::to_string(recalls));
    if (n_products < 0) throw DataError("product count must be non-negative; found " + std::to_string(n_products));
    if (recalls == 0) return 0.0;
    if (n_products == 0)
        throw DataError("positive recalls with an empty product roster");
    return recalls / n_products * 100.0;
}

Panel add_normalized_recalls(const Panel& p, const std::string& recalls,
                             const std::string& n_products, const std::string& name) {
    const Eigen::VectorXd& r = p.column(recalls);
    const Eigen::VectorXd& np = p.column(n_products);
    Eigen::VectorXd out(r.size());
    for (Eigen::Index c = 0; c < r.size(); ++c) out(c) = normalize_recalls(r(c), np(c));
    return p.with_column(name, std::move(out));
}

double hhi(const Eigen::VectorXd& shares) {
    if (shares.size() == 0) throw DataError("hhi: empty share vector");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < shares.size(); ++i) {
        if (shares(i) < 0) throw DataError("hhi: negative share");
        sum += shares(i);
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw DataError("hhi: shares sum to " + std::to_string(sum) + ", expected 1");
    return shares.squaredNorm();
}

double outflow_rate(double lost_next, double total_prev) {
    if (Panel::is_absent(lost_next) || Panel::is_absent(total_prev)) return kAbsent;
    if (lost_next < 0) throw DataError("lost-product count must be non-negative");
    if (total_prev <= 0) throw DataError("outflow rate undefined: prior-period roster is empty");
    return lost_next / total_prev;
}

Panel add_outflow_rate(const Panel& p, const std::string& lost_next,
                       const std::string& total, const std::string& name) {
    const Eigen::VectorXd& lost = p.column(lost_next);
    const Eigen::VectorXd& tot = p.column(total);
    const std::size_t T = p.n_times();
    Eigen::VectorXd out(static_cast<Eigen::Index>(p.n_cells()));
    for (std::size_t i = 0; i < p.n_entities(); ++i) {
        for (std::size_t t = 0; t < T; ++t) {
            const Eigen::Index c = static_cast<Eigen::Index>(p.cell(i, t));
            if (t == 0 || t + 1 == T) {
                out(c) = kAbsent;  // needs both a prior roster and a next period
                continue;
            }
            const double prev = tot(static_cast<Eigen::Index>(p.cell(i, t - 1)));
            try {
                out(c) = outflow_rate(lost(c), prev);
            } catch (const DataError& e) {
                throw DataError(std::string(e.what()) + " at " +
                                cell_name(p.entities()[i], p.times()[t]));
            }
        }
    }
    return p.with_column(name, std::move(out));
}

Eigen::VectorXd detrend_log_diff(const Eigen::VectorXd& series) {
    if (series.size() < 2) throw DataError("log-difference needs at least two observations");
    for (Eigen::Index t = 0; t < series.size(); ++t)
        if (!(series(t) > 0))
            throw DataError("log-difference requires strictly positive values; found " +
                            std::to_string(series(t)));
    Eigen::VectorXd out(series.size() - 1);
    for (Eigen::Index t = 0; t + 1 < series.size(); ++t)
        out(t) = std::log(series(t + 1)) - std::log(series(t));
    return out;
}

Panel add_detrended_log(const Panel& p, const std::string& source, const std::string& name) {
    const Eigen::VectorXd& src = p.column(source);
    const std::size_t T = p.n_times();
    Eigen::VectorXd out(static_cast<Eigen::Index>(p.n_cells()));
    for (std::size_t i = 0; i < p.n_entities(); ++i) {
        out(static_cast<Eigen::Index>(p.cell(i, 0))) = kAbsent;
        for (std::size_t t = 1; t < T; ++t) {
            const double cur = src(static_cast<Eigen::Index>(p.cell(i, t)));
            const double prev = src(static_cast<Eigen::Index>(p.cell(i, t - 1)));
            if (Panel::is_absent(cur) || Panel::is_absent(prev)) {
                out(static_cast<Eigen::Index>(p.cell(i, t))) = kAbsent;
                continue;
            }
            if (!(cur > 0) || !(prev > 0))
                throw DataError("log-difference requires strictly positive values at " +
                                cell_name(p.entities()[i], p.times()[t]));
            out(static_cast<Eigen::Index>(p.cell(i, t))) = std::log(cur) - std::log(prev);
        }
    }
    return p.with_column(name, std::move(out));
}

Panel add_log(const Panel& p, const std::string& source, const std::string& name) {
    const Eigen::VectorXd& src = p.column(source);
    Eigen::VectorXd out(src.size());
    for (std::size_t i = 0; i < p.n_entities(); ++i) {
        for (std::size_t t = 0; t < p.n_times(); ++t) {
            const Eigen::Index c = static_cast<Eigen::Index>(p.cell(i, t));
            if (Panel::is_absent(src(c))) {
                out(c) = kAbsent;
                continue;
            }
            if (!(src(c) > 0))
                throw DataError("log requires strictly positive values; found " +
                                std::to_string(src(c)) + " at " +
                                cell_name(p.entities()[i], p.times()[t]));
            out(c) = std::log(src(c));
        }
    }
    return p.with_column(name, std::move(out));
}

DemeanResult within_demean(const Eigen::MatrixXd& columns, std::size_t n_entities, std::size_t n_times) {
    if (n_entities == 0 || n_times == 0) throw DataError("within_demean: empty panel shape");
    if (static_cast<std::size_t>(columns.rows()) != n_entities * n_times)
        throw DataError("within_demean: row count does not match panel shape");
    DemeanResult res;
    res.demeaned = columns;
    res.entity_means.resize(static_cast<Eigen::Index>(n_entities), columns.cols());
    const auto T = static_cast<Eigen::Index>(n_times);
    for (std::size_t i = 0; i < n_entities; ++i) {
        const auto r0 = static_cast<Eigen::Index>(i) * T;
        const Eigen::RowVectorXd mean = columns.middleRows(r0, T).colwise().mean();
        res.entity_means.row(static_cast<Eigen::Index>(i)) = mean;
        res.demeaned.middleRows(r0, T).rowwise() -= mean;
    }
    return res;
}

}  // namespace paneliv
