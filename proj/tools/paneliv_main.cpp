// Command-line front end: reproducible batch runs over the estimation
// library.  Every subcommand reads CSV inputs, writes JSON/CSV/SVG artifacts
// into --out, and finishes with a run.json manifest (version, effective
// config, config hash, seed).  Artifacts are byte-identical across reruns
// with the same inputs, config, and seed; no timestamps are embedded.

#include <fcntl.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "paneliv/cfiv.hpp"
#include "paneliv/dgp.hpp"
#include "paneliv/dyngmm.hpp"
#include "paneliv/errors.hpp"
#include "paneliv/eventstudy.hpp"
#include "paneliv/panel.hpp"
#include "paneliv/report.hpp"
#include "paneliv/survival.hpp"
#include "paneliv/svg.hpp"
#include "paneliv/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace paneliv;

namespace {

// ---------------------------------------------------------------------------
// Output directory with a lockfile: one run owns one directory at a time.

class OutputDir {
  public:
    explicit OutputDir(const std::string& dir) : dir_(dir) {
        if (dir.empty()) throw ConfigError("--out is required");
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
        lock_ = dir_ / ".lock";
        const int fd = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0)
            throw ConfigError("output directory '" + dir + "' is locked by another run; remove " +
                              lock_.string() + " if that run is gone");
        ::close(fd);
    }
    ~OutputDir() {
        std::error_code ec;
        fs::remove(lock_, ec);
    }
    OutputDir(const OutputDir&) = delete;
    OutputDir& operator=(const OutputDir&) = delete;

    fs::path file(const std::string& name) const { return dir_ / name; }

  private:
    fs::path dir_;
    fs::path lock_;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void write_json_file(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Config handling: JSON file merged with flag overrides; flags win.

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
        json j = json::parse(in);
        if (!j.is_object()) throw ConfigError("config file '" + path + "' must hold a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

struct Merged {
    json cfg = json::object();

    template <typename T>
    void override_if(const CLI::Option* opt, const std::string& key, const T& value) {
        if (opt != nullptr && opt->count() > 0) cfg[key] = value;
    }
    bool has(const std::string& key) const { return cfg.contains(key); }
    template <typename T>
    T get(const std::string& key, const T& fallback) const {
        if (!cfg.contains(key)) return fallback;
        try {
            return cfg.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key '" + key + "' has the wrong type");
        }
    }
};

struct WindowRange {
    bool set = false;
    int from = 0;
    int to = 0;
};

WindowRange parse_window(const std::string& text) {
    WindowRange w;
    if (text.empty()) return w;
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw ConfigError("--window expects FROM:TO, got '" + text + "'");
    try {
        std::size_t a = 0, b = 0;
        w.from = std::stoi(text.substr(0, colon), &a);
        w.to = std::stoi(text.substr(colon + 1), &b);
        if (a != colon || b != text.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw ConfigError("--window expects integer years FROM:TO, got '" + text + "'");
    }
    if (w.from > w.to)
        throw ConfigError("--window is empty: " + std::to_string(w.from) + " > " +
                          std::to_string(w.to));
    w.set = true;
    return w;
}

int threads_from_env() {
    const char* raw = std::getenv("PANELIV_THREADS");
    if (raw == nullptr || *raw == '\0') return 1;
    char* end = nullptr;
    const long n = std::strtol(raw, &end, 10);
    if (end == raw || *end != '\0' || n < 1)
        throw ConfigError("PANELIV_THREADS must be a positive integer, got '" + std::string(raw) +
                          "'");
    return static_cast<int>(n);
}

Panel load_panel_file(const std::string& path) {
    if (path.empty()) throw ConfigError("--input is required");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open input '" + path + "'");
    return load_panel(in);
}

Panel apply_window(Panel p, const WindowRange& w) {
    if (!w.set) return p;
    return p.restrict_to_years(w.from, w.to);
}

void write_manifest(const OutputDir& out, const std::string& command,
                    const std::vector<std::string>& inputs, const json& config,
                    std::uint64_t seed, int threads, const std::vector<std::string>& artifacts) {
    json manifest{{"version", kVersion},
                  {"command", command},
                  {"inputs", inputs},
                  {"config", config},
                  {"config_hash", std::to_string(fnv1a(config.dump()))},
                  {"seed", seed},
                  {"threads", threads},
                  {"artifacts", artifacts}};
    write_json_file(out.file("run.json"), manifest);
}

// ---------------------------------------------------------------------------
// Small CSV readers for the non-panel inputs.

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::map<std::string, int> load_events(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open events file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("events file '" + path + "' is empty");
    const std::vector<std::string> header = split_csv_line(line);
    int col_entity = -1, col_year = -1;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == "entity") col_entity = static_cast<int>(j);
        if (header[j] == "year") col_year = static_cast<int>(j);
    }
    if (col_entity < 0 || col_year < 0)
        throw DataError("events file needs 'entity' and 'year' columns; header was '" + line + "'");

    std::map<std::string, int> events;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw DataError("events file line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(header.size()));
        const std::string& entity = fields[static_cast<std::size_t>(col_entity)];
        const std::string& year_text = fields[static_cast<std::size_t>(col_year)];
        try {
            std::size_t used = 0;
            const int year = std::stoi(year_text, &used);
            if (used != year_text.size()) throw std::invalid_argument("trailing");
            if (!events.emplace(entity, year).second)
                throw DataError("events file lists entity '" + entity + "' twice");
        } catch (const DataError&) {
            throw;
        } catch (const std::exception&) {
            throw DataError("events file line " + std::to_string(line_no) +
                            ": year '" + year_text + "' is not an integer");
        }
    }
    if (events.empty()) throw DataError("events file '" + path + "' has no rows");
    return events;
}

struct DurationTable {
    std::vector<double> duration;
    std::vector<int> died;
    std::vector<std::string> group;  // empty when no group column
    std::vector<std::string> group_order;
};

DurationTable load_durations(const std::string& path, const std::string& duration_col,
                             const std::string& event_col, const std::string& group_col) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open input '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("durations file '" + path + "' is empty");
    const std::vector<std::string> header = split_csv_line(line);
    int cd = -1, ce = -1, cg = -1;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == duration_col) cd = static_cast<int>(j);
        if (header[j] == event_col) ce = static_cast<int>(j);
        if (!group_col.empty() && header[j] == group_col) cg = static_cast<int>(j);
    }
    if (cd < 0) throw DataError("durations file lacks column '" + duration_col + "'");
    if (ce < 0) throw DataError("durations file lacks column '" + event_col + "'");

    DurationTable out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw DataError("durations file line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(header.size()));
        const std::string& dtext = fields[static_cast<std::size_t>(cd)];
        const std::string& etext = fields[static_cast<std::size_t>(ce)];
        char* end = nullptr;
        const double d = std::strtod(dtext.c_str(), &end);
        if (end == dtext.c_str() || *end != '\0')
            throw DataError("durations file line " + std::to_string(line_no) + ": '" + dtext +
                            "' is not a number");
        if (etext != "0" && etext != "1")
            throw DataError("durations file line " + std::to_string(line_no) + ": event flag '" +
                            etext + "' must be 0 or 1");
        out.duration.push_back(d);
        out.died.push_back(etext == "1" ? 1 : 0);
        if (cg >= 0) {
            const std::string& g = fields[static_cast<std::size_t>(cg)];
            out.group.push_back(g);
            bool seen = false;
            for (const auto& existing : out.group_order) seen = seen || existing == g;
            if (!seen) out.group_order.push_back(g);
        }
    }
    if (out.duration.empty()) throw DataError("durations file '" + path + "' has no rows");
    return out;
}

// ---------------------------------------------------------------------------
// Shared pieces of the instrumental-variable subcommands.

FeatureSpec spec_from(const Merged& m, const Panel& p) {
    FeatureSpec spec;
    spec.outcome = m.get<std::string>("outcome", "trials");
    spec.endogenous = m.get<std::string>("endogenous", "log_market");
    spec.instruments = m.get<std::vector<std::string>>(
        "instruments", {"recalls_norm", "recalls_norm_lag"});
    if (m.has("controls")) {
        spec.controls = m.get<std::vector<std::string>>("controls", {});
    } else {
        // Default: every column named ctrl* in panel order.
        for (const auto& name : p.column_names())
            if (name.rfind("ctrl", 0) == 0) spec.controls.push_back(name);
    }
    spec.year_dummies = m.get<bool>("year_dummies", true);
    return spec;
}

json spec_json(const FeatureSpec& spec) {
    return json{{"outcome", spec.outcome},
                {"endogenous", spec.endogenous},
                {"instruments", spec.instruments},
                {"controls", spec.controls},
                {"year_dummies", spec.year_dummies}};
}

DGPParams dgp_from(const Merged& m) {
    DGPParams p;
    p.n_entities = m.get<std::size_t>("entities", p.n_entities);
    p.n_periods = m.get<std::size_t>("periods", p.n_periods);
    p.beta1 = m.get<double>("beta1", p.beta1);
    p.pi1 = m.get<double>("pi1", p.pi1);
    p.pi2 = m.get<double>("pi2", p.pi2);
    p.endo_corr = m.get<double>("endo_corr", p.endo_corr);
    p.sigma_kappa = m.get<double>("sigma_kappa", p.sigma_kappa);
    p.sigma_u = m.get<double>("sigma_u", p.sigma_u);
    p.sigma_c = m.get<double>("sigma_c", p.sigma_c);
    p.sigma_c2 = m.get<double>("sigma_c2", p.sigma_c2);
    p.hetero_corr = m.get<double>("hetero_corr", p.hetero_corr);
    p.base_market = m.get<double>("base_market", p.base_market);
    p.control_coef = m.get<double>("control_coef", p.control_coef);
    p.control_loading_market = m.get<double>("control_loading_market", p.control_loading_market);
    p.n_controls = m.get<int>("n_controls", p.n_controls);
    p.year_effect_scale = m.get<double>("year_effect_scale", p.year_effect_scale);
    p.recall_intensity = m.get<double>("recall_intensity", p.recall_intensity);
    p.seed = m.get<std::uint64_t>("seed", p.seed);
    return p;
}

json dgp_json(const DGPParams& p) {
    return json{{"entities", p.n_entities},
                {"periods", p.n_periods},
                {"beta1", p.beta1},
                {"pi1", p.pi1},
                {"pi2", p.pi2},
                {"endo_corr", p.endo_corr},
                {"sigma_kappa", p.sigma_kappa},
                {"sigma_u", p.sigma_u},
                {"sigma_c", p.sigma_c},
                {"sigma_c2", p.sigma_c2},
                {"hetero_corr", p.hetero_corr},
                {"base_market", p.base_market},
                {"control_coef", p.control_coef},
                {"control_loading_market", p.control_loading_market},
                {"n_controls", p.n_controls},
                {"year_effect_scale", p.year_effect_scale},
                {"recall_intensity", p.recall_intensity},
                {"seed", p.seed}};
}

std::string window_string(const WindowRange& w) {
    return std::to_string(w.from) + ":" + std::to_string(w.to);
}

// Sample construction shared by first-stage and the full pipeline reports.
struct FirstStageRun {
    FEOLSFit fit;
    ClusteredCov cov;
    FTestResult f;
    double dropped_fraction = 0.0;
};

FirstStageRun run_first_stage(const Panel& p, const FeatureSpec& spec) {
    spec.validate(p);
    std::vector<std::string> needed = {spec.outcome, spec.endogenous};
    needed.insert(needed.end(), spec.instruments.begin(), spec.instruments.end());
    needed.insert(needed.end(), spec.controls.begin(), spec.controls.end());
    const Panel windowed = p.restrict_to_complete_window(needed);
    FilterResult filtered = filter_nonzero_outcome(windowed, spec.outcome);

    std::vector<std::string> regs = spec.instruments;
    regs.insert(regs.end(), spec.controls.begin(), spec.controls.end());
    Panel ready = filtered.panel;
    if (spec.year_dummies) {
        const auto dummies = ready.year_dummy_names();
        ready = ready.add_year_dummies();
        regs.insert(regs.end(), dummies.begin(), dummies.end());
    }
    FirstStageRun out{fit_within_ols(ready, spec.endogenous, regs), {}, {}, filtered.dropped_fraction};
    out.cov = cluster_robust_cov(out.fit);
    out.f = instrument_f_stat(out.fit, out.cov, spec.instruments);
    return out;
}

// ---------------------------------------------------------------------------
// Subcommand runners.

void run_simulate(const OutputDir& out, const Merged& m, const std::string& config_path) {
    const DGPParams params = dgp_from(m);
    const SimulatedPanel sim = simulate_panel(params);
    {
        std::ofstream csv(out.file("panel.csv"), std::ios::binary);
        if (!csv) throw DataError("cannot write panel.csv");
        sim.panel.write_csv(csv);
    }
    const json cfg = dgp_json(params);
    write_json_file(out.file("config.json"), cfg);
    std::vector<std::string> inputs;
    if (!config_path.empty()) inputs.push_back(config_path);
    write_manifest(out, "simulate", inputs, cfg, params.seed, threads_from_env(),
                   {"panel.csv", "config.json"});
}

void run_first_stage_cmd(const OutputDir& out, const Merged& m, const std::string& input,
                         const std::string& config_path, const WindowRange& window,
                         double alpha) {
    const Panel panel = apply_window(load_panel_file(input), window);
    const FeatureSpec spec = spec_from(m, panel);
    const FirstStageRun r = run_first_stage(panel, spec);

    json report{{"spec", spec_json(spec)},
                {"first_stage", to_json(r.fit, r.cov)},
                {"instrument_f", to_json(r.f)},
                {"dropped_all_zero_fraction", r.dropped_fraction},
                {"conventions", conventions_json(alpha)}};
    write_json_file(out.file("first_stage.json"), report);
    {
        std::ofstream csv(out.file("first_stage.csv"), std::ios::binary);
        write_coefficients_csv(csv, r.fit.regressors, r.fit.coef, r.cov.cov);
    }

    json cfg = m.cfg;
    cfg["spec"] = spec_json(spec);
    if (window.set) cfg["window"] = window_string(window);
    std::vector<std::string> inputs = {input};
    if (!config_path.empty()) inputs.push_back(config_path);
    write_manifest(out, "first-stage", inputs, cfg, 0, threads_from_env(),
                   {"first_stage.json", "first_stage.csv"});
}

void run_cf_poisson(const OutputDir& out, const Merged& m, const std::string& input,
                    const std::string& config_path, const WindowRange& window, double alpha,
                    std::size_t bootstrap_reps, std::uint64_t seed) {
    const Panel panel = apply_window(load_panel_file(input), window);
    const FeatureSpec spec = spec_from(m, panel);
    CFIVOptions opts;
    opts.alpha = alpha;

    const CFIVResult r = run_cf_iv(panel, spec, opts);
    const NaivePoissonResult naive = run_naive_fe_poisson(panel, spec);
    json report = to_json(r);
    report["naive"] = to_json(naive);

    std::vector<std::string> artifacts = {"report.json", "first_stage.csv", "second_stage.csv"};
    if (bootstrap_reps > 0) {
        const BootstrapResult boot =
            bootstrap_instrument_tstat(panel, spec, bootstrap_reps, seed, opts);
        report["bootstrap"] = to_json(boot);
        std::ofstream csv(out.file("bootstrap.csv"), std::ios::binary);
        write_bootstrap_csv(csv, boot);
        artifacts.push_back("bootstrap.csv");
    }
    write_json_file(out.file("report.json"), report);
    {
        std::ofstream csv(out.file("first_stage.csv"), std::ios::binary);
        write_coefficients_csv(csv, r.first_stage.regressors, r.first_stage.coef, r.first_cov.cov);
    }
    {
        std::ofstream csv(out.file("second_stage.csv"), std::ios::binary);
        write_coefficients_csv(csv, r.second_stage.regressors, r.second_stage.coef,
                               r.second_cov.cov);
    }

    json cfg = m.cfg;
    cfg["spec"] = spec_json(spec);
    cfg["alpha"] = alpha;
    cfg["bootstrap_reps"] = bootstrap_reps;
    if (window.set) cfg["window"] = window_string(window);
    std::vector<std::string> inputs = {input};
    if (!config_path.empty()) inputs.push_back(config_path);
    write_manifest(out, "cf-poisson", inputs, cfg, seed, threads_from_env(), artifacts);
}

void run_event_study(const OutputDir& out, const Merged& m, const std::string& input,
                     const std::string& events_path, const std::string& config_path,
                     const WindowRange& window) {
    const Panel panel = apply_window(load_panel_file(input), window);
    const std::string outcome = m.get<std::string>("outcome", "growth");
    const std::string aggregate = m.get<std::string>("aggregate", "agg");
    const std::vector<std::string> controls = m.get<std::vector<std::string>>("controls", {});
    const bool year_dummies = m.get<bool>("year_dummies", true);
    const bool param_uncertainty = m.get<bool>("param_uncertainty", true);

    const PotentialFit fit =
        fit_potential(panel, outcome, aggregate, controls, year_dummies, param_uncertainty);
    const AVPanel av = abnormal_values(fit);
    const EventPanel ev = recenter_event_time(av, load_events(events_path));
    const EventCurve curve = aggregate_av(ev);

    json report{{"outcome", outcome},
                {"aggregate", aggregate},
                {"controls", controls},
                {"year_dummies", year_dummies},
                {"param_uncertainty", param_uncertainty},
                {"n_event_entities", ev.entities_kept.size()},
                {"benchmark", to_json(fit.ols, cluster_robust_cov(fit.ols))},
                {"curve", to_json(curve)},
                {"conventions", conventions_json(0.05)}};
    write_json_file(out.file("event_study.json"), report);
    {
        std::ofstream csv(out.file("event_curve.csv"), std::ios::binary);
        write_event_curve_csv(csv, curve);
    }
    write_text(out.file("event_curve.svg"), svg_event_curve(curve, "mean abnormal value"));

    json cfg = m.cfg;
    cfg["outcome"] = outcome;
    cfg["aggregate"] = aggregate;
    cfg["controls"] = controls;
    cfg["year_dummies"] = year_dummies;
    cfg["param_uncertainty"] = param_uncertainty;
    if (window.set) cfg["window"] = window_string(window);
    std::vector<std::string> inputs = {input, events_path};
    if (!config_path.empty()) inputs.push_back(config_path);
    write_manifest(out, "event-study", inputs, cfg, 0, threads_from_env(),
                   {"event_study.json", "event_curve.csv", "event_curve.svg"});
}

void run_survival(const OutputDir& out, const Merged& m, const std::string& input,
                  const std::string& config_path) {
    const std::string dcol = m.get<std::string>("duration_column", "duration");
    const std::string ecol = m.get<std::string>("event_column", "event");
    const std::string gcol = m.get<std::string>("group_column", "group");
    const DurationTable table = load_durations(input, dcol, ecol, gcol);

    std::vector<SurvivalCurve> curves;
    if (table.group.empty()) {
        curves.push_back(kaplan_meier(table.duration, table.died, "all"));
    } else {
        for (const auto& g : table.group_order) {
            std::vector<double> d;
            std::vector<int> e;
            for (std::size_t i = 0; i < table.duration.size(); ++i)
                if (table.group[i] == g) {
                    d.push_back(table.duration[i]);
                    e.push_back(table.died[i]);
                }
            curves.push_back(kaplan_meier(d, e, g));
        }
    }

    json jcurves = json::array();
    for (const auto& c : curves) jcurves.push_back(to_json(c));
    json report{{"curves", jcurves}, {"conventions", conventions_json(0.05)}};
    if (curves.size() == 2) report["comparison"] = to_json(compare_groups(curves[0], curves[1]));
    write_json_file(out.file("survival.json"), report);
    {
        std::ofstream csv(out.file("survival.csv"), std::ios::binary);
        write_survival_csv(csv, curves);
    }
    write_text(out.file("survival.svg"), svg_survival_curves(curves, "survival"));

    json cfg = m.cfg;
    cfg["duration_column"] = dcol;
    cfg["event_column"] = ecol;
    cfg["group_column"] = gcol;
    std::vector<std::string> inputs = {input};
    if (!config_path.empty()) inputs.push_back(config_path);
    write_manifest(out, "survival", inputs, cfg, 0, threads_from_env(),
                   {"survival.json", "survival.csv", "survival.svg"});
}

void run_gmm(const OutputDir& out, const Merged& m, const std::string& input,
             const std::string& config_path, const WindowRange& window) {
    const Panel panel = apply_window(load_panel_file(input), window);
    GmmSpec spec;
    spec.dependent = m.get<std::string>("dependent", "y");
    spec.exog = m.get<std::vector<std::string>>("exog", {});
    spec.lag_min = m.get<int>("lag_min", spec.lag_min);
    spec.lag_max = m.get<int>("lag_max", spec.lag_max);
    spec.intercept = m.get<bool>("intercept", true);
    const std::string collapse = m.get<std::string>("collapse", "auto");
    if (collapse == "auto") spec.collapse = GmmSpec::Collapse::Auto;
    else if (collapse == "on") spec.collapse = GmmSpec::Collapse::On;
    else if (collapse == "off") spec.collapse = GmmSpec::Collapse::Off;
    else throw ConfigError("collapse must be one of auto/on/off, got '" + collapse + "'");
    const std::string step_text = m.get<std::string>("step", "two");
    GmmStep step;
    if (step_text == "one") step = GmmStep::One;
    else if (step_text == "two") step = GmmStep::Two;
    else throw ConfigError("step must be 'one' or 'two', got '" + step_text + "'");

    const GMMFit fit = fit_system_gmm(panel, spec, step);

    HansenResult hansen;
    const HansenResult* hansen_ptr = nullptr;
    std::string hansen_note;
    try {
        hansen = hansen_j(fit);
        hansen_ptr = &hansen;
    } catch (const std::exception& e) {
        hansen_note = e.what();
    }
    std::vector<ARTestResult> ar;
    for (int order = 1; order <= 4; ++order) {
        try {
            ar.push_back(ar_test(fit, order));
        } catch (const DataError&) {
            break;  // panel too short for deeper orders
        } catch (const NumericalError&) {
            continue;
        }
    }

    json report = to_json(fit, hansen_ptr, ar);
    if (hansen_ptr == nullptr) {
        report["hansen_j"] = nullptr;
        report["hansen_note"] = hansen_note;
    }
    report["conventions"] = conventions_json(0.05);
    write_json_file(out.file("gmm.json"), report);
    {
        std::ofstream csv(out.file("gmm.csv"), std::ios::binary);
        write_coefficients_csv(csv, fit.coef_names, fit.coef, fit.vcov);
    }

    json cfg = m.cfg;
    cfg["dependent"] = spec.dependent;
    cfg["exog"] = spec.exog;
    cfg["lag_min"] = spec.lag_min;
    cfg["lag_max"] = spec.lag_max;
    cfg["intercept"] = spec.intercept;
    cfg["collapse"] = collapse;
    cfg["step"] = step_text;
    if (window.set) cfg["window"] = window_string(window);
    std::vector<std::string> inputs = {input};
    if (!config_path.empty()) inputs.push_back(config_path);
    write_manifest(out, "gmm", inputs, cfg, 0, threads_from_env(), {"gmm.json", "gmm.csv"});
}

void run_monte_carlo(const OutputDir& out, const Merged& m, const std::string& config_path,
                     std::size_t reps, const std::string& pipeline_text) {
    const DGPParams params = dgp_from(m);
    McPipeline pipeline;
    if (pipeline_text == "cf") pipeline = McPipeline::ControlFunction;
    else if (pipeline_text == "first-stage-f") pipeline = McPipeline::FirstStageF;
    else throw ConfigError("pipeline must be 'cf' or 'first-stage-f', got '" + pipeline_text + "'");

    const MCReport report = monte_carlo(params, pipeline, reps);
    write_json_file(out.file("mc.json"), to_json(report));
    {
        std::ofstream csv(out.file("mc_draws.csv"), std::ios::binary);
        write_mc_draws_csv(csv, report);
    }

    json cfg = dgp_json(params);
    cfg["reps"] = reps;
    cfg["pipeline"] = pipeline_text;
    std::vector<std::string> inputs;
    if (!config_path.empty()) inputs.push_back(config_path);
    write_manifest(out, "monte-carlo", inputs, cfg, params.seed, threads_from_env(),
                   {"mc.json", "mc_draws.csv"});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"panel instrumental-variables toolkit"};
    app.require_subcommand(1);

    // Shared option storage.  Each subcommand registers the flags it uses.
    std::string input, config_path, out_dir, window_text;
    std::uint64_t seed = 1;
    double alpha = 0.05;
    std::size_t reps = 0;

    std::string outcome, endogenous, aggregate, events_path;
    std::vector<std::string> instruments, controls, exog;
    bool no_year_dummies = false, no_param_uncertainty = false;

    auto add_common = [&](CLI::App* sub, bool with_input) {
        sub->add_option("--out", out_dir, "output directory (created; must not be locked)")
            ->required();
        sub->add_option("--config", config_path, "JSON config file; flags override its keys");
        if (with_input) sub->add_option("--input", input, "input CSV")->required();
        return sub;
    };

    // simulate ---------------------------------------------------------------
    CLI::App* sim = add_common(app.add_subcommand("simulate", "write a synthetic recall/trials panel"), false);
    std::size_t sim_entities = 0, sim_periods = 0;
    double sim_endo_corr = 0.0, sim_beta1 = 0.0;
    CLI::Option* o_sim_entities = sim->add_option("--entities", sim_entities, "number of entities");
    CLI::Option* o_sim_periods = sim->add_option("--periods", sim_periods, "number of periods");
    CLI::Option* o_sim_endo = sim->add_option("--endo-corr", sim_endo_corr, "corr(kappa, u)");
    CLI::Option* o_sim_beta1 = sim->add_option("--beta1", sim_beta1, "outcome elasticity");
    CLI::Option* o_sim_seed = sim->add_option("--seed", seed, "master seed");

    // first-stage ------------------------------------------------------------
    CLI::App* fst = add_common(app.add_subcommand("first-stage", "within regression of the endogenous column on the instruments"), true);
    CLI::Option* o_fst_outcome = fst->add_option("--outcome", outcome, "count outcome column");
    CLI::Option* o_fst_endo = fst->add_option("--endogenous", endogenous, "endogenous column");
    CLI::Option* o_fst_instr = fst->add_option("--instruments", instruments, "instrument columns");
    CLI::Option* o_fst_ctrl = fst->add_option("--controls", controls, "control columns");
    CLI::Option* o_fst_nody = fst->add_flag("--no-year-dummies", no_year_dummies, "omit year dummies");
    CLI::Option* o_fst_alpha = fst->add_option("--alpha", alpha, "significance level");
    CLI::Option* o_fst_window = fst->add_option("--window", window_text, "restrict to years FROM:TO");

    // cf-poisson -------------------------------------------------------------
    CLI::App* cfp = add_common(app.add_subcommand("cf-poisson", "two-step control-function count pipeline"), true);
    std::size_t bootstrap_reps = 0;
    CLI::Option* o_cfp_outcome = cfp->add_option("--outcome", outcome, "count outcome column");
    CLI::Option* o_cfp_endo = cfp->add_option("--endogenous", endogenous, "endogenous column");
    CLI::Option* o_cfp_instr = cfp->add_option("--instruments", instruments, "instrument columns");
    CLI::Option* o_cfp_ctrl = cfp->add_option("--controls", controls, "control columns");
    CLI::Option* o_cfp_nody = cfp->add_flag("--no-year-dummies", no_year_dummies, "omit year dummies");
    CLI::Option* o_cfp_alpha = cfp->add_option("--alpha", alpha, "significance level for the endogeneity verdict");
    CLI::Option* o_cfp_window = cfp->add_option("--window", window_text, "restrict to years FROM:TO");
    cfp->add_option("--bootstrap-reps", bootstrap_reps, "entity bootstrap replications (0 = off)");
    CLI::Option* o_cfp_seed = cfp->add_option("--seed", seed, "bootstrap seed");

    // event-study ------------------------------------------------------------
    CLI::App* evs = add_common(app.add_subcommand("event-study", "abnormal values around per-entity event years"), true);
    evs->add_option("--events", events_path, "CSV with entity,year rows")->required();
    CLI::Option* o_evs_outcome = evs->add_option("--outcome", outcome, "outcome column");
    CLI::Option* o_evs_agg = evs->add_option("--aggregate", aggregate, "reference aggregate column");
    CLI::Option* o_evs_ctrl = evs->add_option("--controls", controls, "control columns");
    CLI::Option* o_evs_nody = evs->add_flag("--no-year-dummies", no_year_dummies, "omit year dummies");
    CLI::Option* o_evs_nopu = evs->add_flag("--no-param-uncertainty", no_param_uncertainty,
                                            "forecast variance without the parameter term");
    CLI::Option* o_evs_window = evs->add_option("--window", window_text, "restrict to years FROM:TO");

    // survival ---------------------------------------------------------------
    CLI::App* surv = add_common(app.add_subcommand("survival", "product-limit survival curves by group"), true);
    std::string duration_col, event_col, group_col;
    CLI::Option* o_surv_d = surv->add_option("--duration-column", duration_col, "duration column name");
    CLI::Option* o_surv_e = surv->add_option("--event-column", event_col, "event flag column name");
    CLI::Option* o_surv_g = surv->add_option("--group-column", group_col, "group column name");

    // gmm --------------------------------------------------------------------
    CLI::App* gmm = add_common(app.add_subcommand("gmm", "dynamic panel system estimator"), true);
    std::string dependent, step_text;
    int lag_min = 0, lag_max = 0;
    bool collapse_on = false, collapse_off = false;
    CLI::Option* o_gmm_dep = gmm->add_option("--dependent", dependent, "dependent column");
    CLI::Option* o_gmm_exog = gmm->add_option("--exog", exog, "exogenous regressor columns");
    CLI::Option* o_gmm_lmin = gmm->add_option("--lag-min", lag_min, "shallowest instrument lag (>= 2)");
    CLI::Option* o_gmm_lmax = gmm->add_option("--lag-max", lag_max, "deepest instrument lag (0 = T-1)");
    gmm->add_flag("--collapse-instruments", collapse_on, "collapse the instrument matrix");
    gmm->add_flag("--no-collapse", collapse_off, "never collapse the instrument matrix");
    CLI::Option* o_gmm_step = gmm->add_option("--step", step_text, "one or two (default two)");
    CLI::Option* o_gmm_window = gmm->add_option("--window", window_text, "restrict to years FROM:TO");

    // monte-carlo ------------------------------------------------------------
    CLI::App* mc = add_common(app.add_subcommand("monte-carlo", "simulate-and-estimate study"), false);
    std::string pipeline_text = "cf";
    CLI::Option* o_mc_entities = mc->add_option("--entities", sim_entities, "number of entities");
    CLI::Option* o_mc_periods = mc->add_option("--periods", sim_periods, "number of periods");
    CLI::Option* o_mc_endo = mc->add_option("--endo-corr", sim_endo_corr, "corr(kappa, u)");
    CLI::Option* o_mc_beta1 = mc->add_option("--beta1", sim_beta1, "outcome elasticity");
    CLI::Option* o_mc_seed = mc->add_option("--seed", seed, "master seed");
    mc->add_option("--reps", reps, "replications (>= 50)")->required();
    mc->add_option("--pipeline", pipeline_text, "cf or first-stage-f");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 1;
    }

    try {
        Merged m;
        m.cfg = load_config(config_path);
        const WindowRange window =
            parse_window(window_text.empty() ? m.get<std::string>("window", "") : window_text);

        if (app.got_subcommand(sim)) {
            m.override_if(o_sim_entities, "entities", sim_entities);
            m.override_if(o_sim_periods, "periods", sim_periods);
            m.override_if(o_sim_endo, "endo_corr", sim_endo_corr);
            m.override_if(o_sim_beta1, "beta1", sim_beta1);
            m.override_if(o_sim_seed, "seed", seed);
            const OutputDir out(out_dir);
            run_simulate(out, m, config_path);
        } else if (app.got_subcommand(fst)) {
            m.override_if(o_fst_outcome, "outcome", outcome);
            m.override_if(o_fst_endo, "endogenous", endogenous);
            m.override_if(o_fst_instr, "instruments", instruments);
            m.override_if(o_fst_ctrl, "controls", controls);
            m.override_if(o_fst_nody, "year_dummies", !no_year_dummies);
            m.override_if(o_fst_alpha, "alpha", alpha);
            m.override_if(o_fst_window, "window", window_text);
            const OutputDir out(out_dir);
            run_first_stage_cmd(out, m, input, config_path, window,
                                m.get<double>("alpha", 0.05));
        } else if (app.got_subcommand(cfp)) {
            m.override_if(o_cfp_outcome, "outcome", outcome);
            m.override_if(o_cfp_endo, "endogenous", endogenous);
            m.override_if(o_cfp_instr, "instruments", instruments);
            m.override_if(o_cfp_ctrl, "controls", controls);
            m.override_if(o_cfp_nody, "year_dummies", !no_year_dummies);
            m.override_if(o_cfp_alpha, "alpha", alpha);
            m.override_if(o_cfp_window, "window", window_text);
            m.override_if(o_cfp_seed, "seed", seed);
            const OutputDir out(out_dir);
            run_cf_poisson(out, m, input, config_path, window, m.get<double>("alpha", 0.05),
                           bootstrap_reps, m.get<std::uint64_t>("seed", 1));
        } else if (app.got_subcommand(evs)) {
            m.override_if(o_evs_outcome, "outcome", outcome);
            m.override_if(o_evs_agg, "aggregate", aggregate);
            m.override_if(o_evs_ctrl, "controls", controls);
            m.override_if(o_evs_nody, "year_dummies", !no_year_dummies);
            m.override_if(o_evs_nopu, "param_uncertainty", !no_param_uncertainty);
            m.override_if(o_evs_window, "window", window_text);
            const OutputDir out(out_dir);
            run_event_study(out, m, input, events_path, config_path, window);
        } else if (app.got_subcommand(surv)) {
            m.override_if(o_surv_d, "duration_column", duration_col);
            m.override_if(o_surv_e, "event_column", event_col);
            m.override_if(o_surv_g, "group_column", group_col);
            const OutputDir out(out_dir);
            run_survival(out, m, input, config_path);
        } else if (app.got_subcommand(gmm)) {
            m.override_if(o_gmm_dep, "dependent", dependent);
            m.override_if(o_gmm_exog, "exog", exog);
            m.override_if(o_gmm_lmin, "lag_min", lag_min);
            m.override_if(o_gmm_lmax, "lag_max", lag_max);
            m.override_if(o_gmm_step, "step", step_text);
            m.override_if(o_gmm_window, "window", window_text);
            if (collapse_on && collapse_off)
                throw ConfigError("--collapse-instruments and --no-collapse are mutually exclusive");
            if (collapse_on) m.cfg["collapse"] = "on";
            if (collapse_off) m.cfg["collapse"] = "off";
            const OutputDir out(out_dir);
            run_gmm(out, m, input, config_path, window);
        } else if (app.got_subcommand(mc)) {
            m.override_if(o_mc_entities, "entities", sim_entities);
            m.override_if(o_mc_periods, "periods", sim_periods);
            m.override_if(o_mc_endo, "endo_corr", sim_endo_corr);
            m.override_if(o_mc_beta1, "beta1", sim_beta1);
            m.override_if(o_mc_seed, "seed", seed);
            const OutputDir out(out_dir);
            run_monte_carlo(out, m, config_path, reps, pipeline_text);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: numerical: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
