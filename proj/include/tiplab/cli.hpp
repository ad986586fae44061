#pragma once

// Command implementations behind the tiplab executable. Each command takes
// a validated RunConfig, writes its files into the output directory and
// returns the process exit code.

#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tiplab/analysis.hpp"
#include "tiplab/io.hpp"
#include "tiplab/models.hpp"
#include "tiplab/tipping.hpp"

namespace tiplab::cli {

enum ExitCode : int { ok = 0, config_error = 1, numeric_failure = 2 };

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string command;
    std::string model;
    ModelParams params;
    std::set<std::string> assigned;  // keys given explicitly

    double t0 = 0.0;
    std::optional<double> t1;
    std::optional<State> x0;
    std::optional<std::array<double, 2>> window;
    std::optional<double> horizon;
    Sense sense = Sense::attracting;
    std::optional<AnchorPlacement> placement;
    std::optional<Frame> frame;
    double tol = 1e-8;
    std::optional<std::array<double, 2>> r_range;
    std::optional<double> resolution;
    std::optional<PredicateSpec> predicate;
    std::optional<std::array<double, 2>> s_range;
    std::size_t s_points = 201;
    std::size_t n_points = 21;
    std::string figure;
    IntegratorConfig integrator{};

    std::filesystem::path out_dir = ".";
    std::string format = "csv";
};

namespace detail {

inline const std::set<std::string>& param_keys() {
    static const std::set<std::string> k{"mu", "r", "p", "lambda_max"};
    return k;
}

inline const std::set<std::string>& analysis_keys() {
    static const std::set<std::string> k{"t0",        "t1",         "x0",      "window",  "horizon",  "sense",
                                         "placement", "frame",      "tol",     "r_range", "resolution",
                                         "predicate", "k",          "s_range", "s_points", "n_points",
                                         "abs_tol",   "rel_tol",    "max_step", "min_step", "escape_norm",
                                         "figure"};
    return k;
}

/// Parses a --set value: a number, a comma-separated list of numbers, or a
/// bare string.
inline Json parse_value(const std::string& text) {
    if (text.empty()) return Json(text);
    std::vector<double> nums;
    std::stringstream ss(text);
    std::string part;
    bool numeric = true;
    while (std::getline(ss, part, ',')) {
        try {
            nums.push_back(parse_number(part));
        } catch (const std::invalid_argument&) {
            numeric = false;
            break;
        }
    }
    if (!numeric) return Json(text);
    if (nums.size() == 1 && text.find(',') == std::string::npos) return Json(nums.front());
    return Json(nums);
}

inline double as_number(const std::string& key, const Json& v) {
    if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
    return v.get<double>();
}

inline std::vector<double> as_list(const std::string& key, const Json& v) {
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw ConfigError("'" + key + "' must be a number or a list of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError("'" + key + "' must contain only numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

inline std::array<double, 2> as_pair(const std::string& key, const Json& v) {
    const auto l = as_list(key, v);
    if (l.size() != 2) throw ConfigError("'" + key + "' needs exactly two numbers");
    return {l[0], l[1]};
}

inline std::string as_string(const std::string& key, const Json& v) {
    if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
    return v.get<std::string>();
}

inline std::size_t as_count(const std::string& key, const Json& v) {
    const double d = as_number(key, v);
    if (!(d >= 1.0) || d != std::floor(d)) throw ConfigError("'" + key + "' must be a positive integer");
    return static_cast<std::size_t>(d);
}

}  // namespace detail

/// Builds a RunConfig from an optional JSON config document plus flag
/// overrides (`sets` are key=value strings).
inline RunConfig build_config(const std::string& command, const std::optional<Json>& doc,
                              const std::optional<std::string>& model, const std::vector<std::string>& sets,
                              const std::optional<std::string>& out_dir, const std::optional<std::string>& format) {
    static const std::set<std::string> commands{"simulate", "pullback", "qse", "tip", "sweep", "figure"};
    if (!commands.count(command)) throw ConfigError("unknown command '" + command + "'");
    RunConfig cfg;
    cfg.command = command;

    std::map<std::string, Json> values;
    if (doc) {
        if (!doc->is_object()) throw ConfigError("config must be a JSON object");
        for (const auto& [section, body] : doc->items()) {
            if (section == "model") {
                cfg.model = detail::as_string("model", body);
            } else if (section == "params" || section == "analysis") {
                if (!body.is_object()) throw ConfigError("'" + section + "' must be an object");
                const auto& allowed = section == "params" ? detail::param_keys() : detail::analysis_keys();
                for (const auto& [k, v] : body.items()) {
                    if (!allowed.count(k)) throw ConfigError("unknown key '" + section + "." + k + "'");
                    values[k] = v;
                }
            } else if (section == "output") {
                if (!body.is_object()) throw ConfigError("'output' must be an object");
                for (const auto& [k, v] : body.items()) {
                    if (k == "dir") cfg.out_dir = detail::as_string("output.dir", v);
                    else if (k == "format") cfg.format = detail::as_string("output.format", v);
                    else throw ConfigError("unknown key 'output." + k + "'");
                }
            } else {
                throw ConfigError("unknown config section '" + section + "'");
            }
        }
    }
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
        const std::string key = s.substr(0, eq);
        if (!detail::param_keys().count(key) && !detail::analysis_keys().count(key))
            throw ConfigError("unknown key '" + key + "'");
        values[key] = detail::parse_value(s.substr(eq + 1));
    }
    if (model) cfg.model = *model;
    if (out_dir) cfg.out_dir = *out_dir;
    if (format) cfg.format = *format;
    if (cfg.format != "csv" && cfg.format != "json") throw ConfigError("format must be csv or json");

    for (const auto& [k, v] : values) {
        cfg.assigned.insert(k);
        if (k == "mu") cfg.params.mu = detail::as_number(k, v);
        else if (k == "r") cfg.params.r = detail::as_number(k, v);
        else if (k == "p") {
            const double p = detail::as_number(k, v);
            if (p != std::floor(p) || p < 1.0) throw ConfigError("'p' must be an integer >= 1");
            cfg.params.p = static_cast<int>(p);
        } else if (k == "lambda_max") cfg.params.lambda_max = detail::as_number(k, v);
        else if (k == "t0") cfg.t0 = detail::as_number(k, v);
        else if (k == "t1") cfg.t1 = detail::as_number(k, v);
        else if (k == "x0") cfg.x0 = detail::as_list(k, v);
        else if (k == "window") cfg.window = detail::as_pair(k, v);
        else if (k == "horizon") cfg.horizon = detail::as_number(k, v);
        else if (k == "sense") {
            const auto s = detail::as_string(k, v);
            if (s == "attracting") cfg.sense = Sense::attracting;
            else if (s == "repelling") cfg.sense = Sense::repelling;
            else throw ConfigError("sense must be attracting or repelling");
        } else if (k == "placement") {
            const auto s = detail::as_string(k, v);
            if (s == "fixed") cfg.placement = AnchorPlacement::fixed;
            else if (s == "comoving") cfg.placement = AnchorPlacement::comoving;
            else throw ConfigError("placement must be fixed or comoving");
        } else if (k == "frame") {
            const auto s = detail::as_string(k, v);
            if (s == "original") cfg.frame = Frame::original;
            else if (s == "comoving") cfg.frame = Frame::comoving;
            else throw ConfigError("frame must be original or comoving");
        } else if (k == "tol") cfg.tol = detail::as_number(k, v);
        else if (k == "r_range") cfg.r_range = detail::as_pair(k, v);
        else if (k == "resolution") cfg.resolution = detail::as_number(k, v);
        else if (k == "predicate" || k == "k") {
            // handled below, once both are known
        } else if (k == "s_range") cfg.s_range = detail::as_pair(k, v);
        else if (k == "s_points") cfg.s_points = detail::as_count(k, v);
        else if (k == "n_points") cfg.n_points = detail::as_count(k, v);
        else if (k == "abs_tol") cfg.integrator.abs_tol = detail::as_number(k, v);
        else if (k == "rel_tol") cfg.integrator.rel_tol = detail::as_number(k, v);
        else if (k == "max_step") cfg.integrator.max_step = detail::as_number(k, v);
        else if (k == "min_step") cfg.integrator.min_step = detail::as_number(k, v);
        else if (k == "escape_norm") cfg.integrator.escape_norm = detail::as_number(k, v);
        else if (k == "figure") cfg.figure = detail::as_string(k, v);
    }
    if (values.count("predicate")) {
        const auto s = detail::as_string("predicate", values["predicate"]);
        PredicateSpec ps;
        if (s == "attractor_count") ps.kind = PredicateKind::attractor_count;
        else if (s == "bounded_solution_exists") ps.kind = PredicateKind::bounded_solution_exists;
        else if (s == "forward_attraction_holds") ps.kind = PredicateKind::forward_attraction_holds;
        else throw ConfigError("unknown predicate '" + s + "'");
        ps.k = ps.kind == PredicateKind::attractor_count ? 2 : 1;
        if (values.count("k")) {
            const double k = detail::as_number("k", values["k"]);
            if (k != std::floor(k) || k < 1.0) throw ConfigError("'k' must be an integer >= 1");
            ps.k = static_cast<int>(k);
        }
        cfg.predicate = ps;
    } else if (values.count("k")) {
        throw ConfigError("'k' requires predicate=attractor_count");
    }
    try {
        cfg.integrator.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (!(cfg.tol > 0.0)) throw ConfigError("'tol' must be positive");

    // Model parameters: must be known, applicable and complete.
    if (command == "figure") {
        if (!cfg.model.empty()) throw ConfigError("figure takes no model");
        return cfg;
    }
    if (cfg.model.empty()) throw ConfigError("no model given (use --model or the config 'model' field)");
    const auto& names = model_names();
    if (std::find(names.begin(), names.end(), cfg.model) == names.end())
        throw ConfigError("unknown model '" + cfg.model + "'");
    const auto keys = model_parameter_keys(cfg.model);
    const bool rate_scan = command == "tip" || command == "sweep";
    for (const auto& k : detail::param_keys()) {
        const bool used = std::find(keys.begin(), keys.end(), k) != keys.end();
        if (cfg.assigned.count(k) && !used) throw ConfigError("parameter '" + k + "' does not apply to " + cfg.model);
        if (cfg.assigned.count(k) && rate_scan && k == "r") throw ConfigError("'" + command + "' scans r; use r_range");
        const bool optional = k == "lambda_max" || (rate_scan && k == "r");
        if (used && !optional && !cfg.assigned.count(k))
            throw ConfigError("model " + cfg.model + " requires parameter '" + k + "'");
    }
    try {
        (void)make_model(cfg.model, cfg.params);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

/// Reads a JSON config file.
inline Json read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline double default_resolution(const std::string& model) {
    if (model == "moving-pitchfork" || model == "drift") return 1e-2;
    if (model == "bounded-ramp-sn") return 1e-3;
    return 1e-4;
}

inline std::array<double, 2> default_r_range(const RunConfig& c) {
    const double mu = c.params.mu;
    if (c.model == "drift") return {0.01, 10.0};
    if (c.model == "moving-sn") return {mu * mu / 25.0, 0.8 * mu * mu};
    if (c.model == "moving-cubic") return {0.1 * mu * mu * mu, 0.8 * mu * mu * mu};
    if (c.model == "moving-pitchfork") return {0.1 * mu, 1.5 * mu};
    return {0.01, 10.0};
}

inline RateOptions rate_options(const RunConfig& c) {
    RateOptions ro;
    ro.window = c.window;
    ro.horizon = c.horizon;
    ro.frame = c.frame;
    ro.pullback.tol = c.tol;
    ro.pullback.integrator = c.integrator;
    return ro;
}

}  // namespace detail

inline int cmd_simulate(const RunConfig& c, std::ostream& log = std::cout) {
    const ModelSpec m = make_model(c.model, c.params);
    if (!c.x0) throw ConfigError("simulate requires x0");
    if (!c.t1) throw ConfigError("simulate requires t1");
    if (c.x0->size() != m.dimension)
        throw ConfigError("x0 has " + std::to_string(c.x0->size()) + " components; " + c.model + " needs " +
                          std::to_string(m.dimension));
    Trajectory traj;
    if (*c.t1 != c.t0) traj = integrate(m.field, *c.x0, c.t0, *c.t1, c.integrator);
    if (c.format == "csv") {
        detail::write_file(c.out_dir / "trajectory.csv", to_csv(trajectory_table(traj, m.dimension)));
    } else {
        Json j;
        j["model"] = c.model;
        j["params"] = params_json(c.model, c.params);
        j["status"] = traj.empty() ? "completed" : to_string(traj.status);
        Json t = Json::array(), xs = Json::array();
        for (const auto& s : traj.samples) {
            t.push_back(s.t);
            xs.push_back(state_json(s.x));
        }
        j["t"] = t;
        j["x"] = xs;
        if (traj.status == TrajectoryStatus::escaped) j["escape_bracket"] = {traj.escape.lo, traj.escape.hi};
        detail::write_file(c.out_dir / "trajectory.json", j.dump(2) + "\n");
    }
    if (traj.empty()) {
        log << "empty time range; no samples\n";
        return ok;
    }
    log << "status " << to_string(traj.status) << " at t=" << format_number(traj.t_last()) << "\n";
    if (traj.status == TrajectoryStatus::escaped)
        log << "blow-up bracket [" << format_number(traj.escape.lo) << ", " << format_number(traj.escape.hi) << "]\n";
    return traj.status == TrajectoryStatus::step_underflow ? numeric_failure : ok;
}

inline int cmd_pullback(const RunConfig& c, std::ostream& log = std::cout) {
    const ModelSpec m = make_model(c.model, c.params);
    Anchor anchor = m.defaults.anchors.front();
    if (c.x0) {
        if (c.x0->size() != m.dimension) throw ConfigError("x0 dimension does not match the model");
        anchor = {*c.x0, c.placement.value_or(AnchorPlacement::fixed), "x0 from config"};
    } else if (c.placement) {
        anchor.placement = *c.placement;
    }
    if (anchor.placement == AnchorPlacement::comoving && !m.comoving)
        throw ConfigError(c.model + " has no co-moving frame; use placement=fixed");
    if (c.frame == Frame::comoving && !m.comoving) throw ConfigError(c.model + " has no co-moving frame");
    const auto window = c.window.value_or(m.defaults.window);
    if (!(window[0] < window[1])) throw ConfigError("window must satisfy t_a < t_b");
    PullbackOptions po;
    po.tol = c.tol;
    po.frame = c.frame.value_or(Frame::original);
    po.integrator = c.integrator;
    const PullbackEstimate est = estimate_pullback(m, window, anchor, c.sense, po);
    Json logj = pullback_log_json(est);
    logj["model"] = c.model;
    logj["params"] = params_json(c.model, c.params);
    if (c.format == "csv") {
        detail::write_file(c.out_dir / "pullback_curve.csv", to_csv(samples_table(est.curve, m.dimension)));
        detail::write_file(c.out_dir / "pullback_log.json", logj.dump(2) + "\n");
    } else {
        Json curve = Json::array();
        for (const auto& s : est.curve) curve.push_back({{"t", s.t}, {"x", state_json(s.x)}});
        logj["curve"] = curve;
        detail::write_file(c.out_dir / "pullback.json", logj.dump(2) + "\n");
    }
    log << "pullback " << to_string(est.status) << " after " << est.start_times.size() << " start times\n";
    return est.step_underflow ? numeric_failure : ok;
}

inline int cmd_qse(const RunConfig& c, std::ostream& log = std::cout) {
    const ModelSpec m = make_model(c.model, c.params);
    const auto range = c.s_range.value_or(c.window.value_or(m.defaults.window));
    if (!(range[0] <= range[1])) throw ConfigError("s_range must be ordered");
    std::vector<double> grid;
    const std::size_t n = range[0] == range[1] ? 1 : std::max<std::size_t>(c.s_points, 2);
    for (std::size_t i = 0; i < n; ++i)
        grid.push_back(n == 1 ? range[0] : range[0] + (range[1] - range[0]) * static_cast<double>(i) / (n - 1));
    if (n > 1) grid.back() = range[1];
    const auto branches = qse_continuation(m, grid);
    if (c.format == "csv") {
        detail::write_file(c.out_dir / "qse.csv", to_csv(qse_table(branches, m.dimension)));
    } else {
        Json j;
        j["model"] = c.model;
        j["params"] = params_json(c.model, c.params);
        Json bs = Json::array();
        for (const auto& b : branches) {
            Json bj;
            bj["born_inside"] = b.born_inside;
            bj["dies_inside"] = b.dies_inside;
            bj["has_degenerate"] = b.has_degenerate;
            Json ss = Json::array();
            for (const auto& q : b.samples)
                ss.push_back({{"s", q.s}, {"x", state_json(q.x)}, {"stability", to_string(q.stability)}});
            bj["samples"] = ss;
            bs.push_back(bj);
        }
        j["branches"] = bs;
        detail::write_file(c.out_dir / "qse.json", j.dump(2) + "\n");
    }
    log << branches.size() << " QSE branches\n";
    return ok;
}

inline int cmd_tip(const RunConfig& c, std::ostream& log = std::cout) {
    const auto range = c.r_range.value_or(detail::default_r_range(c));
    if (!(range[0] < range[1])) throw ConfigError("r_range must satisfy r_lo < r_hi");
    const double res = c.resolution.value_or(detail::default_resolution(c.model));
    if (!(res > 0.0)) throw ConfigError("resolution must be positive");
    const PredicateSpec pred = c.predicate.value_or(default_predicate(c.model));
    TipOptions to;
    to.rate = detail::rate_options(c);
    const TippingReport rep = find_critical_rate(family(c.model, c.params), pred, range[0], range[1], res, to);
    detail::write_file(c.out_dir / "tip_report.json", tipping_json(rep, range).dump(2) + "\n");
    log << rep.brackets.size() << " critical bracket(s)\n";
    for (const auto& b : rep.brackets)
        log << "  [" << format_number(b.lo) << ", " << format_number(b.hi) << "] " << to_string(b.classification)
            << (b.flagged ? " (flagged)" : "") << "\n";
    return ok;
}

inline int cmd_sweep(const RunConfig& c, std::ostream& log = std::cout) {
    const auto range = c.r_range.value_or(detail::default_r_range(c));
    if (!(range[0] <= range[1])) throw ConfigError("r_range must be ordered");
    const PredicateSpec pred = c.predicate.value_or(default_predicate(c.model));
    std::vector<double> rates;
    const std::size_t n = range[0] == range[1] ? 1 : std::max<std::size_t>(c.n_points, 2);
    for (std::size_t i = 0; i < n; ++i)
        rates.push_back(n == 1 ? range[0] : range[0] + (range[1] - range[0]) * static_cast<double>(i) / (n - 1));
    if (n > 1) rates.back() = range[1];
    const auto diags = sweep(family(c.model, c.params), rates, detail::rate_options(c));
    if (c.format == "json") {
        Json j;
        j["model"] = c.model;
        j["params"] = params_json(c.model, c.params, false);
        j["predicate"] = pred.describe();
        Json per = Json::array();
        for (const auto& d : diags) per.push_back(rate_json(d, evaluate(d, pred)));
        j["per_r"] = per;
        detail::write_file(c.out_dir / "sweep.json", j.dump(2) + "\n");
    } else {
        CsvTable t;
        t.header = {"r", "predicate", "evidence", "attractors", "holds", "fails", "inconclusive"};
        for (const auto& d : diags)
            t.rows.push_back({format_number(d.r), to_string(evaluate(d, pred)), to_string(d.globally_defined_evidence),
                              std::to_string(d.attractor_inventory.size()), std::to_string(d.count(Verdict::holds)),
                              std::to_string(d.count(Verdict::fails)), std::to_string(d.count(Verdict::inconclusive))});
        detail::write_file(c.out_dir / "sweep.csv", to_csv(t));
    }
    log << "swept " << rates.size() << " rates\n";
    return ok;
}

// ---------------------------------------------------------------------------
// Figure data

namespace detail {

struct Panel {
    std::string file;
    CsvTable table;
};

inline CsvTable long_table(std::size_t dim, const char* tcol = "t", std::vector<std::string> cols = {}) {
    CsvTable t;
    t.header = {"series", tcol};
    if (cols.empty()) cols = state_columns(dim);
    for (auto& c : cols) t.header.push_back(c);
    return t;
}

inline void add_point(CsvTable& t, const std::string& series, double time, const State& x) {
    std::vector<std::string> row{series, format_number(time)};
    for (double v : x) row.push_back(format_number(v));
    t.rows.push_back(std::move(row));
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    v.back() = b;
    return v;
}

inline void add_solution(CsvTable& t, const std::string& series, const VectorField& f, const State& x0, double t0,
                         double t1, std::size_t points = 201) {
    const Trajectory traj = integrate(f, x0, t0, t1);
    for (double s : linspace(t0, t1, points)) {
        if (s > traj.t_last()) break;
        add_point(t, series, s, dense_eval(traj, s));
    }
    if (traj.status != TrajectoryStatus::completed) add_point(t, series, traj.t_last(), traj.final_state());
}

inline std::string label(const char* base, double v) {
    std::ostringstream os;
    os << base << "=" << v;
    return os.str();
}

/// Lifted co-moving equilibria, oracle QSEs and sample solutions for a scalar
/// or planar model over [ta, tb].
inline CsvTable time_series_panel(const ModelSpec& m, double ta, double tb, const std::vector<State>& starts) {
    CsvTable t = long_table(m.dimension);
    const auto times = linspace(ta, tb, 201);
    if (m.comoving) {
        const auto eqs = find_equilibria(m.comoving->field, 0.0, m.defaults.comoving_box);
        for (std::size_t k = 0; k < eqs.size(); ++k) {
            const std::string name = std::string("comoving_equilibrium_") + std::to_string(k) + "_" +
                                     to_string(eqs[k].stability);
            for (double s : times) {
                State x = eqs[k].x;
                const State v = m.comoving->shift(s);
                for (std::size_t i = 0; i < x.size(); ++i) x[i] += v[i];
                add_point(t, name, s, x);
            }
        }
    }
    for (CurveKind k : {CurveKind::qse_stable_plus, CurveKind::qse_stable_minus, CurveKind::qse_unstable}) {
        if (!m.oracle(k, ta) || !m.oracle(k, tb)) continue;
        for (double s : times)
            if (auto x = m.oracle(k, s)) add_point(t, to_string(k), s, *x);
    }
    for (std::size_t i = 0; i < starts.size(); ++i) {
        std::ostringstream name;
        name << "solution_" << i;
        add_solution(t, name.str(), m.field, starts[i], ta, tb);
    }
    return t;
}

inline std::vector<Panel> figure_panels(const std::string& name) {
    std::vector<Panel> out;
    if (name == "fig1") {
        const ModelSpec m = drift(0.5);
        CsvTable t = long_table(1);
        PullbackOptions po;
        const auto est = estimate_pullback(m, {-6.0, 4.0}, {{5.0}, AnchorPlacement::fixed, "x0=5"}, Sense::attracting, po);
        for (const auto& s : est.curve) add_point(t, "pullback_attractor", s.t, s.x);
        for (double s : linspace(-6.0, 4.0, 201)) add_point(t, "qse_stable+", s, oracle_curve(m, CurveKind::qse_stable_plus, s));
        int i = 0;
        for (double x0 : {-2.0, 0.0, 2.0, 4.0}) add_solution(t, "solution_" + std::to_string(i++), m.field, {x0}, -6.0, 4.0);
        out.push_back({"fig1.csv", std::move(t)});
    } else if (name == "fig2") {
        const char* tags[] = {"A", "B", "C"};
        const double rates[] = {1.0 / 32, 1.0 / 16, 3.0 / 32};
        for (int p = 0; p < 3; ++p) {
            const ModelSpec m = moving_saddle_node(0.5, rates[p]);
            std::vector<State> starts;
            for (double x0 : {-0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0}) starts.push_back({x0});
            out.push_back({std::string("fig2_") + tags[p] + ".csv", time_series_panel(m, 0.0, 20.0, starts)});
        }
    } else if (name == "fig3") {
        const double rs = 2.0 / (3.0 * std::sqrt(3.0));
        const char* tags[] = {"A", "B", "C"};
        const double rates[] = {rs - 0.1, rs, rs + 0.1};
        for (int p = 0; p < 3; ++p) {
            const ModelSpec m = moving_cubic(1.0, rates[p]);
            std::vector<State> starts;
            for (double x0 : {-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0}) starts.push_back({x0});
            out.push_back({std::string("fig3_") + tags[p] + ".csv", time_series_panel(m, 0.0, 10.0, starts)});
        }
    } else if (name == "fig4") {
        const char* tags[] = {"A", "B", "C"};
        const double rates[] = {-0.5, 1.0, 1.5};
        const double mu = 1.0;
        for (int p = 0; p < 3; ++p) {
            const double r = rates[p];
            const ModelSpec m = moving_pitchfork(mu, r, 1);
            CsvTable t = long_table(2, "param", {"z", "y"});
            for (double y : linspace(-2.0, 2.0, 101)) add_point(t, "z_nullcline", y, {r, y});
            for (double z : linspace(-3.0, 3.0, 101)) add_point(t, "y_nullcline_axis", z, {z, 0.0});
            for (double y : linspace(-2.0, 2.0, 101)) add_point(t, "y_nullcline_parabola", y, {mu - y * y, y});
            const auto eqs = find_equilibria(m.comoving->field, 0.0, m.defaults.comoving_box);
            for (std::size_t k = 0; k < eqs.size(); ++k)
                add_point(t, std::string("equilibrium_") + std::to_string(k) + "_" + to_string(eqs[k].stability), 0.0,
                          eqs[k].x);
            int i = 0;
            for (double z0 : {-3.0, 3.0})
                for (double y0 : {-1.5, -0.5, 0.5, 1.5})
                    add_solution(t, "trajectory_" + std::to_string(i++), m.comoving->field, {z0, y0}, 0.0, 10.0);
            out.push_back({std::string("fig4_") + tags[p] + ".csv", std::move(t)});
        }
    } else if (name == "fig5") {
        const char* tags[] = {"A", "B", "C"};
        const double rates[] = {-0.5, 1.0, 5.0};
        for (int p = 0; p < 3; ++p) {
            const ModelSpec m = moving_pitchfork(1.0, rates[p], 1);
            const double ta = -2.0, tb = 6.0;
            const double lam = m.ramp.value(ta);
            std::vector<State> starts;
            for (double y0 : {-1.5, -0.5, 0.5, 1.5}) starts.push_back({-lam, y0});
            out.push_back({std::string("fig5_") + tags[p] + ".csv", time_series_panel(m, ta, tb, starts)});
        }
    } else {
        throw ConfigError("unknown figure '" + name + "' (expected fig1..fig5)");
    }
    return out;
}

}  // namespace detail

inline int cmd_figure(const RunConfig& c, std::ostream& log = std::cout) {
    if (c.figure.empty()) throw ConfigError("figure requires a name (fig1..fig5)");
    if (c.format != "csv") throw ConfigError("figure data is written as CSV only");
    const auto panels = detail::figure_panels(c.figure);
    for (const auto& p : panels) {
        detail::write_file(c.out_dir / p.file, to_csv(p.table));
        log << "wrote " << (c.out_dir / p.file).string() << "\n";
    }
    return ok;
}

/// Dispatches a validated config to its command.
inline int run(const RunConfig& c, std::ostream& log = std::cout) {
    if (c.command == "simulate") return cmd_simulate(c, log);
    if (c.command == "pullback") return cmd_pullback(c, log);
    if (c.command == "qse") return cmd_qse(c, log);
    if (c.command == "tip") return cmd_tip(c, log);
    if (c.command == "sweep") return cmd_sweep(c, log);
    if (c.command == "figure") return cmd_figure(c, log);
    throw ConfigError("unknown command '" + c.command + "'");
}

}  // namespace tiplab::cli
