#pragma once

// CSV and JSON encodings of trajectories, pullback estimates, QSE branches
// and tipping reports. CSV numbers use 17 significant digits so that every
// double survives a text round trip.

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tiplab/analysis.hpp"
#include "tiplab/models.hpp"
#include "tiplab/ode.hpp"
#include "tiplab/tipping.hpp"

namespace tiplab {

using Json = nlohmann::ordered_json;

[[nodiscard]] inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

[[nodiscard]] inline double parse_number(const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("not a number: '" + text + "'");
    }
    if (used != text.size()) throw std::invalid_argument("trailing characters in number: '" + text + "'");
    return v;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    bool operator==(const CsvTable&) const = default;
};

[[nodiscard]] inline std::string to_csv(const CsvTable& table) {
    std::string out;
    auto line = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(table.header);
    for (const auto& r : table.rows) line(r);
    return out;
}

[[nodiscard]] inline CsvTable parse_csv(std::string_view text) {
    CsvTable table;
    bool first = true;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view ln = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (!ln.empty() && ln.back() == '\r') ln.remove_suffix(1);
        if (ln.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const auto comma = ln.find(',', start);
            cells.emplace_back(ln.substr(start, comma == std::string_view::npos ? ln.npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != table.header.size()) throw std::invalid_argument("ragged CSV row");
            table.rows.push_back(std::move(cells));
        }
    }
    if (first) throw std::invalid_argument("CSV has no header");
    return table;
}

[[nodiscard]] inline std::vector<std::string> state_columns(std::size_t n, std::string_view prefix = "x") {
    std::vector<std::string> cols;
    for (std::size_t i = 1; i <= n; ++i) cols.push_back(std::string(prefix) + std::to_string(i));
    return cols;
}

/// t,x1..xN,status with "ok" on every row except the last, which carries
/// the termination status.
[[nodiscard]] inline CsvTable trajectory_table(const Trajectory& traj, std::size_t dimension) {
    CsvTable t;
    t.header.push_back("t");
    for (auto& c : state_columns(dimension)) t.header.push_back(c);
    t.header.push_back("status");
    for (std::size_t j = 0; j < traj.samples.size(); ++j) {
        std::vector<std::string> row{format_number(traj.samples[j].t)};
        for (double v : traj.samples[j].x) row.push_back(format_number(v));
        row.push_back(j + 1 == traj.samples.size() ? to_string(traj.status) : "ok");
        t.rows.push_back(std::move(row));
    }
    return t;
}

/// Recovers samples and status from a trajectory table.
[[nodiscard]] inline Trajectory trajectory_from_table(const CsvTable& table) {
    if (table.header.size() < 3 || table.header.front() != "t" || table.header.back() != "status")
        throw std::invalid_argument("not a trajectory table");
    Trajectory traj;
    for (const auto& row : table.rows) {
        Sample s{parse_number(row.front()), {}};
        for (std::size_t i = 1; i + 1 < row.size(); ++i) s.x.push_back(parse_number(row[i]));
        traj.samples.push_back(std::move(s));
    }
    if (!table.rows.empty()) {
        const std::string& st = table.rows.back().back();
        if (st == "escaped") traj.status = TrajectoryStatus::escaped;
        else if (st == "step_underflow") traj.status = TrajectoryStatus::step_underflow;
        else traj.status = TrajectoryStatus::completed;
    }
    return traj;
}

[[nodiscard]] inline CsvTable samples_table(const std::vector<Sample>& samples, std::size_t dimension) {
    CsvTable t;
    t.header.push_back("t");
    for (auto& c : state_columns(dimension)) t.header.push_back(c);
    for (const auto& s : samples) {
        std::vector<std::string> row{format_number(s.t)};
        for (double v : s.x) row.push_back(format_number(v));
        t.rows.push_back(std::move(row));
    }
    return t;
}

[[nodiscard]] inline CsvTable qse_table(const std::vector<QseBranch>& branches, std::size_t dimension) {
    CsvTable t;
    t.header = {"branch", "s"};
    for (auto& c : state_columns(dimension)) t.header.push_back(c);
    t.header.push_back("stability");
    t.header.push_back("max_re_eig");
    for (std::size_t b = 0; b < branches.size(); ++b)
        for (const auto& q : branches[b].samples) {
            std::vector<std::string> row{std::to_string(b), format_number(q.s)};
            for (double v : q.x) row.push_back(format_number(v));
            row.push_back(to_string(q.stability));
            row.push_back(format_number(q.eigenvalues.empty() ? 0.0 : q.eigenvalues.back().real()));
            t.rows.push_back(std::move(row));
        }
    return t;
}

// ---------------------------------------------------------------------------
// JSON

/// Keys of the parameters a catalog model actually uses.
[[nodiscard]] inline std::vector<std::string> model_parameter_keys(const std::string& model) {
    if (model == "drift") return {"r"};
    if (model == "moving-pitchfork") return {"mu", "r", "p"};
    if (model == "bounded-ramp-sn") return {"mu", "r", "lambda_max"};
    return {"mu", "r"};
}

[[nodiscard]] inline Json params_json(const std::string& model, const ModelParams& p, bool with_rate = true) {
    Json j = Json::object();
    for (const auto& k : model_parameter_keys(model)) {
        if (k == "mu") j["mu"] = p.mu;
        if (k == "r" && with_rate) j["r"] = p.r;
        if (k == "p") j["p"] = p.p;
        if (k == "lambda_max") j["lambda_max"] = p.lambda_max;
    }
    return j;
}

[[nodiscard]] inline Json state_json(const State& x) {
    Json a = Json::array();
    for (double v : x) a.push_back(v);
    return a;
}

[[nodiscard]] inline Json pullback_log_json(const PullbackEstimate& est) {
    Json j;
    j["status"] = to_string(est.status);
    j["sense"] = est.sense == Sense::attracting ? "attracting" : "repelling";
    j["frame"] = to_string(est.frame);
    j["window"] = {est.window[0], est.window[1]};
    j["anchor"] = {{"x0", state_json(est.anchor.point)},
                   {"placement", est.anchor.placement == AnchorPlacement::fixed ? "fixed" : "comoving"},
                   {"description", est.anchor.description}};
    j["start_times"] = est.start_times;
    j["convergence_gaps"] = est.convergence_gaps;
    if (est.escape) j["escape_bracket"] = {est.escape->lo, est.escape->hi};
    return j;
}

[[nodiscard]] inline Json diagnostic_json(const Diagnostic& d, bool with_traces = false) {
    Json j;
    j["kind"] = to_string(d.kind);
    j["verdict"] = to_string(d.verdict);
    Json th = Json::object();
    for (const auto& [k, v] : d.thresholds) th[k] = v;
    j["thresholds"] = th;
    if (!d.note.empty()) j["note"] = d.note;
    if (with_traces) {
        Json tr = Json::array();
        for (const auto& t : d.traces)
            tr.push_back({{"label", t.label}, {"escaped", t.escaped}, {"t", t.times}, {"distance", t.values}});
        j["traces"] = tr;
    }
    return j;
}

[[nodiscard]] inline Json equilibria_json(const std::vector<Equilibrium>& eqs) {
    Json a = Json::array();
    for (const auto& e : eqs) a.push_back({{"location", state_json(e.x)}, {"stability", to_string(e.stability)}});
    return a;
}

[[nodiscard]] inline Json rate_json(const RateDiagnostics& rd, std::optional<Truth> truth = std::nullopt) {
    Json j;
    j["r"] = rd.r;
    if (truth) j["predicate"] = to_string(*truth);
    j["globally_defined_evidence"] = to_string(rd.globally_defined_evidence);
    Json st = Json::array();
    for (auto s : rd.anchor_status) st.push_back(to_string(s));
    j["anchor_status"] = st;
    Json inv = Json::array();
    for (const auto& e : rd.attractor_inventory) {
        Json ej;
        ej["anchors"] = e.anchors;
        ej["window_end_state"] = state_json(e.estimate.curve.back().x);
        ej["pullback_iterations"] = e.estimate.start_times.size();
        ej["forward_attraction"] = diagnostic_json(e.forward);
        inv.push_back(ej);
    }
    j["attractor_inventory"] = inv;
    if (rd.comoving_equilibria) j["comoving_equilibria"] = equilibria_json(*rd.comoving_equilibria);
    return j;
}

[[nodiscard]] inline Json tipping_json(const TippingReport& rep, std::array<double, 2> range) {
    Json j;
    j["model"] = rep.model;
    j["params"] = params_json(rep.model, rep.params, false);
    j["predicate"] = rep.predicate.describe();
    j["r_range"] = {range[0], range[1]};
    j["resolution"] = rep.resolution;
    Json br = Json::array(), cls = Json::array(), det = Json::array();
    for (const auto& b : rep.brackets) {
        br.push_back({b.lo, b.hi});
        cls.push_back(to_string(b.classification));
        det.push_back({{"lo", b.lo},
                       {"hi", b.hi},
                       {"predicate_lo", to_string(b.at_lo)},
                       {"predicate_hi", to_string(b.at_hi)},
                       {"coarse_cell", {b.cell_lo, b.cell_hi}},
                       {"flagged", b.flagged}});
    }
    j["brackets"] = br;
    j["classification"] = cls;
    j["bracket_details"] = det;
    j["flagged"] = rep.flagged;
    j["notes"] = rep.notes;
    j["grid"] = rep.grid;
    Json per = Json::array();
    for (const auto& s : rep.per_r) per.push_back(rate_json(s.diagnostics, s.truth));
    j["per_r"] = per;
    return j;
}

}  // namespace tiplab
