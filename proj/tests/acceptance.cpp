// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "tiplab/cli.hpp"

using namespace tiplab;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.7g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("tiplab_acceptance_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Runs `tiplab tip` in-process and returns the parsed report.
Json tip_report(const std::string& model, const std::vector<std::string>& sets, const std::string& tag) {
    const auto dir = scratch(tag);
    std::ostringstream log;
    const auto cfg = cli::build_config("tip", std::nullopt, model, sets, dir.string(), "csv");
    if (cli::run(cfg, log) != cli::ok) throw std::runtime_error("tip returned nonzero");
    std::ifstream in(dir / "tip_report.json");
    return Json::parse(in);
}

void check_single_bracket(Outcome& o, const Json& rep, double target, double width, const char* cls,
                          const std::string& label) {
    if (rep["brackets"].size() != 1) {
        o.require(false, label + " bracket count " + std::to_string(rep["brackets"].size()));
        return;
    }
    const double lo = rep["brackets"][0][0], hi = rep["brackets"][0][1];
    o.require(lo <= target && target <= hi, label + " contains " + num(target));
    o.require(hi - lo <= width, label + " width " + num(hi - lo));
    o.require(rep["classification"][0] == cls, label + " classification " + rep["classification"][0].get<std::string>());
    o.note(label + " [" + num(lo) + ", " + num(hi) + "] " + rep["classification"][0].get<std::string>());
}

double sup_error(const std::vector<Sample>& curve, const std::function<double(const Sample&)>& err) {
    double e = 0.0;
    for (const auto& s : curve) e = std::max(e, err(s));
    return e;
}

const QseBranch& branch_near(const std::vector<QseBranch>& bs, const State& x0) {
    const QseBranch* best = &bs.front();
    double bd = INFINITY;
    for (const auto& b : bs) {
        double d = 0.0;
        for (std::size_t i = 0; i < x0.size(); ++i) d += std::pow(b.samples.front().x[i] - x0[i], 2);
        if (d < bd) {
            bd = d;
            best = &b;
        }
    }
    return *best;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / (n - 1);
    v.back() = b;
    return v;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------------------

Outcome saddle_node_rates() {
    Outcome o;
    for (double mu : {0.25, 0.5, 1.0}) {
        const auto t0 = std::chrono::steady_clock::now();
        const Json rep = tip_report("moving-sn", {"mu=" + num(mu)}, "sn");
        const double dt = seconds_since(t0);
        check_single_bracket(o, rep, mu * mu / 4, 1e-4, "saddle-node", "mu=" + num(mu));
        o.require(dt <= 60.0, "runtime " + num(dt) + " s");
    }
    return o;
}

Outcome cubic_rates() {
    Outcome o;
    for (double mu : {0.75, 1.0, 1.25}) {
        const double rstar = 2 * mu * mu * mu / (3 * std::sqrt(3.0));
        const double m3 = mu * mu * mu;
        const Json pos = tip_report("moving-cubic", {"mu=" + num(mu), "resolution=1e-3"}, "cubic");
        check_single_bracket(o, pos, rstar, 1e-3, "saddle-node", "mu=" + num(mu));
        const Json neg = tip_report(
            "moving-cubic",
            {"mu=" + num(mu), "resolution=1e-3", "r_range=" + format_number(-0.8 * m3) + "," + format_number(-0.1 * m3)},
            "cubic_neg");
        check_single_bracket(o, neg, -rstar, 1e-3, "saddle-node", "mirror mu=" + num(mu));
        if (pos["brackets"].size() == 1 && neg["brackets"].size() == 1) {
            const double a = pos["brackets"][0][0], b = pos["brackets"][0][1];
            const double c = neg["brackets"][0][0], d = neg["brackets"][0][1];
            o.require(std::abs(a + d) <= 1e-3 && std::abs(b + c) <= 1e-3, "mirror symmetry mu=" + num(mu));
        }
    }
    return o;
}

Outcome pitchfork_rates() {
    Outcome o;
    for (int p : {1, 2}) {
        const Json rep = tip_report("moving-pitchfork", {"mu=1", "p=" + std::to_string(p)}, "pf");
        o.require(rep["predicate"].get<std::string>().rfind("attractor_count", 0) == 0, "attractor-count predicate");
        check_single_bracket(o, rep, 1.0, 1e-2, "pitchfork", "p=" + std::to_string(p));
    }
    return o;
}

Outcome drift_non_tipping() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    for (double r : {0.1, 0.5, 1.0, 2.0}) {
        const auto m = drift(r);
        const double tb = m.defaults.window[1], T = m.defaults.horizon;
        const auto est = estimate_pullback(m, m.defaults.window, m.defaults.anchors[0], Sense::attracting);
        o.require(est.converged(), "pullback r=" + num(r));
        const Trajectory ext = integrate(m.field, est.curve.back().x, tb, tb + T);
        const Curve cand = Curve::from_trajectory(ext, framed(m, Frame::original), Frame::original);
        const auto fwd = forward_attraction_test(m, cand, {{0.1}, {-0.1}}, T, 1e-3);
        const auto bs = qse_continuation(m, linspace(tb + T - 10.0, tb + T, 101));
        const auto ep = endpoint_tracking_test(cand, bs.front(), 10.0, 0.01, {.t0 = tb + T - 10.0});
        o.require(fwd.verdict == Verdict::holds, "forward r=" + num(r) + " " + to_string(fwd.verdict));
        o.require(ep.verdict == Verdict::fails, "endpoint r=" + num(r) + " " + to_string(ep.verdict));
    }
    const Json rep = tip_report("drift", {"r_range=0.01,10"}, "drift");
    o.require(rep["brackets"].empty(), "zero brackets over [0.01, 10]");
    const double dt = seconds_since(t0);
    o.require(dt <= 30.0, "runtime " + num(dt) + " s");
    o.note("forward holds, endpoint fails, 0 brackets, " + num(dt) + " s");
    return o;
}

Outcome oracle_equivalence() {
    Outcome o;
    const std::array<double, 2> w{0.0, 4.0};
    {
        const auto m = drift(0.5);
        const auto e = estimate_pullback(m, w, {{5.0}, AnchorPlacement::fixed, ""}, Sense::attracting);
        const double err = sup_error(e.curve, [](const Sample& s) { return std::abs(s.x[0] - std::exp(0.5 * s.t) / 1.5); });
        o.require(e.converged() && err <= 1e-6, "drift " + num(err));
        o.note("drift " + num(err));
    }
    const double rho = std::sqrt(1.0 / 32);
    {
        const auto m = moving_saddle_node(0.5, 1.0 / 32);
        const auto a = estimate_pullback(m, w, m.defaults.anchors[0], Sense::attracting);
        const auto z = estimate_pullback(m, w, {{-1.0}, AnchorPlacement::comoving, ""}, Sense::repelling);
        const double ea = sup_error(a.curve, [&](const Sample& s) { return std::abs(s.x[0] - (s.t / 32 + 0.25 + rho)); });
        const double ez = sup_error(z.curve, [&](const Sample& s) { return std::abs(s.x[0] - (s.t / 32 + 0.25 - rho)); });
        o.require(a.converged() && ea <= 1e-6, "saddle-node attractor " + num(ea));
        o.require(z.converged() && ez <= 1e-6, "saddle-node repeller " + num(ez));
        o.note("sn attractor " + num(ea) + ", repeller " + num(ez));
    }
    {
        const auto m = moving_pitchfork(1.0, 0.5, 1);
        for (double sign : {1.0, -1.0}) {
            const auto e = estimate_pullback(m, w, {{0.0, sign}, AnchorPlacement::comoving, ""}, Sense::attracting);
            const double err =
                sup_error(e.curve, [&](const Sample& s) { return std::abs(s.x[1] - sign * std::sqrt(0.5)); });
            o.require(e.converged() && err <= 1e-6, "pitchfork " + num(sign) + " " + num(err));
            o.note("pitchfork " + std::string(sign > 0 ? "+" : "-") + " " + num(err));
        }
    }
    return o;
}

Outcome tracking_distances() {
    Outcome o;
    auto trace_for = [](const ModelSpec& m, CurveKind qkind, double t0, double T) {
        const auto est = estimate_pullback(m, {t0, t0 + T}, m.defaults.anchors[0], Sense::attracting);
        if (!est.converged()) throw std::runtime_error(m.name + " pullback did not converge");
        const auto bs = qse_continuation(m, linspace(t0, t0 + T, 181));
        const auto& b = branch_near(bs, oracle_curve(m, qkind, t0));
        return endpoint_tracking_test(est.path, b, T, 1e-3, {.t0 = t0}).traces.front().values;
    };
    auto stats = [](const std::vector<double>& v) {
        double mean = 0.0, var = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        for (double x : v) var += (x - mean) * (x - mean);
        return std::pair{mean, var / static_cast<double>(v.size())};
    };
    {
        const double mu = 0.5, r = 1.0 / 32;
        const auto v = trace_for(moving_saddle_node(mu, r), CurveKind::qse_stable_plus, 0.0, 10.0);
        const double expect = mu / 2 - std::sqrt(mu * mu / 4 - r);
        const auto [mean, var] = stats(v);
        double dev = 0.0;
        for (double x : v) dev = std::max(dev, std::abs(x - expect));
        o.require(dev <= 1e-6 && var < 1e-12, "saddle-node distance dev " + num(dev));
        o.note("sn distance " + num(mean) + " (expected " + num(expect) + ")");
    }
    {
        const double mu = 1.0, r = 0.5;
        const auto v = trace_for(moving_pitchfork(mu, r, 1), CurveKind::qse_stable_plus, 0.0, 10.0);
        const double expect = std::sqrt(r * r - r + 2 * mu - 2 * std::sqrt(mu * (mu - r)));
        double dev = 0.0;
        for (double x : v) dev = std::max(dev, std::abs(x - expect));
        o.require(dev <= 1e-6 && std::abs(expect - 0.579471) < 1e-6, "pitchfork p=1 distance dev " + num(dev));
        o.note("pitchfork p=1 distance " + num(stats(v).first) + " (expected " + num(expect) + ")");
    }
    {
        const auto v = trace_for(moving_pitchfork(1.0, 0.5, 2), CurveKind::qse_stable_plus, 1.0, 9.0);
        bool increasing = true;
        for (std::size_t j = 1; j < v.size(); ++j) increasing = increasing && v[j] > v[j - 1];
        o.require(increasing, "pitchfork p=2 distance strictly increasing");
        o.note("pitchfork p=2 distance " + num(v.front()) + " -> " + num(v.back()));
    }
    return o;
}

Outcome blow_up_time() {
    Outcome o;
    const auto m = moving_saddle_node(0.5, 3.0 / 32);
    const auto traj = integrate(m.field, {0.25}, 0.0, 20.0);
    const double t_star = std::numbers::pi / (2 * std::sqrt(1.0 / 32));
    o.require(traj.status == TrajectoryStatus::escaped, "escaped");
    o.require(traj.escape.lo <= t_star && t_star <= traj.escape.hi, "bracket contains " + num(t_star));
    o.require(traj.escape.hi - traj.escape.lo <= 1e-3, "width " + num(traj.escape.hi - traj.escape.lo));
    o.note("bracket [" + num(traj.escape.lo) + ", " + num(traj.escape.hi) + "]");
    return o;
}

Outcome comoving_correspondence() {
    Outcome o;
    std::mt19937_64 rng(20261014);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_residual = 0.0, worst_ratio = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const double mu = 0.5 + u(rng);
        std::vector<ModelSpec> models{
            moving_saddle_node(mu, 0.9 * u(rng) * mu * mu / 4),
            moving_cubic(mu, (2 * u(rng) - 1) * 0.9 * 2 * mu * mu * mu / (3 * std::sqrt(3.0))),
        };
        for (int p : {1, 2, 3}) models.push_back(moving_pitchfork(mu, (2 * u(rng) - 1) * 0.9 * mu, p));
        for (const auto& m : models) {
            ConsistencyOptions co;
            co.seed = rng();
            const auto rep = comoving_consistency_check(m, 200, co);
            worst_residual = std::max(worst_residual, rep.algebraic_max_residual);
            worst_ratio = std::max(worst_ratio, rep.dynamic_worst_ratio);
            const std::string tag = m.name + " mu=" + num(m.params.mu) + " r=" + num(m.params.r);
            o.require(rep.algebraic_passed && rep.algebraic_max_residual <= 1e-12, tag + " algebraic");
            o.require(rep.dynamic_passed, tag + " dynamic ratio " + num(rep.dynamic_worst_ratio));
            o.require(rep.lift_passed && !rep.lifts.empty(), tag + " lift");
        }
    }
    o.note("worst algebraic residual " + num(worst_residual) + ", worst dynamic mismatch " + num(worst_ratio) +
           " x tolerance");
    return o;
}

Outcome locality() {
    Outcome o;
    const double r = 2.0 / (3.0 * std::sqrt(3.0)) + 0.1;
    const auto m = moving_cubic(1.0, r);
    const auto res = locality_probe(m, {{-2.0}, AnchorPlacement::comoving, "u0=-2"});
    o.require(res.estimate.converged(), "lower pullback converged");
    o.require(res.diagnostic.verdict == Verdict::holds, "forward attraction " + std::string(to_string(res.diagnostic.verdict)));
    // Root-finding oracle for -u^3 + u - r = 0 on the lower side.
    double lo = -3.0, hi = -0.6;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        ((-mid * mid * mid + mid - r) > 0 ? lo : hi) = mid;
    }
    const double err = sup_error(res.estimate.curve, [&](const Sample& s) { return std::abs(s.x[0] - r * s.t - lo); });
    o.require(err <= 1e-6, "curve matches root oracle " + num(err));
    o.require(std::abs(lo + 2.0 / std::sqrt(3.0)) < 0.05, "offset near -1.1547");
    const auto upper = locality_probe(m, {{2.0}, AnchorPlacement::comoving, "u0=+2"});
    bool distinct = false;
    if (upper.estimate.converged()) {
        double gap = 0.0;
        for (std::size_t j = 0; j < upper.estimate.curve.size(); ++j)
            gap = std::max(gap, std::abs(upper.estimate.curve[j].x[0] - res.estimate.curve[j].x[0]));
        distinct = gap > 1e-4;
    }
    o.require(!distinct, "no second attractor from upper anchor");
    o.note("offset " + num(lo) + ", sup error " + num(err));
    return o;
}

Outcome property_suites() {
    Outcome o;
    {
        // Error and step count versus tolerance on drift.
        const auto m = drift(0.5);
        const double exact = std::exp(5.0) / 1.5 + std::exp(-10.0);
        std::vector<double> lt, le, ls;
        for (double tol : {1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10}) {
            IntegratorConfig c;
            c.abs_tol = c.rel_tol = tol;
            c.max_step = 100.0;
            const auto tr = integrate(m.field, {1.0 / 1.5 + 1.0}, 0.0, 10.0, c);
            lt.push_back(std::log10(tol));
            le.push_back(std::log10(std::abs(tr.final_state()[0] - exact) / exact));
            ls.push_back(std::log10(static_cast<double>(tr.samples.size())));
        }
        const double se = slope(lt, le), ss = -slope(lt, ls);
        o.require(se > 0.8 && se < 1.2, "error slope " + num(se));
        o.require(ss > 0.14 && ss < 0.28, "step-count slope " + num(ss));
        o.note("error ~ tol^" + num(se) + ", steps ~ tol^-" + num(ss));
    }
    {
        double worst = 0.0;
        for (double r : {-0.5, 0.2, 0.5}) {
            const auto m = moving_pitchfork(1.0, r, 1);
            const auto up = estimate_pullback(m, {0.0, 4.0}, {{0.0, 0.6}, AnchorPlacement::comoving, ""}, Sense::attracting);
            const auto dn = estimate_pullback(m, {0.0, 4.0}, {{0.0, -0.6}, AnchorPlacement::comoving, ""}, Sense::attracting);
            for (std::size_t j = 0; j < up.curve.size(); ++j)
                worst = std::max({worst, std::abs(up.curve[j].x[0] - dn.curve[j].x[0]),
                                  std::abs(up.curve[j].x[1] + dn.curve[j].x[1])});
        }
        o.require(worst <= 1e-8, "pitchfork antisymmetry " + num(worst));
        o.note("antisymmetry " + num(worst));
    }
    {
        const auto m = moving_saddle_node(0.5, 1.0 / 32);
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.001, 0.999);
        bool sandwiched = true;
        double worst_limit = 0.0;
        for (int k = 0; k < 100; ++k) {
            const double lo = oracle_curve(m, CurveKind::repeller, 0.0)[0];
            const double hi = oracle_curve(m, CurveKind::attractor_plus, 0.0)[0];
            const auto tr = integrate(m.field, {lo + (hi - lo) * u(rng)}, 0.0, 200.0);
            sandwiched = sandwiched && tr.status == TrajectoryStatus::completed;
            for (const auto& s : tr.samples)
                sandwiched = sandwiched && s.x[0] > oracle_curve(m, CurveKind::repeller, s.t)[0] - 1e-9 &&
                             s.x[0] < oracle_curve(m, CurveKind::attractor_plus, s.t)[0] + 1e-9;
            worst_limit = std::max(worst_limit,
                                   std::abs(tr.final_state()[0] - oracle_curve(m, CurveKind::attractor_plus, 200.0)[0]));
        }
        o.require(sandwiched, "sandwich bounds");
        o.require(worst_limit < 1e-6, "convergence to attractor " + num(worst_limit));
        o.note("sandwich 100/100, final gap " + num(worst_limit));
    }
    {
        const auto fam = family("moving-cubic", [] {
            ModelParams p;
            p.mu = 1.0;
            return p;
        }());
        TipOptions a, b;
        a.threads = 0;
        b.threads = 4;
        const auto ra = find_critical_rate(fam, {PredicateKind::attractor_count, 2}, 0.1, 0.6, 1e-4, a);
        const auto rb = find_critical_rate(fam, {PredicateKind::attractor_count, 2}, 0.1, 0.6, 1e-4, b);
        const std::string ja = tipping_json(ra, {0.1, 0.6}).dump(), jb = tipping_json(rb, {0.1, 0.6}).dump();
        o.require(ja == jb, "parallel sweep JSON identical");
        o.note("parallel JSON identical (" + std::to_string(ja.size()) + " bytes)");
    }
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"critical rate, moving saddle-node", saddle_node_rates},
        {"critical rate, moving cubic", cubic_rates},
        {"critical rate, moving pitchfork", pitchfork_rates},
        {"drift attracts without tracking or tipping", drift_non_tipping},
        {"pullback estimates match closed forms", oracle_equivalence},
        {"tracking-distance formulas", tracking_distances},
        {"finite-time blow-up bracket", blow_up_time},
        {"co-moving correspondence", comoving_correspondence},
        {"locality of annihilation", locality},
        {"property suites", property_suites},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (!o.pass) ++failures;
        std::printf("criterion %zu %s: %s (%.2f s) %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                    seconds_since(t0), o.detail.c_str());
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
