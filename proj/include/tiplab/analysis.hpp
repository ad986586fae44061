#pragma once

// Nonautonomous analysis: pullback attractors and repellers, forward
// attraction and end-point tracking diagnostics, quasi-static equilibrium
// branches, and co-moving frame consistency checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "tiplab/models.hpp"
#include "tiplab/ode.hpp"
#include "tiplab/roots.hpp"

namespace tiplab {

enum class Frame { original, comoving };

[[nodiscard]] inline const char* to_string(Frame f) { return f == Frame::original ? "original" : "comoving"; }

/// The dynamics in working coordinates w = x - v(t); v is zero in the
/// original frame.
struct FramedSystem {
    VectorField field;
    std::optional<Comoving> comoving;  // engaged iff the working frame is co-moving

    [[nodiscard]] State to_working(const State& x, double t) const {
        return comoving ? minus(x, comoving->shift(t)) : x;
    }
    [[nodiscard]] State to_original(const State& w, double t) const {
        if (!comoving) return w;
        const State v = comoving->shift(t);
        State out(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] + v[i];
        return out;
    }
    static State minus(const State& a, const State& b) {
        State out(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
        return out;
    }
};

[[nodiscard]] inline FramedSystem framed(const ModelSpec& model, Frame frame) {
    if (frame == Frame::comoving) {
        if (!model.comoving) throw std::invalid_argument(model.name + " has no co-moving descriptor");
        return {model.comoving->field, model.comoving};
    }
    return {model.field, std::nullopt};
}

/// A time-parametrized state curve on [begin, end], either closed-form or
/// backed by a dense trajectory in some working frame.
class Curve {
public:
    using Fn = std::function<State(double)>;

    Curve() = default;
    Curve(Fn fn, double t_begin, double t_end)
        : fn_(std::move(fn)), begin_(std::min(t_begin, t_end)), end_(std::max(t_begin, t_end)) {}

    static Curve from_trajectory(Trajectory traj, const FramedSystem& sys, Frame frame) {
        Curve c;
        auto shared = std::make_shared<const Trajectory>(std::move(traj));
        c.begin_ = std::min(shared->t_first(), shared->t_last());
        c.end_ = std::max(shared->t_first(), shared->t_last());
        c.traj_ = shared;
        c.frame_ = frame;
        c.comoving_ = sys.comoving;
        return c;
    }

    static Curve from_oracle(const ModelSpec& model, CurveKind which, double t_begin, double t_end) {
        // Fails early when the curve does not exist at this rate.
        (void)oracle_curve(model, which, t_begin);
        auto oracle = model.oracle;
        std::string name = model.name;
        return Curve(
            [oracle, which, name](double t) {
                auto v = oracle(which, t);
                if (!v) throw CurveNotDefined(std::string(to_string(which)) + " undefined for " + name);
                return *v;
            },
            t_begin, t_end);
    }

    [[nodiscard]] double begin() const { return begin_; }
    [[nodiscard]] double end() const { return end_; }
    [[nodiscard]] bool covers(double a, double b) const {
        const double slack = 1e-12 * (1.0 + std::max(std::abs(a), std::abs(b)));
        return begin_ <= std::min(a, b) + slack && end_ >= std::max(a, b) - slack;
    }

    /// State in original coordinates.
    [[nodiscard]] State operator()(double t) const {
        t = clamp_time(t);
        if (traj_) {
            State w = dense_eval(*traj_, t);
            if (!comoving_) return w;
            const State v = comoving_->shift(t);
            for (std::size_t i = 0; i < w.size(); ++i) w[i] += v[i];
            return w;
        }
        if (!fn_) throw std::logic_error("empty curve");
        return fn_(t);
    }

    /// State in the working coordinates of `sys` (exact when the curve was
    /// computed in that frame).
    [[nodiscard]] State in_frame(double t, const FramedSystem& sys, Frame frame) const {
        if (traj_ && frame == frame_) return dense_eval(*traj_, clamp_time(t));
        return sys.to_working((*this)(t), t);
    }

private:
    double clamp_time(double t) const {
        if (t < begin_ || t > end_) {
            const double slack = 1e-12 * (1.0 + std::abs(t));
            if (t < begin_ - slack || t > end_ + slack)
                throw std::out_of_range("curve evaluated outside [" + std::to_string(begin_) + ", " +
                                        std::to_string(end_) + "] at " + std::to_string(t));
            t = std::clamp(t, begin_, end_);
        }
        return t;
    }

    Fn fn_;
    double begin_ = 0.0, end_ = 0.0;
    std::shared_ptr<const Trajectory> traj_;
    Frame frame_ = Frame::original;
    std::optional<Comoving> comoving_;
};

// ---------------------------------------------------------------------------
// Pullback estimation

enum class Sense { attracting, repelling };
enum class PullbackStatus { converged, escaped_during_pullback, not_converged };

[[nodiscard]] inline const char* to_string(PullbackStatus s) {
    switch (s) {
        case PullbackStatus::converged: return "converged";
        case PullbackStatus::escaped_during_pullback: return "escaped_during_pullback";
        case PullbackStatus::not_converged: return "not_converged";
    }
    return "unknown";
}

struct PullbackOptions {
    double tol = 1e-8;
    double delta = 1.0;
    int max_iterations = 40;
    double max_span = 131072.0;  // cap on |s_k - window edge|
    std::size_t grid_points = 201;
    Frame frame = Frame::original;
    IntegratorConfig integrator{};
};

struct PullbackEstimate {
    std::array<double, 2> window{};
    Sense sense = Sense::attracting;
    Anchor anchor;
    Frame frame = Frame::original;
    std::vector<Sample> curve;  // uniform grid over the window, original coordinates
    std::vector<double> start_times;
    std::vector<double> convergence_gaps;
    PullbackStatus status = PullbackStatus::not_converged;
    std::optional<TimeBracket> escape;
    bool step_underflow = false;
    Curve path;  // dense last iterate over the window

    [[nodiscard]] bool converged() const { return status == PullbackStatus::converged; }
};

[[nodiscard]] inline double sup_gap(const std::vector<State>& a, const std::vector<State>& b) {
    double g = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        for (std::size_t i = 0; i < a[j].size(); ++i) g = std::max(g, std::abs(a[j][i] - b[j][i]));
    return g;
}

/// Starts at `anchor` at times s_k receding from the window (doubling
/// offsets) and integrates through the window until successive
/// window-restricted curves agree to `tol` in sup norm. The repelling sense
/// runs the same scheme in reversed time.
[[nodiscard]] inline PullbackEstimate estimate_pullback(const ModelSpec& model, std::array<double, 2> window,
                                                        const Anchor& anchor, Sense sense,
                                                        const PullbackOptions& opt = {}) {
    const double ta = window[0], tb = window[1];
    if (!(std::isfinite(ta) && std::isfinite(tb) && ta < tb)) throw std::invalid_argument("window must be finite, t_a < t_b");
    if (anchor.point.size() != model.dimension || !detail::all_finite(anchor.point))
        throw std::invalid_argument("anchor must be a finite state of the model's dimension");
    if (anchor.placement == AnchorPlacement::comoving && !model.comoving)
        throw std::invalid_argument("co-moving anchor placement needs a co-moving descriptor");

    const FramedSystem sys = framed(model, opt.frame);
    const bool attracting = sense == Sense::attracting;
    const double edge = attracting ? ta : tb;
    const double far = attracting ? tb : ta;

    std::vector<double> grid(std::max<std::size_t>(opt.grid_points, 2));
    for (std::size_t j = 0; j < grid.size(); ++j)
        grid[j] = ta + (tb - ta) * static_cast<double>(j) / static_cast<double>(grid.size() - 1);
    grid.back() = tb;

    PullbackEstimate est;
    est.window = window;
    est.sense = sense;
    est.anchor = anchor;
    est.frame = opt.frame;

    std::vector<State> prev;
    std::optional<Trajectory> last_traj;
    std::vector<State> last_grid;
    for (int k = 0; k < opt.max_iterations; ++k) {
        const double offset = std::ldexp(opt.delta, k);
        if (offset > opt.max_span) break;
        const double s = attracting ? edge - offset : edge + offset;
        est.start_times.push_back(s);

        State x_start = anchor.point;
        if (anchor.placement == AnchorPlacement::comoving) {
            const State v = model.comoving->shift(s);
            for (std::size_t i = 0; i < x_start.size(); ++i) x_start[i] += v[i];
        }
        const State w0 = opt.frame == Frame::comoving && anchor.placement == AnchorPlacement::comoving
                             ? anchor.point
                             : sys.to_working(x_start, s);

        const Endpoint at_edge = propagate(sys.field, w0, s, edge, opt.integrator);
        if (at_edge.status == TrajectoryStatus::escaped) {
            est.status = PullbackStatus::escaped_during_pullback;
            est.escape = at_edge.escape;
            return est;
        }
        if (at_edge.status == TrajectoryStatus::step_underflow) {
            est.status = PullbackStatus::not_converged;
            est.step_underflow = true;
            return est;
        }
        Trajectory traj = integrate(sys.field, at_edge.x, edge, far, opt.integrator);
        if (traj.status == TrajectoryStatus::escaped) {
            est.status = PullbackStatus::escaped_during_pullback;
            est.escape = traj.escape;
            return est;
        }
        if (traj.status == TrajectoryStatus::step_underflow) {
            est.status = PullbackStatus::not_converged;
            est.step_underflow = true;
            return est;
        }
        std::vector<State> cur;
        cur.reserve(grid.size());
        for (double t : grid) cur.push_back(dense_eval(traj, t));

        if (!prev.empty()) {
            est.convergence_gaps.push_back(sup_gap(cur, prev));
            const auto& g = est.convergence_gaps;
            if (g.size() >= 2 && g[g.size() - 1] < opt.tol && g[g.size() - 2] < opt.tol &&
                g[g.size() - 1] <= g[g.size() - 2]) {
                est.status = PullbackStatus::converged;
                last_traj = std::move(traj);
                last_grid = std::move(cur);
                break;
            }
        }
        prev = cur;
        last_traj = std::move(traj);
        last_grid = std::move(cur);
    }

    if (last_traj) {
        for (std::size_t j = 0; j < grid.size(); ++j) est.curve.push_back({grid[j], sys.to_original(last_grid[j], grid[j])});
        est.path = Curve::from_trajectory(std::move(*last_traj), sys, opt.frame);
    }
    return est;
}

// ---------------------------------------------------------------------------
// Diagnostics

enum class DiagnosticKind { forward_attraction, endpoint_tracking, globally_defined };
enum class Verdict { holds, fails, inconclusive };

[[nodiscard]] inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::holds: return "holds";
        case Verdict::fails: return "fails";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "unknown";
}

[[nodiscard]] inline const char* to_string(DiagnosticKind k) {
    switch (k) {
        case DiagnosticKind::forward_attraction: return "forward_attraction";
        case DiagnosticKind::endpoint_tracking: return "endpoint_tracking";
        case DiagnosticKind::globally_defined: return "globally_defined";
    }
    return "unknown";
}

struct Trace {
    std::string label;
    std::vector<double> times;
    std::vector<double> values;
    bool escaped = false;
};

struct Diagnostic {
    DiagnosticKind kind = DiagnosticKind::forward_attraction;
    Verdict verdict = Verdict::inconclusive;
    std::vector<Trace> traces;
    std::map<std::string, double> thresholds;
    std::string note;
};

namespace detail {

// Indices of the samples in the last quarter of [t0, t1].
inline std::size_t final_quarter_start(const std::vector<double>& times, double t0, double t1) {
    const double cut = t0 + 0.75 * (t1 - t0);
    std::size_t j = 0;
    while (j < times.size() && times[j] < cut) ++j;
    return j == times.size() ? (times.empty() ? 0 : times.size() - 1) : j;
}

inline bool non_increasing(const std::vector<double>& v, std::size_t from, const std::vector<double>& slack) {
    for (std::size_t j = from + 1; j < v.size(); ++j)
        if (v[j] > v[j - 1] + slack[j]) return false;
    return true;
}

inline bool non_decreasing(const std::vector<double>& v, std::size_t from, const std::vector<double>& slack) {
    for (std::size_t j = from + 1; j < v.size(); ++j)
        if (v[j] < v[j - 1] - slack[j]) return false;
    return true;
}

}  // namespace detail

struct ForwardTestOptions {
    std::optional<double> t0;        // defaults to candidate.begin()
    double probe_radius = 0.1;       // offsets at most this large must not escape or diverge
    double divergence_factor = 10.0;
    Frame frame = Frame::original;
    IntegratorConfig integrator{};
    std::size_t trace_points = 401;
    double slack_factor = 100.0;     // monotonicity slack in units of the local integrator tolerance
};

/// Perturbs the candidate at t0 by each offset and follows the perturbed
/// solutions over the horizon.
[[nodiscard]] inline Diagnostic forward_attraction_test(const ModelSpec& model, const Curve& candidate,
                                                        const std::vector<State>& offsets, double horizon,
                                                        double eps, const ForwardTestOptions& opt = {}) {
    const double t0 = opt.t0.value_or(candidate.begin());
    const double t1 = t0 + horizon;
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    if (!candidate.covers(t0, t1)) throw std::invalid_argument("candidate window too short for horizon");
    if (offsets.empty()) throw std::invalid_argument("at least one offset is required");
    const FramedSystem sys = framed(model, opt.frame);

    Diagnostic diag;
    diag.kind = DiagnosticKind::forward_attraction;
    diag.thresholds = {{"eps", eps},
                       {"horizon", horizon},
                       {"t0", t0},
                       {"probe_radius", opt.probe_radius},
                       {"divergence_factor", opt.divergence_factor}};

    std::vector<double> times(std::max<std::size_t>(opt.trace_points, 5));
    for (std::size_t j = 0; j < times.size(); ++j)
        times[j] = t0 + horizon * static_cast<double>(j) / static_cast<double>(times.size() - 1);
    times.back() = t1;
    std::vector<State> cand;
    for (double t : times) cand.push_back(candidate.in_frame(t, sys, opt.frame));

    bool fails = false, all_hold = true;
    std::size_t surviving = 0;
    std::string why;
    for (std::size_t o = 0; o < offsets.size(); ++o) {
        const State& off = offsets[o];
        if (off.size() != model.dimension) throw std::invalid_argument("offset dimension mismatch");
        const double d0 = detail::euclid(off);
        if (!(d0 > 0.0)) throw std::invalid_argument("offsets must be nonzero");
        State w0 = cand.front();
        for (std::size_t i = 0; i < w0.size(); ++i) w0[i] += off[i];
        const Trajectory traj = integrate(sys.field, w0, t0, t1, opt.integrator);

        Trace tr;
        tr.label = "offset_" + std::to_string(o);
        std::vector<double> slack;
        double dmax = 0.0;
        for (std::size_t j = 0; j < times.size(); ++j) {
            if (times[j] > traj.t_last()) break;
            const State w = dense_eval(traj, times[j]);
            double s2 = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) s2 += (w[i] - cand[j][i]) * (w[i] - cand[j][i]);
            tr.times.push_back(times[j]);
            tr.values.push_back(std::sqrt(s2));
            slack.push_back(opt.slack_factor *
                            (opt.integrator.abs_tol + opt.integrator.rel_tol * detail::euclid(w)));
            dmax = std::max(dmax, tr.values.back());
        }
        tr.escaped = traj.status != TrajectoryStatus::completed;
        const bool small = d0 <= opt.probe_radius;
        const std::size_t q = detail::final_quarter_start(tr.times, t0, t1);
        if (tr.escaped) {
            all_hold = all_hold;  // escaping large offsets do not count against attraction
            if (small) {
                fails = true;
                why = tr.label + " escaped";
            }
        } else {
            ++surviving;
            const double dend = tr.values.back();
            const bool shrinking = detail::non_increasing(tr.values, q, slack);
            if (!(dend < eps && shrinking)) all_hold = false;
            if (small) {
                if (dmax >= opt.divergence_factor * d0) {
                    fails = true;
                    why = tr.label + " distance grew by factor >= divergence_factor";
                } else if (dend > d0 && detail::non_decreasing(tr.values, q, slack)) {
                    fails = true;
                    why = tr.label + " recedes from the candidate";
                }
            }
        }
        diag.traces.push_back(std::move(tr));
    }
    if (fails) {
        diag.verdict = Verdict::fails;
        diag.note = why;
    } else if (all_hold && surviving > 0) {
        diag.verdict = Verdict::holds;
    } else {
        diag.verdict = Verdict::inconclusive;
    }
    return diag;
}

// ---------------------------------------------------------------------------
// Quasi-static equilibria

struct QseSample {
    double s;
    State x;
    Stability stability;
    std::vector<std::complex<double>> eigenvalues;
    double residual;
};

struct QseBranch {
    std::vector<QseSample> samples;
    bool born_inside = false;  // root count changed: branch appears after the first grid time
    bool dies_inside = false;  // branch disappears before the last grid time
    bool has_degenerate = false;

    [[nodiscard]] double s_begin() const { return samples.front().s; }
    [[nodiscard]] double s_end() const { return samples.back().s; }
    [[nodiscard]] Stability dominant_stability() const {
        std::map<Stability, std::size_t> votes;
        for (const auto& s : samples) ++votes[s.stability];
        return std::max_element(votes.begin(), votes.end(), [](auto a, auto b) { return a.second < b.second; })->first;
    }
    [[nodiscard]] State at(double s) const {
        for (const auto& q : samples)
            if (q.s == s) return q.x;
        throw std::out_of_range("branch has no sample at s=" + std::to_string(s));
    }
};

struct QseOptions {
    std::optional<double> half_width;  // defaults to the model's qse_half_width
    std::size_t seeds_per_dim = 0;     // 0 = 41 in 1-D, 15 otherwise
    NewtonOptions newton{};
};

/// Roots of the frozen field x -> f(x, s) at every s, linked across s into
/// branches by nearest-neighbour matching relative to the search centre.
[[nodiscard]] inline std::vector<QseBranch> qse_continuation(const ModelSpec& model, const std::vector<double>& s_grid,
                                                             const QseOptions& opt = {}) {
    if (s_grid.empty()) throw std::invalid_argument("empty s grid");
    if (!std::is_sorted(s_grid.begin(), s_grid.end())) throw std::invalid_argument("s grid must be ordered");
    const std::size_t n = model.dimension;
    const double hw = opt.half_width.value_or(model.defaults.qse_half_width);
    const std::size_t seeds = opt.seeds_per_dim ? opt.seeds_per_dim : (n == 1 ? 41 : 15);

    std::vector<QseBranch> done;
    std::vector<QseBranch> alive;
    std::vector<State> prev_roots;
    for (std::size_t si = 0; si < s_grid.size(); ++si) {
        const double s = s_grid[si];
        const State center = model.qse_center ? model.qse_center(s) : State(n, 0.0);
        SearchBox box{center, State(n, hw), seeds};
        const auto eqs = find_equilibria(model.field, s, box, prev_roots, opt.newton);
        prev_roots.clear();
        for (const auto& e : eqs) prev_roots.push_back(e.x);

        auto rel = [&](const State& x) { return FramedSystem::minus(x, center); };
        std::vector<bool> root_used(eqs.size(), false), branch_used(alive.size(), false);
        std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
        for (std::size_t b = 0; b < alive.size(); ++b) {
            const auto& last = alive[b].samples.back();
            const State lc = model.qse_center ? model.qse_center(last.s) : State(n, 0.0);
            const State lr = FramedSystem::minus(last.x, lc);
            for (std::size_t e = 0; e < eqs.size(); ++e)
                pairs.emplace_back(detail::euclid(FramedSystem::minus(rel(eqs[e].x), lr)), b, e);
        }
        std::sort(pairs.begin(), pairs.end());
        auto sample_of = [&](const Equilibrium& e) {
            return QseSample{s, e.x, e.stability, e.eigenvalues, e.residual};
        };
        for (const auto& [d, b, e] : pairs) {
            if (branch_used[b] || root_used[e]) continue;
            branch_used[b] = root_used[e] = true;
            alive[b].samples.push_back(sample_of(eqs[e]));
        }
        std::vector<QseBranch> next;
        for (std::size_t b = 0; b < alive.size(); ++b) {
            if (branch_used[b]) {
                next.push_back(std::move(alive[b]));
            } else {
                alive[b].dies_inside = true;
                done.push_back(std::move(alive[b]));
            }
        }
        for (std::size_t e = 0; e < eqs.size(); ++e) {
            if (root_used[e]) continue;
            QseBranch br;
            br.born_inside = si > 0;
            br.samples.push_back(sample_of(eqs[e]));
            next.push_back(std::move(br));
        }
        alive = std::move(next);
    }
    for (auto& b : alive) done.push_back(std::move(b));
    for (auto& b : done)
        b.has_degenerate = std::any_of(b.samples.begin(), b.samples.end(),
                                       [](const QseSample& q) { return q.stability == Stability::degenerate; });
    std::sort(done.begin(), done.end(), [](const QseBranch& a, const QseBranch& b) {
        return a.samples.front().x < b.samples.front().x;
    });
    return done;
}

struct EndpointOptions {
    std::optional<double> t0;
    double slack = 1e-9;
};

/// Distance d(s) = |curve(s) - Q(s)| along the branch over [t0, t0 + T].
[[nodiscard]] inline Diagnostic endpoint_tracking_test(const Curve& curve, const QseBranch& branch, double horizon,
                                                       double eps, const EndpointOptions& opt = {}) {
    if (branch.samples.empty()) throw std::invalid_argument("empty branch");
    const double t0 = opt.t0.value_or(std::max(curve.begin(), branch.s_begin()));
    const double t1 = t0 + horizon;
    const double slack_t = 1e-12 * (1.0 + std::abs(t1));
    if (branch.s_begin() > t0 + slack_t || branch.s_end() < t1 - slack_t)
        throw std::invalid_argument("branch does not span horizon");
    if (!curve.covers(t0, t1)) throw std::invalid_argument("curve does not span horizon");

    Diagnostic diag;
    diag.kind = DiagnosticKind::endpoint_tracking;
    diag.thresholds = {{"eps", eps}, {"horizon", horizon}, {"t0", t0}, {"slack", opt.slack}};
    Trace tr;
    tr.label = "distance";
    for (const auto& q : branch.samples) {
        if (q.s < t0 - slack_t || q.s > t1 + slack_t) continue;
        const State c = curve(q.s);
        double s2 = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) s2 += (c[i] - q.x[i]) * (c[i] - q.x[i]);
        tr.times.push_back(q.s);
        tr.values.push_back(std::sqrt(s2));
    }
    if (tr.values.size() < 2) throw std::invalid_argument("branch has too few samples on the horizon");
    const std::vector<double> slack(tr.values.size(), opt.slack);
    const std::size_t q = detail::final_quarter_start(tr.times, t0, t1);
    const double dend = tr.values.back();
    if (dend < eps && detail::non_increasing(tr.values, q, slack)) {
        diag.verdict = Verdict::holds;
    } else if (dend > eps && detail::non_decreasing(tr.values, q, slack)) {
        diag.verdict = Verdict::fails;
    } else {
        diag.verdict = Verdict::inconclusive;
    }
    diag.traces.push_back(std::move(tr));
    return diag;
}

// ---------------------------------------------------------------------------
// Co-moving correspondence

struct LiftedEquilibrium {
    Equilibrium equilibrium;  // of the co-moving field
    double max_residual = 0.0;  // nonautonomous residual along y* + v(t)
    bool hyperbolic = true;     // only hyperbolic lifts count towards lift_passed
    bool passed = false;
};

struct ConsistencyReport {
    double algebraic_max_residual = 0.0;
    bool algebraic_passed = false;
    double dynamic_max_mismatch = 0.0;
    double dynamic_worst_ratio = 0.0;  // mismatch / (10 x local tolerance), must be <= 1
    bool dynamic_passed = false;
    std::vector<LiftedEquilibrium> lifts;
    bool lift_passed = false;

    [[nodiscard]] bool passed() const { return algebraic_passed && dynamic_passed && lift_passed; }
};

struct ConsistencyOptions {
    std::uint64_t seed = 12345;
    std::array<double, 2> time_range{-2.0, 2.0};
    double state_spread = 2.0;
    std::array<double, 2> window{0.0, 4.0};
    std::size_t dynamic_runs = 4;
    double algebraic_tol = 1e-12;
    double lift_tol = 1e-10;
    IntegratorConfig integrator{};
};

[[nodiscard]] inline ConsistencyReport comoving_consistency_check(const ModelSpec& model, std::size_t samples,
                                                                  const ConsistencyOptions& opt = {}) {
    if (!model.comoving) throw std::invalid_argument(model.name + " has no co-moving descriptor");
    const Comoving& cm = *model.comoving;
    const std::size_t n = model.dimension;
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> ut(opt.time_range[0], opt.time_range[1]);
    std::uniform_real_distribution<double> ux(-opt.state_spread, opt.state_spread);
    ConsistencyReport rep;

    // (a) f(x, t) - v'(t) == g(x - v(t))
    for (std::size_t k = 0; k < samples; ++k) {
        const double t = ut(rng);
        const State v = cm.shift(t);
        State x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = v[i] + ux(rng);
        const State f = model.field(x, t);
        const State dv = cm.velocity(t);
        const State g = cm.field(FramedSystem::minus(x, v), t);
        for (std::size_t i = 0; i < n; ++i)
            rep.algebraic_max_residual = std::max(rep.algebraic_max_residual, std::abs(f[i] - dv[i] - g[i]));
    }
    rep.algebraic_passed = rep.algebraic_max_residual <= opt.algebraic_tol;

    // (c) equilibria of g lift to solutions y* + v(t)
    const SearchBox box = model.defaults.comoving_box.center.size() == n
                              ? model.defaults.comoving_box
                              : SearchBox{State(n, 0.0), State(n, 5.0), n == 1 ? std::size_t{41} : std::size_t{15}};
    const auto eqs = find_equilibria(cm.field, 0.0, box);
    rep.lift_passed = true;
    for (const auto& e : eqs) {
        LiftedEquilibrium le{e, 0.0, e.stability != Stability::degenerate, false};
        for (int j = 0; j <= 100; ++j) {
            const double t = opt.window[0] + (opt.window[1] - opt.window[0]) * j / 100.0;
            const State v = cm.shift(t);
            State x(n);
            for (std::size_t i = 0; i < n; ++i) x[i] = e.x[i] + v[i];
            const State f = model.field(x, t);
            const State dv = cm.velocity(t);
            for (std::size_t i = 0; i < n; ++i) le.max_residual = std::max(le.max_residual, std::abs(f[i] - dv[i]));
        }
        le.passed = le.max_residual < opt.lift_tol;
        if (le.hyperbolic) rep.lift_passed = rep.lift_passed && le.passed;
        rep.lifts.push_back(std::move(le));
    }

    // (b) x(t) - v(t) tracks y(t) from matched initial data.
    std::vector<State> starts;
    std::uniform_real_distribution<double> small(-0.05, 0.05);
    for (const auto& e : eqs)
        if (e.stability == Stability::stable) starts.push_back(e.x);
    if (starts.empty()) starts.push_back(State(n, 0.0));
    const double t0 = opt.window[0], t1 = opt.window[1];
    rep.dynamic_passed = true;
    for (std::size_t run = 0; run < opt.dynamic_runs; ++run) {
        State y0 = starts[run % starts.size()];
        for (auto& c : y0) c += small(rng);
        State x0 = y0;
        const State v0 = cm.shift(t0);
        for (std::size_t i = 0; i < n; ++i) x0[i] += v0[i];
        const Trajectory xs = integrate(model.field, x0, t0, t1, opt.integrator);
        const Trajectory ys = integrate(cm.field, y0, t0, t1, opt.integrator);
        const double t_stop = std::min(xs.t_last(), ys.t_last());
        for (int j = 0; j <= 200; ++j) {
            const double t = t0 + (t_stop - t0) * j / 200.0;
            const State x = dense_eval(xs, t);
            const State y = dense_eval(ys, t);
            const State v = cm.shift(t);
            double mism = 0.0;
            for (std::size_t i = 0; i < n; ++i) mism = std::max(mism, std::abs(x[i] - v[i] - y[i]));
            const double tol = 10.0 * (opt.integrator.abs_tol + opt.integrator.rel_tol * detail::euclid(x));
            rep.dynamic_max_mismatch = std::max(rep.dynamic_max_mismatch, mism);
            rep.dynamic_worst_ratio = std::max(rep.dynamic_worst_ratio, mism / tol);
        }
    }
    rep.dynamic_passed = rep.dynamic_worst_ratio <= 1.0;
    return rep;
}

}  // namespace tiplab
