#pragma once

// Adaptive Dormand-Prince 5(4) integration for nonautonomous ODEs, with
// continuous (dense) output and finite-time blow-up detection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tiplab {

using State = std::vector<double>;

/// Right-hand side dx/dt = f(x, t). Parameters live in the closure.
using RhsFn = std::function<void(std::span<const double> x, double t, std::span<double> dxdt)>;
/// Row-major N x N Jacobian of f with respect to x.
using JacobianFn = std::function<void(std::span<const double> x, double t, std::span<double> jac)>;

struct VectorField {
    std::size_t dimension = 0;
    RhsFn rhs;
    JacobianFn jacobian{};  // optional; finite differences are used when empty

    [[nodiscard]] State operator()(std::span<const double> x, double t) const {
        if (x.size() != dimension) {
            throw std::invalid_argument("state dimension " + std::to_string(x.size()) +
                                        " does not match field dimension " + std::to_string(dimension));
        }
        State out(dimension);
        rhs(x, t, out);
        return out;
    }
};

struct IntegratorConfig {
    double abs_tol = 1e-9;
    double rel_tol = 1e-9;
    double max_step = 0.1;
    double min_step = 1e-12;
    double escape_norm = 1e6;

    void validate() const {
        auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
        if (!positive(abs_tol) || !positive(rel_tol) || !positive(max_step) || !positive(min_step) ||
            !positive(escape_norm)) {
            throw std::invalid_argument("integrator tolerances must be finite and positive");
        }
        if (!(min_step < max_step)) throw std::invalid_argument("min_step must be smaller than max_step");
    }
};

enum class TrajectoryStatus { completed, escaped, step_underflow };

[[nodiscard]] inline const char* to_string(TrajectoryStatus s) {
    switch (s) {
        case TrajectoryStatus::completed: return "completed";
        case TrajectoryStatus::escaped: return "escaped";
        case TrajectoryStatus::step_underflow: return "step_underflow";
    }
    return "unknown";
}

/// Interval (lo < hi) known to contain a finite-time singularity.
struct TimeBracket {
    double lo = 0.0;
    double hi = 0.0;
    [[nodiscard]] double width() const { return hi - lo; }
    [[nodiscard]] bool contains(double t) const { return lo <= t && t <= hi; }
};

struct Sample {
    double t;
    State x;
};

/// Coefficients of the Dormand-Prince continuous extension over one step.
struct DenseSegment {
    double t_begin;
    double h;  // signed step
    std::vector<double> coeff;  // 5 * N, layout [k * N + i]
};

struct Trajectory {
    std::vector<Sample> samples;
    std::vector<DenseSegment> segments;  // segments[i] spans samples[i] -> samples[i+1]
    TrajectoryStatus status = TrajectoryStatus::completed;
    TimeBracket escape{};      // valid when status == escaped
    double underflow_time = 0.0;  // valid when status == step_underflow
    double last_step = 0.0;    // magnitude of the last accepted step

    [[nodiscard]] bool empty() const { return samples.empty(); }
    [[nodiscard]] double t_first() const { return samples.front().t; }
    [[nodiscard]] double t_last() const { return samples.back().t; }
    [[nodiscard]] const State& final_state() const { return samples.back().x; }
    [[nodiscard]] bool forward() const { return samples.size() < 2 || samples.back().t > samples.front().t; }
};

namespace detail {

inline double rms_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(std::max<std::size_t>(v.size(), 1)));
}

inline double euclid(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Dormand-Prince tableau (Hairer, Norsett & Wanner, DOPRI5).
struct Dopri {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                            a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

struct StepOutcome {
    TrajectoryStatus status = TrajectoryStatus::completed;
    TimeBracket escape{};
    double underflow_time = 0.0;
    double last_step = 0.0;
    double t_final = 0.0;
};

/// Core stepping loop. `on_step(t_old, t_new, h, y_new, coeff)` runs after every
/// accepted step; `coeff` is null unless `want_dense` is set.
template <typename OnStep>
StepOutcome drive(const VectorField& field, State& y, double t0, double t1, const IntegratorConfig& cfg,
                  bool want_dense, OnStep&& on_step) {
    using D = Dopri;
    const std::size_t n = field.dimension;
    const double dir = t1 > t0 ? 1.0 : -1.0;
    const double span_len = std::abs(t1 - t0);

    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);
    std::vector<double> coeff(want_dense ? 5 * n : 0);

    StepOutcome out;
    double t = t0;
    field.rhs(y, t, k1);

    // Initial step guess (Hairer's hinit, simplified).
    double h;
    {
        std::vector<double> scaled(n);
        for (std::size_t i = 0; i < n; ++i) scaled[i] = y[i] / (cfg.abs_tol + cfg.rel_tol * std::abs(y[i]));
        const double d0 = rms_norm(scaled);
        for (std::size_t i = 0; i < n; ++i) scaled[i] = k1[i] / (cfg.abs_tol + cfg.rel_tol * std::abs(y[i]));
        const double d1 = rms_norm(scaled);
        h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h = std::min({h, cfg.max_step, span_len});
        h = std::max(h, std::min(cfg.min_step * 10.0, span_len));
    }

    double fac_old = 1e-4;  // PI controller memory
    bool last_rejected = false;

    while (dir * (t1 - t) > 0.0) {
        bool last = false;
        if (h >= std::abs(t1 - t)) {
            h = std::abs(t1 - t);
            last = true;
        }
        if (h < cfg.min_step && !last) {
            out.status = TrajectoryStatus::step_underflow;
            out.underflow_time = t;
            out.t_final = t;
            return out;
        }
        const double hs = dir * h;
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + hs * D::a21 * k1[i];
        field.rhs(ytmp, t + D::c2 * hs, k2);
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + hs * (D::a31 * k1[i] + D::a32 * k2[i]);
        field.rhs(ytmp, t + D::c3 * hs, k3);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + hs * (D::a41 * k1[i] + D::a42 * k2[i] + D::a43 * k3[i]);
        field.rhs(ytmp, t + D::c4 * hs, k4);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + hs * (D::a51 * k1[i] + D::a52 * k2[i] + D::a53 * k3[i] + D::a54 * k4[i]);
        field.rhs(ytmp, t + D::c5 * hs, k5);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + hs * (D::a61 * k1[i] + D::a62 * k2[i] + D::a63 * k3[i] + D::a64 * k4[i] +
                                   D::a65 * k5[i]);
        const double t_new = last ? t1 : t + hs;
        field.rhs(ytmp, t + hs, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + hs * (D::a71 * k1[i] + D::a73 * k3[i] + D::a74 * k4[i] + D::a75 * k5[i] +
                                   D::a76 * k6[i]);
        field.rhs(ynew, t_new, k7);

        double errn = std::numeric_limits<double>::infinity();
        if (all_finite(ynew) && all_finite(k7)) {
            for (std::size_t i = 0; i < n; ++i) {
                const double sk = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
                err[i] = hs *
                         (D::e1 * k1[i] + D::e3 * k3[i] + D::e4 * k4[i] + D::e5 * k5[i] + D::e6 * k6[i] +
                          D::e7 * k7[i]) /
                         sk;
            }
            errn = rms_norm(err);
        }

        if (!(errn <= 1.0)) {
            const double fac = std::isfinite(errn) ? std::max(0.2, 0.9 * std::pow(errn, -0.2)) : 0.1;
            h *= std::min(1.0, fac);
            last_rejected = true;
            continue;
        }

        // Accepted.
        if (want_dense) {
            for (std::size_t i = 0; i < n; ++i) {
                const double ydiff = ynew[i] - y[i];
                const double bspl = hs * k1[i] - ydiff;
                coeff[i] = y[i];
                coeff[n + i] = ydiff;
                coeff[2 * n + i] = bspl;
                coeff[3 * n + i] = ydiff - hs * k7[i] - bspl;
                coeff[4 * n + i] = hs * (D::d1 * k1[i] + D::d3 * k3[i] + D::d4 * k4[i] + D::d5 * k5[i] +
                                         D::d6 * k6[i] + D::d7 * k7[i]);
            }
        }
        const double t_old = t;
        y.swap(ynew);
        k1.swap(k7);
        t = t_new;
        out.last_step = h;
        on_step(t_old, t, hs, static_cast<const State&>(y), want_dense ? coeff.data() : nullptr);

        const double norm = euclid(y);
        if (norm >= cfg.escape_norm) {
            // The singularity lies ahead of t. Growth like c / |T - t|^a with
            // a <= 1 (superquadratic blow-up) gives |T - t| <= |x|^2 / |x . f|;
            // the factor 2 absorbs lower-order corrections.
            double xf = 0.0;
            for (std::size_t i = 0; i < n; ++i) xf += dir * y[i] * k1[i];
            double ahead = (xf > 0.0) ? 2.0 * norm * norm / xf : out.last_step;
            if (!std::isfinite(ahead)) ahead = out.last_step;
            out.status = TrajectoryStatus::escaped;
            out.escape = dir > 0 ? TimeBracket{t, t + ahead} : TimeBracket{t - ahead, t};
            out.t_final = t;
            return out;
        }

        // PI step-size control (Gustafsson).
        const double e = std::max(errn, 1e-10);
        double fac = 0.9 * std::pow(e, -0.7 / 5.0) * std::pow(fac_old, 0.4 / 5.0);
        fac = std::clamp(fac, 0.2, 10.0);
        if (last_rejected) fac = std::min(fac, 1.0);
        fac_old = std::max(errn, 1e-4);
        last_rejected = false;
        h = std::min(h * fac, cfg.max_step);
    }
    out.t_final = t;
    return out;
}

}  // namespace detail

/// Integrates x' = f(x, t) from (x0, t0) to t1 (t1 < t0 integrates backward).
[[nodiscard]] inline Trajectory integrate(const VectorField& field, const State& x0, double t0, double t1,
                                          const IntegratorConfig& cfg = {}) {
    cfg.validate();
    if (x0.size() != field.dimension) throw std::invalid_argument("initial state has wrong dimension");
    if (!detail::all_finite(x0)) throw std::invalid_argument("initial state must be finite");
    if (!(t1 != t0) || !std::isfinite(t0) || !std::isfinite(t1))
        throw std::invalid_argument("integration interval must be finite and non-empty");

    Trajectory traj;
    traj.samples.push_back({t0, x0});
    State y = x0;
    const std::size_t n = field.dimension;
    auto out = detail::drive(field, y, t0, t1, cfg, true,
                             [&](double t_old, double t_new, double hs, const State& ynew, const double* coeff) {
                                 traj.segments.push_back({t_old, hs, std::vector<double>(coeff, coeff + 5 * n)});
                                 traj.samples.push_back({t_new, ynew});
                             });
    traj.status = out.status;
    traj.escape = out.escape;
    traj.underflow_time = out.underflow_time;
    traj.last_step = out.last_step;
    return traj;
}

struct Endpoint {
    State x;
    double t;
    TrajectoryStatus status;
    TimeBracket escape{};
};

/// Like integrate() but keeps only the final state.
[[nodiscard]] inline Endpoint propagate(const VectorField& field, const State& x0, double t0, double t1,
                                        const IntegratorConfig& cfg = {}) {
    cfg.validate();
    if (x0.size() != field.dimension) throw std::invalid_argument("initial state has wrong dimension");
    if (!detail::all_finite(x0)) throw std::invalid_argument("initial state must be finite");
    if (t1 == t0) return {x0, t0, TrajectoryStatus::completed, {}};
    State y = x0;
    auto out = detail::drive(field, y, t0, t1, cfg, false, [](double, double, double, const State&, const double*) {});
    return {std::move(y), out.t_final, out.status, out.escape};
}

/// Evaluates the continuous extension of `traj` at time t.
[[nodiscard]] inline State dense_eval(const Trajectory& traj, double t) {
    if (traj.samples.empty()) throw std::out_of_range("empty trajectory");
    const double a = traj.samples.front().t;
    const double b = traj.samples.back().t;
    const double lo = std::min(a, b), hi = std::max(a, b);
    const double slack = 1e-13 * (1.0 + std::max(std::abs(lo), std::abs(hi)));
    if (t < lo && t >= lo - slack) t = lo;
    if (t > hi && t <= hi + slack) t = hi;
    if (!(t >= lo && t <= hi)) {
        throw std::out_of_range("time " + std::to_string(t) + " outside trajectory range [" +
                                std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    if (traj.segments.empty()) return traj.samples.front().x;
    const bool fwd = b > a;
    // First sample strictly beyond t in the direction of integration.
    auto it = std::upper_bound(traj.samples.begin(), traj.samples.end(), t, [fwd](double v, const Sample& s) {
        return fwd ? v < s.t : v > s.t;
    });
    std::size_t seg = static_cast<std::size_t>(std::distance(traj.samples.begin(), it));
    if (seg == 0) return traj.samples.front().x;
    --seg;
    if (traj.samples[seg].t == t) return traj.samples[seg].x;
    if (seg >= traj.segments.size()) return traj.samples.back().x;
    const auto& sg = traj.segments[seg];
    const std::size_t n = traj.samples.front().x.size();
    const double s = (t - sg.t_begin) / sg.h;
    const double s1 = 1.0 - s;
    State out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* c = sg.coeff.data();
        out[i] = c[i] + s * (c[n + i] + s1 * (c[2 * n + i] + s * (c[3 * n + i] + s1 * c[4 * n + i])));
    }
    return out;
}

}  // namespace tiplab
