#pragma once

// Equilibria of frozen (fixed-time) vector fields: seeded Newton iteration,
// deduplication, and eigenvalue-based stability labels.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include "tiplab/ode.hpp"

namespace tiplab {

enum class Stability { stable, unstable, saddle, degenerate };

[[nodiscard]] inline const char* to_string(Stability s) {
    switch (s) {
        case Stability::stable: return "stable";
        case Stability::unstable: return "unstable";
        case Stability::saddle: return "saddle";
        case Stability::degenerate: return "degenerate";
    }
    return "unknown";
}

struct Equilibrium {
    State x;
    Stability stability = Stability::degenerate;
    std::vector<std::complex<double>> eigenvalues;
    double residual = 0.0;
};

struct NewtonOptions {
    double residual_tol = 1e-12;   // on ||f|| / (1 + ||x||)
    int max_iterations = 60;
    double stability_margin = 1e-9;
    double dedupe_distance = 1e-7;
};

/// Axis-aligned search region for the coarse seed scan.
struct SearchBox {
    State center;
    State half_width;
    std::size_t seeds_per_dim = 21;
};

[[nodiscard]] inline Eigen::MatrixXd jacobian_at(const VectorField& field, std::span<const double> x, double t) {
    const std::size_t n = field.dimension;
    Eigen::MatrixXd jac(n, n);
    if (field.jacobian) {
        std::vector<double> buf(n * n);
        field.jacobian(x, t, buf);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) jac(i, j) = buf[i * n + j];
        return jac;
    }
    State xp(x.begin(), x.end()), xm(x.begin(), x.end());
    State fp(n), fm(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        field.rhs(xp, t, fp);
        field.rhs(xm, t, fm);
        for (std::size_t i = 0; i < n; ++i) jac(i, j) = (fp[i] - fm[i]) / (2.0 * h);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    return jac;
}

[[nodiscard]] inline Stability classify(const std::vector<std::complex<double>>& eig, double margin) {
    bool any_pos = false, any_neg = false, any_flat = false;
    for (const auto& e : eig) {
        if (e.real() > margin) any_pos = true;
        else if (e.real() < -margin) any_neg = true;
        else any_flat = true;
    }
    if (any_flat) return Stability::degenerate;
    if (any_pos && any_neg) return Stability::saddle;
    return any_pos ? Stability::unstable : Stability::stable;
}

[[nodiscard]] inline std::vector<std::complex<double>> eigenvalues_of(const Eigen::MatrixXd& jac) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(jac, false);
    std::vector<std::complex<double>> out;
    for (Eigen::Index i = 0; i < jac.rows(); ++i) out.push_back(solver.eigenvalues()(i));
    std::sort(out.begin(), out.end(), [](auto a, auto b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return out;
}

/// Newton iteration on x -> field(x, t) from `seed`; nullopt on divergence.
[[nodiscard]] inline std::optional<State> newton_root(const VectorField& field, double t, State x,
                                                      const NewtonOptions& opt = {}) {
    const std::size_t n = field.dimension;
    State f(n);
    for (int it = 0; it < opt.max_iterations; ++it) {
        field.rhs(x, t, f);
        if (!detail::all_finite(f)) return std::nullopt;
        const double scale = 1.0 + detail::euclid(x);
        const double res = detail::euclid(f);
        const Eigen::MatrixXd jac = jacobian_at(field, x, t);
        Eigen::VectorXd rhs(n);
        for (std::size_t i = 0; i < n; ++i) rhs(static_cast<Eigen::Index>(i)) = -f[i];
        const Eigen::VectorXd dx = jac.fullPivLu().solve(rhs);
        if (!dx.allFinite()) {
            if (res <= opt.residual_tol * scale) return x;
            return std::nullopt;
        }
        if (res <= opt.residual_tol * scale && dx.norm() <= 1e-10 * scale) return x;
        for (std::size_t i = 0; i < n; ++i) x[i] += dx(static_cast<Eigen::Index>(i));
        if (!detail::all_finite(x)) return std::nullopt;
    }
    field.rhs(x, t, f);
    if (detail::euclid(f) <= opt.residual_tol * (1.0 + detail::euclid(x))) return x;
    return std::nullopt;
}

[[nodiscard]] inline Equilibrium characterize(const VectorField& field, double t, State x,
                                              const NewtonOptions& opt = {}) {
    Equilibrium eq;
    State f = field(x, t);
    eq.residual = detail::euclid(f);
    eq.eigenvalues = eigenvalues_of(jacobian_at(field, x, t));
    eq.stability = classify(eq.eigenvalues, opt.stability_margin);
    eq.x = std::move(x);
    return eq;
}

/// All roots of x -> field(x, t) reachable from `extra_seeds` and a uniform
/// seed grid over `box`, sorted lexicographically.
[[nodiscard]] inline std::vector<Equilibrium> find_equilibria(const VectorField& field, double t,
                                                              const SearchBox& box,
                                                              const std::vector<State>& extra_seeds = {},
                                                              const NewtonOptions& opt = {}) {
    const std::size_t n = field.dimension;
    std::vector<State> seeds = extra_seeds;
    const std::size_t m = std::max<std::size_t>(box.seeds_per_dim, 1);
    std::size_t total = 1;
    for (std::size_t d = 0; d < n; ++d) total *= m;
    for (std::size_t idx = 0; idx < total; ++idx) {
        State s(n);
        std::size_t rem = idx;
        for (std::size_t d = 0; d < n; ++d) {
            const std::size_t k = rem % m;
            rem /= m;
            const double u = m == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(m - 1);
            s[d] = box.center[d] + u * box.half_width[d];
        }
        seeds.push_back(std::move(s));
    }

    std::vector<State> roots;
    for (const auto& seed : seeds) {
        auto root = newton_root(field, t, seed, opt);
        if (!root) continue;
        bool inside = true;
        for (std::size_t d = 0; d < n; ++d)
            if (std::abs((*root)[d] - box.center[d]) > 2.0 * box.half_width[d]) inside = false;
        if (!inside) continue;
        const bool dup = std::any_of(roots.begin(), roots.end(), [&](const State& r) {
            State diff(n);
            for (std::size_t d = 0; d < n; ++d) diff[d] = r[d] - (*root)[d];
            return detail::euclid(diff) <= opt.dedupe_distance * (1.0 + detail::euclid(r));
        });
        if (!dup) roots.push_back(std::move(*root));
    }
    std::sort(roots.begin(), roots.end());
    std::vector<Equilibrium> out;
    out.reserve(roots.size());
    for (auto& r : roots) out.push_back(characterize(field, t, std::move(r), opt));
    return out;
}

}  // namespace tiplab
