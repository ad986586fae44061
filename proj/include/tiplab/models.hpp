#pragma once

// Catalog of rate-dependent example systems x' = f(x, lambda(r t), t) with
// their ramps, co-moving translations and closed-form reference curves.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tiplab/ode.hpp"
#include "tiplab/roots.hpp"

namespace tiplab {

enum class RampKind { exponential, linear, polynomial, bounded_tanh };

/// lambda(r t) and its time derivative.
struct RampDescriptor {
    RampKind kind = RampKind::linear;
    double rate = 0.0;
    int degree = 1;          // polynomial only, >= 1
    double amplitude = 1.0;  // bounded_tanh only: lambda ranges over (0, amplitude)

    [[nodiscard]] static double binomial(int n, int k) {
        double c = 1.0;
        for (int i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
        return c;
    }

    [[nodiscard]] double value(double t) const {
        const double s = rate * t;
        switch (kind) {
            case RampKind::exponential: return std::exp(s);
            case RampKind::linear: return s;
            case RampKind::polynomial: {
                double sum = 0.0, pw = 1.0;
                for (int k = 1; k <= degree; ++k) {
                    pw *= s;
                    sum += binomial(degree, k) * pw;
                }
                return sum;
            }
            case RampKind::bounded_tanh: return amplitude * (std::tanh(s) + 1.0) / 2.0;
        }
        return 0.0;
    }

    /// d/dt lambda(r t); the polynomial case uses r p sum_k C(p-1, k) (r t)^k.
    [[nodiscard]] double derivative(double t) const {
        const double s = rate * t;
        switch (kind) {
            case RampKind::exponential: return rate * std::exp(s);
            case RampKind::linear: return rate;
            case RampKind::polynomial: {
                double sum = 0.0, pw = 1.0;
                for (int k = 0; k <= degree - 1; ++k) {
                    sum += binomial(degree - 1, k) * pw;
                    pw *= s;
                }
                return rate * static_cast<double>(degree) * sum;
            }
            case RampKind::bounded_tanh: {
                const double c = std::cosh(s);
                return amplitude * rate / (2.0 * c * c);
            }
        }
        return 0.0;
    }
};

/// Translation v(t) = a * lambda(r t) + b taking the system to an autonomous
/// co-moving field g(y) = f(y + v(t), t) - v'(t).
struct Comoving {
    RampDescriptor ramp;
    State a;
    State b;
    VectorField field;  // g; time argument ignored

    [[nodiscard]] State shift(double t) const {
        const double lam = ramp.value(t);
        State v(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i] * lam + b[i];
        return v;
    }
    [[nodiscard]] State velocity(double t) const {
        const double dl = ramp.derivative(t);
        State v(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i] * dl;
        return v;
    }
};

enum class CurveKind { attractor_plus, attractor_minus, repeller, qse_stable_plus, qse_stable_minus, qse_unstable };

[[nodiscard]] inline const char* to_string(CurveKind k) {
    switch (k) {
        case CurveKind::attractor_plus: return "attractor+";
        case CurveKind::attractor_minus: return "attractor-";
        case CurveKind::repeller: return "repeller";
        case CurveKind::qse_stable_plus: return "qse_stable+";
        case CurveKind::qse_stable_minus: return "qse_stable-";
        case CurveKind::qse_unstable: return "qse_unstable";
    }
    return "unknown";
}

class CurveNotDefined : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct ModelParams {
    double mu = 0.5;
    double r = 0.0;
    int p = 1;
    double lambda_max = std::numeric_limits<double>::quiet_NaN();  // NaN selects 3 mu
};

enum class AnchorPlacement { fixed, comoving };

struct Anchor {
    State point;
    AnchorPlacement placement = AnchorPlacement::fixed;
    std::string description;
};

/// Per-model defaults for pullback and forward analyses at a given rate.
struct AnalysisDefaults {
    std::array<double, 2> window{0.0, 4.0};
    double horizon = 20.0;
    std::vector<Anchor> anchors;
    SearchBox comoving_box;
    double qse_half_width = 10.0;
};

using OracleFn = std::function<std::optional<State>(CurveKind, double t)>;

struct ModelSpec {
    std::string name;
    std::size_t dimension = 1;
    ModelParams params;
    RampDescriptor ramp;
    VectorField field;
    std::optional<Comoving> comoving;
    OracleFn oracle;
    std::vector<double> critical_rates;  // closed-form r* where known
    AnalysisDefaults defaults;
    std::function<State(double t)> qse_center;  // centre of the QSE search box at time s
};

// ---------------------------------------------------------------------------
// Catalog

inline ModelSpec drift(double r) {
    ModelSpec m;
    m.name = "drift";
    m.params.r = r;
    m.ramp = {RampKind::exponential, r};
    const RampDescriptor ramp = m.ramp;
    m.field = {1,
               [ramp](std::span<const double> x, double t, std::span<double> dx) { dx[0] = -(x[0] - ramp.value(t)); },
               [](std::span<const double>, double, std::span<double> j) { j[0] = -1.0; }};
    m.oracle = [ramp, r](CurveKind k, double t) -> std::optional<State> {
        switch (k) {
            case CurveKind::attractor_plus:
                if (r == -1.0) return std::nullopt;
                return State{ramp.value(t) / (1.0 + r)};
            case CurveKind::qse_stable_plus: return State{ramp.value(t)};
            default: return std::nullopt;
        }
    };
    // Keep the exponential below ~1e2 over window + horizon.
    const double t_end = r > 0.0 ? std::min(24.0, std::log(100.0) / r) : 24.0;
    m.defaults.window = {t_end - 24.0, t_end - 20.0};
    m.defaults.horizon = 20.0;
    m.defaults.anchors = {{{5.0}, AnchorPlacement::fixed, "x0=5"}, {{-5.0}, AnchorPlacement::fixed, "x0=-5"}};
    m.qse_center = [ramp](double t) { return State{ramp.value(t)}; };
    return m;
}

inline ModelSpec moving_saddle_node(double mu, double r) {
    if (!(mu > 0.0)) throw std::invalid_argument("moving-sn requires mu > 0");
    ModelSpec m;
    m.name = "moving-sn";
    m.params.mu = mu;
    m.params.r = r;
    m.ramp = {RampKind::linear, r};
    const RampDescriptor ramp = m.ramp;
    m.field = {1,
               [ramp, mu](std::span<const double> x, double t, std::span<double> dx) {
                   const double w = x[0] - ramp.value(t);
                   dx[0] = -w * (w - mu);
               },
               [ramp, mu](std::span<const double> x, double t, std::span<double> j) {
                   const double w = x[0] - ramp.value(t);
                   j[0] = -(2.0 * w - mu);
               }};
    const double c = mu * mu / 4.0 - r;
    Comoving cm;
    cm.ramp = ramp;
    cm.a = {1.0};
    cm.b = {mu / 2.0};
    cm.field = {1, [c](std::span<const double> u, double, std::span<double> du) { du[0] = -u[0] * u[0] + c; },
                [](std::span<const double> u, double, std::span<double> j) { j[0] = -2.0 * u[0]; }};
    m.comoving = cm;
    m.oracle = [ramp, mu, c](CurveKind k, double t) -> std::optional<State> {
        const double lam = ramp.value(t);
        switch (k) {
            case CurveKind::attractor_plus:
                if (c < 0.0) return std::nullopt;
                return State{lam + mu / 2.0 + std::sqrt(c)};
            case CurveKind::repeller:
                if (c < 0.0) return std::nullopt;
                return State{lam + mu / 2.0 - std::sqrt(c)};
            case CurveKind::qse_stable_plus: return State{lam + mu};
            case CurveKind::qse_unstable: return State{lam};
            default: return std::nullopt;
        }
    };
    m.critical_rates = {mu * mu / 4.0};
    m.defaults.anchors = {{{1.0}, AnchorPlacement::comoving, "u0=+1"}, {{-1.0}, AnchorPlacement::comoving, "u0=-1"}};
    m.defaults.comoving_box = {{0.0}, {std::max(2.0, 2.0 * mu)}, 41};
    m.qse_center = [ramp, mu](double t) { return State{ramp.value(t) + mu / 2.0}; };
    m.defaults.qse_half_width = 2.0 * mu;
    return m;
}

/// Real roots of -u^3 + mu^2 u - r = 0 in increasing order.
[[nodiscard]] inline std::vector<double> cubic_comoving_roots(double mu, double r) {
    // u^3 - mu^2 u + r = 0 (depressed cubic, p = -mu^2, q = r)
    const double p = -mu * mu, q = r;
    const double disc = -(4.0 * p * p * p + 27.0 * q * q);
    std::vector<double> out;
    if (disc >= 0.0) {
        const double amp = 2.0 * std::sqrt(-p / 3.0);
        const double arg = std::clamp((3.0 * q / (2.0 * p)) * std::sqrt(-3.0 / p), -1.0, 1.0);
        const double theta = std::acos(arg) / 3.0;
        for (int k = 0; k < 3; ++k) out.push_back(amp * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0));
    } else {
        const double s = std::sqrt(q * q / 4.0 + p * p * p / 27.0);
        out.push_back(std::cbrt(-q / 2.0 + s) + std::cbrt(-q / 2.0 - s));
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline ModelSpec moving_cubic(double mu, double r) {
    if (!(mu > 0.0)) throw std::invalid_argument("moving-cubic requires mu > 0");
    ModelSpec m;
    m.name = "moving-cubic";
    m.params.mu = mu;
    m.params.r = r;
    m.ramp = {RampKind::linear, r};
    const RampDescriptor ramp = m.ramp;
    m.field = {1,
               [ramp, mu](std::span<const double> x, double t, std::span<double> dx) {
                   const double w = x[0] - ramp.value(t);
                   dx[0] = -w * (w - mu) * (w + mu);
               },
               [ramp, mu](std::span<const double> x, double t, std::span<double> j) {
                   const double w = x[0] - ramp.value(t);
                   j[0] = -3.0 * w * w + mu * mu;
               }};
    Comoving cm;
    cm.ramp = ramp;
    cm.a = {1.0};
    cm.b = {0.0};
    cm.field = {1,
                [mu, r](std::span<const double> u, double, std::span<double> du) {
                    du[0] = -u[0] * u[0] * u[0] + mu * mu * u[0] - r;
                },
                [mu](std::span<const double> u, double, std::span<double> j) { j[0] = -3.0 * u[0] * u[0] + mu * mu; }};
    m.comoving = cm;
    const double rstar = 2.0 * mu * mu * mu / (3.0 * std::sqrt(3.0));
    m.oracle = [ramp, mu, r, rstar](CurveKind k, double t) -> std::optional<State> {
        const double lam = ramp.value(t);
        const auto roots = cubic_comoving_roots(mu, r);
        const bool three = roots.size() == 3;
        switch (k) {
            case CurveKind::attractor_plus:
                if (three) return State{lam + roots[2]};
                if (r < -rstar) return State{lam + roots[0]};
                return std::nullopt;
            case CurveKind::attractor_minus:
                if (three) return State{lam + roots[0]};
                if (r > rstar) return State{lam + roots[0]};
                return std::nullopt;
            case CurveKind::repeller:
                if (three) return State{lam + roots[1]};
                return std::nullopt;
            case CurveKind::qse_stable_plus: return State{lam + mu};
            case CurveKind::qse_stable_minus: return State{lam - mu};
            case CurveKind::qse_unstable: return State{lam};
        }
        return std::nullopt;
    };
    m.critical_rates = {-rstar, rstar};
    m.defaults.anchors = {{{2.0 * mu}, AnchorPlacement::comoving, "u0=+2mu"},
                          {{-2.0 * mu}, AnchorPlacement::comoving, "u0=-2mu"}};
    m.defaults.comoving_box = {{0.0}, {2.0 * mu}, 41};
    m.qse_center = [ramp](double t) { return State{ramp.value(t)}; };
    m.defaults.qse_half_width = 2.0 * mu;
    return m;
}

/// Two-dimensional pitchfork system driven by the degree-p ramp
/// lambda = sum_{k=1}^p C(p,k) (r t)^k:
///   x' = -(x + lambda) - (lambda' - r),  y' = -y (x + lambda - mu + y^2).
/// In z = x + lambda it becomes z' = -z + r, y' = -y (z - mu + y^2).
inline ModelSpec moving_pitchfork(double mu, double r, int p) {
    if (!(mu > 0.0)) throw std::invalid_argument("moving-pitchfork requires mu > 0");
    if (p < 1) throw std::invalid_argument("moving-pitchfork requires ramp degree p >= 1");
    ModelSpec m;
    m.name = "moving-pitchfork";
    m.dimension = 2;
    m.params.mu = mu;
    m.params.r = r;
    m.params.p = p;
    m.ramp = {RampKind::polynomial, r, p};
    const RampDescriptor ramp = m.ramp;
    m.field = {2,
               [ramp, mu, r](std::span<const double> x, double t, std::span<double> dx) {
                   const double lam = ramp.value(t);
                   const double z = x[0] + lam;
                   dx[0] = -z - (ramp.derivative(t) - r);
                   dx[1] = -x[1] * (z - mu + x[1] * x[1]);
               },
               [ramp, mu](std::span<const double> x, double t, std::span<double> j) {
                   const double z = x[0] + ramp.value(t);
                   j[0] = -1.0;
                   j[1] = 0.0;
                   j[2] = -x[1];
                   j[3] = -(z - mu + 3.0 * x[1] * x[1]);
               }};
    Comoving cm;
    cm.ramp = ramp;
    cm.a = {-1.0, 0.0};
    cm.b = {0.0, 0.0};
    cm.field = {2,
                [mu, r](std::span<const double> y, double, std::span<double> dy) {
                    dy[0] = -y[0] + r;
                    dy[1] = -y[1] * (y[0] - mu + y[1] * y[1]);
                },
                [mu](std::span<const double> y, double, std::span<double> j) {
                    j[0] = -1.0;
                    j[1] = 0.0;
                    j[2] = -y[1];
                    j[3] = -(y[0] - mu + 3.0 * y[1] * y[1]);
                }};
    m.comoving = cm;
    m.oracle = [ramp, mu, r](CurveKind k, double t) -> std::optional<State> {
        const double lam = ramp.value(t);
        const double dl = ramp.derivative(t);
        switch (k) {
            case CurveKind::attractor_plus:
            case CurveKind::attractor_minus: {
                if (r > mu) return std::nullopt;
                const double y = std::sqrt(mu - r);
                return State{r - lam, k == CurveKind::attractor_plus ? y : -y};
            }
            case CurveKind::repeller: return State{r - lam, 0.0};
            case CurveKind::qse_stable_plus:
            case CurveKind::qse_stable_minus: {
                const double y2 = dl - r + mu;
                if (y2 < 0.0) return std::nullopt;
                const double y = std::sqrt(y2);
                return State{-lam - dl + r, k == CurveKind::qse_stable_plus ? y : -y};
            }
            case CurveKind::qse_unstable: return State{-lam - dl + r, 0.0};
        }
        return std::nullopt;
    };
    m.critical_rates = {mu};
    m.defaults.anchors = {{{0.0, 1.0}, AnchorPlacement::comoving, "z0=0,y0=+1"},
                          {{0.0, -1.0}, AnchorPlacement::comoving, "z0=0,y0=-1"}};
    const double zw = std::max(2.0, 2.0 * std::abs(r));
    m.defaults.comoving_box = {{0.0, 0.0}, {zw, std::max(2.0, 2.0 * std::sqrt(mu))}, 21};
    m.qse_center = [ramp](double t) { return State{-ramp.value(t), 0.0}; };
    m.defaults.qse_half_width = 10.0;
    return m;
}

/// Saddle-node system under an asymptotically constant shift
/// lambda = lambda_max (tanh(r t) + 1) / 2.
inline ModelSpec bounded_ramp_saddle_node(double mu, double r, double lambda_max) {
    if (!(mu > 0.0)) throw std::invalid_argument("bounded-ramp-sn requires mu > 0");
    if (std::isnan(lambda_max)) lambda_max = 3.0 * mu;
    ModelSpec m;
    m.name = "bounded-ramp-sn";
    m.params.mu = mu;
    m.params.r = r;
    m.params.lambda_max = lambda_max;
    m.ramp = {RampKind::bounded_tanh, r, 1, lambda_max};
    const RampDescriptor ramp = m.ramp;
    m.field = {1,
               [ramp, mu](std::span<const double> x, double t, std::span<double> dx) {
                   const double w = x[0] - ramp.value(t);
                   dx[0] = -w * (w - mu);
               },
               [ramp, mu](std::span<const double> x, double t, std::span<double> j) {
                   const double w = x[0] - ramp.value(t);
                   j[0] = -(2.0 * w - mu);
               }};
    m.oracle = [ramp, mu](CurveKind k, double t) -> std::optional<State> {
        switch (k) {
            case CurveKind::qse_stable_plus: return State{ramp.value(t) + mu};
            case CurveKind::qse_unstable: return State{ramp.value(t)};
            default: return std::nullopt;
        }
    };
    const double scale = std::abs(r) > 0.0 ? 1.0 / std::abs(r) : 100.0;
    m.defaults.window = {-4.0 * scale, 4.0 * scale};
    m.defaults.horizon = 20.0;
    m.defaults.anchors = {{{mu}, AnchorPlacement::fixed, "x0=mu"}};
    m.qse_center = [ramp, mu](double t) { return State{ramp.value(t) + mu / 2.0}; };
    m.defaults.qse_half_width = 2.0 * mu;
    return m;
}

inline const std::vector<std::string>& model_names() {
    static const std::vector<std::string> names{"drift", "moving-sn", "moving-cubic", "moving-pitchfork",
                                                "bounded-ramp-sn"};
    return names;
}

/// Builds a catalog model by name; `params.r` selects the rate.
inline ModelSpec make_model(std::string_view name, const ModelParams& params) {
    if (name == "drift") return drift(params.r);
    if (name == "moving-sn") return moving_saddle_node(params.mu, params.r);
    if (name == "moving-cubic") return moving_cubic(params.mu, params.r);
    if (name == "moving-pitchfork") return moving_pitchfork(params.mu, params.r, params.p);
    if (name == "bounded-ramp-sn") return bounded_ramp_saddle_node(params.mu, params.r, params.lambda_max);
    throw std::invalid_argument("unknown model '" + std::string(name) + "'");
}

/// A model viewed as a one-parameter family in the rate r.
using ModelFamily = std::function<ModelSpec(double r)>;

inline ModelFamily family(std::string name, ModelParams params) {
    return [name = std::move(name), params](double r) {
        ModelParams p = params;
        p.r = r;
        return make_model(name, p);
    };
}

// ---------------------------------------------------------------------------
// Operations

[[nodiscard]] inline State eval_rhs(const ModelSpec& model, const State& x, double t) { return model.field(x, t); }

[[nodiscard]] inline State oracle_curve(const ModelSpec& model, CurveKind which, double t) {
    if (!model.oracle) throw CurveNotDefined(model.name + " has no closed-form curves");
    auto v = model.oracle(which, t);
    if (!v) {
        throw CurveNotDefined(std::string(to_string(which)) + " is not defined for " + model.name + " at r=" +
                              std::to_string(model.params.r));
    }
    return *v;
}

enum class TransformDirection { to_comoving, from_comoving };

[[nodiscard]] inline State comoving_transform(const ModelSpec& model, const State& x, double t,
                                              TransformDirection dir) {
    if (!model.comoving) throw std::invalid_argument(model.name + " has no co-moving descriptor");
    if (x.size() != model.dimension) throw std::invalid_argument("state dimension mismatch");
    const State v = model.comoving->shift(t);
    State out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = dir == TransformDirection::to_comoving ? x[i] - v[i] : x[i] + v[i];
    return out;
}

}  // namespace tiplab
