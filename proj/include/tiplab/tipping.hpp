#pragma once

// Rate-dependent diagnostics: attractor inventories at a fixed rate, rate
// sweeps, critical-rate bracketing by bisection on a qualitative predicate,
// and bifurcation classification in the co-moving frame.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "tiplab/analysis.hpp"
#include "tiplab/models.hpp"

namespace tiplab {

enum class PredicateKind { attractor_count, bounded_solution_exists, forward_attraction_holds };

struct PredicateSpec {
    PredicateKind kind = PredicateKind::bounded_solution_exists;
    int k = 1;  // attractor_count only

    [[nodiscard]] std::string describe() const {
        switch (kind) {
            case PredicateKind::attractor_count: return "attractor_count>=" + std::to_string(k);
            case PredicateKind::bounded_solution_exists: return "bounded_solution_exists";
            case PredicateKind::forward_attraction_holds: return "forward_attraction_holds";
        }
        return "unknown";
    }
};

enum class Truth { yes, no, inconclusive };

[[nodiscard]] inline const char* to_string(Truth t) {
    switch (t) {
        case Truth::yes: return "true";
        case Truth::no: return "false";
        case Truth::inconclusive: return "inconclusive";
    }
    return "unknown";
}

/// Predicate each catalog model is scanned with unless told otherwise.
[[nodiscard]] inline PredicateSpec default_predicate(const std::string& model_name) {
    if (model_name == "moving-sn") return {PredicateKind::bounded_solution_exists, 1};
    if (model_name == "moving-cubic" || model_name == "moving-pitchfork") return {PredicateKind::attractor_count, 2};
    return {PredicateKind::forward_attraction_holds, 1};
}

/// Evidence about bounded, globally defined solutions. Escape of every anchor
/// is heuristic: it does not prove that no bounded solution exists.
enum class GlobalEvidence { bounded_solution_found, all_anchors_escaped, undetermined };

[[nodiscard]] inline const char* to_string(GlobalEvidence e) {
    switch (e) {
        case GlobalEvidence::bounded_solution_found: return "bounded-solution-found";
        case GlobalEvidence::all_anchors_escaped: return "all-anchors-escaped";
        case GlobalEvidence::undetermined: return "undetermined";
    }
    return "unknown";
}

struct InventoryEntry {
    PullbackEstimate estimate;
    Diagnostic forward;
    std::vector<std::size_t> anchors;  // indices of anchors that reached this curve
};

struct RateDiagnostics {
    double r = 0.0;
    std::vector<InventoryEntry> attractor_inventory;
    std::vector<PullbackStatus> anchor_status;  // one per anchor, in anchor order
    GlobalEvidence globally_defined_evidence = GlobalEvidence::undetermined;
    std::optional<std::vector<Equilibrium>> comoving_equilibria;

    [[nodiscard]] std::size_t count(Verdict v) const {
        return static_cast<std::size_t>(std::count_if(attractor_inventory.begin(), attractor_inventory.end(),
                                                      [v](const InventoryEntry& e) { return e.forward.verdict == v; }));
    }
};

struct RateOptions {
    std::optional<std::vector<Anchor>> anchors;  // model defaults when empty
    std::optional<std::array<double, 2>> window;
    std::optional<double> horizon;
    std::optional<Frame> frame;  // co-moving whenever the model has a descriptor
    PullbackOptions pullback{};
    double dedupe_distance = 1e-4;
    int horizon_doublings = 4;  // extra attempts while the forward test is inconclusive
};

namespace detail {

inline double probe_radius_for(const ModelSpec& model, const State& w_end, Frame frame,
                               const std::optional<std::vector<Equilibrium>>& eqs) {
    if (frame != Frame::comoving || !eqs || eqs->empty()) return 0.1;
    auto dist = [](const State& a, const State& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s);
    };
    const Equilibrium* home = &eqs->front();
    for (const auto& e : *eqs)
        if (dist(e.x, w_end) < dist(home->x, w_end)) home = &e;
    double gap = -1.0;
    for (const auto& e : *eqs) {
        if (&e == home || e.stability == Stability::stable) continue;
        const double d = dist(e.x, home->x);
        if (gap < 0.0 || d < gap) gap = d;
    }
    (void)model;
    return gap > 0.0 ? 0.25 * gap : 0.1;
}

/// Forward test of a pullback estimate: the candidate is the estimate carried
/// forward from the window end; the horizon doubles while inconclusive.
inline Diagnostic forward_check(const ModelSpec& model, const FramedSystem& sys, Frame frame,
                                const PullbackEstimate& est, double radius, double horizon, int doublings,
                                const IntegratorConfig& cfg) {
    const double tb = est.window[1];
    const State wb = est.path.in_frame(tb, sys, frame);
    Diagnostic diag;
    double T = horizon;
    for (int attempt = 0; attempt <= doublings; ++attempt, T *= 2.0) {
        Trajectory ext = integrate(sys.field, wb, tb, tb + T, cfg);
        if (ext.status != TrajectoryStatus::completed) {
            diag = Diagnostic{};
            diag.verdict = Verdict::fails;
            diag.note = std::string("candidate ") + to_string(ext.status) + " before t0+T";
            diag.thresholds = {{"horizon", T}, {"t0", tb}, {"probe_radius", radius}};
            return diag;
        }
        const Curve cand = Curve::from_trajectory(std::move(ext), sys, frame);
        std::vector<State> offsets;
        for (std::size_t i = 0; i < model.dimension; ++i)
            for (double sign : {1.0, -1.0}) {
                State off(model.dimension, 0.0);
                off[i] = sign * radius / 2.0;
                offsets.push_back(std::move(off));
            }
        ForwardTestOptions fo;
        fo.t0 = tb;
        fo.probe_radius = radius;
        fo.frame = frame;
        fo.integrator = cfg;
        diag = forward_attraction_test(model, cand, offsets, T, radius / 20.0, fo);
        if (diag.verdict != Verdict::inconclusive) return diag;
    }
    return diag;
}

}  // namespace detail

/// Attractor inventory of `model` at its own rate: pullback estimates from
/// each anchor, deduplicated and tested for forward attraction.
[[nodiscard]] inline RateDiagnostics rate_diagnostics(const ModelSpec& model, const RateOptions& opt = {}) {
    const std::vector<Anchor> anchors = opt.anchors.value_or(model.defaults.anchors);
    if (anchors.empty()) throw std::invalid_argument("rate_diagnostics needs at least one anchor");
    const auto window = opt.window.value_or(model.defaults.window);
    const double horizon = opt.horizon.value_or(model.defaults.horizon);
    const Frame frame = opt.frame.value_or(model.comoving ? Frame::comoving : Frame::original);
    const FramedSystem sys = framed(model, frame);

    RateDiagnostics rd;
    rd.r = model.params.r;
    if (model.comoving) {
        const SearchBox box = model.defaults.comoving_box.center.size() == model.dimension
                                  ? model.defaults.comoving_box
                                  : SearchBox{State(model.dimension, 0.0), State(model.dimension, 5.0), 21};
        rd.comoving_equilibria = find_equilibria(model.comoving->field, 0.0, box);
    }

    PullbackOptions po = opt.pullback;
    po.frame = frame;
    std::size_t escaped = 0;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        PullbackEstimate est = estimate_pullback(model, window, anchors[a], Sense::attracting, po);
        rd.anchor_status.push_back(est.status);
        if (est.status == PullbackStatus::escaped_during_pullback) ++escaped;
        if (!est.converged()) continue;
        bool duplicate = false;
        for (auto& entry : rd.attractor_inventory) {
            std::vector<State> xa, xb;
            for (const auto& s : entry.estimate.curve) xa.push_back(s.x);
            for (const auto& s : est.curve) xb.push_back(s.x);
            if (sup_gap(xa, xb) < opt.dedupe_distance) {
                entry.anchors.push_back(a);
                duplicate = true;
                break;
            }
        }
        if (duplicate) continue;
        const State w_end = est.path.in_frame(window[1], sys, frame);
        const double radius = detail::probe_radius_for(model, w_end, frame, rd.comoving_equilibria);
        Diagnostic fwd = detail::forward_check(model, sys, frame, est, radius, horizon, opt.horizon_doublings,
                                               po.integrator);
        rd.attractor_inventory.push_back({std::move(est), std::move(fwd), {a}});
    }
    if (!rd.attractor_inventory.empty()) {
        rd.globally_defined_evidence = GlobalEvidence::bounded_solution_found;
    } else if (escaped == anchors.size()) {
        rd.globally_defined_evidence = GlobalEvidence::all_anchors_escaped;
    }
    return rd;
}

[[nodiscard]] inline Truth evaluate(const RateDiagnostics& rd, const PredicateSpec& pred) {
    const std::size_t n_anchor = rd.anchor_status.size();
    const auto unconverged = static_cast<std::size_t>(std::count(rd.anchor_status.begin(), rd.anchor_status.end(),
                                                                  PullbackStatus::not_converged));
    switch (pred.kind) {
        case PredicateKind::attractor_count: {
            const std::size_t holds = rd.count(Verdict::holds);
            const std::size_t unknown = rd.count(Verdict::inconclusive) + unconverged;
            const auto k = static_cast<std::size_t>(std::max(pred.k, 0));
            if (holds >= k) return Truth::yes;
            if (holds + unknown < k) return Truth::no;
            return Truth::inconclusive;
        }
        case PredicateKind::bounded_solution_exists:
            if (rd.globally_defined_evidence == GlobalEvidence::bounded_solution_found) return Truth::yes;
            if (rd.globally_defined_evidence == GlobalEvidence::all_anchors_escaped) return Truth::no;
            return Truth::inconclusive;
        case PredicateKind::forward_attraction_holds: {
            if (rd.count(Verdict::holds) > 0) return Truth::yes;
            if (rd.globally_defined_evidence == GlobalEvidence::all_anchors_escaped) return Truth::no;
            if (!rd.attractor_inventory.empty() && rd.count(Verdict::fails) == rd.attractor_inventory.size() &&
                unconverged == 0)
                return Truth::no;
            (void)n_anchor;
            return Truth::inconclusive;
        }
    }
    return Truth::inconclusive;
}

// ---------------------------------------------------------------------------
// Parallel evaluation

/// Worker count: TIPLAB_THREADS when set (0 = sequential), else the hardware
/// concurrency.
[[nodiscard]] inline std::size_t thread_count() {
    if (const char* env = std::getenv("TIPLAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Evaluates fn(i) for i in [0, n) and returns results by index.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, std::size_t threads, Fn&& fn) {
    std::vector<std::optional<T>> slots(n);
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) slots[i].emplace(fn(i));
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(threads, n); ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        slots[i].emplace(fn(i));
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }
    std::vector<T> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

/// Diagnostics at every r in `rates`, in the given order.
[[nodiscard]] inline std::vector<RateDiagnostics> sweep(const ModelFamily& fam, const std::vector<double>& rates,
                                                        const RateOptions& opt = {},
                                                        std::optional<std::size_t> threads = std::nullopt) {
    return parallel_map<RateDiagnostics>(rates.size(), threads.value_or(thread_count()),
                                         [&](std::size_t i) { return rate_diagnostics(fam(rates[i]), opt); });
}

// ---------------------------------------------------------------------------
// Critical rates

enum class Classification { saddle_node, pitchfork, unclassified };

[[nodiscard]] inline const char* to_string(Classification c) {
    switch (c) {
        case Classification::saddle_node: return "saddle-node";
        case Classification::pitchfork: return "pitchfork";
        case Classification::unclassified: return "unclassified";
    }
    return "unknown";
}

struct CriticalBracket {
    double lo = 0.0, hi = 0.0;
    Truth at_lo = Truth::inconclusive, at_hi = Truth::inconclusive;
    double cell_lo = 0.0, cell_hi = 0.0;  // coarse-grid sign-change cell
    bool flagged = false;                 // an inconclusive evaluation affected this bracket
    Classification classification = Classification::unclassified;

    [[nodiscard]] double width() const { return hi - lo; }
    [[nodiscard]] bool contains(double r) const { return lo <= r && r <= hi; }
};

struct RateSample {
    double r;
    Truth truth;
    RateDiagnostics diagnostics;
};

struct TippingReport {
    std::string model;
    ModelParams params;
    PredicateSpec predicate;
    double resolution = 0.0;
    std::vector<double> grid;
    std::vector<CriticalBracket> brackets;
    std::vector<RateSample> per_r;  // every evaluated rate, ascending
    bool flagged = false;
    std::vector<std::string> notes;
};

struct TipOptions {
    int points_per_decade = 40;
    RateOptions rate{};
    std::optional<std::size_t> threads;
};

/// Coarse scan grid: log-spaced when the range excludes zero, uniform otherwise.
[[nodiscard]] inline std::vector<double> coarse_grid(double lo, double hi, int per_decade) {
    if (!(lo < hi)) throw std::invalid_argument("rate range must satisfy r_lo < r_hi");
    std::vector<double> g;
    if (lo > 0.0 || hi < 0.0) {
        const double a = std::min(std::abs(lo), std::abs(hi)), b = std::max(std::abs(lo), std::abs(hi));
        const int n = std::max(2, static_cast<int>(std::ceil(per_decade * std::log10(b / a))));
        for (int i = 0; i <= n; ++i) g.push_back(a * std::pow(b / a, static_cast<double>(i) / n));
        g.front() = a;
        g.back() = b;
        if (hi < 0.0) {
            for (auto& v : g) v = -v;
            std::reverse(g.begin(), g.end());
        }
    } else {
        const int n = std::max(2 * per_decade, 2);
        for (int i = 0; i <= n; ++i) g.push_back(lo + (hi - lo) * static_cast<double>(i) / n);
        g.back() = hi;
    }
    return g;
}

namespace detail {

inline double dist(const State& a, const State& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

/// Checks g(c + R w) = R g(c + w) for the reflection R along unit vector d.
inline bool reflection_symmetric(const VectorField& g, const State& c, const State& d) {
    const std::size_t n = c.size();
    auto reflect = [&](State w) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += w[i] * d[i];
        for (std::size_t i = 0; i < n; ++i) w[i] -= 2.0 * dot * d[i];
        return w;
    };
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 64; ++k) {
        State w(n);
        for (auto& v : w) v = u(rng);
        const State rw = reflect(w);
        State x1(n), x2(n);
        for (std::size_t i = 0; i < n; ++i) {
            x1[i] = c[i] + w[i];
            x2[i] = c[i] + rw[i];
        }
        const State lhs = g(x2, 0.0);
        const State rhs = reflect(g(x1, 0.0));
        if (dist(lhs, rhs) > 1e-9 * (1.0 + detail::euclid(lhs))) return false;
    }
    return true;
}

}  // namespace detail

/// Labels the bifurcation of the co-moving field between two rates.
[[nodiscard]] inline Classification classify_transition(const ModelSpec& at_lo, const std::vector<Equilibrium>& lo,
                                                        const ModelSpec& at_hi, const std::vector<Equilibrium>& hi) {
    const bool lo_more = lo.size() > hi.size();
    const auto& more = lo_more ? lo : hi;
    const auto& fewer = lo_more ? hi : lo;
    const ModelSpec& more_model = lo_more ? at_lo : at_hi;
    if (more.size() != fewer.size() + 2 || !more_model.comoving) return Classification::unclassified;

    std::vector<bool> matched(more.size(), false);
    for (const auto& f : fewer) {
        std::size_t best = more.size();
        for (std::size_t i = 0; i < more.size(); ++i)
            if (!matched[i] && (best == more.size() || detail::dist(more[i].x, f.x) < detail::dist(more[best].x, f.x)))
                best = i;
        if (best < more.size()) matched[best] = true;
    }
    std::vector<const Equilibrium*> vanishing, survivors;
    for (std::size_t i = 0; i < more.size(); ++i) (matched[i] ? survivors : vanishing).push_back(&more[i]);
    if (vanishing.size() != 2) return Classification::unclassified;

    const State& e1 = vanishing[0]->x;
    const State& e2 = vanishing[1]->x;
    const double sep = detail::dist(e1, e2);
    if (sep > 0.0) {
        State mid(e1.size()), d(e1.size());
        for (std::size_t i = 0; i < e1.size(); ++i) {
            mid[i] = 0.5 * (e1[i] + e2[i]);
            d[i] = (e1[i] - e2[i]) / sep;
        }
        for (const auto* s : survivors) {
            if (detail::dist(s->x, mid) > 1e-6 * (1.0 + sep)) continue;
            if (detail::reflection_symmetric(more_model.comoving->field, s->x, d)) return Classification::pitchfork;
        }
    }
    if (vanishing[0]->stability != vanishing[1]->stability) return Classification::saddle_node;
    return Classification::unclassified;
}

/// Scans [r_lo, r_hi] for every flip of the predicate, then bisects each flip
/// down to `resolution`.
[[nodiscard]] inline TippingReport find_critical_rate(const ModelFamily& fam, const PredicateSpec& pred, double r_lo,
                                                      double r_hi, double resolution, const TipOptions& opt = {}) {
    if (!(resolution > 0.0)) throw std::invalid_argument("resolution must be positive");
    TippingReport rep;
    rep.predicate = pred;
    rep.resolution = resolution;
    rep.grid = coarse_grid(r_lo, r_hi, opt.points_per_decade);
    {
        const ModelSpec m0 = fam(rep.grid.front());
        rep.model = m0.name;
        rep.params = m0.params;
    }
    const std::size_t threads = opt.threads.value_or(thread_count());

    std::map<double, RateSample> evaluated;
    auto eval_at = [&](double r) -> Truth {
        auto it = evaluated.find(r);
        if (it != evaluated.end()) return it->second.truth;
        RateDiagnostics rd = rate_diagnostics(fam(r), opt.rate);
        const Truth t = evaluate(rd, pred);
        evaluated.emplace(r, RateSample{r, t, std::move(rd)});
        return t;
    };

    auto coarse = parallel_map<RateSample>(rep.grid.size(), threads, [&](std::size_t i) {
        const double r = rep.grid[i];
        RateDiagnostics rd = rate_diagnostics(fam(r), opt.rate);
        const Truth t = evaluate(rd, pred);
        return RateSample{r, t, std::move(rd)};
    });
    for (auto& s : coarse) evaluated.emplace(s.r, std::move(s));

    // Sign changes between consecutive conclusive grid points.
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    std::optional<std::size_t> last;
    for (std::size_t i = 0; i < rep.grid.size(); ++i) {
        const Truth t = evaluated.at(rep.grid[i]).truth;
        if (t == Truth::inconclusive) continue;
        if (last && evaluated.at(rep.grid[*last]).truth != t) cells.emplace_back(*last, i);
        last = i;
    }

    for (const auto& [ia, ib] : cells) {
        CriticalBracket br;
        br.cell_lo = rep.grid[ia];
        br.cell_hi = rep.grid[ib];
        br.flagged = ib != ia + 1;
        double lo = br.cell_lo, hi = br.cell_hi;
        const Truth ta = evaluated.at(lo).truth, tb = evaluated.at(hi).truth;
        while (hi - lo > resolution) {
            const double mid = 0.5 * (lo + hi);
            Truth tm = eval_at(mid);
            double at = mid;
            if (tm == Truth::inconclusive) {
                br.flagged = true;
                for (double probe : {mid - resolution / 4.0, mid + resolution / 4.0}) {
                    if (probe <= lo || probe >= hi) continue;
                    tm = eval_at(probe);
                    at = probe;
                    if (tm != Truth::inconclusive) break;
                }
            }
            if (tm == ta) {
                lo = at;
            } else if (tm == tb) {
                hi = at;
            } else {
                // Undecidable core around the flip: keep the conclusive ends.
                rep.notes.push_back("inconclusive core near r=" + std::to_string(mid) + "; bracket left wider than resolution");
                break;
            }
        }
        br.lo = lo;
        br.hi = hi;
        br.at_lo = ta;
        br.at_hi = tb;
        const auto& dlo = evaluated.at(lo).diagnostics;
        const auto& dhi = evaluated.at(hi).diagnostics;
        if (dlo.comoving_equilibria && dhi.comoving_equilibria)
            br.classification = classify_transition(fam(lo), *dlo.comoving_equilibria, fam(hi), *dhi.comoving_equilibria);
        rep.flagged = rep.flagged || br.flagged;
        rep.brackets.push_back(br);
    }
    for (auto& [r, s] : evaluated) rep.per_r.push_back(std::move(s));
    return rep;
}

// ---------------------------------------------------------------------------
// Locality

struct LocalityResult {
    PullbackEstimate estimate;
    Diagnostic diagnostic;
};

/// Checks that the attractor reached from `anchor` persists and attracts.
[[nodiscard]] inline LocalityResult locality_probe(const ModelSpec& model, const Anchor& anchor,
                                                   const RateOptions& opt = {}) {
    RateOptions one = opt;
    one.anchors = std::vector<Anchor>{anchor};
    RateDiagnostics rd = rate_diagnostics(model, one);
    LocalityResult out;
    if (rd.attractor_inventory.empty()) {
        const auto window = opt.window.value_or(model.defaults.window);
        PullbackOptions po = opt.pullback;
        po.frame = opt.frame.value_or(model.comoving ? Frame::comoving : Frame::original);
        out.estimate = estimate_pullback(model, window, anchor, Sense::attracting, po);
        out.diagnostic.verdict =
            out.estimate.status == PullbackStatus::escaped_during_pullback ? Verdict::fails : Verdict::inconclusive;
        out.diagnostic.note = std::string("pullback ") + to_string(out.estimate.status);
        return out;
    }
    out.estimate = std::move(rd.attractor_inventory.front().estimate);
    out.diagnostic = std::move(rd.attractor_inventory.front().forward);
    return out;
}

}  // namespace tiplab
