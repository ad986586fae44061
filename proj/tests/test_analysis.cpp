#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tiplab/analysis.hpp"
#include "tiplab/models.hpp"

using namespace tiplab;

namespace {

double max_error(const PullbackEstimate& est, const ModelSpec& m, CurveKind k) {
    double err = 0.0;
    for (const auto& s : est.curve) {
        const State ref = oracle_curve(m, k, s.t);
        for (std::size_t i = 0; i < ref.size(); ++i) err = std::max(err, std::abs(s.x[i] - ref[i]));
    }
    return err;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / (n - 1);
    v.back() = b;
    return v;
}

const QseBranch& branch_near(const std::vector<QseBranch>& bs, const State& x0) {
    const QseBranch* best = nullptr;
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

}  // namespace

TEST(Pullback, DriftMatchesClosedForm) {
    const auto m = drift(0.5);
    const auto est = estimate_pullback(m, {0.0, 2.0}, {{5.0}, AnchorPlacement::fixed, "x0=5"}, Sense::attracting);
    ASSERT_TRUE(est.converged());
    EXPECT_LT(max_error(est, m, CurveKind::attractor_plus), 1e-6);
}

TEST(Pullback, SaddleNodeAttractorFromFixedAnchor) {
    const auto m = moving_saddle_node(0.5, 1.0 / 32);
    const auto est = estimate_pullback(m, {0.0, 4.0}, {{1.0}, AnchorPlacement::fixed, "x0=1"}, Sense::attracting);
    ASSERT_TRUE(est.converged());
    EXPECT_LT(max_error(est, m, CurveKind::attractor_plus), 1e-6);
}

TEST(Pullback, SaddleNodeAboveCriticalEscapes) {
    const auto m = moving_saddle_node(0.5, 3.0 / 32);
    for (const auto& a : m.defaults.anchors) {
        const auto est = estimate_pullback(m, {0.0, 4.0}, a, Sense::attracting);
        EXPECT_EQ(est.status, PullbackStatus::escaped_during_pullback);
        EXPECT_TRUE(est.escape.has_value());
    }
    const auto fixed = estimate_pullback(m, {0.0, 4.0}, {{1.0}, AnchorPlacement::fixed, ""}, Sense::attracting);
    EXPECT_EQ(fixed.status, PullbackStatus::escaped_during_pullback);
}

TEST(Pullback, EstimateInvariants) {
    const auto m = moving_pitchfork(1.0, 0.5, 1);
    const auto est = estimate_pullback(m, {0.0, 4.0}, m.defaults.anchors[0], Sense::attracting);
    ASSERT_TRUE(est.converged());
    const auto& g = est.convergence_gaps;
    ASSERT_GE(g.size(), 2u);
    PullbackOptions defaults;
    EXPECT_LT(g[g.size() - 1], defaults.tol);
    EXPECT_LT(g[g.size() - 2], defaults.tol);
    EXPECT_LE(g[g.size() - 1], g[g.size() - 2]);
    for (std::size_t k = 1; k < est.start_times.size(); ++k) EXPECT_LT(est.start_times[k], est.start_times[k - 1]);
    EXPECT_DOUBLE_EQ(est.curve.front().t, 0.0);
    EXPECT_DOUBLE_EQ(est.curve.back().t, 4.0);
}

TEST(Pullback, BudgetExhaustionIsNotConverged) {
    const auto m = moving_saddle_node(0.5, 1.0 / 16);  // algebraic convergence at r*
    PullbackOptions po;
    po.max_iterations = 6;
    const auto est = estimate_pullback(m, {0.0, 4.0}, m.defaults.anchors[0], Sense::attracting, po);
    EXPECT_EQ(est.status, PullbackStatus::not_converged);
    EXPECT_EQ(est.start_times.size(), 6u);
}

TEST(Pullback, RejectsBadInput) {
    const auto m = moving_saddle_node(0.5, 1.0 / 32);
    EXPECT_THROW((void)estimate_pullback(m, {4.0, 0.0}, m.defaults.anchors[0], Sense::attracting), std::invalid_argument);
    EXPECT_THROW((void)estimate_pullback(m, {0.0, INFINITY}, m.defaults.anchors[0], Sense::attracting),
                 std::invalid_argument);
    EXPECT_THROW((void)estimate_pullback(m, {0.0, 1.0}, {{NAN}, AnchorPlacement::fixed, ""}, Sense::attracting),
                 std::invalid_argument);
    EXPECT_THROW((void)estimate_pullback(drift(0.5), {0.0, 1.0}, {{1.0}, AnchorPlacement::comoving, ""},
                                         Sense::attracting),
                 std::invalid_argument);
}

TEST(Pullback, RepellerDuality) {
    const auto m = moving_saddle_node(0.5, 1.0 / 32);
    const auto rep = estimate_pullback(m, {0.0, 4.0}, {{-1.0}, AnchorPlacement::comoving, "u0=-1"}, Sense::repelling);
    ASSERT_TRUE(rep.converged());
    EXPECT_LT(max_error(rep, m, CurveKind::repeller), 1e-6);
    const auto att = estimate_pullback(m, {0.0, 4.0}, {{1.0}, AnchorPlacement::comoving, "u0=1"}, Sense::attracting);
    ASSERT_TRUE(att.converged());
    for (std::size_t j = 0; j < rep.curve.size(); ++j) EXPECT_LT(rep.curve[j].x[0], att.curve[j].x[0]);
}

TEST(Pullback, ComovingFrameAgreesWithOriginal) {
    const auto m = moving_pitchfork(1.0, 0.5, 2);
    PullbackOptions co;
    co.frame = Frame::comoving;
    const auto a = estimate_pullback(m, {0.0, 4.0}, m.defaults.anchors[0], Sense::attracting, co);
    ASSERT_TRUE(a.converged());
    EXPECT_LT(max_error(a, m, CurveKind::attractor_plus), 1e-6);
}

TEST(Pullback, PitchforkBasinSplitIsMirrorSymmetric) {
    for (double r : {-0.5, 0.2, 0.5}) {
        const auto m = moving_pitchfork(1.0, r, 1);
        const auto up = estimate_pullback(m, {0.0, 4.0}, {{0.0, 0.6}, AnchorPlacement::comoving, ""}, Sense::attracting);
        const auto dn = estimate_pullback(m, {0.0, 4.0}, {{0.0, -0.6}, AnchorPlacement::comoving, ""}, Sense::attracting);
        ASSERT_TRUE(up.converged());
        ASSERT_TRUE(dn.converged());
        EXPECT_LT(max_error(up, m, CurveKind::attractor_plus), 1e-6);
        EXPECT_LT(max_error(dn, m, CurveKind::attractor_minus), 1e-6);
        for (std::size_t j = 0; j < up.curve.size(); ++j) {
            EXPECT_LE(std::abs(up.curve[j].x[0] - dn.curve[j].x[0]), 1e-8);
            EXPECT_LE(std::abs(up.curve[j].x[1] + dn.curve[j].x[1]), 1e-8);
        }
    }
}

TEST(Sandwich, SaddleNodeSolutionsBetweenRepellerAndAttractor) {
    const auto m = moving_saddle_node(0.5, 1.0 / 32);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double t0 = 0.0;
    for (int k = 0; k < 100; ++k) {
        const double lo = oracle_curve(m, CurveKind::repeller, t0)[0];
        const double hi = oracle_curve(m, CurveKind::attractor_plus, t0)[0];
        const double x0 = lo + (hi - lo) * (0.001 + 0.998 * u(rng));
        const auto traj = integrate(m.field, {x0}, t0, 200.0);
        ASSERT_EQ(traj.status, TrajectoryStatus::completed);
        for (const auto& s : traj.samples) {
            ASSERT_GT(s.x[0], oracle_curve(m, CurveKind::repeller, s.t)[0] - 1e-9);
            ASSERT_LT(s.x[0], oracle_curve(m, CurveKind::attractor_plus, s.t)[0] + 1e-9);
        }
        EXPECT_NEAR(traj.final_state()[0], oracle_curve(m, CurveKind::attractor_plus, 200.0)[0], 1e-6);
    }
}

TEST(ForwardTest, DriftAttractorHolds) {
    const auto m = drift(0.5);
    const Curve gamma = Curve::from_oracle(m, CurveKind::attractor_plus, -20.0, 4.0);
    const auto d = forward_attraction_test(m, gamma, {{0.5}, {-0.5}}, 20.0, 1e-3, {.t0 = -16.0});
    EXPECT_EQ(d.verdict, Verdict::holds) << d.note;
    EXPECT_EQ(d.traces.size(), 2u);
}

TEST(ForwardTest, SaddleNodeAtCriticalRateFails) {
    const auto m = moving_saddle_node(0.5, 1.0 / 16);
    const Curve gamma = Curve::from_oracle(m, CurveKind::attractor_plus, 0.0, 40.0);
    const auto d = forward_attraction_test(m, gamma, {{0.01}, {-0.01}}, 40.0, 1e-3);
    EXPECT_EQ(d.verdict, Verdict::fails);
}

TEST(ForwardTest, PitchforkRepellerBecomesAttractor) {
    const auto m = moving_pitchfork(1.0, 1.5, 1);
    const Curve zeta = Curve::from_oracle(m, CurveKind::repeller, 0.0, 40.0);
    const auto d = forward_attraction_test(m, zeta, {{0.0, 0.1}, {0.0, -0.1}}, 40.0, 1e-3);
    EXPECT_EQ(d.verdict, Verdict::holds) << d.note;
}

TEST(ForwardTest, RepellerFails) {
    const auto m = moving_saddle_node(0.5, 1.0 / 32);
    const Curve zeta = Curve::from_oracle(m, CurveKind::repeller, 0.0, 40.0);
    const auto d = forward_attraction_test(m, zeta, {{0.01}, {-0.01}}, 40.0, 1e-3);
    EXPECT_EQ(d.verdict, Verdict::fails);
}

TEST(ForwardTest, Errors) {
    const auto m = drift(0.5);
    const Curve gamma = Curve::from_oracle(m, CurveKind::attractor_plus, 0.0, 5.0);
    EXPECT_THROW((void)forward_attraction_test(m, gamma, {{0.5}}, 20.0, 1e-3), std::invalid_argument);
    EXPECT_THROW((void)forward_attraction_test(m, gamma, {{0.0}}, 2.0, 1e-3), std::invalid_argument);
    EXPECT_THROW((void)forward_attraction_test(m, gamma, {}, 2.0, 1e-3), std::invalid_argument);
    EXPECT_THROW((void)Curve::from_oracle(moving_saddle_node(0.5, 0.1), CurveKind::attractor_plus, 0.0, 1.0),
                 CurveNotDefined);
}

TEST(Qse, SaddleNodeBranches) {
    const auto m = moving_saddle_node(0.5, 1.0 / 16);
    const auto bs = qse_continuation(m, linspace(0.0, 4.0, 81));
    ASSERT_EQ(bs.size(), 2u);
    for (const auto& b : bs) {
        EXPECT_FALSE(b.born_inside);
        EXPECT_FALSE(b.dies_inside);
        EXPECT_EQ(b.samples.size(), 81u);
    }
    const auto& qs = branch_near(bs, {0.5});
    const auto& qu = branch_near(bs, {0.0});
    for (const auto& q : qs.samples) {
        EXPECT_NEAR(q.x[0], q.s / 16 + 0.5, 1e-10);
        EXPECT_EQ(q.stability, Stability::stable);
    }
    for (const auto& q : qu.samples) {
        EXPECT_NEAR(q.x[0], q.s / 16, 1e-10);
        EXPECT_EQ(q.stability, Stability::unstable);
    }
}

TEST(Qse, DriftSingleBranch) {
    const auto bs = qse_continuation(drift(0.7), {0.0});
    ASSERT_EQ(bs.size(), 1u);
    EXPECT_NEAR(bs[0].samples[0].x[0], 1.0, 1e-12);
    EXPECT_EQ(bs[0].samples[0].stability, Stability::stable);
}

TEST(Qse, PitchforkThreeBranches) {
    const auto m = moving_pitchfork(1.0, 0.5, 1);
    const auto bs = qse_continuation(m, {0.0});
    ASSERT_EQ(bs.size(), 3u);
    const State qp = oracle_curve(m, CurveKind::qse_stable_plus, 0.0);
    const State qm = oracle_curve(m, CurveKind::qse_stable_minus, 0.0);
    const auto& bp = branch_near(bs, qp);
    const auto& bm = branch_near(bs, qm);
    EXPECT_NEAR(bp.samples[0].x[1], qp[1], 1e-10);
    EXPECT_NEAR(bm.samples[0].x[1], qm[1], 1e-10);
    EXPECT_EQ(bp.samples[0].stability, Stability::stable);
    EXPECT_EQ(branch_near(bs, oracle_curve(m, CurveKind::qse_unstable, 0.0)).samples[0].stability, Stability::saddle);
}

TEST(Qse, ResidualsWithinNewtonTolerance) {
    NewtonOptions nopt;
    for (const auto& m : {moving_saddle_node(0.5, 0.03), moving_cubic(1.0, 0.2), moving_pitchfork(1.0, 0.5, 2),
                          bounded_ramp_saddle_node(0.5, 0.3, 1.5)}) {
        for (const auto& b : qse_continuation(m, linspace(-2.0, 2.0, 41)))
            for (const auto& q : b.samples)
                EXPECT_LE(q.residual, nopt.residual_tol * (1.0 + detail::euclid(q.x))) << m.name;
    }
}

TEST(Qse, BranchBirthIsReported) {
    // p = 2: Q_s exists while lambda' - r + mu = 2r(1 + r s) + 1/2 >= 0.
    const auto m = moving_pitchfork(1.0, 0.5, 2);
    const auto bs = qse_continuation(m, linspace(-5.0, 0.0, 51));
    const bool born = std::any_of(bs.begin(), bs.end(), [](const QseBranch& b) { return b.born_inside; });
    EXPECT_TRUE(born);
}

TEST(Qse, RejectsUnorderedGrid) {
    EXPECT_THROW((void)qse_continuation(drift(0.5), {1.0, 0.0}), std::invalid_argument);
    EXPECT_THROW((void)qse_continuation(drift(0.5), {}), std::invalid_argument);
}

TEST(Endpoint, DriftDoesNotTrack) {
    const auto m = drift(0.5);
    const Curve gamma = Curve::from_oracle(m, CurveKind::attractor_plus, 0.0, 10.0);
    const auto bs = qse_continuation(m, linspace(0.0, 10.0, 101));
    ASSERT_EQ(bs.size(), 1u);
    const auto d = endpoint_tracking_test(gamma, bs[0], 10.0, 0.01);
    EXPECT_EQ(d.verdict, Verdict::fails);
    const auto& tr = d.traces[0];
    for (std::size_t j = 0; j < tr.times.size(); ++j)
        EXPECT_NEAR(tr.values[j], 0.5 * std::exp(0.5 * tr.times[j]) / 1.5, 1e-8);
}

TEST(Endpoint, SaddleNodeConstantOffset) {
    const auto m = moving_saddle_node(0.5, 1.0 / 32);
    const Curve gamma = Curve::from_oracle(m, CurveKind::attractor_plus, 0.0, 10.0);
    const auto bs = qse_continuation(m, linspace(0.0, 10.0, 101));
    const auto d = endpoint_tracking_test(gamma, branch_near(bs, {0.5}), 10.0, 0.01);
    EXPECT_EQ(d.verdict, Verdict::fails);
    for (double v : d.traces[0].values) EXPECT_NEAR(v, 0.25 - std::sqrt(1.0 / 32), 1e-9);
    EXPECT_NEAR(d.traces[0].values.front(), 0.073223, 1e-6);
}

TEST(Endpoint, BoundedRampTracksAtSlowRate) {
    const auto m = bounded_ramp_saddle_node(0.5, 0.02, 1.5);
    const auto est = estimate_pullback(m, m.defaults.window, m.defaults.anchors[0], Sense::attracting);
    ASSERT_TRUE(est.converged());
    const double t0 = 100.0, T = 100.0;
    const auto bs = qse_continuation(m, linspace(t0, t0 + T, 101));
    const auto d = endpoint_tracking_test(est.path, branch_near(bs, {1.5 + 0.5}), T, 1e-3, {.t0 = t0});
    EXPECT_EQ(d.verdict, Verdict::holds);
}

TEST(Endpoint, BranchMustSpanHorizon) {
    const auto m = drift(0.5);
    const Curve gamma = Curve::from_oracle(m, CurveKind::attractor_plus, 0.0, 10.0);
    const auto bs = qse_continuation(m, linspace(0.0, 5.0, 11));
    EXPECT_THROW((void)endpoint_tracking_test(gamma, bs[0], 10.0, 0.01), std::invalid_argument);
}

TEST(DriftCounterexample, AttractsButDoesNotTrack) {
    for (double r : {0.1, 0.5, 1.0, 2.0}) {
        const auto m = drift(r);
        const auto [ta, tb] = m.defaults.window;
        const auto est = estimate_pullback(m, m.defaults.window, m.defaults.anchors[0], Sense::attracting);
        ASSERT_TRUE(est.converged()) << r;
        // Candidate: the estimate carried forward over the horizon.
        const Trajectory ext = integrate(m.field, est.curve.back().x, tb, tb + m.defaults.horizon);
        const Curve cand = Curve::from_trajectory(ext, framed(m, Frame::original), Frame::original);
        const auto fwd = forward_attraction_test(m, cand, {{0.1}, {-0.1}}, m.defaults.horizon, 1e-3);
        EXPECT_EQ(fwd.verdict, Verdict::holds) << r << " " << fwd.note;
        const double t_end = tb + m.defaults.horizon;
        const auto bs = qse_continuation(m, linspace(t_end - 10.0, t_end, 101));
        const auto ep = endpoint_tracking_test(cand, bs[0], 10.0, 0.01, {.t0 = t_end - 10.0});
        EXPECT_EQ(ep.verdict, Verdict::fails) << r;
        (void)ta;
    }
}

TEST(Consistency, PitchforkCubicRamp) {
    const auto rep = comoving_consistency_check(moving_pitchfork(1.0, 0.5, 3), 200);
    EXPECT_TRUE(rep.algebraic_passed) << rep.algebraic_max_residual;
    EXPECT_TRUE(rep.dynamic_passed) << rep.dynamic_worst_ratio;
    EXPECT_TRUE(rep.lift_passed);
    EXPECT_EQ(rep.lifts.size(), 3u);
}

TEST(Consistency, SaddleNodeLiftAtCriticalRate) {
    const auto m = moving_saddle_node(0.5, 1.0 / 16);
    const auto rep = comoving_consistency_check(m, 100);
    EXPECT_TRUE(rep.passed());
    ASSERT_EQ(rep.lifts.size(), 1u);
    const auto& lift = rep.lifts[0];
    EXPECT_FALSE(lift.hyperbolic);
    EXPECT_NEAR(lift.equilibrium.x[0], 0.0, 1e-5);
    EXPECT_LT(lift.max_residual, 1e-10);
    // The lifted curve is rt + mu/2.
    for (double t : {0.0, 1.0, 3.0})
        EXPECT_NEAR(lift.equilibrium.x[0] + m.comoving->shift(t)[0], t / 16 + 0.25, 1e-5);
}

TEST(Consistency, ZeroTranslationIsIdentity) {
    ModelSpec m = moving_cubic(1.0, 0.1);
    const double r = 0.1;
    m.field = {1, [r](std::span<const double> x, double, std::span<double> dx) { dx[0] = -x[0] * x[0] * x[0] + x[0] - r; }};
    m.comoving->a = {0.0};
    m.comoving->b = {0.0};
    const auto rep = comoving_consistency_check(m, 100);
    EXPECT_EQ(rep.algebraic_max_residual, 0.0);
    EXPECT_EQ(rep.dynamic_max_mismatch, 0.0);
    EXPECT_TRUE(rep.passed());
}

TEST(Consistency, RequiresDescriptor) {
    EXPECT_THROW((void)comoving_consistency_check(drift(0.5), 10), std::invalid_argument);
}
