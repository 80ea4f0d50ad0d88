#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "tourney/equilibrium.hpp"
#include "tourney/error.hpp"
#include "tourney/quadrature.hpp"

using namespace tourney;

namespace {

Instance uniform_instance(int N) { return {Distribution::uniform(0, 1), Distribution::uniform(0, 2), N}; }

// A strong-bidder law with a thin low bump near zero and most mass near 2.
Distribution two_bump(double low_w = 0.0625, double low_mass = 0.0566, double top_w = 0.1, double floor = 0.005) {
    return Distribution::mixture({floor, low_mass, 1 - low_mass - floor},
                                 {Distribution::uniform(0, 3), Distribution::raised_cosine(0, low_w, 0, low_w),
                                  Distribution::raised_cosine(2, top_w, 2 - top_w, 2 + top_w)},
                                 0, 3);
}

Instance bump_instance(int N) { return {Distribution::uniform(0, 1), two_bump(), N}; }

Instance sloped_instance(int N) {
    return {Distribution::uniform(0, 1), Distribution::piecewise_linear({0, 1, 3}, {0.5, 0.2, 0.6}), N};
}

}  // namespace

TEST(OdeRhs, HandEvaluatedPoint) {
    auto inst = uniform_instance(2);
    // (N-1) / (b-v) * f/F * G/g * (v - b/2) = 1 * 10 * 2 * 0.6 * 0.2
    EXPECT_NEAR(ode_rhs(0.6, 0.5, inst), 2.4, 1e-12);
    EXPECT_NEAR(k_fn(1.2, 0.5, inst), 2.4, 1e-12);
    EXPECT_EQ(k_fn(1.2, 0.5, inst), ode_rhs(1.2 * 0.5, 0.5, inst));
}

TEST(OdeRhs, BlowsUpAtLowerEdgeAndVanishesAtUpperEdge) {
    auto inst = uniform_instance(2);
    double v = 0.5;
    double prev = 0.0;
    for (double gap : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6}) {
        double h = ode_rhs(v + gap, v, inst);
        EXPECT_GT(h, prev);
        prev = h;
    }
    EXPECT_GT(prev, 1e5);
    double top = inst.G.phi_inverse(v);
    EXPECT_LT(ode_rhs(top - 1e-9, v, inst), 1e-7);
}

TEST(OdeRhs, OutsideBandThrows) {
    auto inst = uniform_instance(2);
    EXPECT_THROW((void)ode_rhs(0.5, 0.5, inst), DomainError);
    EXPECT_THROW((void)ode_rhs(1.0, 0.5, inst), DomainError);
    EXPECT_THROW((void)ode_rhs(0.3, 0.0, inst), DomainError);
    EXPECT_THROW((void)k_fn(0.9, 0.5, inst), DomainError);
}

TEST(OdeRhs, RatioFormLimitNearZero) {
    EXPECT_NEAR(k_fn_at_zero(4.0 / 3, 2), 4.0 / 3, 1e-15);
    for (int N : {2, 3, 5}) {
        double beta0 = 2.0 * N / (N + 1);
        EXPECT_NEAR(k_fn_at_zero(beta0, N), beta0, 1e-14);
        auto inst = bump_instance(N);
        for (double beta : {1.2, 4.0 / 3, 1.7})
            EXPECT_NEAR(k_fn(beta, 1e-7, inst), k_fn_at_zero(beta, N), 1e-4 * k_fn_at_zero(beta, N));
    }
}

TEST(SolveOde, UniformCaseIsTheLinearRay) {
    // For F = U[0,1], G = U[0,2] the right-hand side does not depend on v along rays,
    // so the equilibrium is exactly b(v) = 2N/(N+1) v.
    for (int N : {2, 3, 5}) {
        auto inst = uniform_instance(N);
        auto sol = solve_ode(inst);
        double beta0 = 2.0 * N / (N + 1);
        for (double v = 0.0; v <= 1.0; v += 0.01) EXPECT_NEAR(sol.bid(v), beta0 * v, 1e-9);
        EXPECT_TRUE(sol.report.warnings.empty());
    }
}

TEST(SolveOde, StructuralInvariants) {
    for (const auto& inst : {uniform_instance(2), bump_instance(2), bump_instance(3), bump_instance(5),
                             sloped_instance(2)}) {
        auto sol = solve_ode(inst);
        const auto& g = sol.bid.grid();
        const auto& b = sol.bid.values();
        EXPECT_EQ(g.front(), 0.0);
        EXPECT_EQ(b.front(), 0.0);
        EXPECT_EQ(g.back(), inst.v_max());
        for (std::size_t i = 1; i < g.size(); ++i) {
            EXPECT_GT(b[i], b[i - 1]);
            EXPECT_GT(b[i], g[i]) << "overbidding fails at v=" << g[i];
            EXPECT_TRUE(in_band(b[i], g[i], inst)) << "v=" << g[i];
        }
        double v = 1e-3 * inst.v_max();
        EXPECT_NEAR(sol.bid(v) / v, inst.initial_ratio(), 1e-2);
    }
}

TEST(SolveOde, ResidualAtMidpoints) {
    for (const auto& inst : {uniform_instance(2), bump_instance(2), sloped_instance(3)}) {
        OdeOptions opts;
        auto sol = solve_ode(inst, opts);
        const auto& g = sol.bid.grid();
        double worst = 0.0;
        for (std::size_t i = 1; i + 1 < g.size(); ++i) {
            if (g[i] < sol.report.v0) continue;
            double m = 0.5 * (g[i] + g[i + 1]);
            double H = ode_rhs(sol.bid(m), m, inst);
            worst = std::max(worst, std::abs(sol.bid.derivative(m) - H) / (1 + std::abs(H)));
        }
        EXPECT_LE(worst, opts.rk_tolerance);
        EXPECT_NEAR(worst, sol.report.max_ode_residual, 1e-12);
    }
}

TEST(SolveOde, AgreesWithIndependentFineIntegration) {
    // Oracle: classical RK4 with a fixed, very fine geometric grid from the same seed.
    auto inst = sloped_instance(2);
    auto sol = solve_ode(inst);
    double v = sol.report.v0, b = inst.initial_ratio() * v;
    auto H = [&](double bb, double vv) { return ode_rhs(bb, vv, inst); };
    const int steps = 400000;
    double ratio = std::pow(1.0 / v, 1.0 / steps);
    for (int i = 0; i < steps; ++i) {
        double h = v * (ratio - 1);
        if (i == steps - 1) h = 1.0 - v;
        double k1 = H(b, v), k2 = H(b + 0.5 * h * k1, v + 0.5 * h), k3 = H(b + 0.5 * h * k2, v + 0.5 * h),
               k4 = H(b + h * k3, v + h);
        b += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6;
        v += h;
    }
    EXPECT_NEAR(sol.bid(1.0), b, 1e-8);
}

TEST(SolveOde, InitialSlopeForSeveralN) {
    for (int N : {2, 3, 5}) {
        for (const auto& inst : {uniform_instance(N), bump_instance(N)}) {
            auto sol = solve_ode(inst);
            EXPECT_NEAR(sol.bid(1e-3) / 1e-3, 2.0 * N / (N + 1), 1e-2);
        }
    }
}

TEST(SolveOde, WeakStrongBidderWarnsThenEscapes) {
    Instance inst{Distribution::uniform(0, 1), Distribution::uniform(0, 1), 2};
    EXPECT_THROW(solve_ode(inst), BandEscape);
}

TEST(SolveOde, RejectsUnusableInputs) {
    EXPECT_THROW(solve_ode({Distribution::uniform(0.1, 1), Distribution::uniform(0, 2), 2}), PreconditionError);
    EXPECT_THROW(solve_ode({Distribution::uniform(0, 1), Distribution::uniform(0, 2), 1}), PreconditionError);
    auto holey = Distribution::mixture(
        {0.25, 0.75}, {Distribution::uniform(0, 0.1), Distribution::raised_cosine(2, 0.1, 1.9, 2.1)}, 0, 2.1);
    EXPECT_THROW(solve_ode({Distribution::uniform(0, 1), holey, 2}), PreconditionError);
    OdeOptions bad;
    bad.v0_fraction = 0.0;
    EXPECT_THROW(solve_ode(uniform_instance(2), bad), DomainError);
}

TEST(SolvePicard, UniformCaseMatchesOde) {
    auto inst = uniform_instance(2);
    auto ode = solve_ode(inst);
    auto pic = solve_picard(inst);
    EXPECT_LE(sup_distance(ode.bid, pic.bid), 1e-3 * inst.v_max());
    EXPECT_EQ(pic.report.clamp_active, 0);
    EXPECT_NEAR(pic.bid.values()[1] / pic.bid.grid()[1], 4.0 / 3, 1e-9);
}

TEST(SolvePicard, SmoothNonUniformCaseMatchesOde) {
    for (int N : {2, 3}) {
        auto inst = sloped_instance(N);
        auto ode = solve_ode(inst);
        auto pic = solve_picard(inst);
        EXPECT_LE(pic.report.sup_norm_delta, 1e-10);
        EXPECT_EQ(pic.report.clamp_active, 0);
        EXPECT_LE(sup_distance(ode.bid, pic.bid), 1e-3 * inst.v_max()) << "N=" << N;
        // gamma(0) is pinned at 2N/(N+1) by the operator itself
        EXPECT_NEAR(pic.bid.slopes()[0], inst.initial_ratio(), 1e-9);
    }
}

TEST(SolvePicard, FixedPointProperty) {
    auto inst = sloped_instance(2);
    auto pic = solve_picard(inst);
    // Re-apply the operator once by hand: trapezoid rule on the returned nodes.
    const auto& v = pic.bid.grid();
    const auto& b = pic.bid.values();
    double acc = 0.0;
    double worst = 0.0;
    double prev = k_fn_at_zero(inst.initial_ratio(), inst.N);
    for (std::size_t i = 1; i < v.size(); ++i) {
        double cur = ode_rhs(b[i], v[i], inst);
        acc += 0.5 * (prev + cur) * (v[i] - v[i - 1]);
        prev = cur;
        worst = std::max(worst, std::abs(acc / v[i] - b[i] / v[i]));
    }
    EXPECT_LE(worst, 1e-9);
}

TEST(SolvePicard, StallsReportNoConvergence) {
    PicardOptions opts;
    opts.max_iter = 2;
    opts.tol = 1e-300;
    try {
        solve_picard(sloped_instance(2), opts);
        FAIL() << "expected NoConvergence";
    } catch (const NoConvergence& e) {
        EXPECT_GT(e.last_delta(), 0.0);
    }
}

TEST(Payoff, ZeroReportAndUniformClosedForm) {
    auto inst = uniform_instance(2);
    auto sol = solve_ode(inst);
    EXPECT_EQ(payoff(0.7, 0.0, sol.bid, inst), 0.0);
    for (double v : {0.2, 0.5, 0.9})
        for (double r : {0.1, 0.4, 0.8, 1.0}) {
            double bb = sol.bid(r);
            EXPECT_NEAR(payoff(v, r, sol.bid, inst), r * (v * bb - bb * bb / 2) / 2, 1e-12);
        }
}

TEST(Payoff, MatchesQuadratureOfInnerIntegral) {
    auto inst = bump_instance(3);
    auto sol = solve_ode(inst);
    for (double v : {0.2, 0.7})
        for (double r : {0.05, 0.3, 0.95}) {
            double x = sol.bid(r);
            double inner = integrate([&](double t) { return (v - t) * inst.G.pdf(t); }, 0.0, x, inst.G.knots());
            EXPECT_NEAR(payoff(v, r, sol.bid, inst), std::pow(inst.F.cdf(r), 2) * inner, 1e-9);
        }
}

TEST(Payoff, TruthfulReportIsTheGridArgmax) {
    for (const auto& inst : {uniform_instance(2), bump_instance(2)}) {
        auto sol = solve_ode(inst);
        const int dev = 200;
        for (int i = 1; i <= 9; ++i) {
            double v = 0.1 * i;
            double best = -1, arg = -1;
            for (int j = 0; j < dev; ++j) {
                double r = double(j) / (dev - 1);
                double p = payoff(v, r, sol.bid, inst);
                if (p > best) {
                    best = p;
                    arg = r;
                }
            }
            EXPECT_LE(std::abs(arg - v), 1.0 / (dev - 1) + 1e-12) << "v=" << v;
        }
    }
}

TEST(BestResponse, EquilibriumPassesPerturbationsFail) {
    auto inst = uniform_instance(2);
    auto sol = solve_ode(inst);
    auto ok = verify_best_response(sol.bid, inst);
    EXPECT_LE(ok.max_regret, 1e-4);
    EXPECT_GE(ok.max_regret, 0.0);
    EXPECT_LE(ok.max_argmax_offset_steps, 1.0);
    EXPECT_GT(ok.raw_bid_points, 0);

    auto high = verify_best_response(sol.bid.scaled(1.1), inst);
    EXPECT_GT(high.max_regret, 1e-3);

    auto truthful = verify_best_response(BidFunction::linear(1.0, 1.0), inst);
    EXPECT_GT(truthful.max_regret, 0.0);
}

TEST(BestResponse, SharpInstancesForSeveralN) {
    for (int N : {2, 3, 5}) {
        auto inst = bump_instance(N);
        auto sol = solve_ode(inst);
        auto rep = verify_best_response(sol.bid, inst);
        EXPECT_LE(rep.max_regret, 1e-4 * inst.v_max()) << "N=" << N;
    }
}

TEST(BestResponse, BidsAboveTheTopAreChecked) {
    // A schedule that tops out far below the strong bidder's mass leaves money on
    // the table that only raw bids above b(v_max) can find.
    auto inst = uniform_instance(2);
    auto low = BidFunction::linear(0.5, 1.0);
    auto rep = verify_best_response(low, inst);
    EXPECT_GT(rep.max_regret, 0.0);
    auto no_raw = verify_best_response(low, inst, 50, 200, 0);
    EXPECT_GE(rep.max_regret, no_raw.max_regret);
}

TEST(DiscreteEquilibrium, RevenueAndBidRule) {
    auto F = Distribution::uniform(0, 1);
    auto eq = discrete_equilibrium(0.75, 2.0, F, 2);
    EXPECT_DOUBLE_EQ(eq.expected_revenue, 1.5);
    EXPECT_EQ(eq.bid(0.3), 2.0);
    EXPECT_EQ(eq.bid(0.0), 0.0);
    EXPECT_NEAR(discrete_equilibrium(0.999999, 2.0, F, 2).expected_revenue, 2.0, 1e-5);
    EXPECT_THROW(discrete_equilibrium(0.4, 2.0, F, 2), PreconditionError);
}
