#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tourney/bid_function.hpp"
#include "tourney/dist.hpp"

namespace tourney {

/// Weak-bidder law F, strong-bidder law G and the number N of weak bidders.
struct Instance {
    Distribution F;
    Distribution G;
    int N = 2;

    [[nodiscard]] double v_max() const { return F.hi(); }
    /// Slope of the equilibrium bid at zero, 2N / (N + 1).
    [[nodiscard]] double initial_ratio() const { return 2.0 * N / (N + 1.0); }
};

/// Right-hand side of the equilibrium ODE,
///   b'(v) = (N-1) / (b - v) * f(v)/F(v) * G(b)/g(b) * (v - phi_G(b)),
/// defined on the band v < b < phi_G^{-1}(v). Throws DomainError outside it.
double ode_rhs(double b, double v, const Instance& inst);

/// ode_rhs in ratio coordinates: k_fn(beta, v) = ode_rhs(beta * v, v).
double k_fn(double beta, double v, const Instance& inst);

/// Limit of k_fn as v -> 0 with beta fixed: (N-1) beta / (beta-1) * (1 - beta/2).
double k_fn_at_zero(double beta, int N);

/// True when v < b and phi_G(b) < v.
bool in_band(double b, double v, const Instance& inst);

struct SolveReport {
    std::string method;
    double max_ode_residual = 0.0;
    int picard_iterations = 0;
    double sup_norm_delta = 0.0;
    std::vector<std::string> warnings;
    double v0 = 0.0;
    int rejected_steps = 0;
    int clamp_active = 0;
    std::size_t nodes = 0;

    [[nodiscard]] nlohmann::json to_json() const;
};

struct Solution {
    BidFunction bid;
    SolveReport report;
};

struct OdeOptions {
    double v0_fraction = 1e-4;
    int grid_size = 2001;
    double rk_tolerance = 1e-6;
    int max_refine_rounds = 40;
    double min_interval = 1e-9;  // relative to v_max; narrower intervals are not split
};

struct PicardOptions {
    int grid_size = 2001;
    int max_iter = 5000;
    double tol = 1e-10;
    double damping = 0.5;
};

/// Integrates the ODE from a linear seed b = 2N/(N+1) v near zero up to v_max.
/// Throws BandEscape, SingularStartFailure or PreconditionError.
Solution solve_ode(const Instance& inst, const OdeOptions& opts = {});

/// Damped fixed-point iteration in ratio space, gamma <- (1-a) gamma + a U(T gamma),
/// where T gamma(v) = (1/v) int_0^v k_fn(gamma(s), s) ds and U clamps to the band.
/// Throws NoConvergence after max_iter.
Solution solve_picard(const Instance& inst, const PicardOptions& opts = {});

/// Sup-norm distance between two bid functions over the union of their grids.
double sup_distance(const BidFunction& a, const BidFunction& b);

/// Expected payoff of a weak bidder with value v_true who bids as if worth v_report,
/// facing N-1 rivals using b and a truthful strong bidder.
double payoff(double v_true, double v_report, const BidFunction& b, const Instance& inst);

/// Same, for a raw bid x at or above b(v_max): every weak rival is outbid.
double payoff_raw_bid(double v_true, double x, const Instance& inst);

struct BestResponseReport {
    double max_regret = 0.0;
    double worst_v = 0.0;
    double worst_report = 0.0;  // reported value, or raw bid when worst_is_raw_bid
    bool worst_is_raw_bid = false;
    int v_points = 0;
    int dev_points = 0;
    int raw_bid_points = 0;
    /// Largest distance, in dev-grid steps, between v and the payoff-maximising report.
    double max_argmax_offset_steps = 0.0;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Grid check of the best-response property: v_points values i v_max / v_points,
/// dev_points reports spread over [0, v_max], plus raw bids above b(v_max).
BestResponseReport verify_best_response(const BidFunction& b, const Instance& inst, int v_points = 50,
                                        int dev_points = 200, int raw_bid_points = 40);

struct DiscreteEquilibrium {
    std::function<double(double)> bid;
    double expected_revenue = 0.0;
};

/// Strong value k with probability p, 0 otherwise; weak bidders with positive value bid k.
/// Requires p k > v_max.
DiscreteEquilibrium discrete_equilibrium(double p, double k, const Distribution& F, int N);

}  // namespace tourney
