#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tourney/dist.hpp"
#include "tourney/equilibrium.hpp"

namespace tourney {

enum class FamilyKind { smoothed_discrete, slow_drain, fast_drain };

std::string to_string(FamilyKind k);
FamilyKind family_kind_from_string(const std::string& name);

/// Mixture weights and widths of member l.
struct MemberParams {
    double floor_mass = 0.0;   // uniform on [0, w_bar]
    double low_mass = 0.0;     // raised cosine near zero
    double low_width = 0.0;
    double low_center = 0.0;
    double atom_mass = 0.0;    // raised cosine around k
    double atom_width = 0.0;
};

/// Strong-bidder laws G_1..G_L sharpening onto k. Widths halve with l:
/// s_l = 2^{-(l-1)}, floor mass max(1e-4, 0.02 s_l), atom half-width
/// 0.4 min(k/2, w_bar - k) s_l.
///   slow_drain:        low mass 0.08 sqrt(s_l) on [0, 0.125 k s_l]
///   fast_drain:        low mass 0.2 spread over [0, k/2] for every l
///   smoothed_discrete: low mass (1 - p)(1 - floor) on [0, 0.125 k s_l]
/// With atom_below_share = q the atom bump is split into two half-width bumps,
/// q of it on [k - eta, k] and 1 - q on [k, k + eta], so G_l(k) tends to
/// low mass + q atom mass.
struct FamilySpec {
    FamilyKind kind = FamilyKind::slow_drain;
    double k = 2.0;
    double w_bar = 3.0;
    int L = 8;
    double p = 1.0;  // smoothed_discrete only
    std::optional<double> atom_below_share;

    void validate() const;
    [[nodiscard]] MemberParams params(int l) const;
    [[nodiscard]] Distribution member(int l) const;
    [[nodiscard]] std::vector<Distribution> members() const;
    /// lim G_l(k), ignoring the 1e-4 floor.
    [[nodiscard]] double limit_mass_below_k() const;

    [[nodiscard]] nlohmann::json to_json() const;
    static FamilySpec from_json(const nlohmann::json& j);
};

FamilySpec make_family(FamilyKind kind, double k, double w_bar, int L, double p = 1.0,
                       std::optional<double> atom_below_share = std::nullopt);

struct ConvergenceReport {
    double tol = 0.0;
    std::vector<double> mass;  // mass of [k - tol, k + tol] per l
    bool monotone_tail = false;
    bool passes = false;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Mass near k must be nondecreasing over the last half of the index range
/// and end at 0.99 or more.
ConvergenceReport check_convergence_in_distribution(const std::vector<Distribution>& members, double k, double tol);
ConvergenceReport check_convergence_in_distribution(const FamilySpec& fam, double tol);

struct SlowDrainReport {
    double c1 = 0.0, c2 = 0.0;
    std::vector<double> ratio;      // (G(c2) - G(c1)) / G(c2)
    std::vector<double> cond_mean;  // E[w | w <= c2]
    bool ratio_passes = false;
    bool cond_mean_passes = false;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Ratio passes when nonincreasing over the last half and final <= 0.05;
/// the conditional mean passes when nonincreasing there and final <= 0.05 c2.
SlowDrainReport check_slow_drain(const std::vector<Distribution>& members, double c1, double c2);
SlowDrainReport check_slow_drain(const FamilySpec& fam, double c1, double c2);

/// Consecutive pairs of k {0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.8}.
std::vector<std::pair<double, double>> default_drain_pairs(double k);

struct FamilyReport {
    ConvergenceReport convergence;
    std::vector<SlowDrainReport> drain;
    bool drain_ratio_passes = false;      // every pair
    bool drain_cond_mean_passes = false;  // every pair
    bool diagnostics_agree = false;
    std::optional<int> l0_mean_above;     // first l from which E[w_l] >= v_max holds to L

    [[nodiscard]] nlohmann::json to_json() const;
};

FamilyReport check_family(const FamilySpec& fam, double v_max, double tol_fraction = 0.05);

enum class ReserveKind { constant_limit, overshoot, from_below, approximating };

std::string to_string(ReserveKind k);
ReserveKind reserve_kind_from_string(const std::string& name);

struct ReserveRule {
    ReserveKind kind = ReserveKind::constant_limit;
    double r_bar = 0.0;    // constant_limit, overshoot
    double epsilon = 0.5;  // approximating

    [[nodiscard]] nlohmann::json to_json() const;
    static ReserveRule from_json(const nlohmann::json& j);
};

/// r_l from below: the larger of the G_l(k)(1 - 4^{-l}) quantile and
/// k - k 2^{-(l+1)}, kept strictly between r_{l-1} and k.
double reserve_from_below(const FamilySpec& fam, int l, double previous);

struct ReservePoint {
    double r = 0.0;
    int block = 0;  // approximating rule: the n with G_l(k - eps/n) <= 1/n
};

std::vector<ReservePoint> reserve_sequence(const ReserveRule& rule, const FamilySpec& fam);

enum class Prop { P4, P5, P6, P7, P8, P9, P10, S8 };

std::string to_string(Prop p);
Prop prop_from_string(const std::string& name);

struct LimitRow {
    int l = 0;
    double R_mean = 0.0, R_se = 0.0;
    std::optional<double> S_mean, S_se;
    std::string solver_method;
    std::optional<double> max_regret;
    std::optional<double> reserve;
    std::optional<double> bound;  // P7 revenue lower bound
};

struct LimitTable {
    Prop prop = Prop::P6;
    std::vector<LimitRow> rows;
    double target = 0.0;
    std::optional<double> surplus_target;
    double last = 0.0;
    double richardson = 0.0;
    double gap = 0.0;  // |last R - target|
    nlohmann::json checks = nlohmann::json::object();
    std::vector<std::string> warnings;

    [[nodiscard]] std::string to_csv() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

struct ExperimentOptions {
    int threads = 1;
    double intervention_p = 0.75;    // S8
    double spread_fraction = 0.01;   // S8: width of the smoothed zero bid, times v_max
    OdeOptions ode;
    int verify_v_points = 50;
    int verify_dev_points = 200;
};

/// Runs one limit experiment along the family. TA props solve and verify the
/// equilibrium for each l and simulate with the same seed for every l; reserve
/// props use the closed forms. Throws PreconditionError naming the condition
/// the inputs violate.
LimitTable run_limit_experiment(Prop prop, const FamilySpec& fam, const std::optional<ReserveRule>& rule,
                                const Distribution& F, int N, std::int64_t n, std::uint64_t seed,
                                const ExperimentOptions& opts = {});

}  // namespace tourney
