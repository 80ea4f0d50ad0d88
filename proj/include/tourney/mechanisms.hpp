#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tourney/bid_function.hpp"
#include "tourney/dist.hpp"

namespace tourney {

enum class Mechanism { TA, SA, SA_RESERVE, TA_INTERVENTION, TA_DISCRETE };

std::string to_string(Mechanism m);
Mechanism mechanism_from_string(const std::string& name);

/// Strong value k with probability p and 0 otherwise.
struct DiscreteAtom {
    double k = 2.0;
    double p = 0.75;
};

struct AuctionSpec {
    Mechanism kind = Mechanism::TA;
    int N = 2;
    Distribution F = Distribution::uniform(0, 1);
    std::optional<Distribution> strong;  // every kind except TA_DISCRETE
    std::optional<DiscreteAtom> atom;    // TA_DISCRETE only
    std::optional<double> reserve;       // SA_RESERVE only
    std::optional<double> intervention_p;
    std::optional<BidFunction> bid_fn;   // TA and TA_INTERVENTION

    /// Throws DomainError when the optional parts do not match the kind.
    void validate() const;
};

/// Uniforms and values for one replicate: N weak values, the strong value,
/// a tie-break uniform and the intervention uniform.
struct Draw {
    std::vector<double> v;
    double w = 0.0;
    double tie_u = 0.5;
    double intervention_u = 0.5;
};

struct Outcome {
    enum class Winner { weak, strong, none };
    Winner winner = Winner::none;
    int weak_index = -1;     // 0-based, when a weak bidder wins
    double price = 0.0;
    double surplus = 0.0;    // winner's value
    double winning_bid = 0.0;
    double top_weak_bid = 0.0;
    double strong_bid = 0.0;
};

Outcome run_once(const AuctionSpec& spec, const Draw& draw);

/// Replicate j reads uniforms (seed, j c) ... (seed, j c + c - 1), c = N + 3.
Draw make_draw(const AuctionSpec& spec, std::uint64_t seed, std::uint64_t replicate);

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
    std::int64_t n = 0;
    std::uint64_t seed = 0;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Mean and standard error of xs, summed in index order.
Estimate estimate_of(const std::vector<double>& xs, std::uint64_t seed);

struct SimulationResult {
    Estimate revenue;
    Estimate surplus;
    Estimate weak_payoff;    // winning weak bidder's value minus price, 0 when not the winner
    Estimate strong_payoff;
    std::string draws_csv;   // filled when requested and n <= 10^4

    [[nodiscard]] nlohmann::json to_json() const;
};

struct SimulateOptions {
    int threads = 1;
    bool keep_draws = false;
};

/// Deterministic Monte Carlo: identical output for any thread count.
SimulationResult simulate(const AuctionSpec& spec, std::int64_t n, std::uint64_t seed,
                          const SimulateOptions& opts = {});

struct ReserveValues {
    double revenue = 0.0;
    double surplus = 0.0;
};

/// Second-price auction where only the strong bidder faces reserve r >= v_max.
ReserveValues sa_reserve_closed_form(const Distribution& F, const Distribution& G, int N, double r);

/// Law of the strong bid after the intervention zeroes it with probability 1 - p:
/// the atom at zero is replaced by a half raised-cosine of width `spread` so the
/// weak bidders' equilibrium ODE keeps a positive continuous density.
Distribution intervention_bid_law(const Distribution& G, double p, double spread);

/// Runs `body(begin, end)` over [0, n) split into contiguous blocks.
void parallel_blocks(std::int64_t n, int threads, const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace tourney
