#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "tourney/dist.hpp"
#include "tourney/equilibrium.hpp"
#include "tourney/mechanisms.hpp"
#include "tourney/sequences.hpp"

namespace tourney {

inline constexpr const char* kConfigVersion = "1";

struct MechanismConfig {
    Mechanism kind = Mechanism::TA;
    std::optional<double> reserve;
    std::optional<double> intervention_p;
    std::optional<DiscreteAtom> atom;
    double spread_fraction = 0.01;  // TA_INTERVENTION: smoothed zero bid width, times v_max
};

struct SolverConfig {
    std::string method = "ode";  // "ode" or "picard"
    OdeOptions ode;
    PicardOptions picard;
};

struct VerifyConfig {
    int v_points = 50;
    int dev_points = 200;
    int raw_bid_points = 40;
    double regret_tol = 1e-4;  // times v_max
    bool cross_check = false;  // also require ODE and Picard to agree within 1e-3 v_max
};

struct MonteCarloConfig {
    std::int64_t n = 100000;
    std::uint64_t seed = 1;
};

struct ExperimentSection {
    Prop prop = Prop::P6;
    std::optional<ReserveRule> rule;
    double intervention_p = 0.75;
};

/// Everything a run depends on. `output_dir` is where files go and is not part
/// of the hash; thread count is a runtime flag and not part of the config.
struct ExperimentConfig {
    std::string version = kConfigVersion;
    int N = 2;
    Distribution F = Distribution::uniform(0, 1);
    std::optional<Distribution> G = Distribution::uniform(0, 2);
    std::optional<FamilySpec> family;
    MechanismConfig mechanism;
    SolverConfig solver;
    VerifyConfig verify;
    MonteCarloConfig monte_carlo;
    ExperimentSection experiment;
    std::string output_dir = "out";

    /// Canonical form with every default filled in; keys sorted.
    [[nodiscard]] nlohmann::json to_json() const;
    /// FNV-1a of the canonical dump without the output section, 16 hex digits.
    [[nodiscard]] std::string hash() const;
};

/// Validates the whole document and throws ConfigError listing every
/// violation as "path: message" when anything is wrong.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig parse_config(const std::string& path);
/// Reads the raw document; IoError when unreadable, ConfigError when not JSON.
nlohmann::json read_config_json(const std::string& path);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace tourney
