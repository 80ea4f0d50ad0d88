#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tourney/config.hpp"
#include "tourney/error.hpp"

namespace tourney {

enum class Command { solve, verify, simulate, oa, sweep, check_family, report };

std::string to_string(Command c);

struct OutputFile {
    std::string name;
    std::string body;
};

struct RunResult {
    std::vector<OutputFile> files;
    nlohmann::json summary;  // printed on stdout
    int exit_code = 0;
};

/// Exit codes: 0 success, 2 configuration or input, 3 numerical failure,
/// 4 verify found the solution unacceptable.
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitVerify = 4;

int exit_code_for(const Error& e);

/// Family used when the config has none: the smoothed two-point law for S8,
/// the slow-drain family with half of the atom below k for P10, else slow drain.
FamilySpec default_family(std::optional<Prop> prop);

/// "<command>_<config hash>_s<seed>"; every output file name starts with it.
std::string output_stem(Command c, const ExperimentConfig& cfg);

/// Runs one command. Result bodies depend only on the config, never on the
/// thread count or the output directory. `report` reads existing result files
/// from cfg.output_dir.
RunResult run_command(Command c, const ExperimentConfig& cfg, int threads = 1);

/// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::string& path, const std::string& body);

/// Writes every file plus "<stem>.meta.json" with the hash, seed, thread
/// count, wall time and build versions. Returns the written paths.
std::vector<std::string> write_outputs(const std::string& dir, Command c, const ExperimentConfig& cfg,
                                       const RunResult& result, int threads, double wall_seconds);

}  // namespace tourney
