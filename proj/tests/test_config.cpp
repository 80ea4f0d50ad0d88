#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "tourney/config.hpp"
#include "tourney/error.hpp"
#include "tourney/runner.hpp"

using namespace tourney;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json minimal_ta() {
    return json::parse(R"({
        "version": "1", "N": 2,
        "F": {"kind": "uniform", "support": [0, 1]},
        "G": {"kind": "uniform", "support": [0, 2]},
        "mechanism": {"kind": "TA"}
    })");
}

std::vector<std::string> violations_of(const json& j) {
    try {
        config_from_json(j);
    } catch (const ConfigError& e) {
        return e.violations();
    }
    return {};
}

bool mentions(const std::vector<std::string>& vs, const std::string& needle) {
    return std::any_of(vs.begin(), vs.end(), [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("tourney_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Config, MinimalTournamentIsValid) {
    auto c = config_from_json(minimal_ta());
    EXPECT_EQ(c.N, 2);
    EXPECT_EQ(c.mechanism.kind, Mechanism::TA);
    ASSERT_TRUE(c.G.has_value());
    EXPECT_DOUBLE_EQ(c.G->hi(), 2.0);
    EXPECT_EQ(c.monte_carlo.seed, 1u);
    EXPECT_FALSE(c.verify.cross_check);
}

TEST(Config, ReserveBelowVMaxIsSemanticError) {
    json j = minimal_ta();
    j["mechanism"] = {{"kind", "SA_RESERVE"}, {"reserve", 0.5}};
    auto vs = violations_of(j);
    ASSERT_EQ(vs.size(), 1u);
    EXPECT_TRUE(mentions(vs, "/mechanism/reserve"));
    EXPECT_TRUE(mentions(vs, "r >= v_max"));
    j["mechanism"]["reserve"] = 1.5;
    EXPECT_NO_THROW(config_from_json(j));
}

TEST(Config, EveryViolationIsListedWithItsPath) {
    json j = minimal_ta();
    j["bogus"] = 1;
    j["N"] = 1;
    j["solver"] = {{"method", "euler"}, {"ode", {{"grid_size", 2}, {"typo", 0}}}};
    j["monte_carlo"] = {{"n", "many"}};
    auto vs = violations_of(j);
    EXPECT_EQ(vs.size(), 6u);
    for (const char* path : {"/bogus", "/N", "/solver/method", "/solver/ode/grid_size", "/solver/ode/typo",
                             "/monte_carlo/n"})
        EXPECT_TRUE(mentions(vs, path)) << path;
}

TEST(Config, PairedFieldsMustMatchTheMechanism) {
    json j = minimal_ta();
    j["mechanism"] = {{"kind", "TA"}, {"intervention_p", 0.5}};
    EXPECT_TRUE(mentions(violations_of(j), "/mechanism/intervention_p"));
    j["mechanism"] = {{"kind", "TA_DISCRETE"}, {"atom", {{"k", 2}, {"p", 0.4}}}};
    EXPECT_TRUE(mentions(violations_of(j), "pooling"));
    j["mechanism"]["atom"]["p"] = 0.75;
    EXPECT_NO_THROW(config_from_json(j));
}

TEST(Config, BadDistributionAndFamilyAreReported) {
    json j = minimal_ta();
    j["G"] = {{"kind", "uniform"}, {"support", {2, 1}}};
    j["family"] = {{"kind", "slow_drain"}, {"k", 0.5}, {"w_bar", 3}, {"L", 8}};
    auto vs = violations_of(j);
    EXPECT_TRUE(mentions(vs, "/G"));
    EXPECT_TRUE(mentions(vs, "/family"));
}

TEST(Config, RoundTripKeepsHash) {
    json j = minimal_ta();
    j["family"] = make_family(FamilyKind::smoothed_discrete, 2, 3, 6, 0.5).to_json();
    j["experiment"] = {{"prop", "S8"}, {"intervention_p", 0.6}};
    auto a = config_from_json(j);
    auto b = config_from_json(a.to_json());
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(a.to_json(), b.to_json());
    EXPECT_EQ(a.hash().size(), 16u);
}

TEST(Config, HashIgnoresOutputDirectory) {
    json j = minimal_ta();
    auto a = config_from_json(j);
    j["output"] = {{"dir", "elsewhere"}};
    auto b = config_from_json(j);
    EXPECT_EQ(a.hash(), b.hash());
    j["monte_carlo"] = {{"seed", 2}};
    EXPECT_NE(a.hash(), config_from_json(j).hash());
}

TEST(Config, Fnv1aKnownValues) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Config, FileErrors) {
    EXPECT_THROW(parse_config("/nonexistent/config.json"), IoError);
    auto dir = scratch_dir("badjson");
    std::ofstream(dir / "c.json") << "{ not json";
    EXPECT_THROW(parse_config((dir / "c.json").string()), ConfigError);
}

TEST(Runner, SolveAndVerifyPipeline) {
    auto cfg = config_from_json(minimal_ta());
    auto solved = run_command(Command::solve, cfg);
    ASSERT_EQ(solved.files.size(), 2u);
    EXPECT_EQ(solved.files[1].name, output_stem(Command::solve, cfg) + "_bid.csv");
    EXPECT_EQ(solved.files[1].body.rfind("v,b,b_prime\n", 0), 0u);

    auto verified = run_command(Command::verify, cfg);
    EXPECT_EQ(verified.exit_code, 0);
    json body = json::parse(verified.files[0].body);
    EXPECT_LE(body["best_response"]["max_regret"].get<double>(), 1e-4);
    EXPECT_EQ(body["checks"]["overbid_violations"], 0);
    EXPECT_NEAR(body["checks"]["initial_ratio"].get<double>(), 4.0 / 3.0, 1e-2);
}

TEST(Runner, VerifyFailureExitsFour) {
    json j = minimal_ta();
    j["G"] = make_family(FamilyKind::slow_drain, 2, 3, 8).member(3).to_json();
    j["solver"] = {{"picard", {{"max_iter", 1}}}};
    j["verify"] = {{"cross_check", true}};
    auto r = run_command(Command::verify, config_from_json(j));
    EXPECT_EQ(r.exit_code, kExitVerify);
    EXPECT_EQ(json::parse(r.files[0].body)["checks"]["cross_check"]["agree"], false);
}

TEST(Runner, OutputNamesCarryHashAndSeed) {
    auto cfg = config_from_json(minimal_ta());
    const std::string tag = cfg.hash() + "_s1";
    for (auto c : {Command::solve, Command::simulate, Command::check_family})
        for (const auto& f : run_command(c, cfg).files) EXPECT_NE(f.name.find(tag), std::string::npos) << f.name;
    EXPECT_EQ(output_stem(Command::check_family, cfg), "check_family_" + tag);
}

TEST(Runner, BodiesIgnoreThreadsAndRepeat) {
    json j = minimal_ta();
    j["monte_carlo"] = {{"n", 5001}, {"seed", 7}};
    auto cfg = config_from_json(j);
    for (auto c : {Command::simulate, Command::oa}) {
        auto a = run_command(c, cfg, 1);
        auto b = run_command(c, cfg, 8);
        auto again = run_command(c, cfg, 1);
        ASSERT_EQ(a.files.size(), b.files.size());
        for (std::size_t i = 0; i < a.files.size(); ++i) {
            EXPECT_EQ(a.files[i].body, b.files[i].body);
            EXPECT_EQ(a.files[i].body, again.files[i].body);
        }
    }
}

TEST(Runner, MissingStrongBidderIsConfigError) {
    json j = minimal_ta();
    j.erase("G");
    auto cfg = config_from_json(j);
    EXPECT_THROW(run_command(Command::solve, cfg), ConfigError);
    EXPECT_NO_THROW(run_command(Command::oa, cfg));
}

TEST(Runner, ExitCodes) {
    EXPECT_EQ(exit_code_for(ConfigError("x")), kExitConfig);
    EXPECT_EQ(exit_code_for(PreconditionError("x")), kExitConfig);
    EXPECT_EQ(exit_code_for(NoConvergence("x", 1.0)), kExitNumeric);
    EXPECT_EQ(exit_code_for(BandEscape("x", 0.5)), kExitNumeric);
}

TEST(Runner, WritesAtomicallyWithMeta) {
    auto dir = scratch_dir("outputs");
    auto cfg = config_from_json(minimal_ta());
    auto r = run_command(Command::solve, cfg);
    auto written = write_outputs(dir.string(), Command::solve, cfg, r, 3, 0.5);
    ASSERT_EQ(written.size(), 3u);
    for (const auto& f : r.files) EXPECT_EQ(slurp(dir / f.name), f.body);
    json meta = json::parse(slurp(dir / (output_stem(Command::solve, cfg) + ".meta.json")));
    EXPECT_EQ(meta["threads"], 3);
    EXPECT_EQ(meta["config_hash"], cfg.hash());
    for (const auto& e : fs::directory_iterator(dir))
        EXPECT_EQ(e.path().filename().string().find(".tmp."), std::string::npos);

    write_atomic((dir / "x.txt").string(), "one");
    write_atomic((dir / "x.txt").string(), "two");
    EXPECT_EQ(slurp(dir / "x.txt"), "two");
    EXPECT_THROW(write_atomic("/nonexistent/dir/x.txt", "z"), IoError);
}

TEST(Runner, ReportListsEarlierRuns) {
    auto dir = scratch_dir("report");
    json j = minimal_ta();
    j["output"] = {{"dir", dir.string()}};
    auto cfg = config_from_json(j);
    for (auto c : {Command::solve, Command::check_family}) write_outputs(dir.string(), c, cfg, run_command(c, cfg), 1, 0);
    auto r = run_command(Command::report, cfg);
    json body = json::parse(r.files[0].body);
    ASSERT_EQ(body["runs"].size(), 2u);
    EXPECT_EQ(body["runs"][0]["command"], "check-family");
    EXPECT_EQ(body["runs"][1]["headline"], "ode");
}
