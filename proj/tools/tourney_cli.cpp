#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tourney/config.hpp"
#include "tourney/error.hpp"
#include "tourney/runner.hpp"

using namespace tourney;
using nlohmann::json;

namespace {

std::string kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::domain: return "domain";
        case ErrorKind::precondition: return "precondition";
        case ErrorKind::band_escape: return "band_escape";
        case ErrorKind::singular_start: return "singular_start";
        case ErrorKind::no_convergence: return "no_convergence";
        case ErrorKind::config: return "config";
        case ErrorKind::io: return "io";
    }
    return "error";
}

int report_error(const std::string& kind, const std::string& message, const json& violations, int code) {
    json err{{"error", kind}, {"message", message}, {"exit_code", code}};
    if (!violations.is_null()) err["violations"] = violations;
    std::cerr << err.dump(2) << "\n";
    return code;
}

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> n;
    std::optional<std::string> out_dir;
    std::optional<std::string> prop;
    std::optional<std::string> family;
    std::optional<int> L;
    std::optional<std::string> out_csv;
    int threads = 1;
};

// Flags are merged into the raw document so they pass the same validation.
json merge_overrides(json doc, const Overrides& o) {
    if (o.seed) doc["monte_carlo"]["seed"] = *o.seed;
    if (o.n) doc["monte_carlo"]["n"] = *o.n;
    if (o.out_dir) doc["output"]["dir"] = *o.out_dir;
    if (o.prop) doc["experiment"]["prop"] = *o.prop;
    if ((o.family || o.L) && !doc.contains("family")) {
        std::optional<Prop> prop;
        try {
            prop = prop_from_string(doc["experiment"].value("prop", "P6"));
        } catch (const Error&) {
        }
        doc["family"] = default_family(prop).to_json();
    }
    if (o.family) doc["family"]["kind"] = *o.family;
    if (o.L) doc["family"]["L"] = *o.L;
    return doc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical lab for two-stage tournament auctions with one strong bidder"};
    app.require_subcommand(1);
    Overrides o;
    app.add_option("--config", o.config_path, "experiment config (JSON); defaults to U[0,1] weak, U[0,2] strong, N=2");
    app.add_option("--seed", o.seed, "Monte Carlo seed, overrides the config");
    app.add_option("--threads", o.threads, "worker threads for Monte Carlo")->check(CLI::Range(1, 1024));
    app.add_option("--out-dir", o.out_dir, "output directory, overrides the config");

    struct Sub {
        Command cmd;
        CLI::App* app;
    };
    std::vector<Sub> subs{
        {Command::solve, app.add_subcommand("solve", "solve the weak bidders' equilibrium bid function")},
        {Command::verify, app.add_subcommand("verify", "solve, then check best responses on a grid")},
        {Command::simulate, app.add_subcommand("simulate", "Monte Carlo revenue and surplus of one mechanism")},
        {Command::oa, app.add_subcommand("oa", "optimal-auction revenue from ironed virtual values")},
        {Command::sweep, app.add_subcommand("sweep", "limit experiment along a strong-bidder family")},
        {Command::check_family, app.add_subcommand("check-family", "convergence and slow-drain checks of a family")},
        {Command::report, app.add_subcommand("report", "summarise result files in the output directory")},
    };
    for (auto& s : subs) s.app->fallthrough();
    for (auto* sub : {subs[2].app, subs[3].app}) sub->add_option("--n", o.n, "Monte Carlo replicates");
    auto* sweep = subs[4].app;
    sweep->add_option("--prop", o.prop, "P4, P5, P6, P7, P8, P9, P10 or S8");
    sweep->add_option("--family", o.family, "smoothed_discrete, slow_drain or fast_drain");
    sweep->add_option("--L", o.L, "number of family members");
    sweep->add_option("--n", o.n, "Monte Carlo replicates per member");
    sweep->add_option("--out", o.out_csv, "also write the table CSV to this path");
    subs[5].app->add_option("--family", o.family, "smoothed_discrete, slow_drain or fast_drain");
    subs[5].app->add_option("--L", o.L, "number of family members");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    Command cmd = Command::solve;
    for (const auto& s : subs)
        if (s.app->parsed()) cmd = s.cmd;

    try {
        json doc = o.config_path.empty() ? ExperimentConfig{}.to_json() : read_config_json(o.config_path);
        ExperimentConfig cfg = config_from_json(merge_overrides(doc, o));

        auto t0 = std::chrono::steady_clock::now();
        RunResult result = run_command(cmd, cfg, o.threads);
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        auto written = write_outputs(cfg.output_dir, cmd, cfg, result, o.threads, wall);
        if (o.out_csv) {
            for (const auto& f : result.files)
                if (f.name.size() > 4 && f.name.compare(f.name.size() - 4, 4, ".csv") == 0) {
                    write_atomic(*o.out_csv, f.body);
                    written.push_back(*o.out_csv);
                }
        }
        json summary = result.summary;
        summary["config_hash"] = cfg.hash();
        summary["seed"] = cfg.monte_carlo.seed;
        summary["files"] = written;
        summary["exit_code"] = result.exit_code;
        std::cout << summary.dump(2) << "\n";
        return result.exit_code;
    } catch (const ConfigError& e) {
        return report_error("config", e.what(), e.violations(), kExitConfig);
    } catch (const Error& e) {
        return report_error(kind_name(e.kind()), e.what(), nullptr, exit_code_for(e));
    } catch (const std::exception& e) {
        return report_error("internal", e.what(), nullptr, 1);
    }
}
