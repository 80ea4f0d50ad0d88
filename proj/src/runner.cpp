#include "tourney/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <boost/version.hpp>
#include <unistd.h>

#include "tourney/equilibrium.hpp"
#include "tourney/mechanisms.hpp"
#include "tourney/myerson.hpp"
#include "tourney/sequences.hpp"

namespace tourney {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

json config_body(const ExperimentConfig& cfg) {
    json j = cfg.to_json();
    j.erase("output");
    return j;
}

json base_body(Command c, const ExperimentConfig& cfg) {
    return {{"command", to_string(c)},
            {"config_hash", cfg.hash()},
            {"seed", cfg.monte_carlo.seed},
            {"config", config_body(cfg)}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

const Distribution& need_G(const ExperimentConfig& cfg, Command c) {
    if (!cfg.G) {
        std::string v = "/G: a strong-bidder distribution is required for " + to_string(c);
        throw ConfigError("invalid configuration (1 problem)\n  " + v, {v});
    }
    return *cfg.G;
}

Solution solve(const ExperimentConfig& cfg, const Instance& inst) {
    if (cfg.solver.method == "picard") return solve_picard(inst, cfg.solver.picard);
    return solve_ode(inst, cfg.solver.ode);
}

FamilySpec family_for(const ExperimentConfig& cfg, std::optional<Prop> prop) {
    return cfg.family ? *cfg.family : default_family(prop);
}

std::optional<ReserveRule> rule_for(const ExperimentConfig& cfg, Prop prop, double k) {
    if (cfg.experiment.rule) return cfg.experiment.rule;
    switch (prop) {
        case Prop::P7: return ReserveRule{ReserveKind::approximating, 0.0, 0.5};
        case Prop::P8: return ReserveRule{ReserveKind::constant_limit, 0.8 * k, 0.5};
        case Prop::P9: return ReserveRule{ReserveKind::overshoot, 1.1 * k, 0.5};
        case Prop::P10: return ReserveRule{ReserveKind::from_below, 0.0, 0.5};
        default: return std::nullopt;
    }
}

RunResult run_solve(const ExperimentConfig& cfg) {
    Instance inst{cfg.F, need_G(cfg, Command::solve), cfg.N};
    auto sol = solve(cfg, inst);
    const std::string stem = output_stem(Command::solve, cfg);
    json body = base_body(Command::solve, cfg);
    body["report"] = sol.report.to_json();
    body["bid_function"] = sol.bid.to_json();
    RunResult r;
    r.files = {{stem + ".json", dump(body)}, {stem + "_bid.csv", sol.bid.to_csv()}};
    r.summary = {{"command", "solve"}, {"method", sol.report.method}, {"nodes", sol.report.nodes},
                 {"b_at_v_max", sol.bid(inst.v_max())}, {"warnings", sol.report.warnings}};
    return r;
}

RunResult run_verify(const ExperimentConfig& cfg) {
    Instance inst{cfg.F, need_G(cfg, Command::verify), cfg.N};
    auto sol = solve(cfg, inst);
    const double vmax = inst.v_max();
    const auto& vc = cfg.verify;
    auto br = verify_best_response(sol.bid, inst, vc.v_points, vc.dev_points, vc.raw_bid_points);

    int overbid_violations = 0;
    for (std::size_t i = 0; i < sol.bid.grid().size(); ++i) {
        double v = sol.bid.grid()[i];
        if (v > 0.0 && v < vmax && !(sol.bid.values()[i] > v)) ++overbid_violations;
    }
    const double v_small = 1e-3 * vmax;
    const double ratio = sol.bid(v_small) / v_small;
    const double beta0 = inst.initial_ratio();

    json cross = nullptr;
    bool cross_ok = true;
    if (vc.cross_check) {
        try {
            auto a = solve_ode(inst, cfg.solver.ode);
            auto b = solve_picard(inst, cfg.solver.picard);
            double d = sup_distance(a.bid, b.bid);
            cross_ok = d <= 1e-3 * vmax;
            cross = {{"sup_distance", d}, {"tolerance", 1e-3 * vmax}, {"agree", cross_ok},
                     {"picard_iterations", b.report.picard_iterations}};
        } catch (const NoConvergence& e) {
            cross_ok = false;
            cross = {{"agree", false}, {"flag", std::string("picard did not converge: ") + e.what()}};
        }
    }

    const bool regret_ok = br.max_regret <= vc.regret_tol * vmax;
    const bool pass = regret_ok && overbid_violations == 0 && cross_ok;
    json body = base_body(Command::verify, cfg);
    body["solve_report"] = sol.report.to_json();
    body["best_response"] = br.to_json();
    body["checks"] = {{"regret_ok", regret_ok},
                      {"regret_tolerance", vc.regret_tol * vmax},
                      {"overbid_violations", overbid_violations},
                      {"initial_ratio", ratio},
                      {"initial_ratio_target", beta0},
                      {"initial_ratio_ok", std::abs(ratio - beta0) <= 1e-2},
                      {"cross_check", cross},
                      {"pass", pass}};
    const std::string stem = output_stem(Command::verify, cfg);
    RunResult r;
    r.files = {{stem + ".json", dump(body)}, {stem + "_bid.csv", sol.bid.to_csv()}};
    r.summary = {{"command", "verify"}, {"max_regret", br.max_regret}, {"overbid_violations", overbid_violations},
                 {"pass", pass}};
    r.exit_code = pass ? 0 : kExitVerify;
    return r;
}

RunResult run_simulate(const ExperimentConfig& cfg, int threads) {
    const auto& m = cfg.mechanism;
    AuctionSpec spec;
    spec.kind = m.kind;
    spec.N = cfg.N;
    spec.F = cfg.F;
    json body = base_body(Command::simulate, cfg);
    if (m.kind == Mechanism::TA_DISCRETE) {
        spec.atom = m.atom;
        auto eq = discrete_equilibrium(m.atom->p, m.atom->k, cfg.F, cfg.N);
        body["pooling_revenue"] = eq.expected_revenue;
    } else {
        spec.strong = need_G(cfg, Command::simulate);
    }
    if (m.kind == Mechanism::SA_RESERVE) {
        spec.reserve = m.reserve;
        auto cf = sa_reserve_closed_form(cfg.F, *cfg.G, cfg.N, *m.reserve);
        body["closed_form"] = {{"revenue", cf.revenue}, {"surplus", cf.surplus}};
    }
    if (m.kind == Mechanism::TA || m.kind == Mechanism::TA_INTERVENTION) {
        Distribution law = *cfg.G;
        if (m.kind == Mechanism::TA_INTERVENTION) {
            spec.intervention_p = m.intervention_p;
            law = intervention_bid_law(*cfg.G, *m.intervention_p, m.spread_fraction * cfg.F.hi());
        }
        auto sol = solve(cfg, Instance{cfg.F, law, cfg.N});
        spec.bid_fn = sol.bid;
        body["solve_report"] = sol.report.to_json();
    }
    const std::int64_t n = cfg.monte_carlo.n;
    auto res = simulate(spec, n, cfg.monte_carlo.seed, {threads, true});
    body["simulation"] = res.to_json();
    const std::string stem = output_stem(Command::simulate, cfg);
    RunResult r;
    r.files = {{stem + ".json", dump(body)}};
    if (!res.draws_csv.empty()) r.files.push_back({stem + "_draws.csv", res.draws_csv});
    r.summary = {{"command", "simulate"}, {"mechanism", to_string(m.kind)},
                 {"revenue", res.revenue.mean}, {"revenue_se", res.revenue.se}};
    return r;
}

RunResult run_oa(const ExperimentConfig& cfg, int threads) {
    auto e = oa_revenue(cfg.F, cfg.G, cfg.N, cfg.monte_carlo.n, cfg.monte_carlo.seed, threads);
    const Distribution& single = cfg.G ? *cfg.G : cfg.F;
    auto rsv = single_buyer_reserve(single);
    json body = base_body(Command::oa, cfg);
    body["revenue"] = e.mean;
    body["se"] = e.se;
    body["n"] = e.n;
    body["regular_F"] = regularity_check(cfg.F).regular;
    body["regular_G"] = cfg.G ? json(regularity_check(*cfg.G).regular) : json(nullptr);
    body["reserve_single_buyer"] = {{"r_star", rsv.r_star}, {"revenue", rsv.revenue},
                                    {"bidder", cfg.G ? "strong" : "weak"}};
    RunResult r;
    r.files = {{output_stem(Command::oa, cfg) + ".json", dump(body)}};
    r.summary = {{"command", "oa"}, {"revenue", e.mean}, {"se", e.se}};
    return r;
}

RunResult run_sweep(const ExperimentConfig& cfg, int threads) {
    const Prop prop = cfg.experiment.prop;
    FamilySpec fam = family_for(cfg, prop);
    auto rule = rule_for(cfg, prop, fam.k);
    ExperimentOptions opts;
    opts.threads = threads;
    opts.intervention_p = cfg.experiment.intervention_p;
    opts.spread_fraction = cfg.mechanism.spread_fraction;
    opts.ode = cfg.solver.ode;
    opts.verify_v_points = cfg.verify.v_points;
    opts.verify_dev_points = cfg.verify.dev_points;
    auto t = run_limit_experiment(prop, fam, rule, cfg.F, cfg.N, cfg.monte_carlo.n, cfg.monte_carlo.seed, opts);
    json body = base_body(Command::sweep, cfg);
    body["family"] = fam.to_json();
    body["rule"] = rule ? rule->to_json() : json(nullptr);
    body["table"] = t.to_json();
    const std::string stem = output_stem(Command::sweep, cfg);
    RunResult r;
    r.files = {{stem + ".json", dump(body)}, {stem + ".csv", t.to_csv()}};
    r.summary = {{"command", "sweep"}, {"prop", to_string(prop)}, {"target", t.target}, {"last", t.last},
                 {"gap", t.gap}, {"richardson", t.richardson}};
    return r;
}

RunResult run_check_family(const ExperimentConfig& cfg) {
    FamilySpec fam = family_for(cfg, std::nullopt);
    auto rep = check_family(fam, cfg.F.hi());
    json members = json::array();
    for (int l = 1; l <= fam.L; ++l) {
        auto p = fam.params(l);
        members.push_back({{"l", l},
                           {"floor_mass", p.floor_mass},
                           {"low_mass", p.low_mass},
                           {"low_width", p.low_width},
                           {"atom_mass", p.atom_mass},
                           {"atom_width", p.atom_width},
                           {"mean", fam.member(l).mean()}});
    }
    json body = base_body(Command::check_family, cfg);
    body["family"] = fam.to_json();
    body["members"] = members;
    body["report"] = rep.to_json();
    RunResult r;
    r.files = {{output_stem(Command::check_family, cfg) + ".json", dump(body)}};
    r.summary = {{"command", "check-family"},
                 {"converges", rep.convergence.passes},
                 {"slow_drain", rep.drain_ratio_passes},
                 {"diagnostics_agree", rep.diagnostics_agree}};
    return r;
}

json headline(const json& j) {
    const std::string c = j.value("command", "");
    if (c == "solve") return j["report"]["method"];
    if (c == "verify") return j["checks"]["pass"];
    if (c == "simulate") return j["simulation"]["revenue"]["mean"];
    if (c == "oa") return j["revenue"];
    if (c == "sweep") return {{"prop", j["table"]["prop"]}, {"gap", j["table"]["gap"]}};
    if (c == "check-family") return j["report"]["convergence"]["passes"];
    return nullptr;
}

RunResult run_report(const ExperimentConfig& cfg) {
    std::vector<std::string> names;
    if (fs::is_directory(cfg.output_dir))
        for (const auto& e : fs::directory_iterator(cfg.output_dir)) {
            std::string name = e.path().filename().string();
            bool meta = name.size() > 10 && name.compare(name.size() - 10, 10, ".meta.json") == 0;
            if (e.is_regular_file() && e.path().extension() == ".json" && !meta && name.rfind("report_", 0) != 0)
                names.push_back(name);
        }
    std::sort(names.begin(), names.end());
    json runs = json::array();
    for (const auto& name : names) {
        std::ifstream in(fs::path(cfg.output_dir) / name);
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("command")) continue;
        runs.push_back({{"file", name},
                        {"command", j["command"]},
                        {"config_hash", j.value("config_hash", "")},
                        {"seed", j.value("seed", 0)},
                        {"headline", headline(j)}});
    }
    json body = base_body(Command::report, cfg);
    body["runs"] = runs;
    RunResult r;
    r.files = {{output_stem(Command::report, cfg) + ".json", dump(body)}};
    r.summary = {{"command", "report"}, {"runs", runs.size()}};
    return r;
}

}  // namespace

FamilySpec default_family(std::optional<Prop> prop) {
    if (prop == Prop::S8) return make_family(FamilyKind::smoothed_discrete, 2, 3, 8, 1.0);
    if (prop == Prop::P10) return make_family(FamilyKind::slow_drain, 2, 3, 8, 1.0, 0.5);
    return make_family(FamilyKind::slow_drain, 2, 3, 8);
}

std::string to_string(Command c) {
    switch (c) {
        case Command::solve: return "solve";
        case Command::verify: return "verify";
        case Command::simulate: return "simulate";
        case Command::oa: return "oa";
        case Command::sweep: return "sweep";
        case Command::check_family: return "check-family";
        case Command::report: return "report";
    }
    return "unknown";
}

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::band_escape:
        case ErrorKind::singular_start:
        case ErrorKind::no_convergence: return kExitNumeric;
        default: return kExitConfig;
    }
}

std::string output_stem(Command c, const ExperimentConfig& cfg) {
    std::string name = to_string(c);
    std::replace(name.begin(), name.end(), '-', '_');
    return name + "_" + cfg.hash() + "_s" + std::to_string(cfg.monte_carlo.seed);
}

RunResult run_command(Command c, const ExperimentConfig& cfg, int threads) {
    switch (c) {
        case Command::solve: return run_solve(cfg);
        case Command::verify: return run_verify(cfg);
        case Command::simulate: return run_simulate(cfg, threads);
        case Command::oa: return run_oa(cfg, threads);
        case Command::sweep: return run_sweep(cfg, threads);
        case Command::check_family: return run_check_family(cfg);
        case Command::report: return run_report(cfg);
    }
    throw DomainError("unknown command");
}

void write_atomic(const std::string& path, const std::string& body) {
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out << body;
        out.flush();
        if (!out) throw IoError("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move output into place at '" + path + "'");
    }
}

std::vector<std::string> write_outputs(const std::string& dir, Command c, const ExperimentConfig& cfg,
                                       const RunResult& result, int threads, double wall_seconds) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "'");
    std::vector<std::string> written;
    json names = json::array();
    for (const auto& f : result.files) {
        std::string path = (fs::path(dir) / f.name).string();
        write_atomic(path, f.body);
        written.push_back(path);
        names.push_back(f.name);
    }
    std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    json meta{{"command", to_string(c)},
              {"config_hash", cfg.hash()},
              {"seed", cfg.monte_carlo.seed},
              {"threads", threads},
              {"wall_time_s", wall_seconds},
              {"finished_at", stamp},
              {"exit_code", result.exit_code},
              {"files", names},
              {"versions",
               {{"tourney", kVersion},
                {"compiler", __VERSION__},
                {"boost", BOOST_LIB_VERSION},
                {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                      std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}}};
    std::string meta_path = (fs::path(dir) / (output_stem(c, cfg) + ".meta.json")).string();
    write_atomic(meta_path, dump(meta));
    written.push_back(meta_path);
    return written;
}

}  // namespace tourney
