// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Every run goes through run_command so the determinism criterion can replay
// the exact same configs and compare result bodies.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tourney/config.hpp"
#include "tourney/runner.hpp"
#include "tourney/sequences.hpp"

using namespace tourney;
using nlohmann::json;

namespace {

struct Recorded {
    std::string label;
    Command cmd;
    ExperimentConfig cfg;
    RunResult result;
};

std::vector<Recorded> g_runs;
double g_last_seconds = 0.0;

const json kUniform1 = {{"kind", "uniform"}, {"support", {0, 1}}};
const json kUniform2 = {{"kind", "uniform"}, {"support", {0, 2}}};

json base(int N = 2) {
    return {{"version", "1"}, {"N", N}, {"F", kUniform1}, {"G", kUniform2}, {"mechanism", {{"kind", "TA"}}},
            {"monte_carlo", {{"n", 100000}, {"seed", 20240601}}}};
}

json run(const std::string& label, Command c, const json& doc) {
    ExperimentConfig cfg = config_from_json(doc);
    auto t0 = std::chrono::steady_clock::now();
    RunResult r = run_command(c, cfg, 1);
    g_last_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json body = json::parse(r.files.front().body);
    g_runs.push_back({label, c, cfg, std::move(r)});
    return body;
}

json sweep(const std::string& label, Prop prop, const FamilySpec& fam, const std::optional<ReserveRule>& rule,
           std::int64_t n) {
    json doc = base();
    doc["family"] = fam.to_json();
    doc["experiment"] = {{"prop", to_string(prop)}};
    if (rule) doc["experiment"]["rule"] = rule->to_json();
    doc["monte_carlo"]["n"] = n;
    return run(label, Command::sweep, doc)["table"];
}

bool within_rel(double x, double target, double rel) { return std::abs(x - target) <= rel * std::abs(target); }

FamilySpec slow() { return make_family(FamilyKind::slow_drain, 2, 3, 8); }

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += (ok ? "" : "[x] ") + what;
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

Verdict c1() {
    Verdict o;
    json doc = base();
    doc.erase("G");
    doc["mechanism"] = {{"kind", "TA_DISCRETE"}, {"atom", {{"k", 2}, {"p", 0.75}}}};
    doc["monte_carlo"]["n"] = 1000000;
    json b = run("c1 discrete", Command::simulate, doc);
    double mean = b["simulation"]["revenue"]["mean"], se = b["simulation"]["revenue"]["se"];
    o.require(std::abs(mean - 1.5) <= std::max(3 * se, 1e-12), fmt("revenue %.6f vs 1.5 (3 SE = %.2g)", mean, 3 * se));
    o.require(g_last_seconds < 10, fmt("%.2f s < 10 s", g_last_seconds));
    return o;
}

// Verify bodies shared by criteria 2 to 4.
std::vector<json> g_verify;

Verdict c2() {
    Verdict o;
    const json bump = slow().member(3).to_json();
    for (int N : {2, 3, 5})
        for (const json& G : {kUniform2, bump}) {
            json doc = base(N);
            doc["G"] = G;
            doc["verify"] = {{"v_points", 50}, {"dev_points", 200}};
            const std::string name = std::string(G == kUniform2 ? "U[0,2]" : "bump l=3") + " N=" + std::to_string(N);
            json b = run("c2 verify " + name, Command::verify, doc);
            g_verify.push_back(b);
            double regret = b["best_response"]["max_regret"];
            o.require(regret <= 1e-4 && g_last_seconds < 60,
                      name + fmt(": regret %.2e, %.2f s", regret, g_last_seconds));
        }
    return o;
}

Verdict c3() {
    Verdict o;
    for (const json& b : g_verify) {
        int N = b["config"]["N"];
        double r = b["checks"]["initial_ratio"], target = 2.0 * N / (N + 1);
        o.require(std::abs(r - target) <= 1e-2, fmt("N=%g: %.5f vs %.5f", N, r, target));
    }
    return o;
}

Verdict c4() {
    Verdict o;
    int total = 0;
    for (const json& b : g_verify) total += b["checks"]["overbid_violations"].get<int>();
    o.require(total == 0, fmt("%g violations over %g solved instances", total, double(g_verify.size())));
    return o;
}

Verdict c5() {
    Verdict o;
    json doc = base();
    doc["verify"] = {{"cross_check", true}};
    json cc = run("c5 cross-check", Command::verify, doc)["checks"]["cross_check"];
    if (cc.contains("sup_distance"))
        o.require(cc["agree"].get<bool>(), fmt("sup|b_ode - b_picard| = %.2e <= %.0e", cc["sup_distance"], 1e-3));
    else
        o.require(false, "flagged: " + cc.value("flag", std::string("no report")));
    return o;
}

json g_p6;

Verdict c6() {
    Verdict o;
    auto t0 = std::chrono::steady_clock::now();
    g_p6 = sweep("c6 sweep P6", Prop::P6, slow(), std::nullopt, 100000);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& rows = g_p6["rows"];
    const std::size_t n = rows.size();
    bool shrinking = true;
    for (std::size_t i = n - 3; i < n; ++i) shrinking = shrinking && rows[i]["gap"] < rows[i - 1]["gap"];
    std::string gaps;
    for (std::size_t i = n - 4; i < n; ++i) gaps += fmt(i + 1 < n ? "%.4f > " : "%.4f", rows[i]["gap"]);
    o.require(shrinking, "gaps " + gaps);
    o.require(g_p6["gap"] <= 0.2, fmt("final gap %.4f <= 0.2", g_p6["gap"]));
    o.require(secs < 600, fmt("%.1f s", secs));
    return o;
}

Verdict c7() {
    Verdict o;
    json oa = sweep("c7 sweep P5", Prop::P5, slow(), std::nullopt, 100000);
    o.require(oa["gap"] <= 0.1, fmt("final OA gap %.4f <= 0.1", oa["gap"]));
    int bad = 0;
    double worst = -1e300;
    for (std::size_t i = 0; i < oa["rows"].size(); ++i) {
        const json &t = g_p6["rows"][i], &a = oa["rows"][i];
        double se = std::hypot(t["R_se"].get<double>(), a["R_se"].get<double>());
        double excess = (t["R_mean"].get<double>() - a["R_mean"].get<double>()) / se;
        worst = std::max(worst, excess);
        if (excess > 3) ++bad;
    }
    o.require(bad == 0, fmt("TA <= OA + 3 SE at every l (max excess %.2f SE)", worst));
    return o;
}

Verdict c8() {
    Verdict o;
    for (double r : {1.0, 1.25, 1.5, 1.75, 1.95}) {
        json doc = base();
        doc["mechanism"] = {{"kind", "SA_RESERVE"}, {"reserve", r}};
        json b = run(fmt("c8 reserve %.2f", r), Command::simulate, doc);
        double cf = b["closed_form"]["revenue"], mc = b["simulation"]["revenue"]["mean"],
               se = b["simulation"]["revenue"]["se"];
        o.require(std::abs(cf - mc) <= 3 * se, fmt("r=%.2f: %.4f vs %.4f", r, cf, mc));
        if (r == 1.5) o.require(std::abs(cf - 0.625) <= 1e-12, fmt("closed form at 1.5 = %.15g", cf));
    }
    return o;
}

Verdict c9() {
    Verdict o;
    json under = sweep("c9 sweep P8", Prop::P8, slow(), ReserveRule{ReserveKind::constant_limit, 1.6, 0.5}, 100000);
    o.require(within_rel(under["last"], 1.6, 0.02), fmt("undershoot revenue %.4f vs 1.6", under["last"]));
    json over = sweep("c9 sweep P9", Prop::P9, slow(), ReserveRule{ReserveKind::overshoot, 2.2, 0.5}, 100000);
    double surplus = over["rows"].back()["S_mean"];
    o.require(within_rel(over["last"], 1.0 / 3, 0.02), fmt("overshoot revenue %.4f vs 1/3", over["last"]));
    o.require(within_rel(surplus, 2.0 / 3, 0.02), fmt("overshoot surplus %.4f vs 2/3", surplus));
    return o;
}

Verdict c10() {
    Verdict o;
    for (double p : {0.0, 0.5, 1.0}) {
        auto fam = make_family(FamilyKind::slow_drain, 2, 3, 8, 1.0, p);
        json t = sweep(fmt("c10 sweep P10 p=%.1f", p), Prop::P10, fam, ReserveRule{ReserveKind::from_below, 0, 0.5},
                       100000);
        double rev = t["last"], surplus = t["rows"].back()["S_mean"];
        double rt = p / 3 + (1 - p) * 2, st = 2 * p / 3 + (1 - p) * 2;
        o.require(within_rel(rev, rt, 0.02) && within_rel(surplus, st, 0.02),
                  fmt("p=%.1f: revenue %.4f vs %.4f, surplus %.4f", p, rev, rt, surplus) + fmt(" vs %.4f", st));
    }
    return o;
}

Verdict c11() {
    Verdict o;
    json doc = base();
    doc["family"] = make_family(FamilyKind::smoothed_discrete, 2, 3, 8, 1.0).to_json();
    doc["experiment"] = {{"prop", "S8"}, {"intervention_p", 0.75}};
    json t = run("c11 sweep S8", Command::sweep, doc)["table"];
    o.require(within_rel(t["last"], 1.5, 0.05), fmt("revenue %.4f vs p k = 1.5", t["last"]));
    return o;
}

Verdict c12() {
    Verdict o;
    auto report = [](const std::string& label, const FamilySpec& fam) {
        json doc = base();
        doc["family"] = fam.to_json();
        return run("c12 " + label, Command::check_family, doc)["report"];
    };
    json s = report("slow", slow());
    json f = report("fast", make_family(FamilyKind::fast_drain, 2, 3, 8));
    json d = report("smoothed", make_family(FamilyKind::smoothed_discrete, 2, 3, 8, 0.5));
    o.require(s["convergence"]["passes"] && s["drain_ratio_passes"] && s["drain_cond_mean_passes"],
              "slow drain passes convergence and slow-drain checks");
    o.require(!f["drain_ratio_passes"].get<bool>(), "fast drain fails the slow-drain check");
    o.require(s["diagnostics_agree"] && f["diagnostics_agree"] && d["diagnostics_agree"],
              "ratio and conditional-mean verdicts agree on slow, fast and smoothed families");
    return o;
}

Verdict c13() {
    Verdict o;
    int mismatched = 0;
    std::string which;
    for (const auto& rec : g_runs) {
        for (int threads : {8, 1}) {
            RunResult again = run_command(rec.cmd, rec.cfg, threads);
            bool same = again.files.size() == rec.result.files.size();
            for (std::size_t i = 0; same && i < again.files.size(); ++i)
                same = again.files[i].name == rec.result.files[i].name && again.files[i].body == rec.result.files[i].body;
            if (!same) {
                ++mismatched;
                which += " " + rec.label + fmt("(threads %g)", threads);
            }
        }
    }
    o.require(mismatched == 0, fmt("%g runs replayed with 8 and 1 threads", double(g_runs.size())) +
                                   (mismatched ? ", differing:" + which : std::string(", all bodies identical")));
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"discrete pooling revenue", c1},
        {"equilibrium best response", c2},
        {"initial bid slope", c3},
        {"overbidding", c4},
        {"ODE vs Picard", c5},
        {"tournament limit", c6},
        {"optimal auction benchmark", c7},
        {"reserve closed form", c8},
        {"undershoot and overshoot", c9},
        {"convergence from below", c10},
        {"intervention", c11},
        {"family checkers", c12},
        {"determinism", c13},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        if (!o.pass) ++failed;
        std::printf("C%zu %s  %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
