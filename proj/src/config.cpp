#include "tourney/config.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "tourney/error.hpp"

namespace tourney {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

json ExperimentConfig::to_json() const {
    json mech{{"kind", to_string(mechanism.kind)}, {"spread_fraction", mechanism.spread_fraction}};
    if (mechanism.reserve) mech["reserve"] = *mechanism.reserve;
    if (mechanism.intervention_p) mech["intervention_p"] = *mechanism.intervention_p;
    if (mechanism.atom) mech["atom"] = {{"k", mechanism.atom->k}, {"p", mechanism.atom->p}};

    const auto& o = solver.ode;
    const auto& p = solver.picard;
    json solv{{"method", solver.method},
              {"ode",
               {{"v0_fraction", o.v0_fraction},
                {"grid_size", o.grid_size},
                {"rk_tolerance", o.rk_tolerance},
                {"max_refine_rounds", o.max_refine_rounds},
                {"min_interval", o.min_interval}}},
              {"picard", {{"grid_size", p.grid_size}, {"max_iter", p.max_iter}, {"tol", p.tol}, {"damping", p.damping}}}};

    json exp{{"prop", to_string(experiment.prop)}, {"intervention_p", experiment.intervention_p}};
    if (experiment.rule) exp["rule"] = experiment.rule->to_json();

    json j{{"version", version},
           {"N", N},
           {"F", F.to_json()},
           {"mechanism", mech},
           {"solver", solv},
           {"verify",
            {{"v_points", verify.v_points},
             {"dev_points", verify.dev_points},
             {"raw_bid_points", verify.raw_bid_points},
             {"regret_tol", verify.regret_tol},
             {"cross_check", verify.cross_check}}},
           {"monte_carlo", {{"n", monte_carlo.n}, {"seed", monte_carlo.seed}}},
           {"experiment", exp},
           {"output", {{"dir", output_dir}}}};
    if (G) j["G"] = G->to_json();
    if (family) j["family"] = family->to_json();
    return j;
}

std::string ExperimentConfig::hash() const {
    json j = to_json();
    j.erase("output");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(j.dump()));
    return buf;
}

namespace {

// Collects "path: message" entries while walking the document.
class Reader {
public:
    std::vector<std::string> errors;

    void fail(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

    bool object_at(const json& j, const std::string& path) {
        if (j.is_object()) return true;
        fail(path, "expected an object");
        return false;
    }

    void known_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& [key, _] : obj.items())
            if (!ok.count(key)) fail(path + "/" + key, "unknown key");
    }

    void number(const json& obj, const std::string& path, const char* key, double& out,
                const std::function<bool(double)>& valid = {}, const char* rule = "") {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        if (!v.is_number()) return fail(path + "/" + key, "expected a number");
        double x = v.get<double>();
        if (valid && !valid(x)) return fail(path + "/" + key, rule);
        out = x;
    }

    template <class Int>
    void integer(const json& obj, const std::string& path, const char* key, Int& out,
                 const std::function<bool(long long)>& valid = {}, const char* rule = "") {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        if (!v.is_number_integer()) return fail(path + "/" + key, "expected an integer");
        if constexpr (std::is_unsigned_v<Int>) {
            if (v.is_number_unsigned() || v.get<long long>() >= 0) {
                out = v.get<Int>();
                return;
            }
            return fail(path + "/" + key, "expected a nonnegative integer");
        } else {
            long long x = v.get<long long>();
            if (valid && !valid(x)) return fail(path + "/" + key, rule);
            out = static_cast<Int>(x);
        }
    }

    void boolean(const json& obj, const std::string& path, const char* key, bool& out) {
        if (!obj.contains(key)) return;
        if (!obj.at(key).is_boolean()) return fail(path + "/" + key, "expected true or false");
        out = obj.at(key).get<bool>();
    }

    void string(const json& obj, const std::string& path, const char* key, std::string& out) {
        if (!obj.contains(key)) return;
        if (!obj.at(key).is_string()) return fail(path + "/" + key, "expected a string");
        out = obj.at(key).get<std::string>();
    }

    // Runs a module parser and turns its DomainError into a violation.
    template <class Fn>
    void guarded(const std::string& path, Fn&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            fail(path, e.what());
        } catch (const json::exception& e) {
            fail(path, e.what());
        }
    }
};

bool positive(double x) { return x > 0.0; }
bool unit_open(double x) { return x > 0.0 && x < 1.0; }

void read_mechanism(Reader& r, const json& j, MechanismConfig& m) {
    const std::string path = "/mechanism";
    if (!r.object_at(j, path)) return;
    r.known_keys(j, path, {"kind", "reserve", "intervention_p", "atom", "spread_fraction"});
    std::string kind = to_string(m.kind);
    r.string(j, path, "kind", kind);
    r.guarded(path + "/kind", [&] { m.kind = mechanism_from_string(kind); });
    if (j.contains("reserve")) {
        double x = 0;
        r.number(j, path, "reserve", x);
        m.reserve = x;
    }
    if (j.contains("intervention_p")) {
        double x = 0;
        r.number(j, path, "intervention_p", x, [](double p) { return p > 0.0 && p <= 1.0; }, "must lie in (0, 1]");
        m.intervention_p = x;
    }
    if (j.contains("atom")) {
        const json& a = j.at("atom");
        DiscreteAtom atom;
        if (r.object_at(a, path + "/atom")) {
            r.known_keys(a, path + "/atom", {"k", "p"});
            r.number(a, path + "/atom", "k", atom.k, positive, "must be positive");
            r.number(a, path + "/atom", "p", atom.p, [](double p) { return p >= 0.0 && p <= 1.0; }, "must lie in [0, 1]");
        }
        m.atom = atom;
    }
    r.number(j, path, "spread_fraction", m.spread_fraction, unit_open, "must lie in (0, 1)");
}

void read_solver(Reader& r, const json& j, SolverConfig& s) {
    const std::string path = "/solver";
    if (!r.object_at(j, path)) return;
    r.known_keys(j, path, {"method", "ode", "picard"});
    r.string(j, path, "method", s.method);
    if (s.method != "ode" && s.method != "picard") r.fail(path + "/method", "must be \"ode\" or \"picard\"");
    auto at_least = [](long long lo) { return [lo](long long x) { return x >= lo; }; };
    if (j.contains("ode")) {
        const json& o = j.at("ode");
        const std::string p = path + "/ode";
        if (r.object_at(o, p)) {
            r.known_keys(o, p, {"v0_fraction", "grid_size", "rk_tolerance", "max_refine_rounds", "min_interval"});
            r.number(o, p, "v0_fraction", s.ode.v0_fraction, unit_open, "must lie in (0, 1)");
            r.integer(o, p, "grid_size", s.ode.grid_size, at_least(3), "must be at least 3");
            r.number(o, p, "rk_tolerance", s.ode.rk_tolerance, unit_open, "must lie in (0, 1)");
            r.integer(o, p, "max_refine_rounds", s.ode.max_refine_rounds, at_least(0), "must be nonnegative");
            r.number(o, p, "min_interval", s.ode.min_interval, unit_open, "must lie in (0, 1)");
        }
    }
    if (j.contains("picard")) {
        const json& o = j.at("picard");
        const std::string p = path + "/picard";
        if (r.object_at(o, p)) {
            r.known_keys(o, p, {"grid_size", "max_iter", "tol", "damping"});
            r.integer(o, p, "grid_size", s.picard.grid_size, at_least(3), "must be at least 3");
            r.integer(o, p, "max_iter", s.picard.max_iter, at_least(1), "must be at least 1");
            r.number(o, p, "tol", s.picard.tol, positive, "must be positive");
            r.number(o, p, "damping", s.picard.damping, [](double a) { return a > 0.0 && a <= 1.0; },
                     "must lie in (0, 1]");
        }
    }
}

void read_verify(Reader& r, const json& j, VerifyConfig& v) {
    const std::string path = "/verify";
    if (!r.object_at(j, path)) return;
    r.known_keys(j, path, {"v_points", "dev_points", "raw_bid_points", "regret_tol", "cross_check"});
    auto at_least = [](long long lo) { return [lo](long long x) { return x >= lo; }; };
    r.integer(j, path, "v_points", v.v_points, at_least(2), "must be at least 2");
    r.integer(j, path, "dev_points", v.dev_points, at_least(2), "must be at least 2");
    r.integer(j, path, "raw_bid_points", v.raw_bid_points, at_least(0), "must be nonnegative");
    r.number(j, path, "regret_tol", v.regret_tol, positive, "must be positive");
    r.boolean(j, path, "cross_check", v.cross_check);
}

void read_monte_carlo(Reader& r, const json& j, MonteCarloConfig& mc) {
    const std::string path = "/monte_carlo";
    if (!r.object_at(j, path)) return;
    r.known_keys(j, path, {"n", "seed"});
    r.integer(j, path, "n", mc.n, [](long long n) { return n >= 2 && n <= 1000000000LL; }, "must lie in [2, 1e9]");
    r.integer(j, path, "seed", mc.seed);
}

void read_experiment(Reader& r, const json& j, ExperimentSection& e) {
    const std::string path = "/experiment";
    if (!r.object_at(j, path)) return;
    r.known_keys(j, path, {"prop", "rule", "intervention_p"});
    std::string prop = to_string(e.prop);
    r.string(j, path, "prop", prop);
    r.guarded(path + "/prop", [&] { e.prop = prop_from_string(prop); });
    if (j.contains("rule")) r.guarded(path + "/rule", [&] { e.rule = ReserveRule::from_json(j.at("rule")); });
    r.number(j, path, "intervention_p", e.intervention_p, unit_open, "must lie in (0, 1)");
}

// Cross-field rules, checked once every field parsed.
void semantic_checks(Reader& r, const ExperimentConfig& c) {
    const double vmax = c.F.hi();
    const auto& m = c.mechanism;
    if (m.reserve.has_value() != (m.kind == Mechanism::SA_RESERVE))
        r.fail("/mechanism/reserve", "a reserve is given exactly when kind is SA_RESERVE");
    if (m.reserve && !(*m.reserve >= vmax)) {
        char buf[200];
        std::snprintf(buf, sizeof buf,
                      "reserve r = %g is below v_max = %g; the reserve closed forms need the strong bidder alone "
                      "to face a reserve r >= v_max",
                      *m.reserve, vmax);
        r.fail("/mechanism/reserve", buf);
    }
    if (m.intervention_p.has_value() != (m.kind == Mechanism::TA_INTERVENTION))
        r.fail("/mechanism/intervention_p", "intervention_p is given exactly when kind is TA_INTERVENTION");
    if (m.atom.has_value() != (m.kind == Mechanism::TA_DISCRETE))
        r.fail("/mechanism/atom", "atom is given exactly when kind is TA_DISCRETE");
    if (m.atom) {
        if (!(m.atom->k > vmax)) r.fail("/mechanism/atom/k", "k must exceed v_max");
        if (!(m.atom->p * m.atom->k > vmax)) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "p k = %g <= v_max = %g: the pooling equilibrium is not guaranteed",
                          m.atom->p * m.atom->k, vmax);
            r.fail("/mechanism/atom", buf);
        }
    }
    if (c.family && !(c.family->k > vmax)) r.fail("/family/k", "k must exceed v_max");
    if (c.experiment.rule) {
        const auto& rule = *c.experiment.rule;
        if (rule.kind == ReserveKind::approximating && !(rule.epsilon > 0.0))
            r.fail("/experiment/rule/epsilon", "must be positive");
        if ((rule.kind == ReserveKind::constant_limit || rule.kind == ReserveKind::overshoot) && !(rule.r_bar >= vmax))
            r.fail("/experiment/rule/r_bar", "must be at least v_max");
    }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    Reader r;
    ExperimentConfig c;
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object", {"/: expected an object"});
    r.known_keys(j, "", {"version", "N", "F", "G", "family", "mechanism", "solver", "verify", "monte_carlo", "experiment",
                         "output"});
    r.string(j, "", "version", c.version);
    if (c.version != kConfigVersion) r.fail("/version", std::string("unsupported version, expected \"") + kConfigVersion + "\"");
    r.integer(j, "", "N", c.N, [](long long n) { return n >= 2 && n <= 1000; }, "must lie in [2, 1000]");
    const std::size_t before_f = r.errors.size();
    if (j.contains("F")) r.guarded("/F", [&] { c.F = Distribution::from_json(j.at("F")); });
    const bool f_ok = r.errors.size() == before_f;
    c.G.reset();
    if (j.contains("G")) r.guarded("/G", [&] { c.G = Distribution::from_json(j.at("G")); });
    if (j.contains("family")) r.guarded("/family", [&] { c.family = FamilySpec::from_json(j.at("family")); });
    if (j.contains("mechanism")) read_mechanism(r, j.at("mechanism"), c.mechanism);
    if (j.contains("solver")) read_solver(r, j.at("solver"), c.solver);
    if (j.contains("verify")) read_verify(r, j.at("verify"), c.verify);
    if (j.contains("monte_carlo")) read_monte_carlo(r, j.at("monte_carlo"), c.monte_carlo);
    if (j.contains("experiment")) read_experiment(r, j.at("experiment"), c.experiment);
    if (j.contains("output")) {
        const json& o = j.at("output");
        if (r.object_at(o, "/output")) {
            r.known_keys(o, "/output", {"dir"});
            r.string(o, "/output", "dir", c.output_dir);
        }
    }
    if (f_ok) semantic_checks(r, c);
    if (!r.errors.empty()) {
        std::string msg = "invalid configuration (" + std::to_string(r.errors.size()) + " problem" +
                          (r.errors.size() == 1 ? "" : "s") + ")";
        for (const auto& e : r.errors) msg += "\n  " + e;
        throw ConfigError(msg, r.errors);
    }
    return c;
}

nlohmann::json read_config_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON", {std::string("/: ") + e.what()});
    }
}

ExperimentConfig parse_config(const std::string& path) { return config_from_json(read_config_json(path)); }

}  // namespace tourney
