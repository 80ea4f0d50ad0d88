#include "tourney/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

#include "tourney/error.hpp"
#include "tourney/rng.hpp"

namespace tourney {

std::string to_string(Mechanism m) {
    switch (m) {
        case Mechanism::TA: return "TA";
        case Mechanism::SA: return "SA";
        case Mechanism::SA_RESERVE: return "SA_RESERVE";
        case Mechanism::TA_INTERVENTION: return "TA_INTERVENTION";
        case Mechanism::TA_DISCRETE: return "TA_DISCRETE";
    }
    return "unknown";
}

Mechanism mechanism_from_string(const std::string& name) {
    for (auto m : {Mechanism::TA, Mechanism::SA, Mechanism::SA_RESERVE, Mechanism::TA_INTERVENTION,
                   Mechanism::TA_DISCRETE})
        if (to_string(m) == name) return m;
    throw DomainError("unknown mechanism '" + name + "'");
}

void AuctionSpec::validate() const {
    const std::string k = to_string(kind);
    if (N < 2) throw DomainError(k + " needs at least two weak bidders");
    if (reserve.has_value() != (kind == Mechanism::SA_RESERVE))
        throw DomainError("a reserve is given exactly for SA_RESERVE");
    if (intervention_p.has_value() != (kind == Mechanism::TA_INTERVENTION))
        throw DomainError("intervention_p is given exactly for TA_INTERVENTION");
    bool wants_bid = kind == Mechanism::TA || kind == Mechanism::TA_INTERVENTION;
    if (bid_fn.has_value() != wants_bid) throw DomainError("a bid function is given exactly for TA and TA_INTERVENTION");
    if (kind == Mechanism::TA_DISCRETE) {
        if (!atom || strong) throw DomainError("TA_DISCRETE takes a discrete atom instead of a strong distribution");
        if (!(atom->k > F.hi())) throw DomainError("atom k must exceed the weak value bound");
        if (!(atom->p >= 0.0 && atom->p <= 1.0)) throw DomainError("atom probability must lie in [0, 1]");
    } else {
        if (!strong || atom) throw DomainError(k + " needs a strong-bidder distribution");
    }
    if (kind == Mechanism::SA_RESERVE && !(*reserve >= F.hi()))
        throw DomainError("reserve must be at least the weak value bound (the closed forms assume r >= v_max)");
    if (kind == Mechanism::TA_INTERVENTION && !(*intervention_p > 0.0 && *intervention_p <= 1.0))
        throw DomainError("intervention_p must lie in (0, 1]");
}

namespace {

void fill_draw(const AuctionSpec& spec, std::uint64_t seed, std::uint64_t j, Draw& d) {
    const std::uint64_t c = spec.N + 3;
    const std::uint64_t base = j * c;
    d.v.resize(spec.N);
    for (int i = 0; i < spec.N; ++i) d.v[i] = spec.F.sample(seed, base + i);
    if (spec.kind == Mechanism::TA_DISCRETE) {
        double u = uniform_at(seed, base + spec.N);
        d.w = u > 1.0 - spec.atom->p ? spec.atom->k : 0.0;
    } else {
        d.w = spec.strong->sample(seed, base + spec.N);
    }
    d.tie_u = uniform_at(seed, base + spec.N + 1);
    d.intervention_u = uniform_at(seed, base + spec.N + 2);
}

// Index of the largest entry, ties split uniformly by u.
int argmax_with_ties(const std::vector<double>& xs, double u) {
    double best = *std::max_element(xs.begin(), xs.end());
    int count = 0;
    for (double x : xs) count += x == best;
    int pick = std::min(count - 1, static_cast<int>(u * count));
    for (int i = 0; i < int(xs.size()); ++i)
        if (xs[i] == best && pick-- == 0) return i;
    return 0;
}

}  // namespace

Draw make_draw(const AuctionSpec& spec, std::uint64_t seed, std::uint64_t replicate) {
    Draw d;
    fill_draw(spec, seed, replicate, d);
    return d;
}

Outcome run_once(const AuctionSpec& spec, const Draw& draw) {
    if (int(draw.v.size()) != spec.N) throw DomainError("draw has the wrong number of weak values");
    Outcome out;
    switch (spec.kind) {
        case Mechanism::TA:
        case Mechanism::TA_INTERVENTION:
        case Mechanism::TA_DISCRETE: {
            std::vector<double> bids(spec.N);
            for (int i = 0; i < spec.N; ++i) {
                if (spec.kind == Mechanism::TA_DISCRETE) bids[i] = draw.v[i] > 0.0 ? spec.atom->k : 0.0;
                else bids[i] = (*spec.bid_fn)(draw.v[i]);
            }
            int top = argmax_with_ties(bids, draw.tie_u);
            double strong_bid = draw.w;
            if (spec.kind == Mechanism::TA_INTERVENTION && !(draw.intervention_u < *spec.intervention_p))
                strong_bid = 0.0;
            out.top_weak_bid = bids[top];
            out.strong_bid = strong_bid;
            bool strong_wins;
            if (strong_bid != bids[top]) strong_wins = strong_bid > bids[top];
            else strong_wins = spec.kind == Mechanism::TA_DISCRETE || draw.tie_u < 0.5;
            if (strong_wins) {
                out.winner = Outcome::Winner::strong;
                out.surplus = draw.w;
                out.winning_bid = strong_bid;
            } else {
                out.winner = Outcome::Winner::weak;
                out.weak_index = top;
                out.surplus = draw.v[top];
                out.winning_bid = bids[top];
            }
            out.price = std::min(bids[top], strong_bid);
            break;
        }
        case Mechanism::SA: {
            std::vector<double> vals(draw.v);
            vals.push_back(draw.w);
            int top = argmax_with_ties(vals, draw.tie_u);
            double second = 0.0;
            for (int i = 0; i < int(vals.size()); ++i)
                if (i != top) second = std::max(second, vals[i]);
            out.price = second;
            out.surplus = vals[top];
            out.winning_bid = vals[top];
            if (top == spec.N) out.winner = Outcome::Winner::strong;
            else {
                out.winner = Outcome::Winner::weak;
                out.weak_index = top;
            }
            out.strong_bid = draw.w;
            out.top_weak_bid = *std::max_element(draw.v.begin(), draw.v.end());
            break;
        }
        case Mechanism::SA_RESERVE: {
            double r = *spec.reserve;
            out.strong_bid = draw.w;
            int top = argmax_with_ties(draw.v, draw.tie_u);
            out.top_weak_bid = draw.v[top];
            if (draw.w >= r) {
                // r >= v_max, so no weak bid can exceed the reserve the strong bidder cleared
                out.winner = Outcome::Winner::strong;
                out.price = r;
                out.surplus = draw.w;
                out.winning_bid = draw.w;
            } else {
                double second = 0.0;
                for (int i = 0; i < spec.N; ++i)
                    if (i != top) second = std::max(second, draw.v[i]);
                out.winner = Outcome::Winner::weak;
                out.weak_index = top;
                out.price = second;
                out.surplus = draw.v[top];
                out.winning_bid = draw.v[top];
            }
            break;
        }
    }
    return out;
}

nlohmann::json Estimate::to_json() const { return {{"mean", mean}, {"se", se}, {"n", n}, {"seed", seed}}; }

Estimate estimate_of(const std::vector<double>& xs, std::uint64_t seed) {
    Estimate e;
    e.n = static_cast<std::int64_t>(xs.size());
    e.seed = seed;
    if (xs.empty()) return e;
    // Neumaier-compensated sums in index order: the result depends only on the values.
    auto comp_sum = [&](auto term) {
        double s = 0.0, c = 0.0;
        for (double x : xs) {
            double t = term(x);
            double y = s + t;
            c += std::abs(s) >= std::abs(t) ? (s - y) + t : (t - y) + s;
            s = y;
        }
        return s + c;
    };
    double n = double(xs.size());
    e.mean = comp_sum([](double x) { return x; }) / n;
    if (xs.size() > 1) {
        double m = e.mean;
        double ss = comp_sum([m](double x) { return (x - m) * (x - m); });
        e.se = std::sqrt(ss / (n - 1) / n);
    }
    return e;
}

nlohmann::json SimulationResult::to_json() const {
    return {{"revenue", revenue.to_json()},
            {"surplus", surplus.to_json()},
            {"weak_payoff", weak_payoff.to_json()},
            {"strong_payoff", strong_payoff.to_json()}};
}

void parallel_blocks(std::int64_t n, int threads, const std::function<void(std::int64_t, std::int64_t)>& body) {
    threads = std::max(1, threads);
    if (threads == 1 || n < 2 * threads) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::int64_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        std::int64_t lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

SimulationResult simulate(const AuctionSpec& spec, std::int64_t n, std::uint64_t seed, const SimulateOptions& opts) {
    spec.validate();
    if (n < 1) throw DomainError("simulation needs at least one replicate");
    std::vector<double> rev(n), sur(n), weak(n), strong(n);
    std::vector<Outcome> kept;
    std::vector<Draw> kept_draws;
    bool keep = opts.keep_draws && n <= 10000;
    if (keep) {
        kept.resize(n);
        kept_draws.resize(n);
    }
    parallel_blocks(n, opts.threads, [&](std::int64_t lo, std::int64_t hi) {
        Draw d;
        for (std::int64_t j = lo; j < hi; ++j) {
            fill_draw(spec, seed, j, d);
            Outcome o = run_once(spec, d);
            rev[j] = o.price;
            sur[j] = o.surplus;
            weak[j] = o.winner == Outcome::Winner::weak ? o.surplus - o.price : 0.0;
            strong[j] = o.winner == Outcome::Winner::strong ? o.surplus - o.price : 0.0;
            if (keep) {
                kept[j] = o;
                kept_draws[j] = d;
            }
        }
    });
    SimulationResult res;
    res.revenue = estimate_of(rev, seed);
    res.surplus = estimate_of(sur, seed);
    res.weak_payoff = estimate_of(weak, seed);
    res.strong_payoff = estimate_of(strong, seed);
    if (keep) {
        std::string csv = "replicate";
        for (int i = 1; i <= spec.N; ++i) csv += ",v" + std::to_string(i);
        csv += ",w,winner,price,surplus\n";
        char buf[64];
        for (std::int64_t j = 0; j < n; ++j) {
            csv += std::to_string(j);
            for (double x : kept_draws[j].v) {
                std::snprintf(buf, sizeof buf, ",%.17g", x);
                csv += buf;
            }
            std::snprintf(buf, sizeof buf, ",%.17g,", kept_draws[j].w);
            csv += buf;
            const auto& o = kept[j];
            csv += o.winner == Outcome::Winner::strong ? "strong"
                                                       : "weak" + std::to_string(o.weak_index + 1);
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", o.price, o.surplus);
            csv += buf;
        }
        res.draws_csv = std::move(csv);
    }
    return res;
}

ReserveValues sa_reserve_closed_form(const Distribution& F, const Distribution& G, int N, double r) {
    if (N < 2) throw DomainError("need at least two weak bidders");
    if (!(r >= F.hi())) throw DomainError("closed form needs a reserve at or above the weak value bound");
    double Gr = G.cdf(r);
    double first = F.order_stat_mean(N, 1);
    double second = F.order_stat_mean(N, 2);
    ReserveValues out;
    out.revenue = Gr * second + (1.0 - Gr) * r;
    out.surplus = Gr * first + (Gr < 1.0 ? (1.0 - Gr) * G.cond_mean_above(r) : 0.0);
    return out;
}

Distribution intervention_bid_law(const Distribution& G, double p, double spread) {
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("intervention_p must lie in (0, 1]");
    if (p == 1.0) return G;
    if (!(spread > 0.0 && spread < G.hi())) throw DomainError("intervention spread must lie inside the support");
    return Distribution::mixture({1.0 - p, p}, {Distribution::raised_cosine(G.lo(), spread, G.lo(), G.lo() + spread), G},
                                 G.lo(), G.hi());
}

}  // namespace tourney
