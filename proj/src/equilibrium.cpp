#include "tourney/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tourney/error.hpp"

namespace tourney {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

std::string num(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

// H(b, v) without the band test; NaN when any factor is undefined.
double rhs_raw(double b, double v, const Instance& inst) {
    const auto& F = inst.F;
    const auto& G = inst.G;
    if (!(v > 0.0) || v > F.hi() || !(b > v) || b > G.hi()) return nan;
    double Gb = G.cdf(b);
    double gb = G.pdf(b);
    if (!(Gb > 0.0) || !(gb > 0.0)) return nan;
    double gap = v - G.partial_mean(b) / Gb;
    if (!(gap > 0.0)) return nan;
    return (inst.N - 1) / (b - v) * F.pdf(v) / F.cdf(v) * Gb / gb * gap;
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

class Integrator {
public:
    Integrator(const Instance& inst, double rtol, double atol, double h_floor)
        : inst_(inst), rtol_(rtol), atol_(atol), h_floor_(h_floor) {}

    // Advances (v, b) to v_target. h carries the step size between calls.
    void advance(double& v, double& b, double v_target, double& h) {
        while (v < v_target) {
            bool last = false;
            if (v + h >= v_target) {
                h = v_target - v;
                last = true;
            }
            double hs = h;
            double k1 = rhs_raw(b, v, inst_);
            double k2 = rhs_raw(b + hs * a21 * k1, v + c2 * hs, inst_);
            double k3 = rhs_raw(b + hs * (a31 * k1 + a32 * k2), v + c3 * hs, inst_);
            double k4 = rhs_raw(b + hs * (a41 * k1 + a42 * k2 + a43 * k3), v + c4 * hs, inst_);
            double k5 = rhs_raw(b + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), v + c5 * hs, inst_);
            double k6 = rhs_raw(b + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), v + hs, inst_);
            double bn = b + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            double vn = last ? v_target : v + hs;
            double k7 = rhs_raw(bn, vn, inst_);
            double err_abs = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            double err = std::abs(err_abs) / (atol_ + rtol_ * std::max(std::abs(b), std::abs(bn)));
            if (!std::isfinite(err) || !std::isfinite(bn)) {
                ++rejected;
                h = 0.5 * hs;
                if (h < h_floor_)
                    throw BandEscape("equilibrium ODE left the bid band near v = " + num(v), v);
                continue;
            }
            if (err > 1.0) {
                ++rejected;
                h = hs * std::max(0.1, 0.9 * std::pow(err, -0.2));
                if (h < h_floor_)
                    throw BandEscape("equilibrium ODE step size collapsed near v = " + num(v), v);
                continue;
            }
            v = vn;
            b = bn;
            double grow = err > 0.0 ? std::min(5.0, 0.9 * std::pow(err, -0.2)) : 5.0;
            if (!last) h = hs * grow;
            else h = std::max(h, hs);  // keep the pre-truncation step for the next segment
        }
    }

    int rejected = 0;

private:
    const Instance& inst_;
    double rtol_, atol_, h_floor_;
};

void check_instance(const Instance& inst) {
    if (inst.N < 2) throw PreconditionError("at least two weak bidders are required");
    if (inst.F.lo() != 0.0 || inst.G.lo() != 0.0)
        throw PreconditionError("weak and strong value supports must start at 0");
    if (!(inst.F.min_interior_pdf() > 0.0))
        throw PreconditionError("weak-bidder density vanishes inside its support");
    if (!(inst.G.min_interior_pdf() > 0.0))
        throw PreconditionError("strong-bidder density vanishes inside its support");
}

void strength_warning(const Instance& inst, std::vector<std::string>& warnings) {
    if (inst.G.mean() < inst.F.hi())
        warnings.push_back("strong bidder mean " + num(inst.G.mean()) + " is below the weak value bound " +
                           num(inst.F.hi()) + "; equilibrium guarantees do not apply");
}

}  // namespace

bool in_band(double b, double v, const Instance& inst) {
    if (!(v > 0.0) || !(b > v) || b > inst.G.hi()) return false;
    return inst.G.phi(b) < v;
}

double ode_rhs(double b, double v, const Instance& inst) {
    if (!(v > 0.0) || v > inst.F.hi())
        throw DomainError("ode_rhs needs v in (0, v_max], got " + num(v));
    if (!in_band(b, v, inst))
        throw DomainError("ode_rhs: bid " + num(b) + " is outside the band at v = " + num(v));
    double h = rhs_raw(b, v, inst);
    if (!std::isfinite(h)) throw DomainError("ode_rhs undefined at b = " + num(b) + ", v = " + num(v));
    return h;
}

double k_fn(double beta, double v, const Instance& inst) { return ode_rhs(beta * v, v, inst); }

double k_fn_at_zero(double beta, int N) { return (N - 1) * beta / (beta - 1.0) * (1.0 - 0.5 * beta); }

nlohmann::json SolveReport::to_json() const {
    return {{"method", method},
            {"max_ode_residual", max_ode_residual},
            {"picard_iterations", picard_iterations},
            {"sup_norm_delta", sup_norm_delta},
            {"warnings", warnings},
            {"v0", v0},
            {"rejected_steps", rejected_steps},
            {"clamp_active", clamp_active},
            {"nodes", nodes}};
}

Solution solve_ode(const Instance& inst, const OdeOptions& opts) {
    check_instance(inst);
    if (opts.grid_size < 3) throw DomainError("grid_size must be at least 3");
    if (!(opts.v0_fraction > 0.0 && opts.v0_fraction < 0.1)) throw DomainError("v0_fraction must lie in (0, 0.1)");
    if (!(opts.rk_tolerance > 0.0)) throw DomainError("rk_tolerance must be positive");

    SolveReport rep;
    rep.method = "ode";
    strength_warning(inst, rep.warnings);

    const double vmax = inst.v_max();
    const double beta0 = inst.initial_ratio();

    // Seed on the linear ray. Shrink v0 until the ray sits inside the band and
    // the ODE already agrees with the ray's slope to a few percent.
    double v0 = opts.v0_fraction * vmax;
    bool seeded = false;
    for (int attempt = 0; attempt < 8; ++attempt, v0 *= 0.1) {
        double h = rhs_raw(beta0 * v0, v0, inst);
        if (std::isfinite(h) && in_band(beta0 * v0, v0, inst) && std::abs(h / beta0 - 1.0) <= 0.05) {
            seeded = true;
            break;
        }
    }
    if (!seeded)
        throw SingularStartFailure("the linear start b = " + num(beta0) +
                                   " v never entered the band with a consistent slope");
    rep.v0 = v0;

    std::vector<double> grid{0.0, v0};
    double first = vmax / (opts.grid_size - 1);
    for (double x = 2 * v0; x < first * (1 - 1e-9); x *= 2) grid.push_back(x);
    for (int i = 1; i < opts.grid_size; ++i) {
        double x = vmax * i / (opts.grid_size - 1);
        if (x > v0 * (1 + 1e-9)) grid.push_back(x);
    }
    grid.back() = vmax;

    // Node values must be consistent to well below rk_tolerance times the
    // narrowest interval the residual check may create.
    const double rtol = std::min(1e-12, 1e-7 * opts.rk_tolerance);
    Integrator ode(inst, rtol, 1e-15 * vmax, 1e-15 * vmax);
    std::vector<double> values(grid.size());
    values[0] = 0.0;
    values[1] = beta0 * v0;
    {
        double v = v0, b = values[1], h = 0.1 * v0;
        for (std::size_t i = 2; i < grid.size(); ++i) {
            ode.advance(v, b, grid[i], h);
            values[i] = b;
        }
    }

    auto slopes_of = [&](const std::vector<double>& g, const std::vector<double>& vals) {
        std::vector<double> s(g.size());
        s[0] = beta0;
        for (std::size_t i = 1; i < g.size(); ++i) s[i] = rhs_raw(vals[i], g[i], inst);
        return s;
    };

    BidFunction bid(grid, values, slopes_of(grid, values));
    for (int round = 0;; ++round) {
        std::vector<std::size_t> bad;
        double worst = 0.0;
        std::size_t unresolved = 0;
        for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
            double m = 0.5 * (grid[i] + grid[i + 1]);
            double bm = bid(m);
            double H = rhs_raw(bm, m, inst);
            double res = std::isfinite(H) ? std::abs(bid.derivative(m) - H) / (1.0 + std::abs(H))
                                          : std::numeric_limits<double>::infinity();
            worst = std::max(worst, res);
            if (res <= opts.rk_tolerance) continue;
            // Below this width node values are no longer consistent enough for a
            // finite-difference style check to mean anything.
            if (grid[i + 1] - grid[i] < opts.min_interval * vmax) ++unresolved;
            else bad.push_back(i);
        }
        rep.max_ode_residual = worst;
        if (bad.empty() || round == opts.max_refine_rounds) {
            if (worst > opts.rk_tolerance)
                rep.warnings.push_back("ODE residual " + num(worst) + " above tolerance on " +
                                       std::to_string(unresolved + bad.size()) + " narrow intervals");
            break;
        }
        std::vector<double> g2, v2;
        g2.reserve(grid.size() + bad.size());
        v2.reserve(grid.size() + bad.size());
        std::size_t next_bad = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            g2.push_back(grid[i]);
            v2.push_back(values[i]);
            if (next_bad < bad.size() && bad[next_bad] == i) {
                ++next_bad;
                double v = grid[i], b = values[i];
                double m = 0.5 * (grid[i] + grid[i + 1]);
                double h = 0.5 * (m - v);
                ode.advance(v, b, m, h);
                g2.push_back(m);
                v2.push_back(b);
            }
        }
        grid = std::move(g2);
        values = std::move(v2);
        bid = BidFunction(grid, values, slopes_of(grid, values));
    }
    rep.rejected_steps = ode.rejected;
    rep.nodes = grid.size();
    return {std::move(bid), std::move(rep)};
}

Solution solve_picard(const Instance& inst, const PicardOptions& opts) {
    check_instance(inst);
    if (opts.grid_size < 3) throw DomainError("grid_size must be at least 3");
    if (!(opts.damping > 0.0 && opts.damping <= 1.0)) throw DomainError("damping must lie in (0, 1]");

    SolveReport rep;
    rep.method = "picard";
    strength_warning(inst, rep.warnings);

    const int M = opts.grid_size;
    const double vmax = inst.v_max();
    const double beta0 = inst.initial_ratio();
    const double margin = 1e-6;

    std::vector<double> v(M), lower(M, 1.0 + margin), upper(M);
    for (int i = 0; i < M; ++i) v[i] = vmax * i / (M - 1);
    upper[0] = 2.0 - margin;
    for (int i = 1; i < M; ++i) {
        double top = v[i] < inst.G.mean() ? inst.G.phi_inverse(v[i]) : inst.G.hi();
        upper[i] = std::min(top, inst.G.hi()) / v[i] - margin;
        if (!(upper[i] > lower[i]))
            throw PreconditionError("bid band is empty at v = " + num(v[i]));
    }

    std::vector<double> gamma(M, beta0), K(M), T(M);
    auto apply = [&](const std::vector<double>& g, int& clamps) {
        K[0] = k_fn_at_zero(g[0], inst.N);
        for (int i = 1; i < M; ++i) K[i] = rhs_raw(g[i] * v[i], v[i], inst);
        double acc = 0.0;
        T[0] = K[0];
        for (int i = 1; i < M; ++i) {
            acc += 0.5 * (K[i - 1] + K[i]) * (v[i] - v[i - 1]);
            T[i] = acc / v[i];
        }
        clamps = 0;
        for (int i = 0; i < M; ++i) {
            if (T[i] < lower[i] || !std::isfinite(T[i])) {
                T[i] = std::isfinite(T[i]) ? lower[i] : upper[i];
                ++clamps;
            } else if (T[i] > upper[i]) {
                T[i] = upper[i];
                ++clamps;
            }
        }
    };

    for (int i = 0; i < M; ++i) gamma[i] = std::clamp(beta0, lower[i], upper[i]);
    double alpha = opts.damping;
    double prev = std::numeric_limits<double>::infinity();
    int clamps = 0;
    int it = 0;
    for (;; ++it) {
        apply(gamma, clamps);
        double delta = 0.0;
        for (int i = 0; i < M; ++i) delta = std::max(delta, std::abs(T[i] - gamma[i]));
        rep.sup_norm_delta = delta;
        if (delta <= opts.tol) break;
        if (it >= opts.max_iter)
            throw NoConvergence("fixed-point iteration stalled at sup-norm step " + num(delta), delta);
        if (delta > prev) alpha = std::max(alpha * 0.5, 1.0 / 64);
        prev = delta;
        for (int i = 0; i < M; ++i) gamma[i] = (1 - alpha) * gamma[i] + alpha * T[i];
    }
    rep.picard_iterations = it;
    rep.clamp_active = clamps;
    if (clamps > 0) rep.warnings.push_back("band clamp active at " + std::to_string(clamps) + " nodes");

    std::vector<double> b(M), s(M);
    for (int i = 0; i < M; ++i) {
        b[i] = gamma[i] * v[i];
        s[i] = K[i];
    }
    // residual of the ODE at the nodes, using the clamped iterate
    double worst = 0.0;
    for (int i = 1; i < M; ++i) {
        double H = rhs_raw(b[i], v[i], inst);
        if (std::isfinite(H)) worst = std::max(worst, std::abs(s[i] - H) / (1.0 + std::abs(H)));
    }
    rep.max_ode_residual = worst;
    rep.nodes = M;
    return {BidFunction(v, b, s), std::move(rep)};
}

double sup_distance(const BidFunction& a, const BidFunction& b) {
    double d = 0.0;
    for (double x : a.grid()) d = std::max(d, std::abs(a(x) - b(x)));
    for (double x : b.grid()) d = std::max(d, std::abs(a(x) - b(x)));
    return d;
}

double payoff_raw_bid(double v_true, double x, const Instance& inst) {
    if (!(x > 0.0)) return 0.0;
    return v_true * inst.G.cdf(x) - inst.G.partial_mean(x);
}

double payoff(double v_true, double v_report, const BidFunction& b, const Instance& inst) {
    if (!(v_report > 0.0)) return 0.0;
    double win_first = std::pow(inst.F.cdf(v_report), inst.N - 1);
    return win_first * payoff_raw_bid(v_true, b(v_report), inst);
}

nlohmann::json BestResponseReport::to_json() const {
    return {{"max_regret", max_regret},
            {"worst_pair", {worst_v, worst_report}},
            {"worst_is_raw_bid", worst_is_raw_bid},
            {"payoff_grid", {v_points, dev_points + raw_bid_points}},
            {"max_argmax_offset_steps", max_argmax_offset_steps}};
}

BestResponseReport verify_best_response(const BidFunction& b, const Instance& inst, int v_points, int dev_points,
                                        int raw_bid_points) {
    if (v_points < 1 || dev_points < 2 || raw_bid_points < 0) throw DomainError("verification grids too small");
    const double vmax = inst.v_max();
    BestResponseReport rep;
    rep.v_points = v_points;
    rep.dev_points = dev_points;

    // payoff is affine in the true value: pi(r | v) = slope(r) v - shift(r)
    struct Option {
        double report, slope, shift;
        bool raw;
    };
    std::vector<Option> options;
    const double step = vmax / (dev_points - 1);
    for (int j = 0; j < dev_points; ++j) {
        double r = step * j;
        double w1 = j == 0 ? 0.0 : std::pow(inst.F.cdf(r), inst.N - 1);
        double x = b(r);
        options.push_back({r, w1 * inst.G.cdf(x), w1 * inst.G.partial_mean(x), false});
    }
    double top = b(vmax);
    if (top < inst.G.hi()) {
        for (int m = 1; m <= raw_bid_points; ++m) {
            double x = top + (inst.G.hi() - top) * m / raw_bid_points;
            options.push_back({x, inst.G.cdf(x), inst.G.partial_mean(x), true});
            ++rep.raw_bid_points;
        }
    }

    for (int i = 1; i <= v_points; ++i) {
        double v = vmax * i / v_points;
        double own = payoff(v, v, b, inst);
        double best = -std::numeric_limits<double>::infinity();
        double best_report = 0.0;
        for (const auto& o : options) {
            double val = o.slope * v - o.shift;
            if (val - own > rep.max_regret) {
                rep.max_regret = val - own;
                rep.worst_v = v;
                rep.worst_report = o.report;
                rep.worst_is_raw_bid = o.raw;
            }
            if (!o.raw && val > best) {
                best = val;
                best_report = o.report;
            }
        }
        rep.max_argmax_offset_steps = std::max(rep.max_argmax_offset_steps, std::abs(best_report - v) / step);
    }
    return rep;
}

DiscreteEquilibrium discrete_equilibrium(double p, double k, const Distribution& F, int N) {
    if (N < 1) throw DomainError("need at least one weak bidder");
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("atom probability must lie in (0, 1]");
    if (!(p * k > F.hi()))
        throw PreconditionError("p k = " + num(p * k) + " <= v_max = " + num(F.hi()) +
                                ": the pooling equilibrium is not guaranteed");
    return {[k](double v) { return v > 0.0 ? k : 0.0; }, p * k};
}

}  // namespace tourney
