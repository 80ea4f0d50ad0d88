#include "tourney/myerson.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>

#include "tourney/error.hpp"
#include "tourney/rng.hpp"

namespace tourney {

double virtual_value(const Distribution& d, double x) {
    if (x == d.hi()) return x;
    if (!(x > d.lo() && x < d.hi())) throw DomainError("virtual value needs x inside the support");
    double dens = d.pdf(x);
    if (!(dens > 0.0)) throw DomainError("virtual value is undefined where the density vanishes");
    return x - (1.0 - d.cdf(x)) / dens;
}

nlohmann::json RegularityReport::to_json() const {
    nlohmann::json v = nlohmann::json::array();
    for (const auto& e : violations) v.push_back({{"x", e.x}, {"drop", e.drop}});
    return {{"regular", regular}, {"violations", v}};
}

RegularityReport regularity_check(const Distribution& d, int grid_size) {
    if (grid_size < 2) throw DomainError("regularity check needs at least two grid points");
    const double lo = d.lo(), hi = d.hi();
    std::vector<double> xs(grid_size), psi(grid_size);
    for (int i = 0; i < grid_size; ++i) {
        xs[i] = lo + (hi - lo) * (i + 1) / (grid_size + 1);
        double dens = d.pdf(xs[i]);
        psi[i] = dens > 0.0 ? xs[i] - (1.0 - d.cdf(xs[i])) / dens : -std::numeric_limits<double>::infinity();
    }
    RegularityReport rep;
    for (int i = 0; i + 1 < grid_size; ++i) {
        double drop = psi[i] - psi[i + 1];
        bool bad = std::isinf(psi[i + 1]) || (std::isfinite(psi[i]) && drop > 1e-9 * std::max(1.0, std::abs(psi[i])));
        if (bad) {
            rep.regular = false;
            rep.violations.push_back({xs[i], drop});
        }
    }
    return rep;
}

VirtualValueFn::VirtualValueFn(const Distribution& d, int m) : dist_(d) {
    if (m < 2) throw DomainError("ironing needs a quantile grid of at least two cells");
    q_.resize(m + 1);
    std::vector<double> rev(m + 1);
    for (int i = 0; i <= m; ++i) {
        q_[i] = static_cast<double>(i) / m;
        rev[i] = i == 0 ? 0.0 : q_[i] * d.quantile(static_cast<double>(m - i) / m);
    }

    // Upper hull, Andrew's monotone chain over points already sorted in q.
    std::vector<int> hull;
    for (int i = 0; i <= m; ++i) {
        while (hull.size() >= 2) {
            int a = hull[hull.size() - 2], b = hull.back();
            double cross = (q_[b] - q_[a]) * (rev[i] - rev[a]) - (rev[b] - rev[a]) * (q_[i] - q_[a]);
            if (cross >= 0.0) hull.pop_back();
            else break;
        }
        hull.push_back(i);
    }

    const double scale = std::max(std::abs(d.lo()), std::abs(d.hi()));
    slope_.resize(m);
    flat_.assign(m, false);
    for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
        int a = hull[h], b = hull[h + 1];
        double s = (rev[b] - rev[a]) / (q_[b] - q_[a]);
        bool lifted = false;
        for (int i = a + 1; i < b; ++i) lifted |= rev[a] + s * (q_[i] - q_[a]) - rev[i] > 1e-12 * scale;
        for (int i = a; i < b; ++i) {
            slope_[i] = s;
            flat_[i] = lifted;
        }
        ironed_ |= lifted;
    }
    // bounds that keep exact psi in unironed cells between the neighbouring ironed levels
    upper_.assign(m, std::numeric_limits<double>::infinity());
    lower_.assign(m, -std::numeric_limits<double>::infinity());
    for (int i = 1; i < m; ++i) upper_[i] = flat_[i - 1] ? slope_[i - 1] : upper_[i - 1];
    for (int i = m - 2; i >= 0; --i) lower_[i] = flat_[i + 1] ? slope_[i + 1] : lower_[i + 1];
}

int VirtualValueFn::cell_of(double q) const {
    const int m = static_cast<int>(slope_.size());
    return std::clamp(static_cast<int>(q * m), 0, m - 1);
}

double VirtualValueFn::exact_in_cell(int i, double x) const {
    double v = slope_[i];
    if (x > dist_.lo() && x < dist_.hi()) {
        double dens = dist_.pdf(x);
        if (dens > 0.0) v = x - (1.0 - dist_.cdf(x)) / dens;
    } else if (x >= dist_.hi()) {
        v = dist_.hi();
    }
    return std::clamp(v, lower_[i], upper_[i]);
}

double VirtualValueFn::at_quantile(double q) const {
    int i = cell_of(q);
    if (flat_[i]) return slope_[i];
    return exact_in_cell(i, dist_.quantile(1.0 - q));
}

double VirtualValueFn::operator()(double x) const {
    int i = cell_of(1.0 - dist_.cdf(x));
    if (flat_[i]) return slope_[i];
    return exact_in_cell(i, x);
}

VirtualValueFn ironed_virtual(const Distribution& d, int quantile_grid_size) {
    return VirtualValueFn(d, quantile_grid_size);
}

ReserveChoice single_buyer_reserve(const Distribution& d) {
    const int n = 2000;
    const double lo = d.lo(), hi = d.hi();
    auto rev = [&](double r) { return r * (1.0 - d.cdf(r)); };
    int best = 0;
    double best_rev = rev(lo);
    for (int i = 1; i <= n; ++i) {
        double r = lo + (hi - lo) * i / n;
        double v = rev(r);
        if (v > best_rev) {
            best_rev = v;
            best = i;
        }
    }
    double a = lo + (hi - lo) * std::max(0, best - 1) / n;
    double b = lo + (hi - lo) * std::min(n, best + 1) / n;
    auto res = boost::math::tools::brent_find_minima([&](double r) { return -rev(r); }, a, b, 50);
    ReserveChoice out{lo + (hi - lo) * best / n, best_rev};
    if (-res.second > best_rev) out = {res.first, -res.second};
    return out;
}

Estimate oa_revenue(const Distribution& F, const std::optional<Distribution>& G, int N, std::int64_t n,
                    std::uint64_t seed, int threads, int quantile_grid_size) {
    if (N < 0) throw DomainError("number of weak bidders must be nonnegative");
    if (N == 0 && !G) throw DomainError("optimal auction needs at least one bidder");
    if (n < 1) throw DomainError("simulation needs at least one replicate");
    std::optional<VirtualValueFn> psi_f, psi_g;
    if (N > 0) psi_f.emplace(F, quantile_grid_size);
    if (G) psi_g.emplace(*G, quantile_grid_size);
    const std::uint64_t c = N + 1;

    std::vector<double> rev(n);
    parallel_blocks(n, threads, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t j = lo; j < hi; ++j) {
            const std::uint64_t base = j * c;
            double best = 0.0;
            for (int i = 0; i < N; ++i) best = std::max(best, psi_f->at_quantile(1.0 - uniform_at(seed, base + i)));
            // ties go to the strong bidder; the price is the same either way
            if (psi_g) best = std::max(best, psi_g->at_quantile(1.0 - uniform_at(seed, base + N)));
            rev[j] = best;
        }
    });
    return estimate_of(rev, seed);
}

}  // namespace tourney
