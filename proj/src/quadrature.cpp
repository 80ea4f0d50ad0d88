#include "tourney/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace tourney {

double integrate(const std::function<double(double)>& fn, double a, double b,
                 const std::vector<double>& knots, const QuadratureOptions& opts) {
    if (!(b > a)) return 0.0;
    std::vector<double> cuts{a};
    for (double k : knots)
        if (k > a && k < b) cuts.push_back(k);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double lo = cuts[i], hi = cuts[i + 1];
        // Knots that differ by rounding leave slivers whose relative error GK can never meet.
        if (hi - lo <= 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)})) {
            total += (hi - lo) * fn(0.5 * (lo + hi));
            continue;
        }
        total += GK::integrate(fn, lo, hi, opts.max_depth, opts.rel_tol);
    }
    return total;
}

}  // namespace tourney
