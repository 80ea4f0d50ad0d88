#pragma once

#include <functional>
#include <vector>

namespace tourney {

struct QuadratureOptions {
    double rel_tol = 1e-8;
    unsigned max_depth = 20;
};

/// Adaptive Gauss-Kronrod (15-point) on [a, b]. Each interior knot starts a new
/// panel so kinks in the integrand never sit inside a Kronrod panel.
double integrate(const std::function<double(double)>& fn, double a, double b,
                 const std::vector<double>& knots = {}, const QuadratureOptions& opts = {});

}  // namespace tourney
