#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "tourney/dist.hpp"
#include "tourney/mechanisms.hpp"

namespace tourney {

/// psi(x) = x - (1 - D(x)) / d(x); psi(hi) = hi.
double virtual_value(const Distribution& d, double x);

struct RegularityViolation {
    double x = 0.0;       // left grid point
    double drop = 0.0;    // psi(x) - psi(x_next) > 0
};

struct RegularityReport {
    bool regular = true;
    std::vector<RegularityViolation> violations;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// psi on grid_size interior points must be nondecreasing within 1e-9.
RegularityReport regularity_check(const Distribution& d, int grid_size = 1000);

/// Ironed virtual value. The revenue curve R(q) = q D^{-1}(1 - q) is tabulated
/// on a uniform quantile grid and replaced by its least concave majorant.
/// Cells under a hull chord that lifts off the curve take the chord slope;
/// the remaining cells return psi itself, clamped between the neighbouring
/// chord slopes so the result stays monotone.
class VirtualValueFn {
public:
    VirtualValueFn(const Distribution& d, int quantile_grid_size);

    /// psi-bar at value x.
    double operator()(double x) const;
    /// psi-bar at sale probability q = 1 - D(x).
    double at_quantile(double q) const;
    double raw(double x) const { return virtual_value(dist_, x); }

    [[nodiscard]] bool ironed() const noexcept { return ironed_; }
    [[nodiscard]] const Distribution& source() const noexcept { return dist_; }
    [[nodiscard]] const std::vector<double>& quantile_grid() const noexcept { return q_; }
    /// Hull slope per quantile cell, nonincreasing in q.
    [[nodiscard]] const std::vector<double>& ironed_values() const noexcept { return slope_; }
    /// True for cells inside an ironed interval.
    [[nodiscard]] const std::vector<bool>& ironed_cells() const noexcept { return flat_; }

private:
    Distribution dist_;
    std::vector<double> q_;
    std::vector<double> slope_;
    std::vector<bool> flat_;
    std::vector<double> lower_, upper_;
    bool ironed_ = false;

    int cell_of(double q) const;
    double exact_in_cell(int i, double x) const;
};

VirtualValueFn ironed_virtual(const Distribution& d, int quantile_grid_size = 10000);

struct ReserveChoice {
    double r_star = 0.0;
    double revenue = 0.0;
};

/// Maximises r (1 - D(r)) by a grid scan refined with Brent's method.
ReserveChoice single_buyer_reserve(const Distribution& d);

/// Monte Carlo E[max(0, psi-bar_F(v_1..v_N), psi-bar_G(w))]. N may be 0 and G
/// absent, but not both. Replicate j reads uniforms j c .. j c + c - 1 with
/// c = N + 1; values enter only through their quantiles.
Estimate oa_revenue(const Distribution& F, const std::optional<Distribution>& G, int N, std::int64_t n,
                    std::uint64_t seed, int threads = 1, int quantile_grid_size = 10000);

}  // namespace tourney
