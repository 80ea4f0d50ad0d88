#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace tourney {

struct Support {
    double lo = 0.0;
    double hi = 1.0;
};

enum class DistKind { uniform, beta_poly, raised_cosine, piecewise_linear, mixture };

std::string to_string(DistKind kind);
DistKind dist_kind_from_string(const std::string& name);

/// Absolutely continuous law on a bounded interval. Immutable after construction;
/// every query is a pure function of the stored parameters.
///
/// Kinds and their params:
///   uniform                 []                      density 1/(hi-lo)
///   beta-like-polynomial    [a, b]  integers >= 0   density proportional to t^a (1-t)^b, t = (x-lo)/(hi-lo)
///   raised-cosine-bump      [center, half_width]    (1 + cos(pi (x-c)/h)) / 2h, cut to the support and renormalised
///   piecewise-linear-density [x0, y0, x1, y1, ...]  linear between knots, x0 = lo, last x = hi, renormalised
///   mixture                 [w0, w1, ...]           weighted components, each inside the mixture support
class Distribution {
public:
    static Distribution uniform(double lo, double hi);
    static Distribution beta_poly(int a, int b, double lo, double hi);
    static Distribution raised_cosine(double center, double half_width, double lo, double hi);
    static Distribution piecewise_linear(std::vector<double> xs, std::vector<double> ys);
    static Distribution mixture(std::vector<double> weights, std::vector<Distribution> components,
                                double lo, double hi);

    static Distribution from_json(const nlohmann::json& j);
    [[nodiscard]] nlohmann::json to_json() const;

    [[nodiscard]] DistKind kind() const { return kind_; }
    [[nodiscard]] const std::vector<double>& params() const { return params_; }
    [[nodiscard]] const std::vector<Distribution>& components() const { return components_; }
    [[nodiscard]] Support support() const { return {lo_, hi_}; }
    [[nodiscard]] double lo() const { return lo_; }
    [[nodiscard]] double hi() const { return hi_; }

    /// Clamps to 0 / 1 outside the support.
    [[nodiscard]] double cdf(double x) const;
    /// Throws DomainError outside the support.
    [[nodiscard]] double pdf(double x) const;
    /// Right derivative at knots of piecewise-linear densities.
    [[nodiscard]] double pdf_prime(double x) const;
    /// Smallest x with cdf(x) >= q.
    [[nodiscard]] double quantile(double q) const;
    [[nodiscard]] double sample(std::uint64_t seed, std::uint64_t index) const;

    [[nodiscard]] double mean() const { return mean_; }
    /// Integral of t * pdf(t) over [lo, x].
    [[nodiscard]] double partial_mean(double x) const;
    /// E of the q-th largest of n iid draws; q must be 1 or 2.
    [[nodiscard]] double order_stat_mean(int n, int q) const;
    /// E[X | X <= b], with phi(lo) = lo.
    [[nodiscard]] double phi(double b) const;
    [[nodiscard]] double phi_inverse(double xi) const;
    /// E[X | X >= r].
    [[nodiscard]] double cond_mean_above(double r) const;

    /// Points where the density or one of its derivatives may jump.
    [[nodiscard]] std::vector<double> knots() const;
    /// Smallest density over a uniform grid strictly inside the support.
    [[nodiscard]] double min_interior_pdf(int grid_size = 1000) const;

private:
    Distribution() = default;
    void finish();

    // Density pieces that return 0 outside the support instead of throwing;
    // mixtures are assembled from these.
    [[nodiscard]] double raw_pdf(double x) const;
    [[nodiscard]] double raw_pdf_prime(double x) const;

    DistKind kind_ = DistKind::uniform;
    std::vector<double> params_;
    std::vector<Distribution> components_;
    double lo_ = 0.0;
    double hi_ = 1.0;

    // derived
    std::vector<double> poly_;     // beta_poly: density coefficients in t, already normalised
    std::vector<double> px_, py_;  // piecewise_linear: knots and renormalised heights
    std::vector<double> seg_mass_; // piecewise_linear: cdf at each knot
    double cos_lo_theta_ = 0.0;    // raised_cosine: angle at lo / hi and normaliser
    double cos_hi_theta_ = 0.0;
    double cos_norm_ = 1.0;
    double mean_ = 0.0;
};

}  // namespace tourney
