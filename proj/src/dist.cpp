#include "tourney/dist.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "tourney/error.hpp"
#include "tourney/quadrature.hpp"
#include "tourney/rng.hpp"

namespace tourney {

namespace {

constexpr double pi = std::numbers::pi;

// Raised-cosine pieces in the angle theta = pi (x - c + h) / h, theta in [0, 2 pi].
// Unnormalised cdf: (theta - sin theta) / 2 pi.
double rc_cdf(double th) {
    if (th < 0.05) {
        double t2 = th * th;
        return th * t2 * (1.0 / 6 - t2 * (1.0 / 120 - t2 * (1.0 / 5040 - t2 / 362880))) / (2 * pi);
    }
    return (th - std::sin(th)) / (2 * pi);
}

// theta^2/2 - theta sin theta - cos theta + 1, the moment kernel.
double rc_moment_kernel(double th) {
    if (th < 0.05) {
        double t2 = th * th;
        double t4 = t2 * t2;
        return t4 * (1.0 / 8 - t2 * (1.0 / 144 - t2 * (1.0 / 5760 - t2 / 403200)));
    }
    return th * th / 2 - th * std::sin(th) - std::cos(th) + 1.0;
}

double binom(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

double horner(const std::vector<double>& c, double t) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
    return acc;
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

std::string to_string(DistKind kind) {
    switch (kind) {
        case DistKind::uniform: return "uniform";
        case DistKind::beta_poly: return "beta-like-polynomial";
        case DistKind::raised_cosine: return "raised-cosine-bump";
        case DistKind::piecewise_linear: return "piecewise-linear-density";
        case DistKind::mixture: return "mixture";
    }
    return "unknown";
}

DistKind dist_kind_from_string(const std::string& name) {
    for (auto k : {DistKind::uniform, DistKind::beta_poly, DistKind::raised_cosine,
                   DistKind::piecewise_linear, DistKind::mixture})
        if (to_string(k) == name) return k;
    throw DomainError("unknown distribution kind '" + name + "'");
}

static void check_support(double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
        throw DomainError("support needs lo < hi, got [" + fmt(lo) + ", " + fmt(hi) + "]");
    if (lo < 0.0) throw DomainError("support must be nonnegative, got lo = " + fmt(lo));
}

Distribution Distribution::uniform(double lo, double hi) {
    check_support(lo, hi);
    Distribution d;
    d.kind_ = DistKind::uniform;
    d.lo_ = lo;
    d.hi_ = hi;
    d.finish();
    return d;
}

Distribution Distribution::beta_poly(int a, int b, double lo, double hi) {
    check_support(lo, hi);
    if (a < 0 || b < 0 || a > 40 || b > 40)
        throw DomainError("beta-like-polynomial exponents must be integers in [0, 40]");
    Distribution d;
    d.kind_ = DistKind::beta_poly;
    d.params_ = {double(a), double(b)};
    d.lo_ = lo;
    d.hi_ = hi;
    // 1 / B(a+1, b+1) = (a+b+1)! / (a! b!) = (a+b+1) * C(a+b, a)
    double inv_beta = (a + b + 1) * binom(a + b, a);
    d.poly_.assign(a + b + 1, 0.0);
    for (int j = 0; j <= b; ++j) d.poly_[a + j] = inv_beta * binom(b, j) * ((j % 2) ? -1.0 : 1.0);
    d.finish();
    return d;
}

Distribution Distribution::raised_cosine(double center, double half_width, double lo, double hi) {
    check_support(lo, hi);
    if (!(half_width > 0.0) || !std::isfinite(center))
        throw DomainError("raised-cosine-bump needs a finite center and positive half width");
    Distribution d;
    d.kind_ = DistKind::raised_cosine;
    d.params_ = {center, half_width};
    d.lo_ = lo;
    d.hi_ = hi;
    auto theta = [&](double x) {
        return std::clamp(pi * (x - center + half_width) / half_width, 0.0, 2 * pi);
    };
    d.cos_lo_theta_ = theta(lo);
    d.cos_hi_theta_ = theta(hi);
    d.cos_norm_ = rc_cdf(d.cos_hi_theta_) - rc_cdf(d.cos_lo_theta_);
    if (!(d.cos_norm_ > 1e-12))
        throw DomainError("raised-cosine-bump has no mass inside its support");
    d.finish();
    return d;
}

Distribution Distribution::piecewise_linear(std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw DomainError("piecewise-linear-density needs at least two (x, y) knots");
    check_support(xs.front(), xs.back());
    double area = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(ys[i] >= 0.0) || !std::isfinite(ys[i]))
            throw DomainError("piecewise-linear-density heights must be finite and nonnegative");
        if (i > 0) {
            if (!(xs[i] > xs[i - 1])) throw DomainError("piecewise-linear-density knots must increase");
            area += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
        }
    }
    if (!(area > 0.0)) throw DomainError("piecewise-linear-density has zero area");
    Distribution d;
    d.kind_ = DistKind::piecewise_linear;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        d.params_.push_back(xs[i]);
        d.params_.push_back(ys[i]);
    }
    d.lo_ = xs.front();
    d.hi_ = xs.back();
    d.px_ = std::move(xs);
    d.py_ = std::move(ys);
    for (double& y : d.py_) y /= area;
    d.seg_mass_.assign(d.px_.size(), 0.0);
    for (std::size_t i = 1; i < d.px_.size(); ++i)
        d.seg_mass_[i] = d.seg_mass_[i - 1] + 0.5 * (d.py_[i] + d.py_[i - 1]) * (d.px_[i] - d.px_[i - 1]);
    d.finish();
    return d;
}

Distribution Distribution::mixture(std::vector<double> weights, std::vector<Distribution> components,
                                   double lo, double hi) {
    check_support(lo, hi);
    if (weights.empty() || weights.size() != components.size())
        throw DomainError("mixture needs one weight per component");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("mixture weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DomainError("mixture weights sum to " + fmt(sum) + ", not 1");
    for (const auto& c : components)
        if (c.lo_ < lo - 1e-12 || c.hi_ > hi + 1e-12)
            throw DomainError("mixture component support lies outside the mixture support");
    Distribution d;
    d.kind_ = DistKind::mixture;
    for (double& w : weights) w /= sum;
    d.params_ = std::move(weights);
    d.components_ = std::move(components);
    d.lo_ = lo;
    d.hi_ = hi;
    d.finish();
    return d;
}

void Distribution::finish() {
    double total = integrate([this](double x) { return raw_pdf(x); }, lo_, hi_, knots());
    if (std::abs(total - 1.0) > 1e-8)
        throw DomainError(to_string(kind_) + " density integrates to " + fmt(total) + ", not 1");
    mean_ = partial_mean(hi_);
}

double Distribution::raw_pdf(double x) const {
    if (x < lo_ || x > hi_) return 0.0;
    switch (kind_) {
        case DistKind::uniform: return 1.0 / (hi_ - lo_);
        case DistKind::beta_poly: {
            double w = hi_ - lo_;
            return horner(poly_, (x - lo_) / w) / w;
        }
        case DistKind::raised_cosine: {
            double c = params_[0], h = params_[1];
            if (x <= c - h || x >= c + h) return 0.0;
            double s = std::sin(0.5 * pi * (x - c + h) / h);
            return s * s / (h * cos_norm_);
        }
        case DistKind::piecewise_linear: {
            auto it = std::upper_bound(px_.begin(), px_.end(), x);
            std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - px_.begin(), 1), px_.size() - 1);
            double t = (x - px_[i - 1]) / (px_[i] - px_[i - 1]);
            return py_[i - 1] + t * (py_[i] - py_[i - 1]);
        }
        case DistKind::mixture: {
            double acc = 0.0;
            for (std::size_t i = 0; i < components_.size(); ++i) acc += params_[i] * components_[i].raw_pdf(x);
            return acc;
        }
    }
    return 0.0;
}

double Distribution::raw_pdf_prime(double x) const {
    if (x < lo_ || x > hi_) return 0.0;
    switch (kind_) {
        case DistKind::uniform: return 0.0;
        case DistKind::beta_poly: {
            double w = hi_ - lo_;
            std::vector<double> der(poly_.size() > 1 ? poly_.size() - 1 : 1, 0.0);
            for (std::size_t p = 1; p < poly_.size(); ++p) der[p - 1] = p * poly_[p];
            return horner(der, (x - lo_) / w) / (w * w);
        }
        case DistKind::raised_cosine: {
            double c = params_[0], h = params_[1];
            if (x < c - h || x >= c + h) return 0.0;
            double th = pi * (x - c + h) / h;
            return pi * std::sin(th) / (2 * h * h * cos_norm_);
        }
        case DistKind::piecewise_linear: {
            // right derivative: the segment that starts at or before x
            auto it = std::upper_bound(px_.begin(), px_.end(), x);
            std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - px_.begin(), 1), px_.size() - 1);
            return (py_[i] - py_[i - 1]) / (px_[i] - px_[i - 1]);
        }
        case DistKind::mixture: {
            double acc = 0.0;
            for (std::size_t i = 0; i < components_.size(); ++i)
                acc += params_[i] * components_[i].raw_pdf_prime(x);
            return acc;
        }
    }
    return 0.0;
}

double Distribution::pdf(double x) const {
    if (!(x >= lo_ && x <= hi_))
        throw DomainError("pdf evaluated at " + fmt(x) + " outside [" + fmt(lo_) + ", " + fmt(hi_) + "]");
    return raw_pdf(x);
}

double Distribution::pdf_prime(double x) const {
    if (!(x >= lo_ && x <= hi_))
        throw DomainError("pdf_prime evaluated at " + fmt(x) + " outside [" + fmt(lo_) + ", " + fmt(hi_) + "]");
    return raw_pdf_prime(x);
}

double Distribution::cdf(double x) const {
    if (!(x > lo_)) return 0.0;
    if (x >= hi_) return 1.0;
    switch (kind_) {
        case DistKind::uniform: return (x - lo_) / (hi_ - lo_);
        case DistKind::beta_poly: {
            double t = (x - lo_) / (hi_ - lo_);
            double acc = 0.0;
            for (std::size_t p = poly_.size(); p-- > 0;) acc = acc * t + poly_[p] / double(p + 1);
            return std::clamp(acc * t, 0.0, 1.0);
        }
        case DistKind::raised_cosine: {
            double c = params_[0], h = params_[1];
            double th = std::clamp(pi * (x - c + h) / h, 0.0, 2 * pi);
            return std::clamp((rc_cdf(th) - rc_cdf(cos_lo_theta_)) / cos_norm_, 0.0, 1.0);
        }
        case DistKind::piecewise_linear: {
            auto it = std::upper_bound(px_.begin(), px_.end(), x);
            std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - px_.begin(), 1), px_.size() - 1);
            double u = x - px_[i - 1];
            double s = (py_[i] - py_[i - 1]) / (px_[i] - px_[i - 1]);
            return std::clamp(seg_mass_[i - 1] + py_[i - 1] * u + 0.5 * s * u * u, 0.0, 1.0);
        }
        case DistKind::mixture: {
            double acc = 0.0;
            for (std::size_t i = 0; i < components_.size(); ++i) acc += params_[i] * components_[i].cdf(x);
            return std::clamp(acc, 0.0, 1.0);
        }
    }
    return 0.0;
}

double Distribution::partial_mean(double x) const {
    if (!(x > lo_)) return 0.0;
    x = std::min(x, hi_);
    switch (kind_) {
        case DistKind::uniform: return (x - lo_) * (x + lo_) / (2 * (hi_ - lo_));
        case DistKind::beta_poly: {
            double w = hi_ - lo_;
            double t = (x - lo_) / w;
            double acc = 0.0;
            for (std::size_t p = poly_.size(); p-- > 0;) acc = acc * t + poly_[p] / double(p + 2);
            return lo_ * cdf(x) + w * acc * t * t;
        }
        case DistKind::raised_cosine: {
            double c = params_[0], h = params_[1];
            auto moment = [&](double th) {
                return (c - h) * rc_cdf(th) + h / (2 * pi * pi) * rc_moment_kernel(th);
            };
            double th = std::clamp(pi * (x - c + h) / h, 0.0, 2 * pi);
            return (moment(th) - moment(cos_lo_theta_)) / cos_norm_;
        }
        case DistKind::piecewise_linear: {
            double acc = 0.0;
            for (std::size_t i = 1; i < px_.size(); ++i) {
                double x0 = px_[i - 1];
                if (x <= x0) break;
                double u = std::min(x, px_[i]) - x0;
                double s = (py_[i] - py_[i - 1]) / (px_[i] - x0);
                double y0 = py_[i - 1];
                acc += x0 * y0 * u + (x0 * s + y0) * u * u / 2 + s * u * u * u / 3;
            }
            return acc;
        }
        case DistKind::mixture: {
            double acc = 0.0;
            for (std::size_t i = 0; i < components_.size(); ++i)
                acc += params_[i] * components_[i].partial_mean(x);
            return acc;
        }
    }
    return 0.0;
}

double Distribution::quantile(double q) const {
    if (!(q > 0.0)) return lo_;
    if (q >= 1.0) return hi_;
    if (kind_ == DistKind::uniform) return lo_ + q * (hi_ - lo_);

    // Safeguarded Newton on a bracket [a, b] with cdf(a) < q <= cdf(b). Bisection
    // steps take over in flat stretches, which is what pins the infimum.
    double a = lo_, b = hi_;
    double x = 0.5 * (a + b);
    double width_before = b - a;
    const double scale = hi_ - lo_;
    for (int it = 0; it < 300; ++it) {
        double c = cdf(x) - q;
        if (c < 0.0) a = x;
        else b = x;
        if (b - a <= 1e-15 * scale) break;
        double d = raw_pdf(x);
        double next = 0.5 * (a + b);
        if (d > 0.0) {
            double newton = x - c / d;
            if (newton > a && newton < b) {
                if (std::abs(newton - x) <= 1e-15 * scale) return c < 0.0 ? newton : x;
                next = newton;
            }
        }
        // force a bisection whenever Newton has not halved the bracket over a few steps
        if (it % 4 == 3) {
            if (b - a > 0.5 * width_before) next = 0.5 * (a + b);
            width_before = b - a;
        }
        x = next;
    }
    return b;
}

double Distribution::sample(std::uint64_t seed, std::uint64_t index) const {
    return quantile(uniform_at(seed, index));
}

double Distribution::order_stat_mean(int n, int q) const {
    if (n < 1 || q < 1 || q > n) throw DomainError("order statistic needs 1 <= q <= n");
    if (q > 2) throw DomainError("only the two highest order statistics are supported");
    auto tail = [&](double x) {
        double F = cdf(x);
        double Fn1 = std::pow(F, n - 1);
        if (q == 1) return 1.0 - Fn1 * F;
        return 1.0 - Fn1 * F - n * Fn1 * (1.0 - F);
    };
    return lo_ + integrate(tail, lo_, hi_, knots());
}

double Distribution::phi(double b) const {
    if (b > hi_ * (1 + 1e-12)) throw DomainError("phi argument " + fmt(b) + " above support " + fmt(hi_));
    if (!(b > lo_)) return lo_;
    double c = cdf(b);
    if (!(c > 0.0)) return lo_;
    return std::clamp(partial_mean(b) / c, lo_, b);
}

double Distribution::phi_inverse(double xi) const {
    if (xi > mean_ * (1 + 1e-12))
        throw DomainError("phi_inverse argument " + fmt(xi) + " above the mean " + fmt(mean_));
    if (!(xi > lo_)) return lo_;
    if (xi >= mean_) return hi_;
    double a = xi, b = hi_;
    while (b - a > 1e-15 * b) {
        double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        if (phi(m) < xi) a = m;
        else b = m;
    }
    return 0.5 * (a + b);
}

double Distribution::cond_mean_above(double r) const {
    if (!(r > lo_)) return mean_;
    double tail = 1.0 - cdf(r);
    if (!(tail > 1e-12)) throw DomainError("no mass above reserve " + fmt(r));
    return std::clamp((mean_ - partial_mean(r)) / tail, r, hi_);
}

std::vector<double> Distribution::knots() const {
    std::vector<double> out{lo_, hi_};
    switch (kind_) {
        case DistKind::raised_cosine:
            for (double k : {params_[0] - params_[1], params_[0], params_[0] + params_[1]})
                if (k > lo_ && k < hi_) out.push_back(k);
            break;
        case DistKind::piecewise_linear: out.insert(out.end(), px_.begin(), px_.end()); break;
        case DistKind::mixture:
            for (const auto& c : components_) {
                auto ck = c.knots();
                out.insert(out.end(), ck.begin(), ck.end());
            }
            break;
        default: break;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double Distribution::min_interior_pdf(int grid_size) const {
    double lowest = INFINITY;
    for (int i = 0; i < grid_size; ++i) {
        double x = lo_ + (hi_ - lo_) * (i + 0.5) / grid_size;
        lowest = std::min(lowest, raw_pdf(x));
    }
    return lowest;
}

nlohmann::json Distribution::to_json() const {
    nlohmann::json j;
    j["kind"] = to_string(kind_);
    j["params"] = params_;
    j["support"] = {lo_, hi_};
    if (kind_ == DistKind::mixture) {
        j["components"] = nlohmann::json::array();
        for (const auto& c : components_) j["components"].push_back(c.to_json());
    }
    return j;
}

Distribution Distribution::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw DomainError("distribution must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (key != "kind" && key != "params" && key != "support" && key != "components")
            throw DomainError("unknown distribution key '" + key + "'");
    if (!j.contains("kind") || !j["kind"].is_string()) throw DomainError("distribution needs a string 'kind'");
    DistKind kind = dist_kind_from_string(j["kind"].get<std::string>());
    if (!j.contains("support") || !j["support"].is_array() || j["support"].size() != 2 ||
        !j["support"][0].is_number() || !j["support"][1].is_number())
        throw DomainError("distribution needs 'support': [lo, hi]");
    double lo = j["support"][0].get<double>(), hi = j["support"][1].get<double>();
    std::vector<double> p;
    if (j.contains("params")) {
        if (!j["params"].is_array()) throw DomainError("'params' must be an array of numbers");
        for (const auto& x : j["params"]) {
            if (!x.is_number()) throw DomainError("'params' must be an array of numbers");
            p.push_back(x.get<double>());
        }
    }
    if (kind != DistKind::mixture && j.contains("components"))
        throw DomainError("'components' is only allowed for mixtures");
    auto need = [&](std::size_t n) {
        if (p.size() != n)
            throw DomainError(to_string(kind) + " takes " + std::to_string(n) + " params, got " +
                              std::to_string(p.size()));
    };
    switch (kind) {
        case DistKind::uniform: need(0); return uniform(lo, hi);
        case DistKind::beta_poly:
            need(2);
            if (p[0] != std::floor(p[0]) || p[1] != std::floor(p[1]))
                throw DomainError("beta-like-polynomial exponents must be integers");
            return beta_poly(int(p[0]), int(p[1]), lo, hi);
        case DistKind::raised_cosine: need(2); return raised_cosine(p[0], p[1], lo, hi);
        case DistKind::piecewise_linear: {
            if (p.size() < 4 || p.size() % 2 != 0)
                throw DomainError("piecewise-linear-density params are x0, y0, x1, y1, ...");
            std::vector<double> xs, ys;
            for (std::size_t i = 0; i < p.size(); i += 2) {
                xs.push_back(p[i]);
                ys.push_back(p[i + 1]);
            }
            if (std::abs(xs.front() - lo) > 1e-12 || std::abs(xs.back() - hi) > 1e-12)
                throw DomainError("piecewise-linear-density knots must span the support");
            return piecewise_linear(std::move(xs), std::move(ys));
        }
        case DistKind::mixture: {
            if (!j.contains("components") || !j["components"].is_array())
                throw DomainError("mixture needs a 'components' array");
            std::vector<Distribution> comps;
            for (const auto& c : j["components"]) comps.push_back(from_json(c));
            return mixture(std::move(p), std::move(comps), lo, hi);
        }
    }
    throw DomainError("unreachable distribution kind");
}

}  // namespace tourney
