#include "tourney/bid_function.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tourney/error.hpp"

namespace tourney {

BidFunction::BidFunction(std::vector<double> grid, std::vector<double> values, std::vector<double> slopes)
    : grid_(std::move(grid)), values_(std::move(values)), slopes_(std::move(slopes)) {
    if (grid_.size() < 2 || values_.size() != grid_.size() || slopes_.size() != grid_.size())
        throw DomainError("bid function needs matching grid, values and slopes with at least two nodes");
    for (std::size_t i = 1; i < grid_.size(); ++i)
        if (!(grid_[i] > grid_[i - 1])) throw DomainError("bid function grid must be strictly increasing");
    for (std::size_t i = 0; i + 1 < grid_.size(); ++i) {
        double secant = (values_[i + 1] - values_[i]) / (grid_[i + 1] - grid_[i]);
        if (secant <= 0.0) continue;
        double a = slopes_[i] / secant, b = slopes_[i + 1] / secant;
        double r2 = a * a + b * b;
        if (r2 > 9.0) {
            double t = 3.0 / std::sqrt(r2);
            slopes_[i] = t * a * secant;
            slopes_[i + 1] = t * b * secant;
        }
    }
}

BidFunction BidFunction::linear(double slope, double v_max, int nodes) {
    std::vector<double> g(nodes), v(nodes), s(nodes, slope);
    for (int i = 0; i < nodes; ++i) {
        g[i] = v_max * i / (nodes - 1);
        v[i] = slope * g[i];
    }
    return {g, v, s};
}

std::size_t BidFunction::segment(double v) const {
    auto it = std::upper_bound(grid_.begin(), grid_.end(), v);
    std::ptrdiff_t i = (it - grid_.begin()) - 1;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, std::ptrdiff_t(grid_.size()) - 2));
}

double BidFunction::operator()(double v) const {
    if (v <= grid_.front()) return values_.front();
    if (v >= grid_.back()) return values_.back();
    std::size_t i = segment(v);
    double h = grid_[i + 1] - grid_[i];
    double t = (v - grid_[i]) / h;
    double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * values_[i] + (t3 - 2 * t2 + t) * h * slopes_[i] +
           (-2 * t3 + 3 * t2) * values_[i + 1] + (t3 - t2) * h * slopes_[i + 1];
}

double BidFunction::derivative(double v) const {
    if (v <= grid_.front()) return slopes_.front();
    if (v >= grid_.back()) return slopes_.back();
    std::size_t i = segment(v);
    double h = grid_[i + 1] - grid_[i];
    double t = (v - grid_[i]) / h;
    double t2 = t * t;
    return (6 * t2 - 6 * t) / h * values_[i] + (3 * t2 - 4 * t + 1) * slopes_[i] +
           (-6 * t2 + 6 * t) / h * values_[i + 1] + (3 * t2 - 2 * t) * slopes_[i + 1];
}

BidFunction BidFunction::scaled(double factor) const {
    auto v = values_;
    auto s = slopes_;
    for (double& x : v) x *= factor;
    for (double& x : s) x *= factor;
    return {grid_, v, s};
}

std::string BidFunction::to_csv() const {
    std::string out = "v,b,b_prime\n";
    char line[96];
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", grid_[i], values_[i], slopes_[i]);
        out += line;
    }
    return out;
}

nlohmann::json BidFunction::to_json() const {
    return {{"grid", grid_}, {"values", values_}, {"slopes", slopes_}};
}

BidFunction BidFunction::from_json(const nlohmann::json& j) {
    return {j.at("grid").get<std::vector<double>>(), j.at("values").get<std::vector<double>>(),
            j.at("slopes").get<std::vector<double>>()};
}

}  // namespace tourney
