#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace tourney {

/// Tabulated bid schedule b(v) on [0, v_max] with cubic Hermite interpolation.
/// Slopes pass through a Fritsch-Carlson limiter so the interpolant is monotone
/// whenever the tabulated values are.
class BidFunction {
public:
    BidFunction() = default;
    BidFunction(std::vector<double> grid, std::vector<double> values, std::vector<double> slopes);

    /// Linear schedule b(v) = slope * v on [0, v_max].
    static BidFunction linear(double slope, double v_max, int nodes = 2);

    [[nodiscard]] double operator()(double v) const;
    [[nodiscard]] double derivative(double v) const;

    [[nodiscard]] const std::vector<double>& grid() const { return grid_; }
    [[nodiscard]] const std::vector<double>& values() const { return values_; }
    [[nodiscard]] const std::vector<double>& slopes() const { return slopes_; }
    [[nodiscard]] double v_max() const { return grid_.back(); }
    [[nodiscard]] bool empty() const { return grid_.empty(); }

    /// Copy with every value and slope multiplied by factor.
    [[nodiscard]] BidFunction scaled(double factor) const;

    [[nodiscard]] std::string to_csv() const;
    [[nodiscard]] nlohmann::json to_json() const;
    static BidFunction from_json(const nlohmann::json& j);

private:
    [[nodiscard]] std::size_t segment(double v) const;

    std::vector<double> grid_, values_, slopes_;
};

}  // namespace tourney
