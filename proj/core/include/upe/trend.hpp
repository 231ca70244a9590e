#pragma once

#include "upe/market_data.hpp"

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace upe {

enum class Trend : int { Down = -1, Up = 1 };

[[nodiscard]] constexpr int to_int(Trend t) noexcept { return static_cast<int>(t); }
[[nodiscard]] constexpr Trend negate(Trend t) noexcept { return t == Trend::Up ? Trend::Down : Trend::Up; }
[[nodiscard]] constexpr Trend trend_from(bool upward) noexcept { return upward ? Trend::Up : Trend::Down; }

/// Centered moving average of order k. Only indices in [k, T-1-k] carry a value.
class SmoothedSeries {
public:
    SmoothedSeries(std::vector<double> values, std::size_t k);

    [[nodiscard]] std::size_t k() const noexcept { return k_; }
    [[nodiscard]] std::size_t first() const noexcept { return k_; }
    [[nodiscard]] std::size_t last() const noexcept { return k_ + values_.size() - 1; }
    [[nodiscard]] bool has(std::size_t t) const noexcept { return t >= first() && t <= last(); }
    /// Throws ValidationError outside [first(), last()].
    [[nodiscard]] double at(std::size_t t) const;
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

private:
    std::vector<double> values_;
    std::size_t k_;
};

struct LabeledStep {
    std::size_t t;
    Trend label;
};

/// Requires T >= 2k + 2.
SmoothedSeries smooth(std::span<const double> prices, std::size_t k);
SmoothedSeries smooth(const PriceSeries& series, std::size_t k);

/// Label +1 where the smoothed price did not decrease, for t in [k+1, T-1-k].
std::vector<LabeledStep> label_trends(const SmoothedSeries& sm);

/// Mean of the L prices strictly before t.
double moving_average(std::span<const double> prices, std::size_t t, std::size_t L);
double moving_average(const PriceSeries& series, std::size_t t, std::size_t L);

/// Up when the short moving average is at least the long one.
Trend ma_forecast(std::span<const double> prices, std::size_t t, std::size_t L_short, std::size_t L_long);
Trend ma_forecast(const PriceSeries& series, std::size_t t, std::size_t L_short, std::size_t L_long);

double accuracy(std::span<const Trend> predictions, std::span<const Trend> labels);

/// Writes `t,label,prediction` rows.
void write_label_csv(const std::filesystem::path& target, std::span<const LabeledStep> labels,
                     std::span<const Trend> predictions);

}  // namespace upe
