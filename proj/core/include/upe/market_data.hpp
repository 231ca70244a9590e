#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace upe {

using Date = std::chrono::year_month_day;

/// Parses an ISO-8601 calendar date (YYYY-MM-DD). Throws ValidationError.
Date parse_iso_date(std::string_view text);
std::string format_iso_date(const Date& date);

struct PricePoint {
    Date date;
    double price;  // EUR/MWh; NaN marks a missing sample before cleaning
};

/// Daily forward prices of one CAL product, in strictly increasing date order.
class PriceSeries {
public:
    PriceSeries(int product_year, std::vector<Date> dates, std::vector<double> prices);

    /// Builds a series over consecutive weekdays starting on the first weekday of
    /// `product_year - 3`, the first year such a product trades.
    static PriceSeries from_prices(int product_year, std::vector<double> prices);

    [[nodiscard]] int product_year() const noexcept { return product_year_; }
    [[nodiscard]] std::size_t size() const noexcept { return prices_.size(); }
    [[nodiscard]] double price(std::size_t t) const { return prices_.at(t); }
    [[nodiscard]] const Date& date(std::size_t t) const { return dates_.at(t); }
    [[nodiscard]] std::span<const double> prices() const noexcept { return prices_; }
    [[nodiscard]] std::span<const Date> dates() const noexcept { return dates_; }
    [[nodiscard]] PricePoint point(std::size_t t) const { return {date(t), price(t)}; }

    /// Same dates, prices mapped through `scale * p + shift`.
    [[nodiscard]] PriceSeries transformed(double scale, double shift) const;

private:
    int product_year_;
    std::vector<Date> dates_;
    std::vector<double> prices_;
};

struct CleaningReport {
    std::vector<std::size_t> interpolated_indices;
    std::vector<std::size_t> extrapolated_indices;
    // Samples present in the input but rejected by the abnormal-value rule.
    std::vector<std::size_t> anomaly_rule_hits;

    [[nodiscard]] bool empty() const noexcept {
        return interpolated_indices.empty() && extrapolated_indices.empty() && anomaly_rule_hits.empty();
    }
    [[nodiscard]] std::string to_json() const;
};

/// Prices at t-K .. t-1; the price at t itself is never part of the window.
struct PriceWindow {
    std::vector<double> values;
    std::size_t origin_t = 0;
};

struct NormalizedWindow {
    std::vector<double> values;
    double mean = 0.0;
    double std = 0.0;  // population convention; 0 for a constant window
};

/// Reads a `date,price` CSV with a header row. An empty price field marks a
/// missing sample. Lines starting with `#` are comments. Rows are sorted by
/// date; duplicated dates are rejected.
PriceSeries load_price_series(const std::filesystem::path& source, int product_year);

/// Same parser over in-memory CSV text; `origin` names the source in diagnostics.
PriceSeries parse_price_csv(std::string_view text, int product_year, std::string_view origin = "<memory>");

/// Writes `date,price` CSV with full round-trip precision; a non-empty
/// `comment` becomes a leading `#` line.
void write_price_series(const PriceSeries& series, const std::filesystem::path& target,
                        std::string_view comment = {});

/// A sample is abnormal when missing, non-finite, non-positive, or when it moves
/// more than this fraction away from the previous valid sample.
inline constexpr double kMaxDailyJump = 0.5;

/// Replaces abnormal samples by linear interpolation between the nearest valid
/// neighbours; leading and trailing runs are linearly extrapolated from the two
/// nearest valid samples. Throws DataError with fewer than two valid samples.
std::pair<PriceSeries, CleaningReport> clean_series(const PriceSeries& series);

PriceWindow window(const PriceSeries& series, std::size_t t, std::size_t K);
PriceWindow window(std::span<const double> prices, std::size_t t, std::size_t K);

NormalizedWindow normalize_window(const PriceWindow& w);
NormalizedWindow normalize_window(std::span<const double> values);
std::vector<double> denormalize(const NormalizedWindow& w);

}  // namespace upe
