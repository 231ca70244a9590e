#include "upe/market_data.hpp"

#include "upe/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

namespace upe {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::optional<int> parse_int(std::string_view s) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return value;
}

std::optional<double> parse_double(std::string_view s) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return value;
}

bool is_valid_level(double p) { return std::isfinite(p) && p > 0.0; }

bool jump_too_large(double previous, double current) {
    return std::abs(current - previous) / previous > kMaxDailyJump;
}

// A run of extrapolated values must itself pass the abnormal-value rule,
// otherwise cleaning would not be idempotent.
bool run_is_clean(std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!is_valid_level(values[i])) {
            return false;
        }
        if (i > 0 && jump_too_large(values[i - 1], values[i])) {
            return false;
        }
    }
    return true;
}

}  // namespace

Date parse_iso_date(std::string_view text) {
    text = trim(text);
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw ValidationError("invalid ISO-8601 date '" + std::string(text) + "'");
    }
    const auto y = parse_int(text.substr(0, 4));
    const auto m = parse_int(text.substr(5, 2));
    const auto d = parse_int(text.substr(8, 2));
    if (!y || !m || !d) {
        throw ValidationError("invalid ISO-8601 date '" + std::string(text) + "'");
    }
    const Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                    std::chrono::day{static_cast<unsigned>(*d)}};
    if (!date.ok()) {
        throw ValidationError("invalid calendar date '" + std::string(text) + "'");
    }
    return date;
}

std::string format_iso_date(const Date& date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

PriceSeries::PriceSeries(int product_year, std::vector<Date> dates, std::vector<double> prices)
    : product_year_(product_year), dates_(std::move(dates)), prices_(std::move(prices)) {
    if (dates_.size() != prices_.size()) {
        throw ValidationError("price series: date and price counts differ");
    }
    if (prices_.empty()) {
        throw ValidationError("price series is empty");
    }
    for (std::size_t i = 1; i < dates_.size(); ++i) {
        if (!(std::chrono::sys_days{dates_[i - 1]} < std::chrono::sys_days{dates_[i]})) {
            throw ValidationError("price series dates not strictly increasing at " +
                                  format_iso_date(dates_[i]));
        }
    }
}

PriceSeries PriceSeries::from_prices(int product_year, std::vector<double> prices) {
    using namespace std::chrono;
    sys_days day{year{product_year - 3} / January / 1};
    std::vector<Date> dates;
    dates.reserve(prices.size());
    while (dates.size() < prices.size()) {
        const weekday wd{day};
        if (wd != Saturday && wd != Sunday) {
            dates.emplace_back(day);
        }
        day += days{1};
    }
    return PriceSeries(product_year, std::move(dates), std::move(prices));
}

PriceSeries PriceSeries::transformed(double scale, double shift) const {
    std::vector<double> out(prices_.size());
    std::transform(prices_.begin(), prices_.end(), out.begin(), [&](double p) { return scale * p + shift; });
    return PriceSeries(product_year_, dates_, std::move(out));
}

std::string CleaningReport::to_json() const {
    nlohmann::json j;
    j["interpolated_indices"] = interpolated_indices;
    j["extrapolated_indices"] = extrapolated_indices;
    j["anomaly_rule_hits"] = anomaly_rule_hits;
    return j.dump(2);
}

PriceSeries parse_price_csv(std::string_view text, int product_year, std::string_view origin) {
    std::vector<PricePoint> rows;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        const auto line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (!header_seen) {
            std::string lowered(line);
            std::erase(lowered, ' ');
            std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (lowered != "date,price") {
                throw ParseError(line_no, "expected header 'date,price' in " + std::string(origin));
            }
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
            throw ParseError(line_no, "expected two fields 'date,price' in " + std::string(origin));
        }
        PricePoint point{};
        try {
            point.date = parse_iso_date(line.substr(0, comma));
        } catch (const ValidationError& e) {
            throw ParseError(line_no, e.what());
        }
        const auto price_field = trim(line.substr(comma + 1));
        if (price_field.empty()) {
            point.price = std::numeric_limits<double>::quiet_NaN();
        } else {
            const auto value = parse_double(price_field);
            if (!value) {
                throw ParseError(line_no, "invalid price '" + std::string(price_field) + "'");
            }
            point.price = *value;
        }
        rows.push_back(point);
    }
    if (rows.empty()) {
        throw ValidationError("no price rows in " + std::string(origin));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const PricePoint& a, const PricePoint& b) {
        return std::chrono::sys_days{a.date} < std::chrono::sys_days{b.date};
    });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].date == rows[i - 1].date) {
            throw ValidationError("duplicate date " + format_iso_date(rows[i].date) + " in " +
                                  std::string(origin));
        }
    }
    std::vector<Date> dates;
    std::vector<double> prices;
    dates.reserve(rows.size());
    prices.reserve(rows.size());
    for (const auto& r : rows) {
        dates.push_back(r.date);
        prices.push_back(r.price);
    }
    return PriceSeries(product_year, std::move(dates), std::move(prices));
}

PriceSeries load_price_series(const std::filesystem::path& source, int product_year) {
    std::ifstream in(source, std::ios::binary);
    if (!in) {
        throw DataError("cannot open price file '" + source.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_price_csv(buffer.str(), product_year, source.string());
}

void write_price_series(const PriceSeries& series, const std::filesystem::path& target, std::string_view comment) {
    std::ofstream out(target, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + target.string() + "'");
    }
    if (!comment.empty()) {
        out << "# " << comment << '\n';
    }
    out << "date,price\n";
    char buf[64];
    for (std::size_t t = 0; t < series.size(); ++t) {
        out << format_iso_date(series.date(t)) << ',';
        if (!std::isnan(series.price(t))) {
            std::snprintf(buf, sizeof buf, "%.17g", series.price(t));
            out << buf;
        }
        out << '\n';
    }
}

std::pair<PriceSeries, CleaningReport> clean_series(const PriceSeries& series) {
    const auto raw = series.prices();
    const std::size_t n = raw.size();
    CleaningReport report;

    std::vector<bool> valid(n, false);
    std::optional<double> previous;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = raw[i];
        if (std::isnan(p)) {
            continue;  // missing sample
        }
        if (!is_valid_level(p) || (previous && jump_too_large(*previous, p))) {
            report.anomaly_rule_hits.push_back(i);
            continue;
        }
        valid[i] = true;
        previous = p;
    }

    std::vector<std::size_t> anchors;
    for (std::size_t i = 0; i < n; ++i) {
        if (valid[i]) {
            anchors.push_back(i);
        }
    }
    if (anchors.size() < 2) {
        throw DataError("series for CAL " + std::to_string(series.product_year()) +
                        " has fewer than two valid samples");
    }

    std::vector<double> out(raw.begin(), raw.end());
    for (std::size_t a = 0; a + 1 < anchors.size(); ++a) {
        const std::size_t i0 = anchors[a];
        const std::size_t i1 = anchors[a + 1];
        const double v0 = raw[i0];
        const double v1 = raw[i1];
        for (std::size_t i = i0 + 1; i < i1; ++i) {
            const double frac = static_cast<double>(i - i0) / static_cast<double>(i1 - i0);
            out[i] = v0 + (v1 - v0) * frac;
            report.interpolated_indices.push_back(i);
        }
    }

    // Leading run: indices [0, first).
    {
        const std::size_t j0 = anchors[0];
        const std::size_t j1 = anchors[1];
        const double slope = (raw[j1] - raw[j0]) / static_cast<double>(j1 - j0);
        std::vector<double> run(j0 + 1);
        for (std::size_t i = 0; i <= j0; ++i) {
            run[i] = raw[j0] - slope * static_cast<double>(j0 - i);
        }
        if (!run_is_clean(run)) {
            std::fill(run.begin(), run.end(), raw[j0]);
        }
        for (std::size_t i = 0; i < j0; ++i) {
            out[i] = run[i];
            report.extrapolated_indices.push_back(i);
        }
    }
    // Trailing run: indices (last, n).
    {
        const std::size_t j1 = anchors.back();
        const std::size_t j0 = anchors[anchors.size() - 2];
        const double slope = (raw[j1] - raw[j0]) / static_cast<double>(j1 - j0);
        std::vector<double> run(n - j1);
        for (std::size_t i = j1; i < n; ++i) {
            run[i - j1] = raw[j1] + slope * static_cast<double>(i - j1);
        }
        if (!run_is_clean(run)) {
            std::fill(run.begin(), run.end(), raw[j1]);
        }
        for (std::size_t i = j1 + 1; i < n; ++i) {
            out[i] = run[i - j1];
            report.extrapolated_indices.push_back(i);
        }
    }
    std::sort(report.extrapolated_indices.begin(), report.extrapolated_indices.end());

    PriceSeries cleaned(series.product_year(), std::vector<Date>(series.dates().begin(), series.dates().end()),
                        std::move(out));
    return {std::move(cleaned), std::move(report)};
}

PriceWindow window(std::span<const double> prices, std::size_t t, std::size_t K) {
    if (K == 0) {
        throw ValidationError("window length K must be positive");
    }
    if (t < K) {
        throw InsufficientDataError("window at t=" + std::to_string(t) + " needs K=" + std::to_string(K) +
                                    " previous prices");
    }
    if (t > prices.size()) {
        throw ValidationError("window at t=" + std::to_string(t) + " beyond series length " +
                              std::to_string(prices.size()));
    }
    PriceWindow w;
    w.values.assign(prices.begin() + static_cast<std::ptrdiff_t>(t - K),
                    prices.begin() + static_cast<std::ptrdiff_t>(t));
    w.origin_t = t;
    return w;
}

PriceWindow window(const PriceSeries& series, std::size_t t, std::size_t K) {
    return window(series.prices(), t, K);
}

NormalizedWindow normalize_window(std::span<const double> values) {
    NormalizedWindow out;
    const auto n = static_cast<double>(values.size());
    if (values.empty()) {
        return out;
    }
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - out.mean) * (v - out.mean);
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    out.std = (*lo == *hi) ? 0.0 : std::sqrt(ss / n);
    out.values.resize(values.size(), 0.0);
    if (out.std > 0.0) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            out.values[i] = (values[i] - out.mean) / out.std;
        }
    }
    return out;
}

NormalizedWindow normalize_window(const PriceWindow& w) { return normalize_window(std::span<const double>(w.values)); }

std::vector<double> denormalize(const NormalizedWindow& w) {
    std::vector<double> out(w.values.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = w.values[i] * w.std + w.mean;
    }
    return out;
}

}  // namespace upe
