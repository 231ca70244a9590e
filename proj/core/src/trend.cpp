#include "upe/trend.hpp"

#include "upe/errors.hpp"

#include <fstream>
#include <numeric>
#include <string>

namespace upe {

SmoothedSeries::SmoothedSeries(std::vector<double> values, std::size_t k) : values_(std::move(values)), k_(k) {
    if (values_.empty()) {
        throw ValidationError("smoothed series has no valid values");
    }
}

double SmoothedSeries::at(std::size_t t) const {
    if (!has(t)) {
        throw ValidationError("smoothed price undefined at t=" + std::to_string(t));
    }
    return values_[t - k_];
}

SmoothedSeries smooth(std::span<const double> prices, std::size_t k) {
    const std::size_t T = prices.size();
    if (T < 2 * k + 2) {
        throw InsufficientDataError("smoothing of order " + std::to_string(k) + " needs at least " +
                                    std::to_string(2 * k + 2) + " prices, got " + std::to_string(T));
    }
    const double width = static_cast<double>(2 * k + 1);
    std::vector<double> values;
    values.reserve(T - 2 * k);
    for (std::size_t t = k; t + k < T; ++t) {
        // Direct summation keeps every value an exact function of its own window.
        const double sum = std::accumulate(prices.begin() + static_cast<std::ptrdiff_t>(t - k),
                                           prices.begin() + static_cast<std::ptrdiff_t>(t + k + 1), 0.0);
        values.push_back(sum / width);
    }
    return SmoothedSeries(std::move(values), k);
}

SmoothedSeries smooth(const PriceSeries& series, std::size_t k) { return smooth(series.prices(), k); }

std::vector<LabeledStep> label_trends(const SmoothedSeries& sm) {
    std::vector<LabeledStep> out;
    if (sm.last() < sm.first() + 1) {
        throw InsufficientDataError("trend labels need at least two smoothed prices");
    }
    out.reserve(sm.last() - sm.first());
    for (std::size_t t = sm.first() + 1; t <= sm.last(); ++t) {
        out.push_back({t, trend_from(sm.at(t) >= sm.at(t - 1))});
    }
    return out;
}

double moving_average(std::span<const double> prices, std::size_t t, std::size_t L) {
    if (L == 0) {
        throw ValidationError("moving-average length must be positive");
    }
    if (t < L) {
        throw InsufficientDataError("moving average of length " + std::to_string(L) + " undefined at t=" +
                                    std::to_string(t));
    }
    if (t > prices.size()) {
        throw ValidationError("moving average at t=" + std::to_string(t) + " beyond series end");
    }
    const double sum = std::accumulate(prices.begin() + static_cast<std::ptrdiff_t>(t - L),
                                       prices.begin() + static_cast<std::ptrdiff_t>(t), 0.0);
    return sum / static_cast<double>(L);
}

double moving_average(const PriceSeries& series, std::size_t t, std::size_t L) {
    return moving_average(series.prices(), t, L);
}

Trend ma_forecast(std::span<const double> prices, std::size_t t, std::size_t L_short, std::size_t L_long) {
    if (L_short >= L_long) {
        throw ValidationError("short moving-average length must be below the long one");
    }
    return trend_from(moving_average(prices, t, L_short) >= moving_average(prices, t, L_long));
}

Trend ma_forecast(const PriceSeries& series, std::size_t t, std::size_t L_short, std::size_t L_long) {
    return ma_forecast(series.prices(), t, L_short, L_long);
}

double accuracy(std::span<const Trend> predictions, std::span<const Trend> labels) {
    if (predictions.size() != labels.size()) {
        throw ValidationError("accuracy: " + std::to_string(predictions.size()) + " predictions vs " +
                              std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) {
        throw ValidationError("accuracy of an empty sequence");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        hits += predictions[i] == labels[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

void write_label_csv(const std::filesystem::path& target, std::span<const LabeledStep> labels,
                     std::span<const Trend> predictions) {
    if (labels.size() != predictions.size()) {
        throw ValidationError("label and prediction counts differ");
    }
    std::ofstream out(target, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + target.string() + "'");
    }
    out << "t,label,prediction\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << labels[i].t << ',' << to_int(labels[i].label) << ',' << to_int(predictions[i]) << '\n';
    }
}

}  // namespace upe
