#include "upe/strategy.hpp"

#include "upe/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace upe {

bool is_multiple_of(double value, double step) {
    if (!(step > 0.0) || !std::isfinite(value)) {
        return false;
    }
    const double ratio = value / step;
    return std::abs(ratio - std::round(ratio)) <= 1e-9 * std::max(1.0, std::abs(ratio));
}

void StrategyConfig::validate() const {
    if (N == 0) {
        throw ValidationError("number of purchase operations N must be positive");
    }
    if (!(Q > 0.0) || !(dQ > 0.0)) {
        throw ValidationError("quantity Q and resolution dQ must be positive");
    }
    if (!is_multiple_of(Q, dQ)) {
        throw ValidationError("Q is not a multiple of the market resolution dQ");
    }
    if (!is_multiple_of(amount(), dQ)) {
        throw ValidationError("N=" + std::to_string(N) + " gives an amount Q/N that is not a multiple of dQ");
    }
    if (!(fee >= 0.0) || !std::isfinite(fee)) {
        throw ValidationError("transaction fee must be finite and non-negative");
    }
    if (!(u_minus >= -1.0 && u_minus <= 1.0 && u_plus >= -1.0 && u_plus <= 1.0)) {
        throw ValidationError("uniformity triggers must lie in [-1, 1]");
    }
    if (u_minus > u_plus) {
        throw ValidationError("u_minus must not exceed u_plus");
    }
}

std::string_view to_string(Reason r) noexcept {
    switch (r) {
        case Reason::TrendUpTrigger: return "trend-up-trigger";
        case Reason::TrendDownTrigger: return "trend-down-trigger";
        case Reason::FeasibilityForced: return "feasibility-forced";
        case Reason::Completed: return "completed";
        case Reason::Wait: return "wait";
        case Reason::Scheduled: return "scheduled";
        case Reason::Crossover: return "crossover";
    }
    return "unknown";
}

std::size_t remaining_operations(const ProcurementState& state, const StrategyConfig& cfg) {
    const double n = std::round((state.Q - state.q) / cfg.amount());
    return n <= 0.0 ? 0 : static_cast<std::size_t>(n);
}

double uniformity(const ProcurementState& state) {
    const double T = static_cast<double>(state.T);
    const double t = static_cast<double>(state.t);
    return (T - t) / T - (state.Q - state.q) / state.Q;
}

namespace {

// Completion and deadline checks shared by every policy.
std::optional<Decision> override_for(const ProcurementState& state, const StrategyConfig& cfg) {
    const std::size_t remaining = remaining_operations(state, cfg);
    if (remaining == 0) {
        return Decision{0, Reason::Completed};
    }
    if (state.t >= state.T || remaining >= state.T - state.t) {
        return Decision{1, Reason::FeasibilityForced};
    }
    return std::nullopt;
}

double truncated_mean(std::span<const double> prices, std::size_t center, std::size_t k) {
    const std::size_t lo = center >= k ? center - k : 0;
    const std::size_t hi = std::min(prices.size() - 1, center + k);
    const double sum = std::accumulate(prices.begin() + static_cast<std::ptrdiff_t>(lo),
                                       prices.begin() + static_cast<std::ptrdiff_t>(hi + 1), 0.0);
    return sum / static_cast<double>(hi - lo + 1);
}

}  // namespace

Decision upe_decide(Trend forecast, const ProcurementState& state, const StrategyConfig& cfg) {
    if (auto forced = override_for(state, cfg)) {
        return *forced;
    }
    const double u = uniformity(state);
    if (forecast == Trend::Up && u < cfg.u_plus) {
        return {1, Reason::TrendUpTrigger};
    }
    if (forecast == Trend::Down && u < cfg.u_minus) {
        return {1, Reason::TrendDownTrigger};
    }
    return {0, Reason::Wait};
}

std::vector<std::size_t> nbep_schedule(std::size_t T, std::size_t N) {
    if (N == 0 || N > T) {
        throw ValidationError("NBEP needs 0 < N <= T, got N=" + std::to_string(N) + ", T=" + std::to_string(T));
    }
    std::vector<std::size_t> steps;
    steps.reserve(N);
    for (std::size_t i = 0; i < N; ++i) {
        // floor((i + 0.5) * T / N) in exact integer arithmetic.
        steps.push_back(((2 * i + 1) * T) / (2 * N));
    }
    return steps;
}

Decision epma_decide(const PriceSeries& series, const ProcurementState& state, const StrategyConfig& cfg,
                     std::size_t L_short, std::size_t L_long) {
    if (auto forced = override_for(state, cfg)) {
        return *forced;
    }
    const std::size_t t = state.t;
    if (t < L_long) {
        return {0, Reason::Wait};
    }
    const auto prices = series.prices();
    const bool leads_now = moving_average(prices, t, L_short) >= moving_average(prices, t, L_long);
    // At t = L_long there is no previous long average; the prior regime counts as not leading.
    const bool led_before =
        t > L_long && moving_average(prices, t - 1, L_short) >= moving_average(prices, t - 1, L_long);
    if (leads_now && !led_before) {
        return {1, Reason::Crossover};
    }
    return {0, Reason::Wait};
}

Trend oracle_forecast(std::span<const double> prices, std::size_t t, std::size_t k) {
    if (t >= prices.size()) {
        throw ValidationError("oracle forecast at t=" + std::to_string(t) + " beyond series end");
    }
    if (prices.size() < 2) {
        return Trend::Up;
    }
    // t = 0 has no predecessor; it takes the label of the first difference.
    const std::size_t at = std::max<std::size_t>(t, 1);
    return trend_from(truncated_mean(prices, at, k) >= truncated_mean(prices, at - 1, k));
}

Trend oracle_forecast(const PriceSeries& series, std::size_t t, std::size_t k) {
    return oracle_forecast(series.prices(), t, k);
}

ReferenceCosts reference_costs(const PriceSeries& series, const StrategyConfig& cfg) {
    const std::size_t T = series.size();
    const std::size_t N = cfg.N;
    if (N == 0 || N > T) {
        throw ValidationError("reference costs need 0 < N <= T");
    }
    std::vector<double> sorted(series.prices().begin(), series.prices().end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(N);
    ReferenceCosts ref;
    ref.min = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(N), 0.0) / n + cfg.fee;
    ref.max = std::accumulate(sorted.end() - static_cast<std::ptrdiff_t>(N), sorted.end(), 0.0) / n + cfg.fee;
    ref.mean = std::accumulate(series.prices().begin(), series.prices().end(), 0.0) / static_cast<double>(T) + cfg.fee;
    return ref;
}

MovingAverageForecaster::MovingAverageForecaster(std::size_t L_short, std::size_t L_long)
    : L_short_(L_short), L_long_(L_long) {
    if (L_short == 0 || L_short >= L_long) {
        throw ValidationError("moving-average forecaster needs 0 < L_short < L_long");
    }
}

Trend MovingAverageForecaster::forecast(const PriceSeries& series, std::size_t t) const {
    if (t < L_long_) {
        return Trend::Up;
    }
    return ma_forecast(series, t, L_short_, L_long_);
}

DeepForecaster::DeepForecaster(nn::Mlp model) : model_(std::move(model)) {}

Trend DeepForecaster::forecast(const PriceSeries& series, std::size_t t) const {
    const std::size_t K = model_.input_dim();
    if (t < K) {
        return Trend::Up;
    }
    return nn::dl_forecast(model_, normalize_window(window(series, t, K)));
}

Trend OracleForecaster::forecast(const PriceSeries& series, std::size_t t) const {
    return oracle_forecast(series, t, k_);
}

void NbepStrategy::reset(const PriceSeries& series, const StrategyConfig& cfg) {
    schedule_ = nbep_schedule(series.size(), cfg.N);
}

StepDecision NbepStrategy::step(const PriceSeries&, const ProcurementState& state, const StrategyConfig& cfg) {
    if (auto forced = override_for(state, cfg)) {
        return {*forced, std::nullopt};
    }
    if (std::binary_search(schedule_.begin(), schedule_.end(), state.t)) {
        return {{1, Reason::Scheduled}, std::nullopt};
    }
    return {{0, Reason::Wait}, std::nullopt};
}

EpmaStrategy::EpmaStrategy(std::size_t L_short, std::size_t L_long) : L_short_(L_short), L_long_(L_long) {
    if (L_short == 0 || L_short >= L_long) {
        throw ValidationError("EPMA needs 0 < L_short < L_long");
    }
}

StepDecision EpmaStrategy::step(const PriceSeries& series, const ProcurementState& state, const StrategyConfig& cfg) {
    return {epma_decide(series, state, cfg, L_short_, L_long_), std::nullopt};
}

UpeStrategy::UpeStrategy(std::string name, std::shared_ptr<const Forecaster> forecaster)
    : name_(std::move(name)), forecaster_(std::move(forecaster)) {
    if (!forecaster_) {
        throw ValidationError("UPE strategy needs a forecaster");
    }
}

StepDecision UpeStrategy::step(const PriceSeries& series, const ProcurementState& state, const StrategyConfig& cfg) {
    const Trend f = forecaster_->forecast(series, state.t);
    return {upe_decide(f, state, cfg), f};
}

}  // namespace upe
