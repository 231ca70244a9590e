#pragma once

#include "upe/market_data.hpp"
#include "upe/neural.hpp"
#include "upe/trend.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace upe {

/// Procurement progress at one trading step.
struct ProcurementState {
    std::size_t t = 0;
    std::size_t T = 0;
    double q = 0.0;  // MWh bought so far
    double Q = 0.0;  // MWh to buy over the horizon
};

struct StrategyConfig {
    std::size_t N = 10;      // purchase operations
    double Q = 100000.0;     // MWh
    double dQ = 100.0;       // market resolution, MWh
    double fee = 0.0;        // EUR/MWh added to every purchase
    double u_minus = -0.3;   // uniformity trigger when a downward trend is forecast
    double u_plus = 0.0;     // uniformity trigger when an upward trend is forecast

    [[nodiscard]] double amount() const noexcept { return Q / static_cast<double>(N); }
    void validate() const;
};

/// True when `value` is an integer multiple of `step` (relative tolerance 1e-9).
bool is_multiple_of(double value, double step);

enum class Reason {
    TrendUpTrigger,
    TrendDownTrigger,
    FeasibilityForced,
    Completed,
    Wait,
    Scheduled,  // benchmark schedule (NBEP)
    Crossover,  // upward moving-average crossover (EPMA)
};

std::string_view to_string(Reason r) noexcept;

struct Decision {
    int y = 0;  // 1 buy, 0 wait
    Reason reason = Reason::Wait;

    friend bool operator==(const Decision&, const Decision&) = default;
};

/// Remaining purchase operations n_t = (Q - q_t) / A.
std::size_t remaining_operations(const ProcurementState& state, const StrategyConfig& cfg);

/// (T - t) / T - (Q - q_t) / Q.
double uniformity(const ProcurementState& state);

/// One step of the uniformity-triggered policy, with the completion and
/// deadline-feasibility overrides applied first.
Decision upe_decide(Trend forecast, const ProcurementState& state, const StrategyConfig& cfg);

/// Midpoints floor((i + 0.5) T / N) of N equal intervals.
std::vector<std::size_t> nbep_schedule(std::size_t T, std::size_t N);

/// Buy on an upward crossover of the short moving average over the long one,
/// while fewer than N purchases are done; remaining ones are forced at the end.
Decision epma_decide(const PriceSeries& series, const ProcurementState& state, const StrategyConfig& cfg,
                     std::size_t L_short, std::size_t L_long);

/// Ground-truth trend label from the full series. Outside the labelable range the
/// centered windows are truncated to the available samples.
Trend oracle_forecast(std::span<const double> prices, std::size_t t, std::size_t k);
Trend oracle_forecast(const PriceSeries& series, std::size_t t, std::size_t k);

struct ReferenceCosts {
    double min = 0.0;
    double mean = 0.0;
    double max = 0.0;
};

ReferenceCosts reference_costs(const PriceSeries& series, const StrategyConfig& cfg);

class Forecaster {
public:
    virtual ~Forecaster() = default;
    [[nodiscard]] virtual Trend forecast(const PriceSeries& series, std::size_t t) const = 0;
    /// True when only prices strictly before t are consulted.
    [[nodiscard]] virtual bool causal() const noexcept { return true; }
};

/// Before L_long prices exist the forecast defaults to Up.
class MovingAverageForecaster final : public Forecaster {
public:
    MovingAverageForecaster(std::size_t L_short, std::size_t L_long);
    [[nodiscard]] Trend forecast(const PriceSeries& series, std::size_t t) const override;

private:
    std::size_t L_short_;
    std::size_t L_long_;
};

/// Classifier over the normalized K-window. Before K prices exist the forecast defaults to Up.
class DeepForecaster final : public Forecaster {
public:
    explicit DeepForecaster(nn::Mlp model);
    [[nodiscard]] Trend forecast(const PriceSeries& series, std::size_t t) const override;
    [[nodiscard]] const nn::Mlp& model() const noexcept { return model_; }

private:
    nn::Mlp model_;
};

class OracleForecaster final : public Forecaster {
public:
    explicit OracleForecaster(std::size_t k) : k_(k) {}
    [[nodiscard]] Trend forecast(const PriceSeries& series, std::size_t t) const override;
    [[nodiscard]] bool causal() const noexcept override { return false; }

private:
    std::size_t k_;
};

struct StepDecision {
    Decision decision;
    std::optional<Trend> forecast;
};

/// Per-run policy. One instance drives one backtest at a time.
class Strategy {
public:
    virtual ~Strategy() = default;
    [[nodiscard]] virtual std::string name() const = 0;
    virtual void reset(const PriceSeries& series, const StrategyConfig& cfg) = 0;
    virtual StepDecision step(const PriceSeries& series, const ProcurementState& state, const StrategyConfig& cfg) = 0;
};

class NbepStrategy final : public Strategy {
public:
    [[nodiscard]] std::string name() const override { return "NBEP"; }
    void reset(const PriceSeries& series, const StrategyConfig& cfg) override;
    StepDecision step(const PriceSeries& series, const ProcurementState& state, const StrategyConfig& cfg) override;

private:
    std::vector<std::size_t> schedule_;
};

class EpmaStrategy final : public Strategy {
public:
    EpmaStrategy(std::size_t L_short, std::size_t L_long);
    [[nodiscard]] std::string name() const override { return "EPMA"; }
    void reset(const PriceSeries&, const StrategyConfig&) override {}
    StepDecision step(const PriceSeries& series, const ProcurementState& state, const StrategyConfig& cfg) override;

private:
    std::size_t L_short_;
    std::size_t L_long_;
};

class UpeStrategy final : public Strategy {
public:
    UpeStrategy(std::string name, std::shared_ptr<const Forecaster> forecaster);
    [[nodiscard]] std::string name() const override { return name_; }
    void reset(const PriceSeries&, const StrategyConfig&) override {}
    StepDecision step(const PriceSeries& series, const ProcurementState& state, const StrategyConfig& cfg) override;
    [[nodiscard]] const Forecaster& forecaster() const noexcept { return *forecaster_; }

private:
    std::string name_;
    std::shared_ptr<const Forecaster> forecaster_;
};

}  // namespace upe
