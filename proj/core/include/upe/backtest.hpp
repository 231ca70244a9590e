#pragma once

#include "upe/market_data.hpp"
#include "upe/neural.hpp"
#include "upe/strategy.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <tuple>
#include <string>
#include <vector>

namespace upe {

struct Purchase {
    std::size_t t = 0;
    double price = 0.0;
    double amount = 0.0;
};

struct TraceRecord {
    std::size_t t = 0;
    double price = 0.0;
    std::optional<Trend> forecast;
    double u = 0.0;
    Decision decision;
    double q = 0.0;  // bought before this step's decision
};

struct BacktestResult {
    std::string strategy;
    int product_year = 0;
    double cost_C = 0.0;      // EUR/MWh
    double total_cost = 0.0;  // EUR
    std::vector<Purchase> purchases;
    std::vector<TraceRecord> trace;
    std::optional<double> forecaster_accuracy;
};

/// Simulates `strategy` over every step of `series`. Throws ConstraintViolation
/// if the strategy buys past completion, lets the deadline become infeasible,
/// or ends with q_T != Q. `label_order` is the filter order used to score forecasts.
BacktestResult run(Strategy& strategy, const PriceSeries& series, const StrategyConfig& cfg,
                   std::size_t label_order = 25);

/// Trace replay of the accounting identity: sum of A * (p_t + C_F) over buys.
double replay_total_cost(const BacktestResult& result, const StrategyConfig& cfg);

/// One JSON object per step: t, price, forecast, u_t, y_t, reason, q_t.
std::string trace_to_jsonl(const BacktestResult& result, const std::string& config_hash);
std::string result_to_json(const BacktestResult& result, const std::string& config_hash);

// Strategy and reference column names, in reporting order.
inline const std::vector<std::string> kStrategyColumns{"NBEP", "EPMA", "UPE-MA", "UPE-DL"};
inline const std::vector<std::string> kReferenceColumns{"Min", "Mean", "Max", "UPE-F"};
std::vector<std::string> report_columns();

struct ForecastParams {
    std::size_t K = 50;        // input window
    std::size_t k = 25;        // label filter order
    std::size_t L_short = 25;
    std::size_t L_long = 100;
    std::size_t hidden_layers = 2;
    std::size_t neurons = 64;
    nn::TrainingConfig training;
    double validation_fraction = 0.2;  // chronological tail held out

    void validate() const;
};

struct TrainedForecaster {
    nn::Mlp model;
    std::vector<double> loss_curve;
    double train_accuracy = 0.0;
    double validation_accuracy = 0.0;
    std::size_t train_examples = 0;
    std::size_t validation_examples = 0;
};

/// Builds the labelled dataset from `series`, holds out the chronological tail
/// and trains a fresh classifier seeded from params.training.seed.
TrainedForecaster train_forecaster(const PriceSeries& series, const ForecastParams& params);

/// Instantiates a named strategy: NBEP, EPMA, UPE-MA, UPE-DL (needs `model`), UPE-F.
std::unique_ptr<Strategy> make_strategy(const std::string& name, const ForecastParams& params,
                                        const nn::Mlp* model = nullptr);
bool needs_model(const std::string& name);
/// Canonical column name for user spellings such as `upe-dl` or `nbep`.
std::string canonical_strategy_name(const std::string& name);

struct ProductData {
    PriceSeries test;
    std::optional<PriceSeries> training;  // the product three years earlier
};

struct CaseStudySpec {
    std::vector<ProductData> products;
    StrategyConfig strategy;
    ForecastParams forecast;
    std::vector<std::string> strategies{kStrategyColumns};
    unsigned jobs = 1;

    void validate() const;
};

struct CaseStudyRow {
    int product_year = 0;
    std::map<std::string, double> costs;  // column -> cost_C
    std::vector<BacktestResult> runs;
    std::optional<double> dl_validation_accuracy;
};

struct CaseStudyResult {
    std::vector<std::string> columns;
    std::vector<CaseStudyRow> rows;  // sorted by product year

    /// Column means over rows holding that column.
    [[nodiscard]] std::map<std::string, double> averages() const;
};

/// Trained models per product year, reusable across runs with different N.
using ModelCache = std::map<int, TrainedForecaster>;

ModelCache prepare_models(const CaseStudySpec& spec);
CaseStudyResult run_case_study(const CaseStudySpec& spec);
CaseStudyResult run_case_study(const CaseStudySpec& spec, const ModelCache& models);

struct SweepResult {
    std::vector<std::size_t> n_values;
    std::vector<std::string> columns;
    std::map<std::pair<std::string, std::size_t>, double> average_cost;
    // Per-product costs, keyed by (column, N, product year).
    std::map<std::tuple<std::string, std::size_t, int>, double> product_cost;
};

/// Repeats the case study for each N. Throws ValidationError listing every N
/// that breaks the dQ divisibility rule before any simulation runs.
SweepResult sensitivity_sweep(const CaseStudySpec& spec, const std::vector<std::size_t>& n_values);

}  // namespace upe
