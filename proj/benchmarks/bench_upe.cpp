#include <upe/backtest.hpp>
#include <upe/neural.hpp>
#include <upe/random.hpp>
#include <upe/synthetic.hpp>
#include <upe/trend.hpp>

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

using namespace upe;

namespace {

nn::Dataset sample_dataset(std::size_t K) {
    const auto series = synthetic::make_product(2015, synthetic::trend_persistent(3, 750));
    return nn::build_dataset(series, K, 25);
}

void BM_Forward(benchmark::State& state) {
    const auto neurons = static_cast<std::size_t>(state.range(0));
    const auto mlp = nn::init_mlp(nn::layer_dims(50, 2, neurons), 1);
    const auto data = sample_dataset(50);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(nn::forward(mlp, data.inputs[i++ % data.size()]));
    }
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(1024);

void BM_Gradients(benchmark::State& state) {
    const auto neurons = static_cast<std::size_t>(state.range(0));
    const auto mlp = nn::init_mlp(nn::layer_dims(50, 2, neurons), 1);
    const auto data = sample_dataset(50);
    std::vector<std::size_t> rows(32);
    std::iota(rows.begin(), rows.end(), 0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(nn::gradients(mlp, data, rows, 1e-4));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows.size()));
}
BENCHMARK(BM_Gradients)->Arg(64)->Arg(1024);

// One epoch of mini-batch training at the desk preset size.
void BM_TrainEpoch(benchmark::State& state) {
    auto mlp = nn::init_mlp(nn::layer_dims(50, 2, 64), 1);
    const auto data = sample_dataset(50);
    nn::TrainingConfig cfg;
    cfg.epochs = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(nn::train(mlp, data, cfg));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_TrainEpoch);

void BM_Backtest(benchmark::State& state, const char* name) {
    const auto series = synthetic::make_product(2018, synthetic::random_walk(5, 750));
    const ForecastParams params;
    const StrategyConfig cfg;
    for (auto _ : state) {
        auto strategy = make_strategy(name, params);
        benchmark::DoNotOptimize(run(*strategy, series, cfg));
    }
}
BENCHMARK_CAPTURE(BM_Backtest, nbep, "NBEP");
BENCHMARK_CAPTURE(BM_Backtest, epma, "EPMA");
BENCHMARK_CAPTURE(BM_Backtest, upe_ma, "UPE-MA");
BENCHMARK_CAPTURE(BM_Backtest, upe_f, "UPE-F");

void BM_Smooth(benchmark::State& state) {
    const auto prices = synthetic::random_walk(7, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(label_trends(smooth(prices, 25)));
    }
}
BENCHMARK(BM_Smooth)->Arg(750)->Arg(7500);

}  // namespace
BENCHMARK_MAIN();
