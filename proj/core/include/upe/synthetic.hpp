#pragma once

#include "upe/market_data.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

// Seeded synthetic markets used as fixtures and demo data. These are test
// generators, not models of any real forward market.
namespace upe::synthetic {

struct RandomWalkParams {
    double start = 50.0;         // EUR/MWh
    double volatility = 0.015;   // daily log-return standard deviation
    double drift = 0.0;          // daily log drift, sign flips on regime switches
    double switch_probability = 0.0;
};

/// Geometric random walk; always positive.
std::vector<double> random_walk(std::uint64_t seed, std::size_t T, const RandomWalkParams& params = {});

struct TrendingParams {
    double start = 50.0;
    double slope = 0.12;              // mean |daily move| of the underlying trend, EUR/MWh
    double mean_regime_length = 160;  // trading days
    double min_regime_length = 40;
    double noise = 0.25;              // daily price noise around the trend, EUR/MWh
    double floor = 15.0;              // trends turn upward below this level
};

/// Piecewise-linear trends with geometric regime lengths plus small noise, so
/// trend labels persist for long stretches.
std::vector<double> trend_persistent(std::uint64_t seed, std::size_t T, const TrendingParams& params = {});

PriceSeries make_product(int product_year, std::vector<double> prices);

}  // namespace upe::synthetic
