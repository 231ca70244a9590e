#include "upe/synthetic.hpp"

#include "upe/random.hpp"

#include <algorithm>
#include <cmath>

namespace upe::synthetic {

std::vector<double> random_walk(std::uint64_t seed, std::size_t T, const RandomWalkParams& params) {
    Rng rng(seed);
    std::vector<double> prices;
    prices.reserve(T);
    double log_price = std::log(params.start);
    double drift = params.drift;
    for (std::size_t t = 0; t < T; ++t) {
        prices.push_back(std::exp(log_price));
        if (params.switch_probability > 0.0 && rng.bernoulli(params.switch_probability)) {
            drift = -drift;
        }
        log_price += drift + params.volatility * rng.normal();
    }
    return prices;
}

std::vector<double> trend_persistent(std::uint64_t seed, std::size_t T, const TrendingParams& params) {
    Rng rng(seed);
    std::vector<double> prices;
    prices.reserve(T);
    double level = params.start;
    double direction = rng.bernoulli(0.5) ? 1.0 : -1.0;
    auto draw_regime = [&] {
        const double extra = params.mean_regime_length - params.min_regime_length;
        // Exponential tail on top of the minimum length.
        const double u = std::max(rng.uniform(), 1e-12);
        return static_cast<std::size_t>(params.min_regime_length - extra * std::log(u));
    };
    auto draw_slope = [&] { return params.slope * rng.uniform(0.5, 1.5); };

    std::size_t left = draw_regime();
    double slope = draw_slope();
    for (std::size_t t = 0; t < T; ++t) {
        prices.push_back(std::max(level + params.noise * rng.normal(), 1.0));
        if (left == 0) {
            direction = -direction;
            slope = draw_slope();
            left = draw_regime();
        }
        --left;
        if (level < params.floor) {
            direction = 1.0;
        }
        level += direction * slope;
    }
    return prices;
}

PriceSeries make_product(int product_year, std::vector<double> prices) {
    return PriceSeries::from_prices(product_year, std::move(prices));
}

}  // namespace upe::synthetic
