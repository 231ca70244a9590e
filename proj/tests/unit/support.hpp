#pragma once

#include <upe/market_data.hpp>
#include <upe/random.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace testing {

inline std::vector<double> linear(std::size_t T, double start, double step) {
    std::vector<double> p(T);
    for (std::size_t t = 0; t < T; ++t) {
        p[t] = start + step * static_cast<double>(t);
    }
    return p;
}

inline upe::PriceSeries series_of(std::vector<double> prices, int year = 2015) {
    return upe::PriceSeries::from_prices(year, std::move(prices));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("upe_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
