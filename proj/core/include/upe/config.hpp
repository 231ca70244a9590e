#pragma once

#include "upe/backtest.hpp"
#include "upe/strategy.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace upe {

enum class Preset { Paper, Desk };

Preset parse_preset(std::string_view text);
std::string_view to_string(Preset p) noexcept;

/// Every tunable of a run. Field names double as config-file keys and CLI flags.
struct RunConfig {
    Preset preset = Preset::Desk;
    std::size_t K = 50;
    std::size_t k = 25;
    double Q = 100000.0;
    std::size_t N = 10;
    double u_minus = -0.3;
    double u_plus = 0.0;
    std::size_t N_L = 2;
    std::size_t N_N = 64;
    double D_p = 0.2;
    double L_2 = 1e-4;
    double lr = 1e-3;
    std::size_t n = 2000;
    std::size_t B = 32;
    std::uint64_t seed = 42;
    double C_F = 0.0;
    double dQ = 100.0;
    std::size_t L_short = 25;
    std::size_t L_long = 100;
    std::string data_dir;
    unsigned jobs = 1;

    static RunConfig for_preset(Preset p);

    /// Sets one field from its textual value. Throws ValidationError on unknown
    /// keys or unparsable values.
    void set(std::string_view key, std::string_view value);

    /// Checks every field against the invariants of the module that consumes it.
    void validate() const;

    [[nodiscard]] StrategyConfig strategy_config() const;
    [[nodiscard]] nn::TrainingConfig training_config() const;
    [[nodiscard]] ForecastParams forecast_params() const;

    /// Sorted `key=value` lines of every field that influences results
    /// (paths and parallelism excluded).
    [[nodiscard]] std::string canonical() const;
    /// 16 hex digits of the FNV-1a hash of canonical().
    [[nodiscard]] std::string hash() const;

    static const std::vector<std::string>& keys();
};

/// Parses `key = value` lines; `#` starts a comment.
std::map<std::string, std::string> parse_config_text(std::string_view text);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Preset comes from `overrides`, else the file, else desk; then file entries,
/// then overrides are applied on top. The result is validated.
RunConfig resolve_config(const std::map<std::string, std::string>& file_entries,
                         const std::map<std::string, std::string>& overrides);

std::string fnv1a_hex(std::string_view text);

}  // namespace upe
