#pragma once

#include "upe/backtest.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace upe::report {

/// Long-format cost records: one (product, column, cost) per line.
struct CostRecords {
    std::string config_hash;
    std::map<int, std::map<std::string, double>> costs;  // year -> column -> cost_C
};

struct SweepRecords {
    std::string config_hash;
    std::map<std::tuple<std::size_t, std::string, int>, double> costs;  // (N, column, year) -> cost_C
};

struct Table {
    std::string csv;
    std::vector<std::string> warnings;  // one per absent cell
};

CostRecords to_records(const CaseStudyResult& result, const std::string& config_hash);
SweepRecords to_records(const SweepResult& sweep, const std::string& config_hash);

std::string records_to_csv(const CostRecords& records);
std::string records_to_csv(const SweepRecords& records);
CostRecords parse_cost_records(const std::string& text);
SweepRecords parse_sweep_records(const std::string& text);

/// Product rows by the fixed strategy/reference columns plus an Average row.
/// Absent cells print as NA and are skipped by the average.
Table cost_table(const CostRecords& records);

/// `N,strategy,avg_cost` rows, N ascending, columns in reporting order.
std::string sweep_table(const SweepRecords& records);

/// Costs are printed with three decimals, like the published comparison table.
std::string format_cost(double value);

// File names inside a case-study directory.
inline constexpr const char* kResultsFile = "results.csv";
inline constexpr const char* kTableFile = "table.csv";
inline constexpr const char* kSweepRawFile = "sweep_raw.csv";
inline constexpr const char* kSweepFile = "sweep.csv";
inline constexpr const char* kTraceDir = "traces";

/// Writes results.csv, table.csv and one JSONL trace per (product, strategy).
void write_case_study(const std::filesystem::path& dir, const CaseStudyResult& result, const std::string& config_hash);
void write_sweep(const std::filesystem::path& dir, const SweepResult& sweep, const std::string& config_hash);

struct ReportOutput {
    bool table_written = false;
    bool sweep_written = false;
    std::vector<std::string> warnings;
};

/// Rebuilds table.csv and sweep.csv from the long-format files found in `dir`.
ReportOutput build_report(const std::filesystem::path& dir, const std::filesystem::path& out_dir);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace upe::report
