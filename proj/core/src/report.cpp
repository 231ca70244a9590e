#include "upe/report.hpp"

#include "upe/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace upe::report {

namespace {

std::string full_precision(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) {
        if (!field.empty() && field.back() == '\r') {
            field.pop_back();
        }
        out.push_back(field);
    }
    return out;
}

template <typename T>
T to_number(const std::string& s, std::size_t line) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError(line, "invalid number '" + s + "'");
    }
    return v;
}

// Calls `row(fields, line)` for every data line after the header; records the hash comment.
template <typename RowFn>
void scan_csv(const std::string& text, const std::string& expected_header, std::string& hash, RowFn&& row) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line.front() == '#') {
            const std::string key = "# config_hash=";
            if (line.rfind(key, 0) == 0) {
                hash = line.substr(key.size());
            }
            continue;
        }
        if (!header) {
            if (line != expected_header) {
                throw ParseError(line_no, "expected header '" + expected_header + "'");
            }
            header = true;
            continue;
        }
        row(split(line, ','), line_no);
    }
}

std::string hash_comment(const std::string& hash) { return "# config_hash=" + hash + "\n"; }

std::string trace_name(int year, const std::string& strategy) {
    return "CAL" + std::to_string(year) + "_" + strategy + ".jsonl";
}

}  // namespace

std::string format_cost(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", value);
    return buf;
}

CostRecords to_records(const CaseStudyResult& result, const std::string& config_hash) {
    CostRecords r;
    r.config_hash = config_hash;
    for (const auto& row : result.rows) {
        r.costs[row.product_year] = row.costs;
    }
    return r;
}

SweepRecords to_records(const SweepResult& sweep, const std::string& config_hash) {
    SweepRecords r;
    r.config_hash = config_hash;
    for (const auto& [key, cost] : sweep.product_cost) {
        const auto& [column, N, year] = key;
        r.costs[{N, column, year}] = cost;
    }
    return r;
}

std::string records_to_csv(const CostRecords& records) {
    std::string out = hash_comment(records.config_hash) + "product_year,column,cost_C\n";
    const auto order = report_columns();
    for (const auto& [year, cells] : records.costs) {
        for (const auto& column : order) {
            if (auto it = cells.find(column); it != cells.end()) {
                out += std::to_string(year) + "," + column + "," + full_precision(it->second) + "\n";
            }
        }
    }
    return out;
}

std::string records_to_csv(const SweepRecords& records) {
    std::string out = hash_comment(records.config_hash) + "N,strategy,product_year,cost_C\n";
    const auto order = report_columns();
    std::set<std::size_t> ns;
    std::set<int> years;
    for (const auto& [key, cost] : records.costs) {
        ns.insert(std::get<0>(key));
        years.insert(std::get<2>(key));
    }
    for (std::size_t N : ns) {
        for (const auto& column : order) {
            for (int year : years) {
                if (auto it = records.costs.find({N, column, year}); it != records.costs.end()) {
                    out += std::to_string(N) + "," + column + "," + std::to_string(year) + "," +
                           full_precision(it->second) + "\n";
                }
            }
        }
    }
    return out;
}

CostRecords parse_cost_records(const std::string& text) {
    CostRecords r;
    scan_csv(text, "product_year,column,cost_C", r.config_hash, [&](const auto& f, std::size_t line) {
        if (f.size() != 3) {
            throw ParseError(line, "expected 3 fields");
        }
        r.costs[to_number<int>(f[0], line)][f[1]] = to_number<double>(f[2], line);
    });
    return r;
}

SweepRecords parse_sweep_records(const std::string& text) {
    SweepRecords r;
    scan_csv(text, "N,strategy,product_year,cost_C", r.config_hash, [&](const auto& f, std::size_t line) {
        if (f.size() != 4) {
            throw ParseError(line, "expected 4 fields");
        }
        r.costs[{to_number<std::size_t>(f[0], line), f[1], to_number<int>(f[2], line)}] =
            to_number<double>(f[3], line);
    });
    return r;
}

Table cost_table(const CostRecords& records) {
    Table table;
    const auto columns = report_columns();
    table.csv = hash_comment(records.config_hash) + "product";
    for (const auto& c : columns) {
        table.csv += "," + c;
    }
    table.csv += "\n";
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (const auto& [year, cells] : records.costs) {
        table.csv += std::to_string(year);
        for (const auto& c : columns) {
            if (auto it = cells.find(c); it != cells.end()) {
                table.csv += "," + format_cost(it->second);
                sums[c].first += it->second;
                ++sums[c].second;
            } else {
                table.csv += ",NA";
                table.warnings.push_back("CAL " + std::to_string(year) + ": no value for " + c);
            }
        }
        table.csv += "\n";
    }
    table.csv += "Average";
    for (const auto& c : columns) {
        const auto it = sums.find(c);
        table.csv += (it == sums.end() || it->second.second == 0)
                         ? std::string(",NA")
                         : "," + format_cost(it->second.first / static_cast<double>(it->second.second));
    }
    table.csv += "\n";
    return table;
}

std::string sweep_table(const SweepRecords& records) {
    std::map<std::pair<std::size_t, std::string>, std::pair<double, std::size_t>> sums;
    for (const auto& [key, cost] : records.costs) {
        auto& s = sums[{std::get<0>(key), std::get<1>(key)}];
        s.first += cost;
        ++s.second;
    }
    std::set<std::size_t> ns;
    for (const auto& [key, s] : sums) {
        ns.insert(key.first);
    }
    std::string out = hash_comment(records.config_hash) + "N,strategy,avg_cost\n";
    for (std::size_t N : ns) {
        for (const auto& c : report_columns()) {
            if (auto it = sums.find({N, c}); it != sums.end()) {
                out += std::to_string(N) + "," + c + "," +
                       format_cost(it->second.first / static_cast<double>(it->second.second)) + "\n";
            }
        }
    }
    return out;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out << text;
}

void write_case_study(const std::filesystem::path& dir, const CaseStudyResult& result, const std::string& config_hash) {
    std::filesystem::create_directories(dir / kTraceDir);
    const auto records = to_records(result, config_hash);
    write_text(dir / kResultsFile, records_to_csv(records));
    write_text(dir / kTableFile, cost_table(records).csv);
    for (const auto& row : result.rows) {
        for (const auto& run : row.runs) {
            write_text(dir / kTraceDir / trace_name(row.product_year, run.strategy), trace_to_jsonl(run, config_hash));
        }
    }
}

void write_sweep(const std::filesystem::path& dir, const SweepResult& sweep, const std::string& config_hash) {
    std::filesystem::create_directories(dir);
    const auto records = to_records(sweep, config_hash);
    write_text(dir / kSweepRawFile, records_to_csv(records));
    write_text(dir / kSweepFile, sweep_table(records));
}

ReportOutput build_report(const std::filesystem::path& dir, const std::filesystem::path& out_dir) {
    ReportOutput out;
    const bool has_results = std::filesystem::exists(dir / kResultsFile);
    const bool has_sweep = std::filesystem::exists(dir / kSweepRawFile);
    if (!has_results && !has_sweep) {
        throw DataError("'" + dir.string() + "' holds neither " + kResultsFile + " nor " + kSweepRawFile);
    }
    std::filesystem::create_directories(out_dir);
    if (has_results) {
        const auto table = cost_table(parse_cost_records(read_text(dir / kResultsFile)));
        write_text(out_dir / kTableFile, table.csv);
        out.table_written = true;
        out.warnings = table.warnings;
    }
    if (has_sweep) {
        write_text(out_dir / kSweepFile, sweep_table(parse_sweep_records(read_text(dir / kSweepRawFile))));
        out.sweep_written = true;
    }
    return out;
}

}  // namespace upe::report
