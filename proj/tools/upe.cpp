// upe: command-line front end for ingestion, training, backtests and reports.

#include <upe/backtest.hpp>
#include <upe/config.hpp>
#include <upe/errors.hpp>
#include <upe/market_data.hpp>
#include <upe/neural.hpp>
#include <upe/report.hpp>
#include <upe/synthetic.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace upe;

namespace {

struct Options {
    std::string config_file;
    std::map<std::string, std::string> values;  // one slot per RunConfig key
    std::map<std::string, CLI::Option*> flags;
};

RunConfig resolve(const Options& opts) {
    std::map<std::string, std::string> file_entries;
    if (!opts.config_file.empty()) {
        file_entries = read_config_file(opts.config_file);
    }
    std::map<std::string, std::string> overrides;
    for (const auto& [key, flag] : opts.flags) {
        if (flag->count() > 0) {
            overrides[key] = opts.values.at(key);
        }
    }
    RunConfig cfg = resolve_config(file_entries, overrides);
    if (cfg.data_dir.empty()) {
        if (const char* env = std::getenv("UPE_DATA_DIR")) {
            cfg.data_dir = env;
        }
    }
    if (cfg.preset == Preset::Paper) {
        std::cerr << "warning: preset 'paper' trains " << cfg.N_L << " x " << cfg.N_N << " networks for " << cfg.n
                  << " epochs; expect hours per product\n";
    }
    return cfg;
}

int parse_int(const std::string& text, const char* what) {
    int value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw ValidationError(std::string("invalid ") + what + " '" + text + "'");
    }
    return value;
}

// "2012-2019" or "2012,2015,2018".
std::vector<int> parse_years(const std::string& text) {
    std::vector<int> years;
    const auto dash = text.find('-');
    if (dash != std::string::npos) {
        const int from = parse_int(text.substr(0, dash), "year range");
        const int to = parse_int(text.substr(dash + 1), "year range");
        if (to < from) {
            throw ValidationError("empty year range '" + text + "'");
        }
        for (int y = from; y <= to; ++y) {
            years.push_back(y);
        }
        return years;
    }
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string::npos) {
            comma = text.size();
        }
        years.push_back(parse_int(text.substr(pos, comma - pos), "year"));
        pos = comma + 1;
    }
    return years;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    for (int v : parse_years(text)) {
        if (v <= 0) {
            throw ValidationError("N values must be positive, got " + std::to_string(v));
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::vector<std::string> parse_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string::npos) {
            comma = text.size();
        }
        out.push_back(text.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return out;
}

fs::path product_path(const fs::path& dir, int year) { return dir / ("CAL" + std::to_string(year) + ".csv"); }

// Product year from the file name (CAL2018.csv), else three years after the first quote.
int infer_year(const fs::path& path, int requested) {
    if (requested != 0) {
        return requested;
    }
    const auto stem = path.stem().string();
    if (stem.size() == 7 && (stem.rfind("CAL", 0) == 0 || stem.rfind("cal", 0) == 0)) {
        int y = 0;
        const auto [ptr, ec] = std::from_chars(stem.data() + 3, stem.data() + 7, y);
        if (ec == std::errc() && ptr == stem.data() + 7) {
            return y;
        }
    }
    const auto probe = load_price_series(path, 0);
    if (probe.size() == 0) {
        throw DataError("no price rows in '" + path.string() + "'");
    }
    return static_cast<int>(probe.date(0).year()) + 3;
}

PriceSeries load_clean(const fs::path& path, int year) {
    auto [series, cleaning] = clean_series(load_price_series(path, year));
    if (!cleaning.empty()) {
        std::cerr << "note: " << path.string() << ": " << cleaning.interpolated_indices.size() << " interpolated, "
                  << cleaning.extrapolated_indices.size() << " extrapolated samples\n";
    }
    return series;
}

fs::path data_dir_of(const RunConfig& cfg) {
    if (cfg.data_dir.empty()) {
        throw ValidationError("no data directory: pass --data_dir or set UPE_DATA_DIR");
    }
    return cfg.data_dir;
}

CaseStudySpec case_study_spec(const RunConfig& cfg, const std::vector<int>& years,
                              const std::vector<std::string>& strategies) {
    const fs::path dir = data_dir_of(cfg);
    CaseStudySpec spec;
    spec.strategy = cfg.strategy_config();
    spec.forecast = cfg.forecast_params();
    spec.jobs = cfg.jobs;
    spec.strategies.clear();
    for (const auto& s : strategies) {
        spec.strategies.push_back(canonical_strategy_name(s));
    }
    for (int year : years) {
        ProductData product{load_clean(product_path(dir, year), year), std::nullopt};
        const auto training = product_path(dir, year - 3);
        if (fs::exists(training)) {
            product.training = load_clean(training, year - 3);
        }
        spec.products.push_back(std::move(product));
    }
    return spec;
}

void add_hash(std::string& json_text, const std::string& hash, int indent = 2) {
    auto j = nlohmann::json::parse(json_text);
    j["config_hash"] = hash;
    json_text = j.dump(indent) + "\n";
}

int cmd_ingest(const Options& opts, const std::string& input, const std::string& output, int year,
               std::string report_path) {
    const RunConfig cfg = resolve(opts);
    const fs::path in(input);
    const fs::path out(output);
    if (fs::exists(out) && fs::equivalent(in, out)) {
        throw ValidationError("output would overwrite the input file '" + input + "'");
    }
    const int product_year = infer_year(in, year);
    const auto [cleaned, cleaning] = clean_series(load_price_series(in, product_year));
    const std::string hash = cfg.hash();
    write_price_series(cleaned, out, "config_hash=" + hash);
    if (report_path.empty()) {
        report_path = (out.parent_path() / (out.stem().string() + ".report.json")).string();
    }
    std::string report = cleaning.to_json();
    add_hash(report, hash);
    report::write_text(report_path, report);
    std::cout << "CAL " << product_year << ": " << cleaned.size() << " samples, "
              << cleaning.interpolated_indices.size() << " interpolated, " << cleaning.extrapolated_indices.size()
              << " extrapolated -> " << out.string() << "\n";
    return 0;
}

int cmd_train(const Options& opts, const std::string& input, int year, const std::string& out_dir) {
    const RunConfig cfg = resolve(opts);
    const fs::path in(input);
    const auto series = load_clean(in, infer_year(in, year));
    const auto trained = train_forecaster(series, cfg.forecast_params());
    const std::string hash = cfg.hash();
    const fs::path dir(out_dir);
    fs::create_directories(dir);

    std::string checkpoint = nn::checkpoint_to_json({trained.model, cfg.training_config(), nn::kNormalizationTag});
    add_hash(checkpoint, hash);
    report::write_text(dir / "model.json", checkpoint);

    nn::write_loss_curve(dir / "loss_curve.csv", trained.loss_curve);
    report::write_text(dir / "loss_curve.csv", "# config_hash=" + hash + "\n" + report::read_text(dir / "loss_curve.csv"));

    nlohmann::json acc;
    acc["config_hash"] = hash;
    acc["product_year"] = series.product_year();
    acc["train_accuracy"] = trained.train_accuracy;
    acc["validation_accuracy"] = trained.validation_accuracy;
    acc["train_examples"] = trained.train_examples;
    acc["validation_examples"] = trained.validation_examples;
    report::write_text(dir / "accuracy.json", acc.dump(2) + "\n");

    std::printf("trained on CAL %d: %zu/%zu examples, train accuracy %.4f, validation accuracy %.4f\n",
                series.product_year(), trained.train_examples, trained.validation_examples, trained.train_accuracy,
                trained.validation_accuracy);
    return 0;
}

int cmd_backtest(const Options& opts, const std::string& input, int year, const std::string& strategy_name,
                 const std::string& checkpoint_path, const std::string& out_dir) {
    const RunConfig cfg = resolve(opts);
    const std::string name = canonical_strategy_name(strategy_name);
    std::optional<nn::Checkpoint> checkpoint;
    if (needs_model(name)) {
        if (checkpoint_path.empty()) {
            throw ValidationError("strategy " + name + " requires --checkpoint (create one with 'upe train')");
        }
        checkpoint = nn::load_checkpoint(checkpoint_path);
    }
    const fs::path in(input);
    const auto series = load_clean(in, infer_year(in, year));
    const auto params = cfg.forecast_params();
    auto strategy = make_strategy(name, params, checkpoint ? &checkpoint->model : nullptr);
    const auto result = run(*strategy, series, cfg.strategy_config(), params.k);

    const std::string hash = cfg.hash();
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    report::write_text(dir / "result.json", result_to_json(result, hash));
    report::write_text(dir / "trace.jsonl", trace_to_jsonl(result, hash));
    std::printf("%s on CAL %d: cost %s EUR/MWh, %zu purchases\n", result.strategy.c_str(), result.product_year,
                report::format_cost(result.cost_C).c_str(), result.purchases.size());
    return 0;
}

int cmd_case_study(const Options& opts, const std::string& years, const std::string& strategies,
                   const std::string& out_dir) {
    const RunConfig cfg = resolve(opts);
    const auto spec = case_study_spec(cfg, parse_years(years), parse_list(strategies));
    const auto result = run_case_study(spec);
    report::write_case_study(out_dir, result, cfg.hash());
    std::cout << report::read_text(fs::path(out_dir) / report::kTableFile);
    return 0;
}

int cmd_sweep(const Options& opts, const std::string& years, const std::string& strategies,
              const std::string& n_values, const std::string& out_dir) {
    const RunConfig cfg = resolve(opts);
    const auto spec = case_study_spec(cfg, parse_years(years), parse_list(strategies));
    const auto sweep = sensitivity_sweep(spec, parse_sizes(n_values));
    report::write_sweep(out_dir, sweep, cfg.hash());
    std::cout << report::read_text(fs::path(out_dir) / report::kSweepFile);
    return 0;
}

int cmd_report(const std::string& dir, std::string out_dir) {
    if (out_dir.empty()) {
        out_dir = dir;
    }
    const auto out = report::build_report(dir, out_dir);
    for (const auto& w : out.warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    if (out.table_written) {
        std::cout << report::read_text(fs::path(out_dir) / report::kTableFile);
    }
    if (out.sweep_written) {
        std::cout << report::read_text(fs::path(out_dir) / report::kSweepFile);
    }
    return 0;
}

int cmd_synth(const std::string& years, std::uint64_t seed, std::size_t length, const std::string& out_dir) {
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    for (int year : parse_years(years)) {
        const auto series =
            synthetic::make_product(year, synthetic::trend_persistent(seed + static_cast<std::uint64_t>(year), length));
        write_price_series(series, product_path(dir, year),
                           "synthetic trend-persistent series, seed " + std::to_string(seed) + " + year");
    }
    std::cout << "wrote " << parse_years(years).size() << " products to " << dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"UPE electricity procurement: ingest, train, backtest, case-study, sweep, report"};
    app.require_subcommand(1);
    app.fallthrough();

    Options opts;
    app.add_option("--config", opts.config_file, "key = value config file; flags override its entries");
    for (const auto& key : RunConfig::keys()) {
        opts.flags[key] = app.add_option("--" + key, opts.values[key], "config key " + key);
    }

    int year = 0;
    std::string input;
    std::string output;
    std::string out_dir;
    std::string report_path;
    std::string strategy;
    std::string checkpoint;
    std::string years = "2012-2019";
    std::string strategies = "NBEP,EPMA,UPE-MA,UPE-DL";
    std::string n_values = "5,10,20,40,50";
    std::uint64_t synth_seed = 1;
    std::size_t synth_length = 750;

    auto* ingest = app.add_subcommand("ingest", "clean a date,price CSV and write a cleaning report");
    ingest->add_option("input", input, "raw CSV")->required();
    ingest->add_option("output", output, "cleaned CSV")->required();
    ingest->add_option("--year", year, "product year (default: from file name or first date + 3)");
    ingest->add_option("--report", report_path, "cleaning report path (default: <output>.report.json)");

    auto* train = app.add_subcommand("train", "train the trend classifier on one product");
    train->add_option("input", input, "training product CSV")->required();
    train->add_option("--year", year, "product year");
    train->add_option("--out", out_dir, "output directory")->required();

    auto* backtest = app.add_subcommand("backtest", "simulate one strategy over one product");
    backtest->add_option("input", input, "test product CSV")->required();
    backtest->add_option("--year", year, "product year");
    backtest->add_option("--strategy", strategy, "nbep, epma, upe-ma, upe-dl or upe-f")->required();
    backtest->add_option("--checkpoint", checkpoint, "model.json from 'upe train'");
    backtest->add_option("--out", out_dir, "output directory")->required();

    auto* case_study = app.add_subcommand("case-study", "all strategies over CAL<year>.csv products in the data directory");
    case_study->add_option("--years", years, "product years, e.g. 2012-2019 or 2012,2015");
    case_study->add_option("--strategies", strategies, "comma-separated strategy names");
    case_study->add_option("--out", out_dir, "output directory")->required();

    auto* sweep = app.add_subcommand("sweep", "repeat the case study over several N");
    sweep->add_option("--years", years, "product years");
    sweep->add_option("--strategies", strategies, "comma-separated strategy names");
    sweep->add_option("--N-values", n_values, "comma-separated purchase counts");
    sweep->add_option("--out", out_dir, "output directory")->required();

    auto* report_cmd = app.add_subcommand("report", "rebuild table.csv and sweep.csv from a run directory");
    report_cmd->add_option("dir", input, "case-study or sweep directory")->required();
    report_cmd->add_option("--out", out_dir, "output directory (default: the run directory)");

    auto* synth = app.add_subcommand("synth", "write synthetic trend-persistent products for demos");
    synth->add_option("--years", years, "product years");
    synth->add_option("--seed", synth_seed, "base seed; each product adds its year");
    synth->add_option("--length", synth_length, "trading days per product");
    synth->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::Validation);
    }

    try {
        if (*ingest) {
            return cmd_ingest(opts, input, output, year, report_path);
        }
        if (*train) {
            return cmd_train(opts, input, year, out_dir);
        }
        if (*backtest) {
            return cmd_backtest(opts, input, year, strategy, checkpoint, out_dir);
        }
        if (*case_study) {
            return cmd_case_study(opts, years, strategies, out_dir);
        }
        if (*sweep) {
            return cmd_sweep(opts, years, strategies, n_values, out_dir);
        }
        if (*report_cmd) {
            return cmd_report(input, out_dir);
        }
        if (*synth) {
            return cmd_synth(years, synth_seed, synth_length, out_dir);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ErrorKind::Data);
    }
    return 0;
}
