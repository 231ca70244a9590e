#include "upe/backtest.hpp"

#include "upe/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <future>
#include <set>

namespace upe {

namespace {

nlohmann::json record_json(const TraceRecord& r) {
    nlohmann::json j;
    j["t"] = r.t;
    j["price"] = r.price;
    j["forecast"] = r.forecast ? nlohmann::json(to_int(*r.forecast)) : nlohmann::json(nullptr);
    j["u_t"] = r.u;
    j["y_t"] = r.decision.y;
    j["reason"] = std::string(to_string(r.decision.reason));
    j["q_t"] = r.q;
    return j;
}

// Runs `fn(i)` for i in [0, n), at most `jobs` at a time. Results land by index.
template <typename Fn>
void for_each_index(std::size_t n, unsigned jobs, Fn&& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    for (std::size_t start = 0; start < n; start += jobs) {
        std::vector<std::future<void>> running;
        const std::size_t end = std::min(n, start + jobs);
        for (std::size_t i = start; i < end; ++i) {
            running.push_back(std::async(std::launch::async, [&fn, i] { fn(i); }));
        }
        for (auto& f : running) {
            f.get();
        }
    }
}

std::vector<std::string> ordered_columns(const std::vector<std::string>& strategies) {
    std::set<std::string> wanted;
    for (const auto& s : strategies) {
        wanted.insert(canonical_strategy_name(s));
    }
    std::vector<std::string> out;
    for (const auto& c : kStrategyColumns) {
        if (wanted.count(c) != 0) {
            out.push_back(c);
        }
    }
    for (const auto& c : kReferenceColumns) {
        out.push_back(c);
    }
    return out;
}

}  // namespace

BacktestResult run(Strategy& strategy, const PriceSeries& series, const StrategyConfig& cfg, std::size_t label_order) {
    cfg.validate();
    const std::size_t T = series.size();
    if (cfg.N > T) {
        throw ValidationError("N=" + std::to_string(cfg.N) + " purchases cannot fit in " + std::to_string(T) +
                              " trading steps");
    }
    for (double p : series.prices()) {
        if (!std::isfinite(p)) {
            throw DataError("series for CAL " + std::to_string(series.product_year()) +
                            " contains missing samples; clean it first");
        }
    }
    strategy.reset(series, cfg);

    const double A = cfg.amount();
    BacktestResult result;
    result.strategy = strategy.name();
    result.product_year = series.product_year();
    result.trace.reserve(T);

    std::size_t bought = 0;
    for (std::size_t t = 0; t < T; ++t) {
        const ProcurementState state{t, T, static_cast<double>(bought) * A, cfg.Q};
        const std::size_t remaining = cfg.N - bought;
        if (remaining > T - t) {
            throw ConstraintViolation(result.strategy + ": " + std::to_string(remaining) +
                                      " purchases left with only " + std::to_string(T - t) + " steps at t=" +
                                      std::to_string(t));
        }
        const StepDecision step = strategy.step(series, state, cfg);
        if (step.decision.y != 0 && step.decision.y != 1) {
            throw ConstraintViolation(result.strategy + ": decision outside {0, 1} at t=" + std::to_string(t));
        }
        if (step.decision.y == 1 && remaining == 0) {
            throw ConstraintViolation(result.strategy + ": buy after completion at t=" + std::to_string(t));
        }
        result.trace.push_back({t, series.price(t), step.forecast, uniformity(state), step.decision, state.q});
        if (step.decision.y == 1) {
            result.purchases.push_back({t, series.price(t), A});
            result.total_cost += A * (series.price(t) + cfg.fee);
            ++bought;
        }
    }
    if (bought != cfg.N) {
        throw ConstraintViolation(result.strategy + ": ended with " + std::to_string(bought) + " of " +
                                  std::to_string(cfg.N) + " purchases");
    }
    result.cost_C = result.total_cost / cfg.Q;

    if (T >= 2 * label_order + 2 && !result.trace.empty() && result.trace.front().forecast) {
        const auto labels = label_trends(smooth(series, label_order));
        std::vector<Trend> truth;
        std::vector<Trend> predicted;
        for (const auto& l : labels) {
            truth.push_back(l.label);
            predicted.push_back(*result.trace[l.t].forecast);
        }
        result.forecaster_accuracy = accuracy(predicted, truth);
    }
    return result;
}

double replay_total_cost(const BacktestResult& result, const StrategyConfig& cfg) {
    double total = 0.0;
    for (const auto& r : result.trace) {
        if (r.decision.y == 1) {
            total += cfg.amount() * (r.price + cfg.fee);
        }
    }
    return total;
}

std::string trace_to_jsonl(const BacktestResult& result, const std::string& config_hash) {
    std::string out;
    nlohmann::json header{{"header", true},
                          {"config_hash", config_hash},
                          {"strategy", result.strategy},
                          {"product_year", result.product_year}};
    out += header.dump();
    out += '\n';
    for (const auto& r : result.trace) {
        out += record_json(r).dump();
        out += '\n';
    }
    return out;
}

std::string result_to_json(const BacktestResult& result, const std::string& config_hash) {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["strategy"] = result.strategy;
    j["product_year"] = result.product_year;
    j["cost_C"] = result.cost_C;
    j["total_cost"] = result.total_cost;
    auto purchases = nlohmann::json::array();
    for (const auto& p : result.purchases) {
        purchases.push_back({{"t", p.t}, {"price", p.price}, {"amount", p.amount}});
    }
    j["purchases"] = std::move(purchases);
    j["forecaster_accuracy"] =
        result.forecaster_accuracy ? nlohmann::json(*result.forecaster_accuracy) : nlohmann::json(nullptr);
    return j.dump(2);
}

std::vector<std::string> report_columns() {
    std::vector<std::string> out(kStrategyColumns);
    out.insert(out.end(), kReferenceColumns.begin(), kReferenceColumns.end());
    return out;
}

void ForecastParams::validate() const {
    if (K == 0 || k == 0) {
        throw ValidationError("K and k must be positive");
    }
    if (L_short == 0 || L_short >= L_long) {
        throw ValidationError("moving averages need 0 < L_short < L_long");
    }
    if (hidden_layers == 0 || neurons == 0) {
        throw ValidationError("classifier needs at least one hidden layer of positive width");
    }
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw ValidationError("validation fraction must lie in [0, 1)");
    }
    training.validate();
}

TrainedForecaster train_forecaster(const PriceSeries& series, const ForecastParams& params) {
    params.validate();
    const auto data = nn::build_dataset(series, params.K, params.k);
    const auto n_val = static_cast<std::size_t>(static_cast<double>(data.size()) * params.validation_fraction);
    const std::size_t n_train = data.size() - n_val;
    const auto train_set = data.slice(0, n_train);
    const auto val_set = data.slice(n_train, data.size());

    const auto dims = nn::layer_dims(params.K, params.hidden_layers, params.neurons);
    auto trained = nn::train(nn::init_mlp(dims, params.training.seed), train_set, params.training);

    TrainedForecaster out;
    out.train_accuracy = nn::dataset_accuracy(trained.model, train_set);
    out.validation_accuracy = val_set.size() > 0 ? nn::dataset_accuracy(trained.model, val_set) : 0.0;
    out.train_examples = train_set.size();
    out.validation_examples = val_set.size();
    out.loss_curve = std::move(trained.loss_curve);
    out.model = std::move(trained.model);
    return out;
}

std::string canonical_strategy_name(const std::string& name) {
    std::string upper(name);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(c == '_' ? '-' : std::toupper(c)); });
    static const std::set<std::string> known{"NBEP", "EPMA", "UPE-MA", "UPE-DL", "UPE-F"};
    if (known.count(upper) == 0) {
        throw ValidationError("unknown strategy '" + name + "' (expected nbep, epma, upe-ma, upe-dl, upe-f)");
    }
    return upper;
}

bool needs_model(const std::string& name) { return canonical_strategy_name(name) == "UPE-DL"; }

std::unique_ptr<Strategy> make_strategy(const std::string& name, const ForecastParams& params, const nn::Mlp* model) {
    const auto id = canonical_strategy_name(name);
    if (id == "NBEP") {
        return std::make_unique<NbepStrategy>();
    }
    if (id == "EPMA") {
        return std::make_unique<EpmaStrategy>(params.L_short, params.L_long);
    }
    if (id == "UPE-MA") {
        return std::make_unique<UpeStrategy>(id, std::make_shared<MovingAverageForecaster>(params.L_short, params.L_long));
    }
    if (id == "UPE-F") {
        return std::make_unique<UpeStrategy>(id, std::make_shared<OracleForecaster>(params.k));
    }
    if (model == nullptr) {
        throw ValidationError("strategy UPE-DL requires a trained model checkpoint");
    }
    if (model->input_dim() != params.K) {
        throw ValidationError("model input width " + std::to_string(model->input_dim()) + " differs from K=" +
                              std::to_string(params.K));
    }
    return std::make_unique<UpeStrategy>(id, std::make_shared<DeepForecaster>(*model));
}

void CaseStudySpec::validate() const {
    if (products.empty()) {
        throw ValidationError("case study has no products");
    }
    strategy.validate();
    forecast.validate();
    const bool dl = std::any_of(strategies.begin(), strategies.end(), [](const auto& s) { return needs_model(s); });
    std::set<int> years;
    for (const auto& p : products) {
        if (!years.insert(p.test.product_year()).second) {
            throw ValidationError("product CAL " + std::to_string(p.test.product_year()) + " listed twice");
        }
        if (p.training && p.training->product_year() != p.test.product_year() - 3) {
            throw ValidationError("training product for CAL " + std::to_string(p.test.product_year()) +
                                  " must be CAL " + std::to_string(p.test.product_year() - 3));
        }
        if (dl && !p.training) {
            throw ValidationError("missing training product CAL " + std::to_string(p.test.product_year() - 3) +
                                  " for CAL " + std::to_string(p.test.product_year()));
        }
    }
}

std::map<std::string, double> CaseStudyResult::averages() const {
    std::map<std::string, double> sums;
    std::map<std::string, std::size_t> counts;
    for (const auto& row : rows) {
        for (const auto& [col, cost] : row.costs) {
            sums[col] += cost;
            ++counts[col];
        }
    }
    for (auto& [col, sum] : sums) {
        sum /= static_cast<double>(counts[col]);
    }
    return sums;
}

ModelCache prepare_models(const CaseStudySpec& spec) {
    spec.validate();
    ModelCache cache;
    const bool dl = std::any_of(spec.strategies.begin(), spec.strategies.end(),
                                [](const auto& s) { return needs_model(s); });
    if (!dl) {
        return cache;
    }
    std::vector<TrainedForecaster> trained(spec.products.size());
    for_each_index(spec.products.size(), spec.jobs, [&](std::size_t i) {
        trained[i] = train_forecaster(*spec.products[i].training, spec.forecast);
    });
    for (std::size_t i = 0; i < trained.size(); ++i) {
        cache.emplace(spec.products[i].test.product_year(), std::move(trained[i]));
    }
    return cache;
}

CaseStudyResult run_case_study(const CaseStudySpec& spec) { return run_case_study(spec, prepare_models(spec)); }

CaseStudyResult run_case_study(const CaseStudySpec& spec, const ModelCache& models) {
    spec.validate();
    CaseStudyResult result;
    result.columns = ordered_columns(spec.strategies);
    std::vector<std::string> runnable;
    for (const auto& c : result.columns) {
        if (c != "Min" && c != "Mean" && c != "Max") {
            runnable.push_back(c);
        }
    }

    result.rows.resize(spec.products.size());
    for_each_index(spec.products.size(), spec.jobs, [&](std::size_t i) {
        const auto& product = spec.products[i];
        CaseStudyRow row;
        row.product_year = product.test.product_year();
        const nn::Mlp* model = nullptr;
        if (auto it = models.find(row.product_year); it != models.end()) {
            model = &it->second.model;
            row.dl_validation_accuracy = it->second.validation_accuracy;
        }
        for (const auto& name : runnable) {
            if (needs_model(name) && model == nullptr) {
                throw ValidationError("no trained model for CAL " + std::to_string(row.product_year));
            }
            auto strategy = make_strategy(name, spec.forecast, model);
            auto r = run(*strategy, product.test, spec.strategy, spec.forecast.k);
            row.costs[name] = r.cost_C;
            row.runs.push_back(std::move(r));
        }
        const auto ref = reference_costs(product.test, spec.strategy);
        row.costs["Min"] = ref.min;
        row.costs["Mean"] = ref.mean;
        row.costs["Max"] = ref.max;
        result.rows[i] = std::move(row);
    });
    std::sort(result.rows.begin(), result.rows.end(),
              [](const CaseStudyRow& a, const CaseStudyRow& b) { return a.product_year < b.product_year; });
    return result;
}

SweepResult sensitivity_sweep(const CaseStudySpec& spec, const std::vector<std::size_t>& n_values) {
    if (n_values.empty()) {
        throw ValidationError("sweep needs at least one value of N");
    }
    std::vector<std::size_t> offending;
    for (std::size_t N : n_values) {
        StrategyConfig cfg = spec.strategy;
        cfg.N = N;
        try {
            cfg.validate();
        } catch (const ValidationError&) {
            offending.push_back(N);
        }
    }
    if (!offending.empty()) {
        std::string list;
        for (std::size_t N : offending) {
            list += (list.empty() ? "" : ", ") + std::to_string(N);
        }
        throw ValidationError("N values incompatible with Q=" + std::to_string(spec.strategy.Q) +
                              " and dQ=" + std::to_string(spec.strategy.dQ) + ": " + list);
    }

    const auto models = prepare_models(spec);
    SweepResult sweep;
    sweep.n_values = n_values;
    for (std::size_t N : n_values) {
        CaseStudySpec per_n = spec;
        per_n.strategy.N = N;
        const auto table = run_case_study(per_n, models);
        sweep.columns = table.columns;
        for (const auto& [col, avg] : table.averages()) {
            sweep.average_cost[{col, N}] = avg;
        }
        for (const auto& row : table.rows) {
            for (const auto& [col, cost] : row.costs) {
                sweep.product_cost[{col, N, row.product_year}] = cost;
            }
        }
    }
    return sweep;
}

}  // namespace upe
