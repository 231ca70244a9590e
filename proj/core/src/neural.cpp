#include "upe/neural.hpp"

#include "upe/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace upe::nn {

namespace {

// Activations of one mini-batch, row-major B x width per layer.
struct BatchPass {
    std::size_t batch = 0;
    std::vector<std::vector<double>> activations;  // [0] = inputs, [l+1] = output of layer l (post-mask)
    std::vector<std::vector<double>> pre;          // pre-activation of every layer
    std::vector<Probabilities> probs;
};

std::vector<double> gather_inputs(const Dataset& data, std::span<const std::size_t> rows, std::size_t width) {
    std::vector<double> x(rows.size() * width);
    for (std::size_t b = 0; b < rows.size(); ++b) {
        const auto& in = data.inputs.at(rows[b]);
        if (in.size() != width) {
            throw ValidationError("example " + std::to_string(rows[b]) + " has " + std::to_string(in.size()) +
                                  " inputs, model expects " + std::to_string(width));
        }
        std::copy(in.begin(), in.end(), x.begin() + static_cast<std::ptrdiff_t>(b * width));
    }
    return x;
}

void check_masks(const Mlp& mlp, const DropoutMasks* masks, std::size_t batch) {
    if (masks == nullptr || masks->hidden.empty()) {
        return;
    }
    if (masks->hidden.size() != mlp.num_hidden()) {
        throw ValidationError("dropout masks do not match the number of hidden layers");
    }
    for (std::size_t l = 0; l < mlp.num_hidden(); ++l) {
        if (masks->hidden[l].size() != batch * mlp.dims()[l + 1]) {
            throw ValidationError("dropout mask shape mismatch at hidden layer " + std::to_string(l));
        }
    }
}

BatchPass run_batch(const Mlp& mlp, std::vector<double> inputs, std::size_t batch, const DropoutMasks* masks) {
    check_masks(mlp, masks, batch);
    const bool use_masks = masks != nullptr && !masks->hidden.empty();
    const auto& layers = mlp.layers();
    BatchPass pass;
    pass.batch = batch;
    pass.activations.reserve(layers.size() + 1);
    pass.pre.reserve(layers.size());
    pass.activations.push_back(std::move(inputs));

    for (std::size_t l = 0; l < layers.size(); ++l) {
        const Layer& layer = layers[l];
        const auto& a = pass.activations.back();
        std::vector<double> z(batch * layer.out);
        for (std::size_t b = 0; b < batch; ++b) {
            const double* row = a.data() + b * layer.in;
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double* w = layer.weights.data() + o * layer.in;
                double sum = layer.bias[o];
                for (std::size_t i = 0; i < layer.in; ++i) {
                    sum += w[i] * row[i];
                }
                z[b * layer.out + o] = sum;
            }
        }
        const bool hidden = l + 1 < layers.size();
        if (hidden) {
            std::vector<double> h(z.size());
            for (std::size_t j = 0; j < z.size(); ++j) {
                h[j] = leaky_relu(z[j]);
            }
            if (use_masks) {
                const auto& m = masks->hidden[l];
                for (std::size_t j = 0; j < h.size(); ++j) {
                    h[j] *= m[j];
                }
            }
            pass.pre.push_back(std::move(z));
            pass.activations.push_back(std::move(h));
        } else {
            pass.probs.resize(batch);
            for (std::size_t b = 0; b < batch; ++b) {
                const auto p = softmax(std::span<const double>(z.data() + b * kNumClasses, kNumClasses));
                pass.probs[b] = {p[0], p[1]};
            }
            pass.pre.push_back(std::move(z));
        }
    }
    return pass;
}

std::size_t class_index(Trend t) noexcept { return t == Trend::Up ? kUpClass : kDownClass; }

double data_loss(const BatchPass& pass, const Dataset& data, std::span<const std::size_t> rows) {
    double sum = 0.0;
    for (std::size_t b = 0; b < rows.size(); ++b) {
        const double p = pass.probs[b][class_index(data.labels[rows[b]])];
        sum += -std::log(std::max(p, kLogFloor));
    }
    return sum / static_cast<double>(rows.size());
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) {
        return out;
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        sum += out[i];
    }
    for (auto& v : out) {
        v /= sum;
    }
    return out;
}

Mlp::Mlp(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 3) {
        throw ValidationError("classifier needs at least one hidden layer");
    }
    if (std::any_of(dims_.begin(), dims_.end(), [](std::size_t d) { return d == 0; })) {
        throw ValidationError("layer dimensions must be positive");
    }
    if (dims_.back() != kNumClasses) {
        throw ValidationError("output layer must have exactly 2 units");
    }
    layers_.reserve(dims_.size() - 1);
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        layers_.emplace_back(dims_[l], dims_[l + 1]);
    }
}

std::size_t Mlp::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
        n += layer.weights.size() + layer.bias.size();
    }
    return n;
}

double Mlp::weight_norm_squared() const noexcept {
    double s = 0.0;
    for (const auto& layer : layers_) {
        for (double w : layer.weights) {
            s += w * w;
        }
    }
    return s;
}

ParameterSet zeros_like(const Mlp& mlp) {
    ParameterSet out;
    out.reserve(mlp.layers().size());
    for (const auto& layer : mlp.layers()) {
        out.emplace_back(layer.in, layer.out);
    }
    return out;
}

std::vector<std::size_t> layer_dims(std::size_t input, std::size_t hidden_layers, std::size_t neurons) {
    std::vector<std::size_t> dims{input};
    dims.insert(dims.end(), hidden_layers, neurons);
    dims.push_back(kNumClasses);
    return dims;
}

Mlp init_mlp(std::span<const std::size_t> dims, std::uint64_t seed) {
    Mlp mlp(std::vector<std::size_t>(dims.begin(), dims.end()));
    Rng rng(seed);
    for (auto& layer : mlp.layers()) {
        const double half_width = std::sqrt(6.0 / static_cast<double>(layer.in));
        for (auto& w : layer.weights) {
            w = rng.uniform(-half_width, half_width);
        }
    }
    return mlp;
}

void TrainingConfig::validate() const {
    if (!(learning_rate > 0.0)) {
        throw ValidationError("learning rate must be positive");
    }
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
        throw ValidationError("dropout probability must lie in [0, 1)");
    }
    if (!(l2_factor >= 0.0)) {
        throw ValidationError("L2 factor must be non-negative");
    }
    if (batch_size == 0) {
        throw ValidationError("batch size must be positive");
    }
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0 && adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
        throw ValidationError("ADAM betas must lie in (0, 1)");
    }
    if (!(adam_epsilon > 0.0)) {
        throw ValidationError("ADAM epsilon must be positive");
    }
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
    Dataset out;
    end = std::min(end, size());
    for (std::size_t i = begin; i < end; ++i) {
        out.inputs.push_back(inputs[i]);
        out.labels.push_back(labels[i]);
        out.steps.push_back(steps[i]);
    }
    return out;
}

Dataset build_dataset(const PriceSeries& series, std::size_t K, std::size_t k) {
    const std::size_t T = series.size();
    const std::size_t first = std::max(K, k + 1);
    if (K == 0 || T < first + k + 1) {
        throw InsufficientDataError("series of " + std::to_string(T) + " prices too short for K=" +
                                    std::to_string(K) + ", k=" + std::to_string(k));
    }
    const auto sm = smooth(series, k);
    Dataset data;
    for (std::size_t t = first; t + k + 1 <= T; ++t) {
        data.inputs.push_back(normalize_window(window(series, t, K)).values);
        data.labels.push_back(trend_from(sm.at(t) >= sm.at(t - 1)));
        data.steps.push_back(t);
    }
    return data;
}

DropoutMasks sample_masks(const Mlp& mlp, std::size_t batch, double p, Rng& rng) {
    DropoutMasks masks;
    if (p <= 0.0) {
        return masks;
    }
    const double keep_scale = 1.0 / (1.0 - p);
    for (std::size_t l = 0; l < mlp.num_hidden(); ++l) {
        std::vector<double> m(batch * mlp.dims()[l + 1]);
        for (auto& v : m) {
            v = rng.bernoulli(p) ? 0.0 : keep_scale;
        }
        masks.hidden.push_back(std::move(m));
    }
    return masks;
}

Probabilities forward(const Mlp& mlp, std::span<const double> input, const DropoutMasks& masks) {
    if (input.size() != mlp.input_dim()) {
        throw ValidationError("input has " + std::to_string(input.size()) + " values, model expects " +
                              std::to_string(mlp.input_dim()));
    }
    return run_batch(mlp, std::vector<double>(input.begin(), input.end()), 1, &masks).probs.front();
}

Probabilities forward(const Mlp& mlp, std::span<const double> input) { return forward(mlp, input, DropoutMasks{}); }

Probabilities forward(const Mlp& mlp, std::span<const double> input, double dropout_p, Rng& rng) {
    return forward(mlp, input, sample_masks(mlp, 1, dropout_p, rng));
}

std::vector<double> last_hidden(const Mlp& mlp, std::span<const double> input, const DropoutMasks* masks) {
    if (input.size() != mlp.input_dim()) {
        throw ValidationError("input dimension mismatch");
    }
    auto pass = run_batch(mlp, std::vector<double>(input.begin(), input.end()), 1, masks);
    return pass.activations[mlp.layers().size() - 1];
}

double loss(const Mlp& mlp, const Dataset& data, std::span<const std::size_t> rows, double l2_factor,
            const DropoutMasks* masks) {
    if (rows.empty()) {
        throw ValidationError("loss of an empty batch");
    }
    const auto pass = run_batch(mlp, gather_inputs(data, rows, mlp.input_dim()), rows.size(), masks);
    return data_loss(pass, data, rows) + l2_factor * mlp.weight_norm_squared();
}

double loss(const Mlp& mlp, const Dataset& data, double l2_factor) {
    const auto rows = all_rows(data.size());
    return loss(mlp, data, rows, l2_factor);
}

GradientResult gradients(const Mlp& mlp, const Dataset& data, std::span<const std::size_t> rows, double l2_factor,
                         const DropoutMasks* masks) {
    if (rows.empty()) {
        throw ValidationError("gradient of an empty batch");
    }
    const std::size_t B = rows.size();
    const auto pass = run_batch(mlp, gather_inputs(data, rows, mlp.input_dim()), B, masks);
    const bool use_masks = masks != nullptr && !masks->hidden.empty();
    const auto& layers = mlp.layers();

    GradientResult result;
    result.loss = data_loss(pass, data, rows) + l2_factor * mlp.weight_norm_squared();
    result.grads = zeros_like(mlp);

    // d(loss)/d(logits) = (p - onehot) / B; zero where the log floor is active.
    std::vector<double> delta(B * kNumClasses);
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b) {
        const std::size_t truth = class_index(data.labels[rows[b]]);
        if (pass.probs[b][truth] < kLogFloor) {
            continue;
        }
        for (std::size_t c = 0; c < kNumClasses; ++c) {
            delta[b * kNumClasses + c] = (pass.probs[b][c] - (c == truth ? 1.0 : 0.0)) * inv_b;
        }
    }

    for (std::size_t l = layers.size(); l-- > 0;) {
        const Layer& layer = layers[l];
        Layer& g = result.grads[l];
        const auto& a = pass.activations[l];
        for (std::size_t b = 0; b < B; ++b) {
            const double* a_row = a.data() + b * layer.in;
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double d = delta[b * layer.out + o];
                if (d == 0.0) {
                    continue;
                }
                g.bias[o] += d;
                double* g_row = g.weights.data() + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) {
                    g_row[i] += d * a_row[i];
                }
            }
        }
        if (l == 0) {
            break;
        }
        std::vector<double> prev(B * layer.in, 0.0);
        for (std::size_t b = 0; b < B; ++b) {
            double* p_row = prev.data() + b * layer.in;
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double d = delta[b * layer.out + o];
                if (d == 0.0) {
                    continue;
                }
                const double* w = layer.weights.data() + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) {
                    p_row[i] += d * w[i];
                }
            }
        }
        const auto& z = pass.pre[l - 1];
        for (std::size_t j = 0; j < prev.size(); ++j) {
            prev[j] *= leaky_relu_slope(z[j]);
        }
        if (use_masks) {
            const auto& m = masks->hidden[l - 1];
            for (std::size_t j = 0; j < prev.size(); ++j) {
                prev[j] *= m[j];
            }
        }
        delta = std::move(prev);
    }

    if (l2_factor != 0.0) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto& gw = result.grads[l].weights;
            const auto& w = layers[l].weights;
            for (std::size_t j = 0; j < w.size(); ++j) {
                gw[j] += 2.0 * l2_factor * w[j];
            }
        }
    }
    return result;
}

AdamState AdamState::for_model(const Mlp& mlp) {
    return AdamState{zeros_like(mlp), zeros_like(mlp), 0};
}

void adam_step(Mlp& mlp, AdamState& state, const ParameterSet& grads, const TrainingConfig& config) {
    auto& layers = mlp.layers();
    if (grads.size() != layers.size() || state.first_moment.size() != layers.size() ||
        state.second_moment.size() != layers.size()) {
        throw ValidationError("ADAM step: parameter shapes disagree");
    }
    ++state.step_count;
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double t = static_cast<double>(state.step_count);
    const double correction1 = 1.0 - std::pow(b1, t);
    const double correction2 = 1.0 - std::pow(b2, t);
    const double lr = config.learning_rate;
    const double eps = config.adam_epsilon;

    auto update = [&](std::vector<double>& param, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        if (param.size() != g.size() || m.size() != g.size() || v.size() != g.size()) {
            throw ValidationError("ADAM step: parameter shapes disagree");
        }
        for (std::size_t j = 0; j < param.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            param[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].weights, grads[l].weights, state.first_moment[l].weights, state.second_moment[l].weights);
        update(layers[l].bias, grads[l].bias, state.first_moment[l].bias, state.second_moment[l].bias);
    }
}

TrainResult train(Mlp mlp, const Dataset& data, const TrainingConfig& config) {
    config.validate();
    if (data.size() == 0) {
        throw InsufficientDataError("training set is empty");
    }
    const auto ups = std::count(data.labels.begin(), data.labels.end(), Trend::Up);
    if (ups == 0 || static_cast<std::size_t>(ups) == data.size()) {
        throw DataError("degenerate training set: only one trend class present");
    }
    if (data.input_dim() != mlp.input_dim()) {
        throw ValidationError("training inputs have " + std::to_string(data.input_dim()) +
                              " values, model expects " + std::to_string(mlp.input_dim()));
    }

    TrainResult result;
    result.loss_curve.reserve(config.epochs);
    Rng rng(config.seed);
    AdamState state = AdamState::for_model(mlp);
    auto order = all_rows(data.size());

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double weighted = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const std::span<const std::size_t> rows(order.data() + start, end - start);
            const auto masks = sample_masks(mlp, rows.size(), config.dropout_p, rng);
            auto step = gradients(mlp, data, rows, config.l2_factor, &masks);
            adam_step(mlp, state, step.grads, config);
            weighted += step.loss * static_cast<double>(rows.size());
        }
        result.loss_curve.push_back(weighted / static_cast<double>(order.size()));
    }
    result.model = std::move(mlp);
    return result;
}

Trend argmax_trend(const Probabilities& p) noexcept { return trend_from(p[kUpClass] >= p[kDownClass]); }

Trend dl_forecast(const Mlp& mlp, std::span<const double> normalized_input) {
    return argmax_trend(forward(mlp, normalized_input));
}

Trend dl_forecast(const Mlp& mlp, const NormalizedWindow& w) { return dl_forecast(mlp, std::span<const double>(w.values)); }

std::vector<Trend> predict(const Mlp& mlp, const Dataset& data) {
    std::vector<Trend> out;
    out.reserve(data.size());
    for (const auto& x : data.inputs) {
        out.push_back(dl_forecast(mlp, std::span<const double>(x)));
    }
    return out;
}

double dataset_accuracy(const Mlp& mlp, const Dataset& data) {
    const auto pred = predict(mlp, data);
    return accuracy(pred, data.labels);
}

std::string checkpoint_to_json(const Checkpoint& checkpoint) {
    nlohmann::json j;
    j["format"] = "upe-mlp";
    j["version"] = 1;
    j["layer_dims"] = checkpoint.model.dims();
    j["normalization"] = checkpoint.normalization;
    const auto& c = checkpoint.config;
    j["training_config"] = {
        {"learning_rate", c.learning_rate}, {"epochs", c.epochs},         {"dropout_p", c.dropout_p},
        {"l2_factor", c.l2_factor},         {"batch_size", c.batch_size}, {"seed", c.seed},
        {"adam_beta1", c.adam_beta1},       {"adam_beta2", c.adam_beta2}, {"adam_epsilon", c.adam_epsilon},
    };
    auto layers = nlohmann::json::array();
    for (const auto& layer : checkpoint.model.layers()) {
        layers.push_back({{"weights", layer.weights}, {"bias", layer.bias}});
    }
    j["layers"] = std::move(layers);
    return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "upe-mlp") {
            throw DataError("not a classifier checkpoint");
        }
        Checkpoint cp;
        cp.normalization = j.at("normalization").get<std::string>();
        if (cp.normalization != kNormalizationTag) {
            throw DataError("checkpoint uses unsupported normalization '" + cp.normalization + "'");
        }
        const auto& c = j.at("training_config");
        cp.config.learning_rate = c.at("learning_rate").get<double>();
        cp.config.epochs = c.at("epochs").get<std::size_t>();
        cp.config.dropout_p = c.at("dropout_p").get<double>();
        cp.config.l2_factor = c.at("l2_factor").get<double>();
        cp.config.batch_size = c.at("batch_size").get<std::size_t>();
        cp.config.seed = c.at("seed").get<std::uint64_t>();
        cp.config.adam_beta1 = c.at("adam_beta1").get<double>();
        cp.config.adam_beta2 = c.at("adam_beta2").get<double>();
        cp.config.adam_epsilon = c.at("adam_epsilon").get<double>();
        cp.model = Mlp(j.at("layer_dims").get<std::vector<std::size_t>>());
        const auto& layers = j.at("layers");
        if (layers.size() != cp.model.layers().size()) {
            throw DataError("checkpoint layer count disagrees with layer_dims");
        }
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto& layer = cp.model.layers()[l];
            auto w = layers[l].at("weights").get<std::vector<double>>();
            auto b = layers[l].at("bias").get<std::vector<double>>();
            if (w.size() != layer.weights.size() || b.size() != layer.bias.size()) {
                throw DataError("checkpoint layer " + std::to_string(l) + " has wrong shape");
            }
            layer.weights = std::move(w);
            layer.bias = std::move(b);
        }
        return cp;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& target, const Checkpoint& checkpoint) {
    std::ofstream out(target, std::ios::binary);
    if (!out) {
        throw DataError("cannot write checkpoint '" + target.string() + "'");
    }
    out << checkpoint_to_json(checkpoint) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& source) {
    std::ifstream in(source, std::ios::binary);
    if (!in) {
        throw DataError("cannot open checkpoint '" + source.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return checkpoint_from_json(buffer.str());
}

void write_loss_curve(const std::filesystem::path& target, std::span<const double> curve) {
    std::ofstream out(target, std::ios::binary);
    if (!out) {
        throw DataError("cannot write '" + target.string() + "'");
    }
    out << "epoch,mean_loss\n";
    char buf[64];
    for (std::size_t e = 0; e < curve.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%.17g", curve[e]);
        out << e << ',' << buf << '\n';
    }
}

}  // namespace upe::nn
