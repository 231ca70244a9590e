#pragma once

#include "upe/market_data.hpp"
#include "upe/random.hpp"
#include "upe/trend.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace upe::nn {

// Output class order of the classifier.
inline constexpr std::size_t kUpClass = 0;
inline constexpr std::size_t kDownClass = 1;
inline constexpr std::size_t kNumClasses = 2;

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kLogFloor = 1e-12;

/// Input normalization the checkpoint expects (per-window z-score, population std).
inline constexpr const char* kNormalizationTag = "window-zscore-population";

using Probabilities = std::array<double, kNumClasses>;

[[nodiscard]] constexpr double leaky_relu(double x) noexcept { return x > 0.0 ? x : kLeakySlope * x; }
[[nodiscard]] constexpr double leaky_relu_slope(double x) noexcept { return x > 0.0 ? 1.0 : kLeakySlope; }

/// Numerically stable softmax (max-shifted).
std::vector<double> softmax(std::span<const double> logits);

/// Dense layer; weights are row-major with one row per output unit.
struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;  // out x in
    std::vector<double> bias;     // out

    Layer() = default;
    Layer(std::size_t in_dim, std::size_t out_dim) : in(in_dim), out(out_dim), weights(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

    [[nodiscard]] double& w(std::size_t o, std::size_t i) { return weights[o * in + i]; }
    [[nodiscard]] double w(std::size_t o, std::size_t i) const { return weights[o * in + i]; }

    friend bool operator==(const Layer&, const Layer&) = default;
};

/// Feedforward classifier: leaky-ReLU hidden layers, 2-way softmax output.
class Mlp {
public:
    Mlp() = default;
    /// dims = [input, hidden..., 2]. Parameters start at zero.
    explicit Mlp(std::vector<std::size_t> dims);

    [[nodiscard]] const std::vector<std::size_t>& dims() const noexcept { return dims_; }
    [[nodiscard]] std::size_t input_dim() const noexcept { return dims_.front(); }
    [[nodiscard]] std::size_t num_hidden() const noexcept { return dims_.size() - 2; }
    [[nodiscard]] std::vector<Layer>& layers() noexcept { return layers_; }
    [[nodiscard]] const std::vector<Layer>& layers() const noexcept { return layers_; }
    [[nodiscard]] std::size_t parameter_count() const noexcept;
    [[nodiscard]] double weight_norm_squared() const noexcept;

    friend bool operator==(const Mlp&, const Mlp&) = default;

private:
    std::vector<std::size_t> dims_;
    std::vector<Layer> layers_;
};

/// Parameter-shaped container for gradients and optimizer moments.
using ParameterSet = std::vector<Layer>;
ParameterSet zeros_like(const Mlp& mlp);

/// dims = [K, hidden..., 2]; weights uniform in +-sqrt(6 / fan_in), biases zero.
Mlp init_mlp(std::span<const std::size_t> dims, std::uint64_t seed);
std::vector<std::size_t> layer_dims(std::size_t input, std::size_t hidden_layers, std::size_t neurons);

struct TrainingConfig {
    double learning_rate = 1e-3;
    std::size_t epochs = 2000;
    double dropout_p = 0.2;
    double l2_factor = 1e-4;
    std::size_t batch_size = 32;
    std::uint64_t seed = 42;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const;
};

struct Dataset {
    std::vector<std::vector<double>> inputs;
    std::vector<Trend> labels;
    std::vector<std::size_t> steps;  // time step each example was taken at

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] std::size_t input_dim() const noexcept { return inputs.empty() ? 0 : inputs.front().size(); }
    /// Rows [begin, end) as a new dataset.
    [[nodiscard]] Dataset slice(std::size_t begin, std::size_t end) const;
};

/// One example per t with a full K-window and a trend label: t in [max(K, k+1), T-1-k].
Dataset build_dataset(const PriceSeries& series, std::size_t K, std::size_t k);

/// Inverted-dropout multipliers per hidden layer, laid out batch-major
/// (entry b * width + j); each entry is 0 or 1 / (1 - p).
struct DropoutMasks {
    std::vector<std::vector<double>> hidden;
};

DropoutMasks sample_masks(const Mlp& mlp, std::size_t batch, double p, Rng& rng);

/// Eval-mode forward pass.
Probabilities forward(const Mlp& mlp, std::span<const double> input);
/// Train-mode forward pass: fresh dropout mask drawn from `rng`.
Probabilities forward(const Mlp& mlp, std::span<const double> input, double dropout_p, Rng& rng);
/// Mask-explicit forward pass over one example (masks sampled for batch size 1).
Probabilities forward(const Mlp& mlp, std::span<const double> input, const DropoutMasks& masks);

/// Hidden-layer activations of the last hidden layer (for diagnostics and tests).
std::vector<double> last_hidden(const Mlp& mlp, std::span<const double> input, const DropoutMasks* masks = nullptr);

/// Mean cross-entropy over `rows` plus l2_factor * sum of squared weights.
/// Evaluated without dropout unless masks are supplied.
double loss(const Mlp& mlp, const Dataset& data, std::span<const std::size_t> rows, double l2_factor,
            const DropoutMasks* masks = nullptr);
double loss(const Mlp& mlp, const Dataset& data, double l2_factor);

struct GradientResult {
    double loss = 0.0;
    ParameterSet grads;
};

/// Exact back-propagated gradient of `loss` under the given masks.
GradientResult gradients(const Mlp& mlp, const Dataset& data, std::span<const std::size_t> rows, double l2_factor,
                         const DropoutMasks* masks = nullptr);

struct AdamState {
    ParameterSet first_moment;
    ParameterSet second_moment;
    std::uint64_t step_count = 0;

    static AdamState for_model(const Mlp& mlp);
};

void adam_step(Mlp& mlp, AdamState& state, const ParameterSet& grads, const TrainingConfig& config);

struct TrainResult {
    Mlp model;
    std::vector<double> loss_curve;  // mean training loss per epoch
};

/// Mini-batch ADAM training, reshuffled every epoch. Deterministic given config.seed.
TrainResult train(Mlp mlp, const Dataset& data, const TrainingConfig& config);

Trend dl_forecast(const Mlp& mlp, std::span<const double> normalized_input);
Trend dl_forecast(const Mlp& mlp, const NormalizedWindow& w);
Trend argmax_trend(const Probabilities& p) noexcept;

std::vector<Trend> predict(const Mlp& mlp, const Dataset& data);
double dataset_accuracy(const Mlp& mlp, const Dataset& data);

struct Checkpoint {
    Mlp model;
    TrainingConfig config;
    std::string normalization = kNormalizationTag;
};

void save_checkpoint(const std::filesystem::path& target, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& source);
std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text);

void write_loss_curve(const std::filesystem::path& target, std::span<const double> curve);

}  // namespace upe::nn
