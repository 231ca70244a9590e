#include "support.hpp"

#include <doctest.h>
#include <upe/errors.hpp>
#include <upe/neural.hpp>
#include <upe/random.hpp>
#include <upe/synthetic.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace upe;
using namespace upe::nn;

namespace {

std::vector<std::size_t> rows_of(std::size_t n) {
    std::vector<std::size_t> r(n);
    std::iota(r.begin(), r.end(), 0);
    return r;
}

Dataset random_dataset(Rng& rng, std::size_t n, std::size_t dim) {
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(dim);
        for (auto& v : x) {
            v = rng.normal();
        }
        d.inputs.push_back(std::move(x));
        d.labels.push_back(rng.bernoulli(0.5) ? Trend::Up : Trend::Down);
        d.steps.push_back(i);
    }
    return d;
}

// Labels are the sign of the window mean, so a linear separator exists.
Dataset separable_dataset(Rng& rng, std::size_t n, std::size_t dim) {
    Dataset d = random_dataset(rng, n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        const double m = std::accumulate(d.inputs[i].begin(), d.inputs[i].end(), 0.0);
        d.labels[i] = m >= 0.0 ? Trend::Up : Trend::Down;
    }
    return d;
}

std::vector<double>* param_vector(Mlp& mlp, std::size_t layer, bool bias) {
    return bias ? &mlp.layers()[layer].bias : &mlp.layers()[layer].weights;
}

double grad_entry(const ParameterSet& g, std::size_t layer, bool bias, std::size_t j) {
    return bias ? g[layer].bias[j] : g[layer].weights[j];
}

// Largest relative error over every parameter, central differences with step 1e-4.
double max_fd_error(Mlp mlp, const Dataset& data, double l2, const DropoutMasks* masks) {
    const auto rows = rows_of(data.size());
    const auto analytic = gradients(mlp, data, rows, l2, masks).grads;
    double worst = 0.0;
    const double h = 1e-4;
    for (std::size_t l = 0; l < mlp.layers().size(); ++l) {
        for (bool bias : {false, true}) {
            auto* params = param_vector(mlp, l, bias);
            for (std::size_t j = 0; j < params->size(); ++j) {
                const double saved = (*params)[j];
                (*params)[j] = saved + h;
                const double up = loss(mlp, data, rows, l2, masks);
                (*params)[j] = saved - h;
                const double down = loss(mlp, data, rows, l2, masks);
                (*params)[j] = saved;
                const double numeric = (up - down) / (2 * h);
                const double a = grad_entry(analytic, l, bias, j);
                const double scale = std::max({std::abs(a), std::abs(numeric), 1e-7});
                worst = std::max(worst, std::abs(a - numeric) / scale);
            }
        }
    }
    return worst;
}

// Network with input x, one hidden unit h = leaky(x), logits (a*h, 0).
Mlp probe_net(double a) {
    Mlp m({1, 1, 2});
    m.layers()[0].w(0, 0) = 1.0;
    m.layers()[1].w(0, 0) = a;
    return m;
}

}  // namespace

TEST_CASE("leaky relu and softmax") {
    CHECK(leaky_relu(2.0) == 2.0);
    CHECK(leaky_relu(-3.0) == doctest::Approx(-0.03).epsilon(1e-12));
    CHECK(leaky_relu_slope(-1.0) == kLeakySlope);

    const auto half = softmax(std::vector<double>{0.0, 0.0});
    CHECK(half[0] == 0.5);
    CHECK(half[1] == 0.5);
    const auto a = softmax(std::vector<double>{1.3, -0.4});
    const auto b = softmax(std::vector<double>{1.3 + 250.0, -0.4 + 250.0});
    CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-12));
    const auto huge = softmax(std::vector<double>{1000.0, 0.0});
    CHECK(std::isfinite(huge[0]));
    CHECK(huge[0] + huge[1] == doctest::Approx(1.0));
}

TEST_CASE("cross-entropy of known probabilities") {
    Dataset one;
    one.inputs = {{1.0}};
    one.labels = {Trend::Up};
    one.steps = {0};

    // Logit gap of 1000 underflows the other class to exactly zero.
    CHECK(loss(probe_net(1000.0), one, 0.0) == 0.0);
    CHECK(loss(probe_net(0.0), one, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // exp(a) / (exp(a) + 1) = 1/4 for a = ln(1/3).
    Dataset two;
    two.inputs = {{0.0}, {1.0}};
    two.labels = {Trend::Up, Trend::Up};
    two.steps = {0, 1};
    const double expected = (std::log(2.0) + std::log(4.0)) / 2.0;
    CHECK(loss(probe_net(std::log(1.0 / 3.0)), two, 0.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(expected - 1.0397) < 1e-4);
}

TEST_CASE("log floor keeps a saturated wrong prediction finite") {
    Dataset one;
    one.inputs = {{1.0}};
    one.labels = {Trend::Down};
    one.steps = {0};
    const double l = loss(probe_net(1000.0), one, 0.0);
    CHECK(l == doctest::Approx(-std::log(kLogFloor)).epsilon(1e-9));
}

TEST_CASE("forward outputs a probability pair") {
    Rng rng(2);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::vector<std::size_t> dims{8, 16, 16, 2};
        const auto mlp = init_mlp(dims, seed);
        std::vector<double> x(8);
        for (auto& v : x) {
            v = 3.0 * rng.normal();
        }
        const auto p = forward(mlp, x);
        CHECK(p[0] > 0.0);
        CHECK(p[0] < 1.0);
        CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));
        const auto q = forward(mlp, x, 0.5, rng);
        CHECK(q[0] + q[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto mlp = init_mlp(std::vector<std::size_t>{8, 4, 2}, 1);
    CHECK_THROWS_AS(forward(mlp, std::vector<double>(7, 0.0)), ValidationError);
}

TEST_CASE("initialization is seeded and shaped") {
    const std::vector<std::size_t> small{8, 16, 2};
    CHECK(init_mlp(small, 42) == init_mlp(small, 42));
    CHECK_FALSE(init_mlp(small, 42) == init_mlp(small, 43));

    const auto m = init_mlp(small, 42);
    for (const auto& layer : m.layers()) {
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.in));
        for (double w : layer.weights) {
            CHECK(std::abs(w) <= bound);
        }
        for (double b : layer.bias) {
            CHECK(b == 0.0);
        }
    }

    const auto dims = layer_dims(50, 5, 1024);
    CHECK(dims == std::vector<std::size_t>{50, 1024, 1024, 1024, 1024, 1024, 2});
    const auto big = init_mlp(dims, 7);
    REQUIRE(big.layers().size() == 6);
    for (std::size_t l = 0; l < 6; ++l) {
        CHECK(big.layers()[l].in == dims[l]);
        CHECK(big.layers()[l].out == dims[l + 1]);
        CHECK(big.layers()[l].weights.size() == dims[l] * dims[l + 1]);
    }

    CHECK_THROWS_AS(Mlp(std::vector<std::size_t>{8, 2}), ValidationError);
    CHECK_THROWS_AS(Mlp(std::vector<std::size_t>{8, 4, 3}), ValidationError);
    CHECK_THROWS_AS(Mlp(std::vector<std::size_t>{8, 0, 2}), ValidationError);
}

TEST_CASE("dataset covers steps with both a window and a label") {
    auto brute_count = [](std::size_t T, std::size_t K, std::size_t k) {
        std::size_t n = 0;
        for (std::size_t t = 0; t < T; ++t) {
            n += (t >= K && t >= k + 1 && t + k <= T - 1) ? 1 : 0;
        }
        return n;
    };
    const auto long_series = testing::series_of(synthetic::random_walk(1, 750));
    const auto d = build_dataset(long_series, 50, 25);
    CHECK(d.size() == brute_count(750, 50, 25));
    CHECK(d.size() == 675);
    CHECK(d.steps.front() == 50);
    CHECK(d.steps.back() == 724);
    CHECK(d.input_dim() == 50);

    const auto short_series = testing::series_of(synthetic::random_walk(1, 100));
    CHECK(build_dataset(short_series, 50, 25).size() == 25);
    CHECK(brute_count(100, 50, 25) == 25);

    CHECK(brute_count(60, 50, 25) == 0);
    CHECK_THROWS_AS(build_dataset(testing::series_of(synthetic::random_walk(1, 60)), 50, 25), InsufficientDataError);
}

TEST_CASE("dataset inputs are normalized windows") {
    const auto s = testing::series_of(synthetic::random_walk(9, 200));
    const auto d = build_dataset(s, 20, 5);
    for (std::size_t i = 0; i < d.size(); i += 13) {
        const double m = std::accumulate(d.inputs[i].begin(), d.inputs[i].end(), 0.0) / 20.0;
        CHECK(std::abs(m) < 1e-9);
        CHECK(d.inputs[i] == normalize_window(window(s, d.steps[i], 20)).values);
    }
}

TEST_CASE("analytic gradients match finite differences") {
    Rng rng(17);
    SUBCASE("toy net, dropout off") {
        const auto data = random_dataset(rng, 6, 3);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto mlp = init_mlp(std::vector<std::size_t>{3, 4, 2}, seed);
            CHECK(max_fd_error(mlp, data, 0.0, nullptr) < 1e-4);
            CHECK(max_fd_error(mlp, data, 1e-2, nullptr) < 1e-4);
        }
    }
    SUBCASE("deeper net with fixed dropout masks") {
        const auto data = random_dataset(rng, 5, 4);
        const auto mlp = init_mlp(std::vector<std::size_t>{4, 6, 5, 2}, 3);
        Rng mask_rng(99);
        const auto masks = sample_masks(mlp, data.size(), 0.3, mask_rng);
        CHECK(max_fd_error(mlp, data, 1e-3, &masks) < 1e-4);
    }
}

TEST_CASE("softmax cross-entropy bias gradient of a zero net") {
    const Mlp zero({2, 3, 2});
    Dataset d;
    d.inputs = {{1.0, -1.0}};
    d.labels = {Trend::Up};
    d.steps = {0};
    const auto g = gradients(zero, d, rows_of(1), 0.0).grads;
    const auto& out = g.back().bias;
    CHECK(out[kUpClass] == doctest::Approx(-0.5));
    CHECK(out[kDownClass] == doctest::Approx(0.5));
    CHECK(out[0] + out[1] == doctest::Approx(0.0));
}

TEST_CASE("L2 gradient term is 2 * factor * w and doubles with the factor") {
    Rng rng(4);
    const auto data = random_dataset(rng, 8, 5);
    const auto mlp = init_mlp(std::vector<std::size_t>{5, 7, 2}, 11);
    const auto rows = rows_of(data.size());
    const auto g0 = gradients(mlp, data, rows, 0.0).grads;
    const auto g1 = gradients(mlp, data, rows, 1e-2).grads;
    const auto g2 = gradients(mlp, data, rows, 2e-2).grads;
    for (std::size_t l = 0; l < g0.size(); ++l) {
        for (std::size_t j = 0; j < g0[l].weights.size(); ++j) {
            const double term1 = g1[l].weights[j] - g0[l].weights[j];
            const double term2 = g2[l].weights[j] - g0[l].weights[j];
            CHECK(term1 == doctest::Approx(2e-2 * mlp.layers()[l].weights[j]).epsilon(1e-9));
            CHECK(term2 == doctest::Approx(2.0 * term1).epsilon(1e-9));
        }
        for (std::size_t j = 0; j < g0[l].bias.size(); ++j) {
            CHECK(g1[l].bias[j] == g0[l].bias[j]);
        }
    }
}

TEST_CASE("adam step closed forms") {
    TrainingConfig cfg;
    cfg.learning_rate = 1e-3;

    SUBCASE("zero gradient is a fixed point") {
        auto mlp = init_mlp(std::vector<std::size_t>{3, 4, 2}, 1);
        const auto before = mlp;
        auto state = AdamState::for_model(mlp);
        const auto zero = zeros_like(mlp);
        for (int i = 0; i < 5; ++i) {
            adam_step(mlp, state, zero, cfg);
        }
        CHECK(mlp == before);
    }
    SUBCASE("first and second identical steps") {
        auto mlp = init_mlp(std::vector<std::size_t>{3, 4, 2}, 1);
        const auto before = mlp;
        auto state = AdamState::for_model(mlp);
        auto grads = zeros_like(mlp);
        Rng rng(8);
        for (auto& layer : grads) {
            for (auto& g : layer.weights) {
                g = rng.uniform(-2.0, 2.0);
            }
            for (auto& g : layer.bias) {
                g = rng.uniform(-1e-7, 1e-7);
            }
        }
        // Bias-corrected moments of a repeated gradient g are g and g^2 at every step,
        // so each update is -lr * g / (|g| + eps).
        auto expected_delta = [&](double g) { return -cfg.learning_rate * g / (std::abs(g) + cfg.adam_epsilon); };
        adam_step(mlp, state, grads, cfg);
        const auto after_one = mlp;
        adam_step(mlp, state, grads, cfg);
        for (std::size_t l = 0; l < grads.size(); ++l) {
            for (std::size_t j = 0; j < grads[l].weights.size(); ++j) {
                const double d = expected_delta(grads[l].weights[j]);
                CHECK(after_one.layers()[l].weights[j] - before.layers()[l].weights[j] ==
                      doctest::Approx(d).epsilon(1e-9));
                CHECK(mlp.layers()[l].weights[j] - after_one.layers()[l].weights[j] ==
                      doctest::Approx(d).epsilon(1e-9));
            }
            for (std::size_t j = 0; j < grads[l].bias.size(); ++j) {
                const double d = expected_delta(grads[l].bias[j]);
                CHECK(after_one.layers()[l].bias[j] - before.layers()[l].bias[j] == doctest::Approx(d).epsilon(1e-6));
            }
        }
        CHECK(state.step_count == 2);
    }
}

TEST_CASE("training fits a separable dataset") {
    Rng rng(21);
    const auto data = separable_dataset(rng, 300, 8);
    TrainingConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 200;
    cfg.dropout_p = 0.0;
    cfg.l2_factor = 0.0;
    const auto result = train(init_mlp(std::vector<std::size_t>{8, 16, 2}, 5), data, cfg);
    CHECK(dataset_accuracy(result.model, data) >= 0.99);
    REQUIRE(result.loss_curve.size() == 200);
    CHECK(result.loss_curve.back() < result.loss_curve.front());
}

TEST_CASE("training edge cases") {
    Rng rng(22);
    auto data = separable_dataset(rng, 64, 4);
    const auto start = init_mlp(std::vector<std::size_t>{4, 8, 2}, 3);
    TrainingConfig cfg;
    cfg.epochs = 0;
    const auto idle = train(start, data, cfg);
    CHECK(idle.model == start);
    CHECK(idle.loss_curve.empty());

    cfg.epochs = 20;
    const auto a = train(start, data, cfg);
    const auto b = train(start, data, cfg);
    CHECK(a.loss_curve == b.loss_curve);
    CHECK(a.model == b.model);
    cfg.seed = 43;
    CHECK_FALSE(train(start, data, cfg).model == a.model);

    std::fill(data.labels.begin(), data.labels.end(), Trend::Down);
    CHECK_THROWS_AS(train(start, data, cfg), DataError);

    cfg.dropout_p = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("inverted dropout preserves the expected first-layer activation") {
    const auto mlp = init_mlp(std::vector<std::size_t>{8, 16, 2}, 31);
    Rng rng(12);
    std::vector<double> x(8);
    for (auto& v : x) {
        v = rng.normal();
    }
    const auto eval = last_hidden(mlp, x);
    std::vector<double> mean(eval.size(), 0.0);
    const std::size_t passes = 100000;
    for (std::size_t i = 0; i < passes; ++i) {
        const auto masks = sample_masks(mlp, 1, 0.2, rng);
        const auto h = last_hidden(mlp, x, &masks);
        for (std::size_t j = 0; j < h.size(); ++j) {
            mean[j] += h[j];
        }
    }
    for (std::size_t j = 0; j < mean.size(); ++j) {
        CHECK(mean[j] / static_cast<double>(passes) == doctest::Approx(eval[j]).epsilon(0.01));
    }
}

TEST_CASE("larger L2 factor gives a smaller weight norm on noise labels") {
    Rng rng(33);
    const auto data = random_dataset(rng, 200, 6);
    const auto start = init_mlp(std::vector<std::size_t>{6, 16, 2}, 9);
    TrainingConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 60;
    cfg.dropout_p = 0.0;
    std::vector<double> norms;
    for (double l2 : {0.0, 1e-3, 1e-2}) {
        cfg.l2_factor = l2;
        norms.push_back(train(start, data, cfg).model.weight_norm_squared());
    }
    CHECK(norms[0] > norms[1]);
    CHECK(norms[1] > norms[2]);
}

TEST_CASE("argmax resolves ties upward") {
    CHECK(argmax_trend({0.8, 0.2}) == Trend::Up);
    CHECK(argmax_trend({0.2, 0.8}) == Trend::Down);
    CHECK(argmax_trend({0.5, 0.5}) == Trend::Up);

    Mlp zero({3, 2, 2});
    CHECK(dl_forecast(zero, std::vector<double>{0.3, -1.0, 2.0}) == Trend::Up);
    zero.layers().back().bias = {std::log(4.0), 0.0};
    const auto p = forward(zero, std::vector<double>{0, 0, 0});
    CHECK(p[kUpClass] == doctest::Approx(0.8).epsilon(1e-12));
    zero.layers().back().bias = {0.0, std::log(4.0)};
    CHECK(dl_forecast(zero, std::vector<double>{0, 0, 0}) == Trend::Down);
}

TEST_CASE("checkpoint round trip") {
    Checkpoint cp;
    cp.model = init_mlp(std::vector<std::size_t>{6, 5, 4, 2}, 77);
    cp.config.learning_rate = 3e-4;
    cp.config.epochs = 17;
    const auto dir = testing::scratch_dir("checkpoint");
    save_checkpoint(dir / "model.json", cp);
    const auto back = load_checkpoint(dir / "model.json");
    CHECK(back.model == cp.model);
    CHECK(back.config.learning_rate == 3e-4);
    CHECK(back.config.epochs == 17);
    CHECK(back.normalization == kNormalizationTag);
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        std::vector<double> x(6);
        for (auto& v : x) {
            v = rng.normal();
        }
        CHECK(forward(back.model, x) == forward(cp.model, x));
    }
    CHECK_THROWS_AS(checkpoint_from_json("{not json"), DataError);
    CHECK_THROWS_AS(checkpoint_from_json(R"({"format":"other"})"), DataError);
    CHECK_THROWS_AS(load_checkpoint(dir / "absent.json"), DataError);
}
