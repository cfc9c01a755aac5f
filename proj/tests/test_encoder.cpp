#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "clinsim/encoder.hpp"
#include "clinsim/rng.hpp"
#include "test_util.hpp"

using namespace clinsim;

namespace {

MlpConfig tiny_config(std::size_t d, std::uint64_t seed) {
  MlpConfig c;
  c.embed_dim = d;
  c.hidden = {4, 3};
  c.learning_rate = 1e-3;
  c.l2_coeff = 0.0;
  c.dropout_rate = 0.0;
  c.seed = seed;
  return c;
}

/// Central finite differences of mlp_loss with respect to every parameter.
MlpGradients numerical_grad(MlpModel model, const Matrix& inputs,
                            const std::vector<double>& targets, double eps) {
  MlpGradients g;
  for (auto& layer : model.weights) g.weights.emplace_back(layer.size(), 0.0);
  for (auto& layer : model.biases) g.biases.emplace_back(layer.size(), 0.0);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
      const double orig = model.weights[l][i];
      model.weights[l][i] = orig + eps;
      const double hi = mlp_loss(model, inputs, targets);
      model.weights[l][i] = orig - eps;
      const double lo = mlp_loss(model, inputs, targets);
      model.weights[l][i] = orig;
      g.weights[l][i] = (hi - lo) / (2.0 * eps);
    }
    for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
      const double orig = model.biases[l][i];
      model.biases[l][i] = orig + eps;
      const double hi = mlp_loss(model, inputs, targets);
      model.biases[l][i] = orig - eps;
      const double lo = mlp_loss(model, inputs, targets);
      model.biases[l][i] = orig;
      g.biases[l][i] = (hi - lo) / (2.0 * eps);
    }
  }
  return g;
}

double max_relative_error(const MlpGradients& a, const MlpGradients& b) {
  double worst = 0.0;
  const auto compare = [&](const std::vector<double>& x, const std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double denom = std::max({std::abs(x[i]), std::abs(y[i]), 1e-8});
      worst = std::max(worst, std::abs(x[i] - y[i]) / denom);
    }
  };
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    compare(a.weights[l], b.weights[l]);
    compare(a.biases[l], b.biases[l]);
  }
  return worst;
}

}  // namespace

TEST_CASE("build_input concatenates u, v, |u-v|, u*v") {
  const std::vector<double> x = build_input({1.0, 2.0}, {1.0, 2.0});
  CHECK(x == std::vector<double>{1.0, 2.0, 1.0, 2.0, 0.0, 0.0, 1.0, 4.0});

  const std::vector<double> y = build_input({0.0, 0.0}, {3.0, -1.0});
  CHECK(y == std::vector<double>{0.0, 0.0, 3.0, -1.0, 3.0, 1.0, 0.0, -0.0});

  CHECK_THROWS_AS(build_input({1.0}, {1.0, 2.0}), DimensionMismatch);
}

TEST_CASE("build_input widths for both composition modes") {
  Rng rng(3);
  for (std::size_t d = 1; d <= 16; ++d) {
    SentenceVector u(d), v(d);
    for (auto& a : u) a = rng.uniform_real();
    for (auto& a : v) a = rng.uniform_real();
    CHECK(build_input(u, v, EncoderInputMode::concat_elementwise_product).size() == 4 * d);
    CHECK(build_input(u, v, EncoderInputMode::concat_scalar_dot).size() == 3 * d + 1);
  }
}

TEST_CASE("zero weights produce zero output") {
  MlpConfig config = tiny_config(2, 0);
  MlpModel model = init_mlp(config);
  for (auto& layer : model.weights) std::fill(layer.begin(), layer.end(), 0.0);
  CHECK(mlp_forward(model, std::vector<double>(config.input_width(), 0.7)) == 0.0);
}

TEST_CASE("hand-computed forward pass on a 1-d two-layer net") {
  MlpConfig config;
  config.embed_dim = 1;  // input width 4
  config.hidden = {2};
  config.dropout_rate = 0.0;
  MlpModel model;
  model.config = config;
  // Hidden layer 4 -> 2: rows [1,0,0,0] bias 0.5 and [0,-1,0,0] bias 0.25.
  model.weights.push_back({1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0});
  model.biases.push_back({0.5, 0.25});
  // Output layer 2 -> 1: [2, 3], bias -1.
  model.weights.push_back({2.0, 3.0});
  model.biases.push_back({-1.0});
  // x = (0.5, 2, 1.5, 1): h = relu(0.5+0.5, 0.25-2) = (1, 0); out = 2*1 - 1 = 1.
  CHECK(mlp_forward(model, {0.5, 2.0, 1.5, 1.0}) == doctest::Approx(1.0));
}

TEST_CASE("loss definition") {
  MlpConfig config = tiny_config(1, 1);
  MlpModel model = init_mlp(config);
  const Matrix inputs = {std::vector<double>(4, 0.3)};
  const double pred = mlp_forward(model, inputs[0]);

  // Perfect prediction, zero l2: zero loss.
  CHECK(mlp_loss(model, inputs, {pred}) == doctest::Approx(0.0));

  // Single-sample residual r: loss r^2 plus the weight penalty.
  model.config.l2_coeff = 0.01;
  double penalty = 0.0;
  for (const auto& layer : model.weights) {
    for (double w : layer) penalty += w * w;
  }
  const double r = pred - 2.0;
  CHECK(mlp_loss(model, inputs, {2.0}) == doctest::Approx(r * r + 0.01 * penalty));
  CHECK(mlp_loss(model, inputs, {2.0}) >= 0.0);

  CHECK_THROWS_AS(mlp_loss(model, {}, {}), EmptyBatch);
}

TEST_CASE("backprop matches central finite differences") {
  Rng rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    MlpConfig config;
    config.embed_dim = 1 + rng.uniform_index(3);
    config.hidden = {2 + rng.uniform_index(3), 2 + rng.uniform_index(3)};
    config.l2_coeff = trial % 2 == 0 ? 0.0 : 1e-3;
    config.dropout_rate = 0.0;
    config.seed = 1000 + trial;
    MlpModel model = init_mlp(config);
    // Jitter the zero-initialized biases so no preactivation sits exactly on
    // the rectifier kink, where central differences are ill-defined.
    for (auto& layer : model.biases) {
      for (double& b : layer) b = rng.uniform_real(-0.1, 0.1);
    }
    Matrix inputs;
    std::vector<double> targets;
    for (int s = 0; s < 4; ++s) {
      std::vector<double> x(config.input_width());
      for (auto& v : x) v = rng.uniform_real(-1.0, 1.0);
      inputs.push_back(std::move(x));
      targets.push_back(rng.uniform_real(0.0, 5.0));
    }
    const MlpGradients analytic = mlp_grad(model, inputs, targets);
    const MlpGradients numeric = numerical_grad(model, inputs, targets, 1e-5);
    CHECK(max_relative_error(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("l2 gradient with zero data gradient is 2*l2*w") {
  MlpConfig config = tiny_config(1, 3);
  config.l2_coeff = 0.05;
  MlpModel model = init_mlp(config);
  // Zero input and zero target: prediction is 0 (zero biases), residual 0,
  // every data gradient vanishes and only the penalty term remains.
  const Matrix inputs = {std::vector<double>(4, 0.0)};
  const MlpGradients g = mlp_grad(model, inputs, {0.0});
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
      CHECK(g.weights[l][i] ==
            doctest::Approx(2.0 * config.l2_coeff * model.weights[l][i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("inverted dropout keeps activations unbiased in expectation") {
  MlpConfig config = tiny_config(2, 5);
  config.dropout_rate = 0.4;
  MlpModel model = init_mlp(config);
  const std::vector<double> x = {0.4, -0.2, 0.9, 0.1, 0.3, 0.5, -0.7, 0.2};

  const auto clean = detail::forward_trace(model, x, nullptr);
  const std::vector<double>& h = clean.activations[1];

  Rng rng(99);
  std::vector<double> mean(h.size(), 0.0);
  std::vector<double> m2(h.size(), 0.0);
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    const auto noisy = detail::forward_trace(model, x, &rng);
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double v = noisy.activations[1][i];
      mean[i] += v;
      m2[i] += v * v;
    }
  }
  for (std::size_t i = 0; i < h.size(); ++i) {
    mean[i] /= trials;
    const double var = m2[i] / trials - mean[i] * mean[i];
    const double sigma = std::sqrt(std::max(var, 0.0) / trials);
    CHECK(std::abs(mean[i] - h[i]) <= 3.0 * sigma + 1e-12);
  }

  // A rate of zero is exactly the no-dropout forward.
  model.config.dropout_rate = 0.0;
  Rng rng2(100);
  const auto nodrop = detail::forward_trace(model, x, &rng2);
  CHECK(nodrop.activations.back()[0] == clean.activations.back()[0]);
}

TEST_CASE("training overfits a small synthetic set") {
  Rng rng(123);
  MlpConfig config = tiny_config(2, 11);
  config.hidden = {8, 6};
  config.learning_rate = 1e-2;
  config.max_epochs = 3000;
  config.patience_epochs = 3000;
  config.batch_size = 4;
  Matrix train_x, val_x;
  std::vector<double> train_y, val_y;
  for (int i = 0; i < 8; ++i) {
    std::vector<double> x(config.input_width());
    for (auto& v : x) v = rng.uniform_real(-1.0, 1.0);
    const double y = 2.5 + 2.0 * x[0] - 1.5 * x[3];
    train_x.push_back(x);
    train_y.push_back(std::clamp(y, 0.0, 5.0));
  }
  for (int i = 0; i < 4; ++i) {
    std::vector<double> x(config.input_width());
    for (auto& v : x) v = rng.uniform_real(-1.0, 1.0);
    val_x.push_back(x);
    val_y.push_back(std::clamp(2.5 + 2.0 * x[0] - 1.5 * x[3], 0.0, 5.0));
  }
  const TrainResult result = train_mlp(train_x, train_y, val_x, val_y, config);
  double se = 0.0;
  for (std::size_t i = 0; i < train_x.size(); ++i) {
    const double r = mlp_forward(result.model, train_x[i]) - train_y[i];
    se += r * r;
  }
  CHECK(se / train_x.size() < 0.05);

  // Early stopping: no later epoch beats the returned snapshot.
  for (const auto& e : result.history) {
    if (e.val_pearson) CHECK(*e.val_pearson <= result.best_val_pearson + 1e-12);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  Rng rng(7);
  MlpConfig config = tiny_config(1, 42);
  config.dropout_rate = 0.3;
  config.max_epochs = 50;
  config.patience_epochs = 50;
  Matrix train_x, val_x;
  std::vector<double> train_y, val_y;
  for (int i = 0; i < 10; ++i) {
    std::vector<double> x(config.input_width());
    for (auto& v : x) v = rng.uniform_real();
    (i < 6 ? train_x : val_x).push_back(x);
    (i < 6 ? train_y : val_y).push_back(rng.uniform_real(0.0, 5.0));
  }
  const TrainResult a = train_mlp(train_x, train_y, val_x, val_y, config);
  const TrainResult b = train_mlp(train_x, train_y, val_x, val_y, config);
  REQUIRE(a.model.weights.size() == b.model.weights.size());
  for (std::size_t l = 0; l < a.model.weights.size(); ++l) {
    CHECK(a.model.weights[l] == b.model.weights[l]);
    CHECK(a.model.biases[l] == b.model.biases[l]);
  }
  CHECK(a.best_epoch == b.best_epoch);
}

TEST_CASE("patience zero returns the first epoch snapshot") {
  Rng rng(8);
  MlpConfig config = tiny_config(1, 2);
  config.patience_epochs = 0;
  config.max_epochs = 100;
  Matrix train_x = {{0.1, 0.2, 0.1, 0.02}, {0.9, 0.8, 0.1, 0.72}, {0.4, 0.1, 0.3, 0.04}};
  std::vector<double> train_y = {1.0, 4.0, 2.0};
  const TrainResult result = train_mlp(train_x, train_y, train_x, train_y, config);
  CHECK(result.history.size() == 1);
  CHECK(result.best_epoch == 1);
}

TEST_CASE("predict clamps to the score scale and preserves order") {
  MlpConfig config = tiny_config(1, 0);
  MlpModel model = init_mlp(config);
  for (auto& layer : model.weights) std::fill(layer.begin(), layer.end(), 0.0);
  model.biases.back()[0] = 6.2;
  const Matrix inputs = {{0.0, 0.0, 0.0, 0.0}, {1.0, 1.0, 0.0, 1.0}};
  const auto pred = mlp_predict(model, inputs);
  REQUIRE(pred.size() == 2);
  CHECK(pred[0] == 5.0);
  CHECK(pred[1] == 5.0);
  model.biases.back()[0] = -3.0;
  CHECK(mlp_predict(model, inputs)[0] == 0.0);
}

TEST_CASE("mlp save/load round-trip") {
  MlpConfig config = tiny_config(2, 77);
  config.dropout_rate = 0.5;
  MlpModel model = init_mlp(config);
  testutil::TempDir dir("mlp_io");
  const std::string path = dir.file("mlp.json");
  save_mlp(model, path);
  const MlpModel loaded = load_mlp(path);
  CHECK(loaded.weights == model.weights);
  CHECK(loaded.biases == model.biases);
  CHECK(loaded.config.hidden == model.config.hidden);
  CHECK(loaded.config.input_mode == model.config.input_mode);

  const std::string full = testutil::read_file(path);
  const std::string truncated = dir.file("truncated.json");
  testutil::write_file(truncated, full.substr(0, full.size() / 3));
  CHECK_THROWS_AS(load_mlp(truncated), ParseError);
  const std::string foreign = dir.file("foreign.json");
  testutil::write_file(foreign, "{\"format\":\"clinsim-forest\",\"version\":1}");
  CHECK_THROWS_AS(load_mlp(foreign), VersionMismatch);

  // Two saves of the same model are byte-identical.
  const std::string path2 = dir.file("mlp2.json");
  save_mlp(model, path2);
  CHECK(testutil::read_file(path) == testutil::read_file(path2));
}
