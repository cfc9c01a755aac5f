// Copyright the clinsim contributors. Licensed under the terms of the Apache 2.0 license.
// See LICENSE in the project root.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clinsim/errors.hpp"
#include "clinsim/feature_pipeline.hpp"
#include "clinsim/forest.hpp"  // json file helpers
#include "clinsim/rng.hpp"
#include "clinsim/semantic_metrics.hpp"

namespace clinsim {

/// How the two sentence vectors combine into the network input.
enum class EncoderInputMode {
  concat_elementwise_product,  // [u; v; |u-v|; u*v], width 4d
  concat_scalar_dot,           // [u; v; |u-v|; u.v], width 3d+1
};

struct MlpConfig {
  std::size_t embed_dim = 0;
  std::vector<std::size_t> hidden = {480, 240, 80};
  double learning_rate = 1e-4;
  double l2_coeff = 1e-4;
  double dropout_rate = 0.5;
  std::size_t patience_epochs = 200;
  std::size_t max_epochs = 10000;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  EncoderInputMode input_mode = EncoderInputMode::concat_elementwise_product;

  std::size_t input_width() const {
    return input_mode == EncoderInputMode::concat_elementwise_product ? 4 * embed_dim
                                                                      : 3 * embed_dim + 1;
  }
};

/// Combines two equal-dimension sentence vectors into one network input.
inline std::vector<double> build_input(
    const SentenceVector& u, const SentenceVector& v,
    EncoderInputMode mode = EncoderInputMode::concat_elementwise_product) {
  if (u.size() != v.size()) {
    throw DimensionMismatch("build_input: dimensions " + std::to_string(u.size()) + " vs " +
                            std::to_string(v.size()));
  }
  std::vector<double> x;
  const std::size_t d = u.size();
  x.reserve(mode == EncoderInputMode::concat_elementwise_product ? 4 * d : 3 * d + 1);
  x.insert(x.end(), u.begin(), u.end());
  x.insert(x.end(), v.begin(), v.end());
  for (std::size_t i = 0; i < d; ++i) x.push_back(std::abs(u[i] - v[i]));
  if (mode == EncoderInputMode::concat_elementwise_product) {
    for (std::size_t i = 0; i < d; ++i) x.push_back(u[i] * v[i]);
  } else {
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += u[i] * v[i];
    x.push_back(dot);
  }
  return x;
}

/// Fully-connected rectifier network with a linear scalar output. Weight
/// matrices are row-major [out][in].
struct MlpModel {
  MlpConfig config;
  std::vector<std::vector<double>> weights;  // layer l: widths[l+1] x widths[l], flattened
  std::vector<std::vector<double>> biases;   // layer l: widths[l+1]

  std::vector<std::size_t> layer_widths() const {
    std::vector<std::size_t> w;
    w.push_back(config.input_width());
    w.insert(w.end(), config.hidden.begin(), config.hidden.end());
    w.push_back(1);
    return w;
  }
};

namespace detail {

struct ForwardTrace {
  // activations[0] is the input; activations[l+1] the (post-rectifier,
  // post-dropout) output of layer l. preact[l] is layer l before rectifier.
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> preact;
  std::vector<std::vector<double>> dropout_mask;  // scale factors; empty when disabled
};

inline void affine(const std::vector<double>& w, const std::vector<double>& b,
                   const std::vector<double>& in, std::vector<double>& out) {
  const std::size_t n_out = b.size();
  const std::size_t n_in = in.size();
  out.assign(n_out, 0.0);
  for (std::size_t o = 0; o < n_out; ++o) {
    const double* row = w.data() + o * n_in;
    double acc = b[o];
    for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
}

inline ForwardTrace forward_trace(const MlpModel& model, const std::vector<double>& x,
                                  Rng* dropout_rng) {
  const auto widths = model.layer_widths();
  ForwardTrace t;
  t.activations.resize(widths.size());
  t.preact.resize(model.weights.size());
  t.activations[0] = x;
  const double rate = model.config.dropout_rate;
  const bool use_dropout = dropout_rng != nullptr && rate > 0.0;
  if (use_dropout) t.dropout_mask.resize(model.weights.size());
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    affine(model.weights[l], model.biases[l], t.activations[l], t.preact[l]);
    std::vector<double> act = t.preact[l];
    const bool is_hidden = l + 1 < model.weights.size();
    if (is_hidden) {
      for (double& a : act) a = std::max(0.0, a);
      if (use_dropout) {
        // Inverted dropout: surviving units scale by 1/keep, so inference
        // needs no rescaling.
        const double keep = 1.0 - rate;
        auto& mask = t.dropout_mask[l];
        mask.assign(act.size(), 0.0);
        for (std::size_t i = 0; i < act.size(); ++i) {
          mask[i] = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
          act[i] *= mask[i];
        }
      }
    }
    t.activations[l + 1] = std::move(act);
  }
  return t;
}

}  // namespace detail

/// Forward pass returning the scalar prediction. Pass a Rng to sample dropout
/// masks (training); pass nullptr for inference.
inline double mlp_forward(const MlpModel& model, const std::vector<double>& x,
                          Rng* dropout_rng = nullptr) {
  if (x.size() != model.config.input_width()) {
    throw DimensionMismatch("mlp_forward: input width " + std::to_string(x.size()) +
                            ", model expects " + std::to_string(model.config.input_width()));
  }
  return detail::forward_trace(model, x, dropout_rng).activations.back()[0];
}

/// Mean squared error plus l2_coeff * sum of squared weights (biases excluded).
inline double mlp_loss(const MlpModel& model, const Matrix& inputs,
                       const std::vector<double>& targets) {
  if (inputs.empty()) throw EmptyBatch("mlp_loss: empty batch");
  if (inputs.size() != targets.size()) throw SizeMismatch("mlp_loss: batch size mismatch");
  double se = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const double r = mlp_forward(model, inputs[i]) - targets[i];
    se += r * r;
  }
  double penalty = 0.0;
  for (const auto& layer : model.weights) {
    for (double w : layer) penalty += w * w;
  }
  return se / static_cast<double>(inputs.size()) + model.config.l2_coeff * penalty;
}

struct MlpGradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
};

namespace detail {

inline MlpGradients zero_gradients(const MlpModel& model) {
  MlpGradients g;
  g.weights.reserve(model.weights.size());
  g.biases.reserve(model.biases.size());
  for (const auto& w : model.weights) g.weights.emplace_back(w.size(), 0.0);
  for (const auto& b : model.biases) g.biases.emplace_back(b.size(), 0.0);
  return g;
}

// Accumulates the gradient of (pred - target)^2 / batch for one sample.
inline void backprop_sample(const MlpModel& model, const ForwardTrace& t, double target,
                            double inv_batch, MlpGradients& g) {
  const std::size_t layers = model.weights.size();
  const double pred = t.activations.back()[0];
  std::vector<double> delta = {2.0 * (pred - target) * inv_batch};
  for (std::size_t l = layers; l-- > 0;) {
    const auto& in = t.activations[l];
    const std::size_t n_out = model.biases[l].size();
    const std::size_t n_in = in.size();
    for (std::size_t o = 0; o < n_out; ++o) {
      g.biases[l][o] += delta[o];
      double* grow = g.weights[l].data() + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) grow[i] += delta[o] * in[i];
    }
    if (l == 0) break;
    std::vector<double> prev_delta(n_in, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* wrow = model.weights[l].data() + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) prev_delta[i] += wrow[i] * delta[o];
    }
    // Through dropout and the rectifier of layer l-1.
    if (!t.dropout_mask.empty() && !t.dropout_mask[l - 1].empty()) {
      for (std::size_t i = 0; i < n_in; ++i) prev_delta[i] *= t.dropout_mask[l - 1][i];
    }
    for (std::size_t i = 0; i < n_in; ++i) {
      if (t.preact[l - 1][i] <= 0.0) prev_delta[i] = 0.0;
    }
    delta = std::move(prev_delta);
  }
}

inline void add_l2_gradient(const MlpModel& model, MlpGradients& g) {
  if (model.config.l2_coeff == 0.0) return;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
      g.weights[l][i] += 2.0 * model.config.l2_coeff * model.weights[l][i];
    }
  }
}

}  // namespace detail

/// Exact backpropagation gradients of mlp_loss over a batch (dropout off).
inline MlpGradients mlp_grad(const MlpModel& model, const Matrix& inputs,
                             const std::vector<double>& targets) {
  if (inputs.empty()) throw EmptyBatch("mlp_grad: empty batch");
  if (inputs.size() != targets.size()) throw SizeMismatch("mlp_grad: batch size mismatch");
  MlpGradients g = detail::zero_gradients(model);
  const double inv_batch = 1.0 / static_cast<double>(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto trace = detail::forward_trace(model, inputs[i], nullptr);
    detail::backprop_sample(model, trace, targets[i], inv_batch, g);
  }
  detail::add_l2_gradient(model, g);
  return g;
}

/// Symmetric uniform fan-in initialization, seeded.
inline MlpModel init_mlp(const MlpConfig& config) {
  MlpModel model;
  model.config = config;
  const auto widths = model.layer_widths();
  Rng rng(config.seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t n_in = widths[l];
    const std::size_t n_out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(n_in));
    std::vector<double> w(n_in * n_out);
    for (double& x : w) x = rng.uniform_real(-bound, bound);
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(n_out, 0.0);
  }
  return model;
}

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_pearson;
  double val_mse = 0.0;
};

struct TrainResult {
  MlpModel model;
  std::size_t best_epoch = 0;
  double best_val_pearson = 0.0;
  std::vector<EpochStats> history;
};

namespace detail {

inline std::optional<double> pearson_or_none(const std::vector<double>& a,
                                             const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) return std::nullopt;
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace detail

/// Mini-batch SGD with MSE + L2 loss, inverted dropout, and correlation-based
/// early stopping: after each epoch the validation Pearson is computed, the
/// weights are snapshotted on improvement, and training stops once no
/// improvement has been seen for patience_epochs (or at max_epochs). Returns
/// the best snapshot. Deterministic for a fixed seed.
inline TrainResult train_mlp(const Matrix& train_inputs, const std::vector<double>& train_targets,
                             const Matrix& val_inputs, const std::vector<double>& val_targets,
                             const MlpConfig& config) {
  if (train_inputs.empty() || val_inputs.empty()) {
    throw EmptyTrainingSet("train_mlp: empty training or validation set");
  }
  if (train_inputs.size() != train_targets.size() || val_inputs.size() != val_targets.size()) {
    throw SizeMismatch("train_mlp: inputs/targets length mismatch");
  }

  MlpModel model = init_mlp(config);
  Rng rng(mix_seed(config.seed, 0x5d0u));  // shuffling and dropout stream

  TrainResult result;
  MlpModel best = model;
  double best_pearson = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t since_best = 0;

  std::vector<std::size_t> order(train_inputs.size());
  std::iota(order.begin(), order.end(), 0);

  const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      MlpGradients g = detail::zero_gradients(model);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const auto& x = train_inputs[order[k]];
        if (x.size() != config.input_width()) {
          throw DimensionMismatch("train_mlp: input width mismatch");
        }
        Rng* drop = config.dropout_rate > 0.0 ? &rng : nullptr;
        const auto trace = detail::forward_trace(model, x, drop);
        detail::backprop_sample(model, trace, train_targets[order[k]], inv_batch, g);
      }
      detail::add_l2_gradient(model, g);
      for (std::size_t l = 0; l < model.weights.size(); ++l) {
        for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
          model.weights[l][i] -= config.learning_rate * g.weights[l][i];
        }
        for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
          model.biases[l][i] -= config.learning_rate * g.biases[l][i];
        }
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = mlp_loss(model, train_inputs, train_targets);
    std::vector<double> val_pred;
    val_pred.reserve(val_inputs.size());
    for (const auto& x : val_inputs) val_pred.push_back(mlp_forward(model, x));
    double se = 0.0;
    for (std::size_t i = 0; i < val_pred.size(); ++i) {
      const double r = val_pred[i] - val_targets[i];
      se += r * r;
    }
    stats.val_mse = se / static_cast<double>(val_pred.size());
    stats.val_pearson = detail::pearson_or_none(val_pred, val_targets);
    result.history.push_back(stats);

    if (stats.val_pearson && *stats.val_pearson > best_pearson) {
      best_pearson = *stats.val_pearson;
      best = model;
      best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= config.patience_epochs) break;
  }

  if (best_epoch == 0) {
    // Validation Pearson never became defined; fall back to the final weights.
    best = model;
    best_epoch = result.history.size();
    best_pearson = 0.0;
  }
  result.model = std::move(best);
  result.best_epoch = best_epoch;
  result.best_val_pearson = best_pearson;
  return result;
}

/// Builds network inputs for a dataset from preprocessed tokens and the
/// embedding table, honoring the optional per-sentence vector cache.
inline Matrix build_dataset_inputs(const Dataset& dataset, const EmbeddingTable& embeddings,
                                   const StopwordList& stopwords, const MlpConfig& config,
                                   const SentenceVectorCache* cache = nullptr) {
  Matrix inputs;
  inputs.reserve(dataset.size());
  for (const auto& p : dataset.pairs) {
    SentenceVector u, v;
    const std::vector<double>* cu = cache ? cache->find(2 * p.id) : nullptr;
    const std::vector<double>* cv = cache ? cache->find(2 * p.id + 1) : nullptr;
    if (cu != nullptr && cv != nullptr) {
      u = *cu;
      v = *cv;
    } else {
      u = embed_sentence(preprocess(p.s1, stopwords).tokens, embeddings);
      v = embed_sentence(preprocess(p.s2, stopwords).tokens, embeddings);
    }
    if (u.size() != config.embed_dim) {
      throw DimensionMismatch("build_dataset_inputs: vector dim " + std::to_string(u.size()) +
                              ", config expects " + std::to_string(config.embed_dim));
    }
    inputs.push_back(build_input(u, v, config.input_mode));
  }
  return inputs;
}

inline std::vector<double> gold_vector(const Dataset& dataset) {
  std::vector<double> gold;
  gold.reserve(dataset.size());
  for (const auto& p : dataset.pairs) {
    if (!p.gold) {
      throw MissingGold("pair " + std::to_string(p.id) + " has no gold score");
    }
    gold.push_back(*p.gold);
  }
  return gold;
}

/// Trains the encoder on sentence pairs: preprocess, embed, build inputs,
/// then run train_mlp with early stopping on the validation set.
inline TrainResult train_encoder(const Dataset& train, const Dataset& validation,
                                 const EmbeddingTable& embeddings, const StopwordList& stopwords,
                                 const MlpConfig& config,
                                 const SentenceVectorCache* cache = nullptr) {
  const Matrix train_x = build_dataset_inputs(train, embeddings, stopwords, config, cache);
  const Matrix val_x = build_dataset_inputs(validation, embeddings, stopwords, config, cache);
  return train_mlp(train_x, gold_vector(train), val_x, gold_vector(validation), config);
}

/// Forward pass without dropout, clamped to the [0,5] score scale.
inline std::vector<double> mlp_predict(const MlpModel& model, const Matrix& inputs) {
  std::vector<double> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) {
    out.push_back(std::clamp(mlp_forward(model, x), 0.0, 5.0));
  }
  return out;
}

inline std::vector<double> encoder_predict(const MlpModel& model, const Dataset& dataset,
                                           const EmbeddingTable& embeddings,
                                           const StopwordList& stopwords,
                                           const SentenceVectorCache* cache = nullptr) {
  return mlp_predict(model,
                     build_dataset_inputs(dataset, embeddings, stopwords, model.config, cache));
}

namespace detail {

inline constexpr const char* kMlpFormat = "clinsim-mlp";
inline constexpr int kMlpVersion = 1;

}  // namespace detail

inline void save_mlp(const MlpModel& model, const std::string& path) {
  nlohmann::json j;
  j["format"] = detail::kMlpFormat;
  j["version"] = detail::kMlpVersion;
  j["config"] = {
      {"embed_dim", model.config.embed_dim},
      {"hidden", model.config.hidden},
      {"learning_rate", model.config.learning_rate},
      {"l2_coeff", model.config.l2_coeff},
      {"dropout_rate", model.config.dropout_rate},
      {"patience_epochs", model.config.patience_epochs},
      {"max_epochs", model.config.max_epochs},
      {"batch_size", model.config.batch_size},
      {"seed", model.config.seed},
      {"input_mode",
       model.config.input_mode == EncoderInputMode::concat_elementwise_product ? "4d" : "3d+1"},
  };
  j["weights"] = model.weights;
  j["biases"] = model.biases;
  detail::save_json_file(path, j);
}

inline MlpModel load_mlp(const std::string& path) {
  const nlohmann::json j = detail::load_json_file(path);
  detail::check_envelope(j, detail::kMlpFormat, detail::kMlpVersion, path);
  MlpModel model;
  try {
    const auto& cfg = j.at("config");
    model.config.embed_dim = cfg.at("embed_dim").get<std::size_t>();
    model.config.hidden = cfg.at("hidden").get<std::vector<std::size_t>>();
    model.config.learning_rate = cfg.at("learning_rate").get<double>();
    model.config.l2_coeff = cfg.at("l2_coeff").get<double>();
    model.config.dropout_rate = cfg.at("dropout_rate").get<double>();
    model.config.patience_epochs = cfg.at("patience_epochs").get<std::size_t>();
    model.config.max_epochs = cfg.at("max_epochs").get<std::size_t>();
    model.config.batch_size = cfg.at("batch_size").get<std::size_t>();
    model.config.seed = cfg.at("seed").get<std::uint64_t>();
    model.config.input_mode = cfg.at("input_mode").get<std::string>() == "4d"
                                  ? EncoderInputMode::concat_elementwise_product
                                  : EncoderInputMode::concat_scalar_dot;
    model.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    model.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  const auto widths = model.layer_widths();
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (model.weights.size() <= l || model.weights[l].size() != widths[l] * widths[l + 1] ||
        model.biases[l].size() != widths[l + 1]) {
      throw ParseError(path + ": weight shapes inconsistent with config");
    }
  }
  return model;
}

}  // namespace clinsim
