// Copyright the clinsim contributors. Licensed under the terms of the Apache 2.0 license.
// See LICENSE in the project root.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "clinsim/errors.hpp"
#include "clinsim/rng.hpp"

namespace clinsim {

using Matrix = std::vector<std::vector<double>>;

struct ForestConfig {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;           // unlimited when absent
  std::size_t min_samples_leaf = 1;
  std::optional<std::size_t> features_per_split;  // ceil(p/3) when absent
  std::uint64_t seed = 0;
  bool bootstrap = true;
};

/// One regression tree stored as a flat node array. Internal nodes test
/// x[feature] <= threshold (left on true); leaves carry the mean of their
/// training targets.
struct RegressionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double prediction = 0.0;
  };
  std::vector<Node> nodes;

  double predict(const std::vector<double>& row) const {
    int idx = 0;
    while (nodes[idx].feature >= 0) {
      const Node& n = nodes[idx];
      idx = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[idx].prediction;
  }
};

struct RandomForestModel {
  std::vector<RegressionTree> trees;
  ForestConfig config;
  std::size_t n_features = 0;
  std::vector<double> importances;  // normalized to sum 1, or all-zero
};

namespace detail {

struct TreeBuilder {
  const Matrix& features;
  const std::vector<double>& targets;
  std::size_t n_features;
  std::size_t features_per_split;
  std::size_t min_samples_leaf;
  std::optional<std::size_t> max_depth;
  Rng& rng;
  RegressionTree& tree;
  std::vector<double>& importance_acc;

  // Per-node scratch, reused across the recursion.
  std::vector<std::pair<double, double>> sorted;  // (feature value, target)
  std::vector<std::size_t> feature_pool;

  int build(std::vector<std::size_t>& samples, std::size_t depth) {
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t s : samples) {
      sum += targets[s];
      sumsq += targets[s] * targets[s];
    }
    const double n = static_cast<double>(samples.size());
    const double mean = sum / n;
    const double sse = std::max(0.0, sumsq - sum * sum / n);

    const int node_idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[node_idx].prediction = mean;

    const bool depth_capped = max_depth && depth >= *max_depth;
    if (samples.size() < 2 * min_samples_leaf || sse <= 1e-12 || depth_capped) {
      return node_idx;
    }

    // Sample the candidate features for this node, then scan them in index
    // order so ties resolve to the lowest feature index.
    feature_pool.resize(n_features);
    for (std::size_t i = 0; i < n_features; ++i) feature_pool[i] = i;
    const std::size_t k = std::min(features_per_split, n_features);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng.uniform_index(n_features - i);
      std::swap(feature_pool[i], feature_pool[j]);
    }
    std::vector<std::size_t> candidates(feature_pool.begin(), feature_pool.begin() + k);
    std::sort(candidates.begin(), candidates.end());

    double best_reduction = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    for (std::size_t f : candidates) {
      sorted.clear();
      for (std::size_t s : samples) sorted.emplace_back(features[s][f], targets[s]);
      std::sort(sorted.begin(), sorted.end());
      double left_sum = 0.0, left_sumsq = 0.0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left_sum += sorted[i].second;
        left_sumsq += sorted[i].second * sorted[i].second;
        if (sorted[i].first == sorted[i + 1].first) continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = sorted.size() - nl;
        if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
        const double right_sum = sum - left_sum;
        const double right_sumsq = sumsq - left_sumsq;
        const double sse_left =
            std::max(0.0, left_sumsq - left_sum * left_sum / static_cast<double>(nl));
        const double sse_right =
            std::max(0.0, right_sumsq - right_sum * right_sum / static_cast<double>(nr));
        const double reduction = sse - sse_left - sse_right;
        if (reduction > best_reduction) {
          best_reduction = reduction;
          best_feature = static_cast<int>(f);
          best_threshold = sorted[i].first + (sorted[i + 1].first - sorted[i].first) / 2.0;
        }
      }
    }
    if (best_feature < 0) return node_idx;

    importance_acc[static_cast<std::size_t>(best_feature)] += best_reduction;
    std::vector<std::size_t> left_samples, right_samples;
    for (std::size_t s : samples) {
      if (features[s][static_cast<std::size_t>(best_feature)] <= best_threshold) {
        left_samples.push_back(s);
      } else {
        right_samples.push_back(s);
      }
    }
    samples.clear();
    samples.shrink_to_fit();
    tree.nodes[node_idx].feature = best_feature;
    tree.nodes[node_idx].threshold = best_threshold;
    const int left = build(left_samples, depth + 1);
    tree.nodes[node_idx].left = left;
    const int right = build(right_samples, depth + 1);
    tree.nodes[node_idx].right = right;
    return node_idx;
  }
};

}  // namespace detail

/// Trains a bagged regression-tree ensemble. Each tree draws its bootstrap
/// sample and per-node feature subsets from an independent stream seeded by
/// mix_seed(config.seed, tree_index), so the result does not depend on build
/// order. Fully deterministic for a fixed (data, config).
inline RandomForestModel fit_forest(const Matrix& features, const std::vector<double>& targets,
                                    const ForestConfig& config) {
  if (features.empty() || features.size() < 2) {
    throw EmptyTrainingSet("fit_forest: need at least 2 training rows");
  }
  if (features.size() != targets.size()) {
    throw SizeMismatch("fit_forest: features/targets length mismatch");
  }
  const std::size_t p = features.front().size();
  if (p == 0) throw EmptyTrainingSet("fit_forest: rows have no features");
  for (const auto& row : features) {
    if (row.size() != p) throw DimensionMismatch("fit_forest: ragged feature matrix");
    for (double v : row) {
      if (!std::isfinite(v)) throw NonFiniteInput("fit_forest: non-finite feature value");
    }
  }
  for (double t : targets) {
    if (!std::isfinite(t)) throw NonFiniteInput("fit_forest: non-finite target value");
  }

  RandomForestModel model;
  model.config = config;
  model.n_features = p;
  model.importances.assign(p, 0.0);
  const std::size_t per_split =
      config.features_per_split ? *config.features_per_split : (p + 2) / 3;

  const std::size_t n = features.size();
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    Rng rng(mix_seed(config.seed, t));
    std::vector<std::size_t> samples(n);
    if (config.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) samples[i] = rng.uniform_index(n);
    } else {
      std::iota(samples.begin(), samples.end(), 0);
    }
    RegressionTree tree;
    detail::TreeBuilder builder{features,
                                targets,
                                p,
                                per_split,
                                config.min_samples_leaf,
                                config.max_depth,
                                rng,
                                tree,
                                model.importances,
                                {},
                                {}};
    builder.build(samples, 0);
    model.trees.push_back(std::move(tree));
  }

  double total = 0.0;
  for (double v : model.importances) total += v;
  if (total > 0.0) {
    for (double& v : model.importances) v /= total;
  }
  return model;
}

/// Mean over trees, clamped to the [0,5] score scale.
inline std::vector<double> forest_predict(const RandomForestModel& model, const Matrix& features) {
  std::vector<double> out;
  out.reserve(features.size());
  for (const auto& row : features) {
    if (row.size() != model.n_features) {
      throw DimensionMismatch("forest_predict: row width " + std::to_string(row.size()) +
                              ", model expects " + std::to_string(model.n_features));
    }
    double sum = 0.0;
    for (const auto& tree : model.trees) sum += tree.predict(row);
    const double mean = sum / static_cast<double>(model.trees.size());
    out.push_back(std::clamp(mean, 0.0, 5.0));
  }
  return out;
}

inline const std::vector<double>& feature_importances(const RandomForestModel& model) {
  return model.importances;
}

/// DOT digraph for one tree, internal nodes labeled "f<idx> <= <threshold>".
inline std::string export_tree_dot(const RandomForestModel& model, std::size_t tree_index) {
  if (tree_index >= model.trees.size()) {
    throw IndexOutOfRange("export_tree_dot: tree index " + std::to_string(tree_index) +
                          " out of range (" + std::to_string(model.trees.size()) + " trees)");
  }
  const RegressionTree& tree = model.trees[tree_index];
  std::ostringstream out;
  out << "digraph tree_" << tree_index << " {\n";
  out << "  node [shape=box];\n";
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    char label[96];
    if (n.feature >= 0) {
      std::snprintf(label, sizeof(label), "f%d <= %.6g", n.feature, n.threshold);
    } else {
      std::snprintf(label, sizeof(label), "%.6g", n.prediction);
    }
    out << "  n" << i << " [label=\"" << label << "\"];\n";
  }
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    if (n.feature >= 0) {
      out << "  n" << i << " -> n" << n.left << ";\n";
      out << "  n" << i << " -> n" << n.right << ";\n";
    }
  }
  out << "}\n";
  return out.str();
}

namespace detail {

inline constexpr const char* kForestFormat = "clinsim-forest";
inline constexpr int kForestVersion = 1;

inline void check_envelope(const nlohmann::json& j, const char* format, int version,
                           const std::string& path) {
  if (!j.is_object() || j.value("format", "") != format) {
    throw VersionMismatch(path + ": not a " + format + " file");
  }
  if (j.value("version", -1) != version) {
    throw VersionMismatch(path + ": unsupported version");
  }
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return j;
}

inline void save_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing model file: " + path);
}

}  // namespace detail

inline void save_forest(const RandomForestModel& model, const std::string& path) {
  nlohmann::json j;
  j["format"] = detail::kForestFormat;
  j["version"] = detail::kForestVersion;
  j["config"] = {
      {"n_trees", model.config.n_trees},
      {"min_samples_leaf", model.config.min_samples_leaf},
      {"seed", model.config.seed},
      {"bootstrap", model.config.bootstrap},
  };
  if (model.config.max_depth) j["config"]["max_depth"] = *model.config.max_depth;
  if (model.config.features_per_split) {
    j["config"]["features_per_split"] = *model.config.features_per_split;
  }
  j["n_features"] = model.n_features;
  j["importances"] = model.importances;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.prediction});
    }
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  detail::save_json_file(path, j);
}

inline RandomForestModel load_forest(const std::string& path) {
  const nlohmann::json j = detail::load_json_file(path);
  detail::check_envelope(j, detail::kForestFormat, detail::kForestVersion, path);
  RandomForestModel model;
  try {
    const auto& cfg = j.at("config");
    model.config.n_trees = cfg.at("n_trees").get<std::size_t>();
    model.config.min_samples_leaf = cfg.at("min_samples_leaf").get<std::size_t>();
    model.config.seed = cfg.at("seed").get<std::uint64_t>();
    model.config.bootstrap = cfg.at("bootstrap").get<bool>();
    if (cfg.contains("max_depth")) model.config.max_depth = cfg.at("max_depth").get<std::size_t>();
    if (cfg.contains("features_per_split")) {
      model.config.features_per_split = cfg.at("features_per_split").get<std::size_t>();
    }
    model.n_features = j.at("n_features").get<std::size_t>();
    model.importances = j.at("importances").get<std::vector<double>>();
    for (const auto& tnodes : j.at("trees")) {
      RegressionTree tree;
      for (const auto& n : tnodes) {
        RegressionTree::Node node;
        node.feature = n.at(0).get<int>();
        node.threshold = n.at(1).get<double>();
        node.left = n.at(2).get<int>();
        node.right = n.at(3).get<int>();
        node.prediction = n.at(4).get<double>();
        tree.nodes.push_back(node);
      }
      model.trees.push_back(std::move(tree));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return model;
}

}  // namespace clinsim
