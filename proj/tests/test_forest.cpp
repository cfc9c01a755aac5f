#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "clinsim/evaluation.hpp"
#include "clinsim/forest.hpp"
#include "clinsim/rng.hpp"
#include "test_util.hpp"

using namespace clinsim;

namespace {

/// Synthetic regression data: p features in [0,1], target driven by one column.
struct Synthetic {
  Matrix x;
  std::vector<double> y;
};

Synthetic make_synthetic(std::size_t n, std::size_t p, std::size_t signal_feature,
                         double noise_sd, std::uint64_t seed) {
  Synthetic s;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(p);
    for (auto& v : row) v = rng.uniform_real();
    double noise = 0.0;
    if (noise_sd > 0.0) {
      // Sum of uniforms, shifted; close enough to Gaussian for tests.
      for (int k = 0; k < 12; ++k) noise += rng.uniform_real();
      noise = (noise - 6.0) * noise_sd;
    }
    s.y.push_back(row[signal_feature] + noise);
    s.x.push_back(std::move(row));
  }
  return s;
}

}  // namespace

TEST_CASE("constant targets collapse to single-leaf trees") {
  Matrix x = {{0.1, 0.5}, {0.9, 0.2}, {0.4, 0.7}};
  std::vector<double> y = {2.0, 2.0, 2.0};
  ForestConfig config;
  config.n_trees = 5;
  const RandomForestModel model = fit_forest(x, y, config);
  for (const auto& tree : model.trees) CHECK(tree.nodes.size() == 1);
  for (double v : forest_predict(model, x)) CHECK(v == 2.0);
  // No split anywhere: the importance vector is all-zero.
  for (double v : model.importances) CHECK(v == 0.0);
}

TEST_CASE("forest recovers a single-feature target") {
  const Synthetic train = make_synthetic(400, 5, 0, 0.0, 1);
  ForestConfig config;
  config.n_trees = 30;
  config.seed = 3;
  const RandomForestModel model = fit_forest(train.x, train.y, config);
  const double r = pearson(forest_predict(model, train.x), train.y);
  CHECK(r >= 0.99);

  const auto& imp = feature_importances(model);
  CHECK(std::max_element(imp.begin(), imp.end()) - imp.begin() == 0);
  double total = 0.0;
  for (double v : imp) {
    CHECK(v >= 0.0);
    total += v;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("same seed, same model; prediction is deterministic") {
  const Synthetic data = make_synthetic(120, 4, 1, 0.05, 9);
  ForestConfig config;
  config.n_trees = 12;
  config.seed = 21;
  const RandomForestModel a = fit_forest(data.x, data.y, config);
  const RandomForestModel b = fit_forest(data.x, data.y, config);
  const auto pa = forest_predict(a, data.x);
  const auto pb = forest_predict(b, data.x);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);

  testutil::TempDir dir("forest");
  save_forest(a, dir.file("a.json"));
  save_forest(b, dir.file("b.json"));
  CHECK(testutil::read_file(dir.file("a.json")) == testutil::read_file(dir.file("b.json")));
}

TEST_CASE("per-tree seed streams make tree prefixes stable") {
  const Synthetic data = make_synthetic(100, 4, 2, 0.05, 4);
  ForestConfig small, large;
  small.n_trees = 3;
  large.n_trees = 6;
  small.seed = large.seed = 17;
  const RandomForestModel a = fit_forest(data.x, data.y, small);
  const RandomForestModel b = fit_forest(data.x, data.y, large);
  for (std::size_t t = 0; t < small.n_trees; ++t) {
    REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
    for (std::size_t n = 0; n < a.trees[t].nodes.size(); ++n) {
      CHECK(a.trees[t].nodes[n].feature == b.trees[t].nodes[n].feature);
      CHECK(a.trees[t].nodes[n].threshold == b.trees[t].nodes[n].threshold);
      CHECK(a.trees[t].nodes[n].prediction == b.trees[t].nodes[n].prediction);
    }
  }
}

TEST_CASE("hand-built two-tree model predicts the exact mean") {
  RandomForestModel model;
  model.n_features = 1;
  RegressionTree leaf1, leaf2;
  leaf1.nodes.push_back({-1, 0.0, -1, -1, 1.0});
  leaf2.nodes.push_back({-1, 0.0, -1, -1, 4.0});
  model.trees = {leaf1, leaf2};
  const auto pred = forest_predict(model, {{0.3}});
  REQUIRE(pred.size() == 1);
  CHECK(pred[0] == doctest::Approx(2.5));
  CHECK(forest_predict(model, {}).empty());
  CHECK_THROWS_AS(forest_predict(model, {{0.1, 0.2}}), DimensionMismatch);
}

TEST_CASE("predictions stay within the training target range") {
  const Synthetic data = make_synthetic(200, 3, 0, 0.0, 5);
  std::vector<double> targets = data.y;
  for (double& t : targets) t = 1.0 + 3.0 * t;  // inside [0,5] so clamping is inert
  ForestConfig config;
  config.n_trees = 10;
  config.seed = 2;
  const RandomForestModel model = fit_forest(data.x, targets, config);
  const double lo = *std::min_element(targets.begin(), targets.end());
  const double hi = *std::max_element(targets.begin(), targets.end());
  const Synthetic probe = make_synthetic(100, 3, 0, 0.0, 6);
  for (double v : forest_predict(model, probe.x)) {
    CHECK(v >= lo - 1e-12);
    CHECK(v <= hi + 1e-12);
  }
}

TEST_CASE("single tree, no bootstrap, full depth fits distinct rows exactly") {
  const Synthetic data = make_synthetic(64, 3, 1, 0.3, 12);
  ForestConfig config;
  config.n_trees = 1;
  config.bootstrap = false;
  config.features_per_split = 3;
  config.seed = 1;
  const RandomForestModel model = fit_forest(data.x, data.y, config);
  const auto pred = forest_predict(model, data.x);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    CHECK(pred[i] == doctest::Approx(std::clamp(data.y[i], 0.0, 5.0)).epsilon(1e-12));
  }
}

TEST_CASE("errors on degenerate input") {
  CHECK_THROWS_AS(fit_forest({}, {}, ForestConfig{}), EmptyTrainingSet);
  CHECK_THROWS_AS(fit_forest({{1.0}}, {1.0}, ForestConfig{}), EmptyTrainingSet);
  CHECK_THROWS_AS(fit_forest({{1.0}, {2.0}}, {1.0}, ForestConfig{}), SizeMismatch);
  const double nan = std::nan("");
  CHECK_THROWS_AS(fit_forest({{nan}, {1.0}}, {1.0, 2.0}, ForestConfig{}), NonFiniteInput);
  CHECK_THROWS_AS(fit_forest({{1.0}, {2.0}}, {nan, 2.0}, ForestConfig{}), NonFiniteInput);
}

TEST_CASE("DOT export structure") {
  // Single leaf: one node, no edges.
  RandomForestModel leaf_model;
  leaf_model.n_features = 1;
  RegressionTree leaf;
  leaf.nodes.push_back({-1, 0.0, -1, -1, 2.25});
  leaf_model.trees = {leaf};
  const std::string dot = export_tree_dot(leaf_model, 0);
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("2.25") != std::string::npos);
  CHECK(dot.find("->") == std::string::npos);

  // Depth-1 tree: three nodes, two edges.
  RandomForestModel stump_model;
  stump_model.n_features = 2;
  RegressionTree stump;
  stump.nodes.push_back({1, 0.5, 1, 2, 0.0});
  stump.nodes.push_back({-1, 0.0, -1, -1, 1.0});
  stump.nodes.push_back({-1, 0.0, -1, -1, 3.0});
  stump_model.trees = {stump};
  const std::string dot2 = export_tree_dot(stump_model, 0);
  CHECK(dot2.find("f1 <= 0.5") != std::string::npos);
  std::size_t edges = 0, pos = 0;
  while ((pos = dot2.find("->", pos)) != std::string::npos) {
    ++edges;
    pos += 2;
  }
  CHECK(edges == 2);

  // Syntactic sanity: balanced braces, node ids defined before referenced.
  CHECK(std::count(dot2.begin(), dot2.end(), '{') == 1);
  CHECK(std::count(dot2.begin(), dot2.end(), '}') == 1);

  CHECK_THROWS_AS(export_tree_dot(stump_model, 5), IndexOutOfRange);
}

TEST_CASE("save/load round-trips the model exactly") {
  const Synthetic data = make_synthetic(80, 4, 0, 0.1, 8);
  ForestConfig config;
  config.n_trees = 6;
  config.seed = 5;
  config.max_depth = 4;
  const RandomForestModel model = fit_forest(data.x, data.y, config);

  testutil::TempDir dir("forest_io");
  const std::string path = dir.file("model.json");
  save_forest(model, path);
  const RandomForestModel loaded = load_forest(path);
  CHECK(loaded.config.n_trees == config.n_trees);
  CHECK(loaded.config.max_depth == config.max_depth);
  const auto p1 = forest_predict(model, data.x);
  const auto p2 = forest_predict(loaded, data.x);
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);

  // Truncated or foreign files are rejected.
  const std::string truncated = dir.file("truncated.json");
  const std::string full = testutil::read_file(path);
  testutil::write_file(truncated, full.substr(0, full.size() / 2));
  CHECK_THROWS_AS(load_forest(truncated), ParseError);
  const std::string foreign = dir.file("foreign.json");
  testutil::write_file(foreign, "{\"format\":\"something-else\",\"version\":1}");
  CHECK_THROWS_AS(load_forest(foreign), VersionMismatch);
  CHECK_THROWS_AS(load_forest(dir.file("missing.json")), IoError);
}
