// Copyright the clinsim contributors. Licensed under the terms of the Apache 2.0 license.
// See LICENSE in the project root.
//
// Command-line front end wiring the library into the full workflow:
// featurize -> train-rf / train-encoder -> stack -> predict -> evaluate/ablate.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clinsim/encoder.hpp"
#include "clinsim/entity_metrics.hpp"
#include "clinsim/evaluation.hpp"
#include "clinsim/feature_pipeline.hpp"
#include "clinsim/forest.hpp"
#include "clinsim/manifest.hpp"
#include "clinsim/stacking.hpp"
#include "clinsim/text_prep.hpp"
#include "clinsim/version.hpp"

namespace {

using namespace clinsim;

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitComputeError = 3;

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v == nullptr ? std::string() : std::string(v);
}

StopwordList resolve_stopwords(const std::string& flag_path) {
  if (!flag_path.empty()) return load_stopwords(flag_path);
  const std::string env = env_or_empty("CLINSIM_STOPWORDS");
  if (!env.empty()) return load_stopwords(env);
  return default_stopwords();
}

EntityLexicon resolve_lexicon(const std::string& flag_path) {
  if (!flag_path.empty()) return load_lexicon(flag_path);
  const std::string env = env_or_empty("CLINSIM_LEXICON");
  if (!env.empty()) return load_lexicon(env);
  return EntityLexicon{};
}

void print_lexicon_warnings(const EntityLexicon& lex) {
  for (const auto& w : lex.warnings) std::cerr << "warning: " << w << "\n";
}

/// Detects whether a pair TSV carries a gold column from its first data line.
bool detect_gold(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pair file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tabs = 0;
    for (char c : line) tabs += c == '\t' ? 1 : 0;
    return tabs >= 2;
  }
  return false;
}

Dataset load_pairs_auto(const std::string& path) { return load_pairs(path, detect_gold(path)); }

/// Reads gold scores from a plain score file, a pair TSV, or a feature TSV.
std::vector<double> read_scores(const std::string& path) {
  std::ifstream probe(path);
  if (!probe) throw IoError("cannot open score file: " + path);
  std::string first;
  std::getline(probe, first);
  probe.close();
  if (first.rfind("id\t", 0) == 0) {
    const FeatureMatrix m = read_features(path);
    if (!m.gold) throw MissingGold(path + ": feature file has no gold column");
    return *m.gold;
  }
  if (first.find('\t') != std::string::npos) {
    const Dataset ds = load_pairs(path, true);
    std::vector<double> gold;
    gold.reserve(ds.size());
    for (const auto& p : ds.pairs) gold.push_back(*p.gold);
    return gold;
  }
  std::ifstream in(path);
  std::vector<double> scores;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double v = 0.0;
    if (!detail::parse_double(line, v)) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": malformed score '" + line + "'");
    }
    scores.push_back(v);
  }
  return scores;
}

void write_scores(const std::string& path, const std::vector<double>& scores) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write prediction file: " + path);
  for (double s : scores) out << detail::format_fixed9(s) << "\n";
  if (!out) throw IoError("failed writing prediction file: " + path);
}

struct SplitFlags {
  std::size_t train_count = 600;
  std::size_t validation_count = 150;
  std::uint64_t seed = 42;

  SplitSpec spec() const { return {train_count, validation_count, seed}; }

  void attach(CLI::App* cmd) {
    cmd->add_option("--train-count", train_count, "Training partition size (default 600)");
    cmd->add_option("--val-count", validation_count, "Validation partition size (default 150)");
    cmd->add_option("--split-seed", seed, "Seed for the train/validation shuffle (default 42)");
  }
};

// ---------------------------------------------------------------------------
// featurize

struct FeaturizeArgs {
  std::string pairs, stopwords, embeddings, lexicon, sentence_vectors, idf_from, out;
  bool force_gold = false;
  bool force_no_gold = false;
  SplitFlags split;
  bool idf_from_train_partition = false;
};

int cmd_featurize(const FeaturizeArgs& a) {
  const bool has_gold = a.force_gold || (!a.force_no_gold && detect_gold(a.pairs));
  const Dataset dataset = load_pairs(a.pairs, has_gold);
  const StopwordList stopwords = resolve_stopwords(a.stopwords);
  const EmbeddingTable embeddings = load_embeddings(a.embeddings);
  const EntityLexicon lexicon = resolve_lexicon(a.lexicon);
  print_lexicon_warnings(lexicon);
  std::optional<SentenceVectorCache> cache;
  if (!a.sentence_vectors.empty()) cache = load_sentence_vectors(a.sentence_vectors);

  // idf statistics come from the designated source file (default: the input
  // pairs). With --idf-from-train-partition they are restricted to the
  // seed-derived training partition of that source, so validation and test
  // sentences stay unseen.
  const std::string idf_path = a.idf_from.empty() ? a.pairs : a.idf_from;
  Dataset idf_source = idf_path == a.pairs ? dataset : load_pairs_auto(idf_path);
  IdfModel idf;
  if (a.idf_from_train_partition) {
    const auto [train, validation] = split(idf_source, a.split.spec());
    idf = fit_idf_on(train, stopwords);
  } else {
    idf = fit_idf_on(idf_source, stopwords);
  }

  FeatureContext ctx{stopwords, idf, embeddings, lexicon, cache ? &*cache : nullptr};
  const FeatureMatrix features = featurize_dataset(dataset, ctx);
  write_features(a.out, features);

  RunManifest manifest;
  manifest.command = "featurize";
  manifest.flags = {{"pairs", a.pairs},
                    {"stopwords", a.stopwords},
                    {"embeddings", a.embeddings},
                    {"lexicon", a.lexicon},
                    {"sentence-vectors", a.sentence_vectors},
                    {"idf-from", idf_path},
                    {"idf-from-train-partition", a.idf_from_train_partition ? "true" : "false"},
                    {"has-gold", has_gold ? "true" : "false"},
                    {"out", a.out}};
  manifest.seeds = {{"split-seed", a.split.seed}};
  manifest.inputs.emplace_back(a.pairs, file_digest(a.pairs));
  manifest.inputs.emplace_back(a.embeddings, file_digest(a.embeddings));
  if (!a.stopwords.empty()) manifest.inputs.emplace_back(a.stopwords, file_digest(a.stopwords));
  if (!a.lexicon.empty()) manifest.inputs.emplace_back(a.lexicon, file_digest(a.lexicon));
  if (!a.sentence_vectors.empty()) {
    manifest.inputs.emplace_back(a.sentence_vectors, file_digest(a.sentence_vectors));
  }
  if (!a.idf_from.empty()) manifest.inputs.emplace_back(a.idf_from, file_digest(a.idf_from));
  manifest.outputs = {a.out};
  write_manifest(a.out + ".manifest.json", manifest);

  std::cout << "featurized " << features.rows.size() << " pairs -> " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train-rf

struct TrainRfArgs {
  std::string features, out_model, report, val_preds, val_gold;
  SplitFlags split;
  std::size_t trees = 100;
  std::size_t min_leaf = 1;
  std::uint64_t seed = 7;
  std::optional<std::size_t> max_depth;
  std::optional<std::size_t> features_per_split;
};

Matrix to_matrix(const std::vector<FeatureVector>& rows) {
  Matrix m;
  m.reserve(rows.size());
  for (const auto& r : rows) m.emplace_back(r.begin(), r.end());
  return m;
}

int cmd_train_rf(const TrainRfArgs& a) {
  const FeatureMatrix features = read_features(a.features);
  if (!features.gold) throw MissingGold(a.features + ": training requires a gold column");

  // Row-level split mirroring the pair-level SplitSpec semantics.
  const std::size_t n = features.rows.size();
  SplitSpec spec = a.split.spec();
  if (n != spec.train_count + spec.validation_count) {
    throw SizeMismatch("train-rf: feature file has " + std::to_string(n) +
                       " rows, split wants " +
                       std::to_string(spec.train_count + spec.validation_count));
  }
  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(indices);
  std::vector<std::size_t> train_idx(indices.begin(), indices.begin() + spec.train_count);
  std::vector<std::size_t> val_idx(indices.begin() + spec.train_count, indices.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());

  Matrix train_x, val_x;
  std::vector<double> train_y, val_y;
  for (std::size_t i : train_idx) {
    train_x.emplace_back(features.rows[i].begin(), features.rows[i].end());
    train_y.push_back((*features.gold)[i]);
  }
  for (std::size_t i : val_idx) {
    val_x.emplace_back(features.rows[i].begin(), features.rows[i].end());
    val_y.push_back((*features.gold)[i]);
  }

  ForestConfig config;
  config.n_trees = a.trees;
  config.min_samples_leaf = a.min_leaf;
  config.seed = a.seed;
  config.max_depth = a.max_depth;
  config.features_per_split = a.features_per_split;
  const RandomForestModel model = fit_forest(train_x, train_y, config);
  save_forest(model, a.out_model);

  const std::vector<double> val_pred = forest_predict(model, val_x);
  const EvalReport val_report = evaluate(val_pred, val_y);
  if (!a.val_preds.empty()) write_scores(a.val_preds, val_pred);
  if (!a.val_gold.empty()) write_scores(a.val_gold, val_y);

  if (!a.report.empty()) {
    nlohmann::json j;
    j["format"] = "clinsim-rf-report";
    j["validation"] = {{"pearson", detail::sig6(val_report.pearson)},
                       {"mse", detail::sig6(val_report.mse)},
                       {"n", val_report.n}};
    nlohmann::json imp = nlohmann::json::array();
    for (std::size_t f = 0; f < model.importances.size(); ++f) {
      imp.push_back({{"index", f},
                     {"name", f < kFeatureCount ? kFeatureNames[f] : "?"},
                     {"importance", detail::sig6(model.importances[f])}});
    }
    j["importances"] = imp;
    j["config"] = {{"trees", a.trees}, {"seed", a.seed}, {"min_samples_leaf", a.min_leaf}};
    detail::save_json_file(a.report, j);
  }

  RunManifest manifest;
  manifest.command = "train-rf";
  manifest.flags = {{"features", a.features},
                    {"trees", std::to_string(a.trees)},
                    {"min-leaf", std::to_string(a.min_leaf)},
                    {"out-model", a.out_model},
                    {"report", a.report}};
  manifest.seeds = {{"seed", a.seed}, {"split-seed", spec.seed}};
  manifest.inputs.emplace_back(a.features, file_digest(a.features));
  manifest.outputs = {a.out_model};
  if (!a.report.empty()) manifest.outputs.push_back(a.report);
  if (!a.val_preds.empty()) manifest.outputs.push_back(a.val_preds);
  if (!a.val_gold.empty()) manifest.outputs.push_back(a.val_gold);
  write_manifest(a.out_model + ".manifest.json", manifest);

  std::printf("trained forest (%zu trees) on %zu rows; validation pearson %.4f mse %.4f\n",
              a.trees, train_x.size(), val_report.pearson, val_report.mse);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train-encoder

struct TrainEncoderArgs {
  std::string pairs, embeddings, sentence_vectors, stopwords, out_model, report, val_preds,
      val_gold;
  SplitFlags split;
  std::uint64_t seed = 7;
  std::vector<std::size_t> hidden = {480, 240, 80};
  double lr = 1e-4;
  double l2 = 1e-4;
  double dropout = 0.5;
  std::size_t patience = 200;
  std::size_t max_epochs = 10000;
  std::size_t batch = 32;
  std::string input_mode = "4d";
};

int cmd_train_encoder(const TrainEncoderArgs& a) {
  // Gold presence is a contract here, not a format choice: detect the column
  // layout, then let gold_vector raise MissingGold (exit 3) on unlabeled data.
  const Dataset dataset = load_pairs_auto(a.pairs);
  const StopwordList stopwords = resolve_stopwords(a.stopwords);
  const EmbeddingTable embeddings = load_embeddings(a.embeddings);
  std::optional<SentenceVectorCache> cache;
  if (!a.sentence_vectors.empty()) cache = load_sentence_vectors(a.sentence_vectors);

  const auto [train, validation] = split(dataset, a.split.spec());

  MlpConfig config;
  config.embed_dim = cache ? cache->dim : embeddings.dim;
  config.hidden = a.hidden;
  config.learning_rate = a.lr;
  config.l2_coeff = a.l2;
  config.dropout_rate = a.dropout;
  config.patience_epochs = a.patience;
  config.max_epochs = a.max_epochs;
  config.batch_size = a.batch;
  config.seed = a.seed;
  config.input_mode = a.input_mode == "3d+1" ? EncoderInputMode::concat_scalar_dot
                                             : EncoderInputMode::concat_elementwise_product;

  const TrainResult result =
      train_encoder(train, validation, embeddings, stopwords, config, cache ? &*cache : nullptr);
  save_mlp(result.model, a.out_model);
  if (!a.val_preds.empty()) {
    write_scores(a.val_preds, encoder_predict(result.model, validation, embeddings, stopwords,
                                              cache ? &*cache : nullptr));
  }
  if (!a.val_gold.empty()) write_scores(a.val_gold, gold_vector(validation));

  if (!a.report.empty()) {
    nlohmann::json j;
    j["format"] = "clinsim-encoder-report";
    j["best_epoch"] = result.best_epoch;
    j["best_validation_pearson"] = detail::sig6(result.best_val_pearson);
    j["epochs_run"] = result.history.size();
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& e : result.history) {
      hist.push_back({{"epoch", e.epoch},
                      {"train_loss", detail::sig6(e.train_loss)},
                      {"val_pearson", detail::sig6_or_null(e.val_pearson)},
                      {"val_mse", detail::sig6(e.val_mse)}});
    }
    j["history"] = hist;
    detail::save_json_file(a.report, j);
  }

  RunManifest manifest;
  manifest.command = "train-encoder";
  manifest.flags = {{"pairs", a.pairs},
                    {"embeddings", a.embeddings},
                    {"sentence-vectors", a.sentence_vectors},
                    {"stopwords", a.stopwords},
                    {"lr", std::to_string(a.lr)},
                    {"l2", std::to_string(a.l2)},
                    {"dropout", std::to_string(a.dropout)},
                    {"patience", std::to_string(a.patience)},
                    {"max-epochs", std::to_string(a.max_epochs)},
                    {"batch", std::to_string(a.batch)},
                    {"input-mode", a.input_mode},
                    {"out-model", a.out_model},
                    {"report", a.report}};
  manifest.seeds = {{"seed", a.seed}, {"split-seed", a.split.seed}};
  manifest.inputs.emplace_back(a.pairs, file_digest(a.pairs));
  manifest.inputs.emplace_back(a.embeddings, file_digest(a.embeddings));
  if (!a.sentence_vectors.empty()) {
    manifest.inputs.emplace_back(a.sentence_vectors, file_digest(a.sentence_vectors));
  }
  if (!a.stopwords.empty()) manifest.inputs.emplace_back(a.stopwords, file_digest(a.stopwords));
  manifest.outputs = {a.out_model};
  if (!a.report.empty()) manifest.outputs.push_back(a.report);
  if (!a.val_preds.empty()) manifest.outputs.push_back(a.val_preds);
  if (!a.val_gold.empty()) manifest.outputs.push_back(a.val_gold);
  write_manifest(a.out_model + ".manifest.json", manifest);

  std::printf("trained encoder for %zu epochs; best epoch %zu validation pearson %.4f\n",
              result.history.size(), result.best_epoch, result.best_val_pearson);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// stack / predict

struct StackArgs {
  std::vector<std::string> base_preds;
  std::string gold, out_model;
};

Matrix read_base_predictions(const std::vector<std::string>& paths) {
  Matrix columns_matrix;
  std::vector<std::vector<double>> cols;
  cols.reserve(paths.size());
  std::size_t n = 0;
  for (const auto& p : paths) {
    cols.push_back(read_scores(p));
    if (cols.size() == 1) {
      n = cols.back().size();
    } else if (cols.back().size() != n) {
      throw SizeMismatch("base prediction files disagree on row count: " + p);
    }
  }
  columns_matrix.assign(n, std::vector<double>(paths.size(), 0.0));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) columns_matrix[i][j] = cols[j][i];
  }
  return columns_matrix;
}

int cmd_stack(const StackArgs& a) {
  StackInputs inputs;
  inputs.predictions = read_base_predictions(a.base_preds);
  inputs.gold = read_scores(a.gold);
  const LinearStacker stacker = fit_ols(inputs);
  save_stacker(stacker, a.out_model);

  RunManifest manifest;
  manifest.command = "stack";
  manifest.flags = {{"gold", a.gold}, {"out-model", a.out_model}};
  for (std::size_t i = 0; i < a.base_preds.size(); ++i) {
    manifest.flags["base-preds-" + std::to_string(i)] = a.base_preds[i];
    manifest.inputs.emplace_back(a.base_preds[i], file_digest(a.base_preds[i]));
  }
  manifest.inputs.emplace_back(a.gold, file_digest(a.gold));
  manifest.outputs = {a.out_model};
  write_manifest(a.out_model + ".manifest.json", manifest);

  std::cout << "fitted stacker over " << a.base_preds.size() << " base models; intercept "
            << stacker.intercept << "\n";
  return kExitOk;
}

struct PredictArgs {
  std::string model, features, pairs, embeddings, sentence_vectors, stopwords, out;
  std::vector<std::string> base_preds;
};

int cmd_predict(const PredictArgs& a) {
  const nlohmann::json header = detail::load_json_file(a.model);
  const std::string format = header.value("format", "");
  std::vector<double> scores;
  RunManifest manifest;
  manifest.command = "predict";
  manifest.inputs.emplace_back(a.model, file_digest(a.model));

  if (format == detail::kForestFormat) {
    if (a.features.empty()) {
      throw InvalidInput("predict: a forest model needs --features");
    }
    const RandomForestModel model = load_forest(a.model);
    const FeatureMatrix m = read_features(a.features);
    scores = forest_predict(model, to_matrix(m.rows));
    manifest.inputs.emplace_back(a.features, file_digest(a.features));
  } else if (format == detail::kMlpFormat) {
    if (a.pairs.empty() || a.embeddings.empty()) {
      throw InvalidInput("predict: an encoder model needs --pairs and --embeddings");
    }
    const MlpModel model = load_mlp(a.model);
    const Dataset dataset = load_pairs_auto(a.pairs);
    const StopwordList stopwords = resolve_stopwords(a.stopwords);
    const EmbeddingTable embeddings = load_embeddings(a.embeddings);
    std::optional<SentenceVectorCache> cache;
    if (!a.sentence_vectors.empty()) cache = load_sentence_vectors(a.sentence_vectors);
    scores = encoder_predict(model, dataset, embeddings, stopwords, cache ? &*cache : nullptr);
    manifest.inputs.emplace_back(a.pairs, file_digest(a.pairs));
    manifest.inputs.emplace_back(a.embeddings, file_digest(a.embeddings));
  } else if (format == detail::kStackerFormat) {
    if (a.base_preds.empty()) {
      throw InvalidInput("predict: a stacker model needs --base-preds");
    }
    const LinearStacker stacker = load_stacker(a.model);
    scores = stacker_predict(stacker, read_base_predictions(a.base_preds));
    for (const auto& p : a.base_preds) manifest.inputs.emplace_back(p, file_digest(p));
  } else {
    throw VersionMismatch(a.model + ": unknown model format '" + format + "'");
  }

  write_scores(a.out, scores);
  manifest.flags = {{"model", a.model}, {"out", a.out}};
  manifest.outputs = {a.out};
  write_manifest(a.out + ".manifest.json", manifest);
  std::cout << "wrote " << scores.size() << " predictions -> " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate / ablate / export-dot

struct EvaluateArgs {
  std::string pred, gold, features, out_report;
  std::size_t top_errors = 0;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const std::vector<double> pred = read_scores(a.pred);
  const std::vector<double> gold = read_scores(a.gold);
  const EvalReport report = evaluate(pred, gold);
  if (a.top_errors > 0) {
    std::vector<std::size_t> order(pred.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return std::abs(pred[x] - gold[x]) > std::abs(pred[y] - gold[y]);
    });
    const std::size_t n = std::min(a.top_errors, order.size());
    std::printf("top %zu absolute errors:\n", n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = order[k];
      std::printf("  pair %zu: pred %.3f gold %.3f |error| %.3f\n", i, pred[i], gold[i],
                  std::abs(pred[i] - gold[i]));
    }
  }
  const RegionErrorTable regions = mse_by_region(pred, gold);
  std::optional<std::vector<std::optional<double>>> per_feature;
  if (!a.features.empty()) {
    const FeatureMatrix m = read_features(a.features);
    per_feature = per_feature_correlation(m.rows, gold);
  }
  const nlohmann::json j = eval_report_json(report, regions, per_feature);
  if (!a.out_report.empty()) {
    detail::save_json_file(a.out_report, j);
    RunManifest manifest;
    manifest.command = "evaluate";
    manifest.flags = {{"pred", a.pred}, {"gold", a.gold}, {"features", a.features}};
    manifest.inputs.emplace_back(a.pred, file_digest(a.pred));
    manifest.inputs.emplace_back(a.gold, file_digest(a.gold));
    if (!a.features.empty()) manifest.inputs.emplace_back(a.features, file_digest(a.features));
    manifest.outputs = {a.out_report};
    write_manifest(a.out_report + ".manifest.json", manifest);
  }
  std::printf("n %zu pearson %.6f mse %.6f\n", report.n, report.pearson, report.mse);
  return kExitOk;
}

struct AblateArgs {
  std::string features, test_features, out_report;
  SplitFlags split;
  std::size_t trees = 100;
  std::uint64_t seed = 7;
};

int cmd_ablate(const AblateArgs& a) {
  const FeatureMatrix all = read_features(a.features);
  if (!all.gold) throw MissingGold(a.features + ": ablation requires gold scores");
  const FeatureMatrix test = read_features(a.test_features);
  if (!test.gold) throw MissingGold(a.test_features + ": ablation requires gold scores");

  const std::size_t n = all.rows.size();
  SplitSpec spec = a.split.spec();
  if (n != spec.train_count + spec.validation_count) {
    throw SizeMismatch("ablate: feature file has " + std::to_string(n) + " rows, split wants " +
                       std::to_string(spec.train_count + spec.validation_count));
  }
  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(indices);
  std::vector<FeatureVector> train_f, val_f;
  std::vector<double> train_g, val_g;
  std::vector<std::size_t> train_idx(indices.begin(), indices.begin() + spec.train_count);
  std::vector<std::size_t> val_idx(indices.begin() + spec.train_count, indices.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  for (std::size_t i : train_idx) {
    train_f.push_back(all.rows[i]);
    train_g.push_back((*all.gold)[i]);
  }
  for (std::size_t i : val_idx) {
    val_f.push_back(all.rows[i]);
    val_g.push_back((*all.gold)[i]);
  }

  ForestConfig config;
  config.n_trees = a.trees;
  config.seed = a.seed;
  const AblationReport report =
      ablation(train_f, train_g, val_f, val_g, test.rows, *test.gold, config);

  for (const auto& row : report.rows) {
    std::printf("%-12s features %2zu validation %.4f (%+.4f) test %.4f (%+.4f)\n",
                row.group.c_str(), row.n_features, row.validation_pearson, row.delta_validation,
                row.test_pearson, row.delta_test);
  }
  if (!a.out_report.empty()) {
    nlohmann::json j;
    j["format"] = "clinsim-ablation-report";
    j["ablation"] = ablation_report_json(report);
    detail::save_json_file(a.out_report, j);
    RunManifest manifest;
    manifest.command = "ablate";
    manifest.flags = {{"features", a.features},
                      {"test-features", a.test_features},
                      {"trees", std::to_string(a.trees)}};
    manifest.seeds = {{"seed", a.seed}, {"split-seed", spec.seed}};
    manifest.inputs.emplace_back(a.features, file_digest(a.features));
    manifest.inputs.emplace_back(a.test_features, file_digest(a.test_features));
    manifest.outputs = {a.out_report};
    write_manifest(a.out_report + ".manifest.json", manifest);
  }
  return kExitOk;
}

struct ExportDotArgs {
  std::string model, out;
  std::size_t tree_index = 0;
};

int cmd_export_dot(const ExportDotArgs& a) {
  const RandomForestModel model = load_forest(a.model);
  const std::string dot = export_tree_dot(model, a.tree_index);
  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw IoError("cannot write DOT file: " + a.out);
  out << dot;
  std::cout << "wrote tree " << a.tree_index << " -> " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clinsim: clinical sentence similarity toolkit"};
  app.set_version_flag("--version", clinsim::kVersion);
  app.require_subcommand(1);

  FeaturizeArgs fa;
  auto* featurize = app.add_subcommand("featurize", "Compute the 14-feature vectors for a pair TSV");
  featurize->add_option("--pairs", fa.pairs, "Sentence pair TSV")->required();
  featurize->add_option("--stopwords", fa.stopwords, "Stopword file (default: bundled list)");
  featurize->add_option("--embeddings", fa.embeddings, "Token embedding file")->required();
  featurize->add_option("--lexicon", fa.lexicon, "Entity lexicon TSV");
  featurize->add_option("--sentence-vectors", fa.sentence_vectors, "Per-sentence vector cache");
  featurize->add_option("--idf-from", fa.idf_from, "Pair TSV to fit idf on (default: --pairs)");
  featurize->add_flag("--idf-from-train-partition", fa.idf_from_train_partition,
                      "Fit idf on the seed-derived training partition of the idf source");
  featurize->add_flag("--with-gold", fa.force_gold, "Force reading a gold column");
  featurize->add_flag("--no-gold", fa.force_no_gold, "Force reading without a gold column");
  fa.split.attach(featurize);
  featurize->add_option("--out", fa.out, "Output feature TSV")->required();

  TrainRfArgs ra;
  auto* train_rf = app.add_subcommand("train-rf", "Train the random forest on a feature TSV");
  train_rf->add_option("--features", ra.features, "Feature TSV with gold")->required();
  train_rf->add_option("--trees", ra.trees, "Number of trees (default 100)");
  train_rf->add_option("--min-leaf", ra.min_leaf, "Minimum samples per leaf (default 1)");
  train_rf->add_option("--max-depth", [&ra](const std::vector<std::string>& v) {
    ra.max_depth = std::stoull(v.front());
    return true;
  }, "Maximum tree depth (default unlimited)");
  train_rf->add_option("--features-per-split", [&ra](const std::vector<std::string>& v) {
    ra.features_per_split = std::stoull(v.front());
    return true;
  }, "Features sampled per split (default ceil(p/3))");
  train_rf->add_option("--seed", ra.seed, "Forest seed (default 7)");
  ra.split.attach(train_rf);
  train_rf->add_option("--out-model", ra.out_model, "Output model file")->required();
  train_rf->add_option("--report", ra.report, "Validation report JSON");
  train_rf->add_option("--val-preds", ra.val_preds,
                       "Write validation-partition predictions (stacker training input)");
  train_rf->add_option("--val-gold", ra.val_gold, "Write validation-partition gold scores");

  TrainEncoderArgs ea;
  auto* train_encoder = app.add_subcommand("train-encoder", "Train the encoder network");
  train_encoder->add_option("--pairs", ea.pairs, "Sentence pair TSV with gold")->required();
  train_encoder->add_option("--embeddings", ea.embeddings, "Token embedding file")->required();
  train_encoder->add_option("--sentence-vectors", ea.sentence_vectors, "Per-sentence vector cache");
  train_encoder->add_option("--stopwords", ea.stopwords, "Stopword file (default: bundled list)");
  train_encoder->add_option("--seed", ea.seed, "Training seed (default 7)");
  train_encoder->add_option("--hidden", ea.hidden, "Hidden layer widths (default 480 240 80)");
  train_encoder->add_option("--lr", ea.lr, "Learning rate (default 1e-4)");
  train_encoder->add_option("--l2", ea.l2, "L2 coefficient (default 1e-4)");
  train_encoder->add_option("--dropout", ea.dropout, "Dropout rate (default 0.5)");
  train_encoder->add_option("--patience", ea.patience, "Early-stopping patience (default 200)");
  train_encoder->add_option("--max-epochs", ea.max_epochs, "Epoch cap (default 10000)");
  train_encoder->add_option("--batch", ea.batch, "Batch size (default 32)");
  train_encoder->add_option("--input-mode", ea.input_mode, "Input composition: 4d or 3d+1")
      ->check(CLI::IsMember({"4d", "3d+1"}));
  ea.split.attach(train_encoder);
  train_encoder->add_option("--out-model", ea.out_model, "Output model file")->required();
  train_encoder->add_option("--report", ea.report, "Training report JSON");
  train_encoder->add_option("--val-preds", ea.val_preds,
                            "Write validation-partition predictions (stacker training input)");
  train_encoder->add_option("--val-gold", ea.val_gold, "Write validation-partition gold scores");

  StackArgs sa;
  auto* stack = app.add_subcommand("stack", "Fit the OLS stacker on base-model predictions");
  stack->add_option("--base-preds", sa.base_preds, "Base prediction files (repeatable)")
      ->required()
      ->expected(-1);
  stack->add_option("--gold", sa.gold, "Gold scores (score file or TSV)")->required();
  stack->add_option("--out-model", sa.out_model, "Output stacker file")->required();

  PredictArgs pa;
  auto* predict = app.add_subcommand("predict", "Apply a saved model");
  predict->add_option("--model", pa.model, "Model file (forest, encoder, or stacker)")->required();
  predict->add_option("--features", pa.features, "Feature TSV (forest models)");
  predict->add_option("--pairs", pa.pairs, "Pair TSV (encoder models)");
  predict->add_option("--embeddings", pa.embeddings, "Token embedding file (encoder models)");
  predict->add_option("--sentence-vectors", pa.sentence_vectors, "Per-sentence vector cache");
  predict->add_option("--stopwords", pa.stopwords, "Stopword file");
  predict->add_option("--base-preds", pa.base_preds, "Base prediction files (stacker models)")
      ->expected(-1);
  predict->add_option("--out", pa.out, "Output prediction file")->required();

  EvaluateArgs va;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against gold");
  eval_cmd->add_option("--pred", va.pred, "Prediction file")->required();
  eval_cmd->add_option("--gold", va.gold, "Gold scores (score file or TSV)")->required();
  eval_cmd->add_option("--features", va.features, "Feature TSV for per-feature correlations");
  eval_cmd->add_option("--top-errors", va.top_errors, "Print the N pairs with largest |error|");
  eval_cmd->add_option("--out-report", va.out_report, "Output report JSON");

  AblateArgs aa;
  auto* ablate = app.add_subcommand("ablate", "Run the feature-group ablation study");
  ablate->add_option("--features", aa.features, "Feature TSV (train+validation) with gold")
      ->required();
  ablate->add_option("--test-features", aa.test_features, "Feature TSV (test) with gold")
      ->required();
  ablate->add_option("--trees", aa.trees, "Number of trees (default 100)");
  ablate->add_option("--seed", aa.seed, "Forest seed (default 7)");
  aa.split.attach(ablate);
  ablate->add_option("--out-report", aa.out_report, "Output report JSON");

  ExportDotArgs da;
  auto* export_dot = app.add_subcommand("export-dot", "Export one forest tree as DOT");
  export_dot->add_option("--model", da.model, "Forest model file")->required();
  export_dot->add_option("--tree-index", da.tree_index, "Tree to export (default 0)");
  export_dot->add_option("--out", da.out, "Output DOT file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInputError;
  }

  try {
    if (featurize->parsed()) return cmd_featurize(fa);
    if (train_rf->parsed()) return cmd_train_rf(ra);
    if (train_encoder->parsed()) return cmd_train_encoder(ea);
    if (stack->parsed()) return cmd_stack(sa);
    if (predict->parsed()) return cmd_predict(pa);
    if (eval_cmd->parsed()) return cmd_evaluate(va);
    if (ablate->parsed()) return cmd_ablate(aa);
    if (export_dot->parsed()) return cmd_export_dot(da);
  } catch (const clinsim::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const clinsim::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const clinsim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitComputeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitComputeError;
  }
  return kExitOk;
}
