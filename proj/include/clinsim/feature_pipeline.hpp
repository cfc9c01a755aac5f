// Copyright the clinsim contributors. Licensed under the terms of the Apache 2.0 license.
// See LICENSE in the project root.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clinsim/entity_metrics.hpp"
#include "clinsim/errors.hpp"
#include "clinsim/lexical_metrics.hpp"
#include "clinsim/rng.hpp"
#include "clinsim/semantic_metrics.hpp"
#include "clinsim/text_prep.hpp"

namespace clinsim {

struct SentencePair {
  std::size_t id = 0;
  RawSentence s1;
  RawSentence s2;
  std::optional<double> gold;  // in [0,5] when present
};

enum class DatasetRole { unspecified, train, validation, test };

struct Dataset {
  std::vector<SentencePair> pairs;
  DatasetRole role = DatasetRole::unspecified;

  std::size_t size() const { return pairs.size(); }
};

/// Fixed layout of the 14-dimensional feature vector.
enum FeatureIndex : std::size_t {
  kJaccard = 0,
  kGeneralizedJaccard = 1,
  kDice = 2,
  kOchiai = 3,
  kTfidfCosine = 4,
  kQGram3 = 5,
  kQGram4 = 6,
  kBag = 7,
  kLevenshtein = 8,
  kNeedlemanWunsch = 9,
  kSmithWaterman = 10,
  kSemanticCosine = 11,
  kEntitySimilarity = 12,
  kNumberSimilarity = 13,
};

inline constexpr std::size_t kFeatureCount = 14;

using FeatureVector = std::array<double, kFeatureCount>;

inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "jaccard",      "generalized_jaccard", "dice",           "ochiai",
    "tfidf_cosine", "qgram3",              "qgram4",         "bag",
    "levenshtein",  "needleman_wunsch",    "smith_waterman", "semantic_cosine",
    "entity_similarity", "number_similarity"};

/// The five feature families of the ablation study, over the fixed layout.
struct FeatureGroup {
  const char* name;
  std::vector<std::size_t> indices;
};

inline const std::vector<FeatureGroup>& feature_groups() {
  static const std::vector<FeatureGroup> groups = {
      {"token", {0, 1, 2, 3, 4}}, {"character", {5, 6}},  {"sequence", {7, 8, 9, 10}},
      {"semantic", {11}},         {"entity", {12, 13}},
  };
  return groups;
}

/// Parses a sentence-pair TSV: "s1<TAB>s2" or "s1<TAB>s2<TAB>score" per line,
/// score a decimal in [0,5]. Blank lines are skipped; ids are assigned 0..n-1.
inline Dataset load_pairs(const std::string& path, bool has_gold) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pair file: " + path);
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    const std::size_t expected = has_gold ? 3 : 2;
    if (cols.size() != expected) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(expected) + " tab-separated columns, got " +
                       std::to_string(cols.size()));
    }
    SentencePair pair;
    pair.id = ds.pairs.size();
    pair.s1.text = cols[0];
    pair.s2.text = cols[1];
    if (has_gold) {
      double score = 0.0;
      if (!detail::parse_double(cols[2], score)) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": malformed score '" +
                         cols[2] + "'");
      }
      if (score < 0.0 || score > 5.0) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": score " + cols[2] +
                         " outside [0,5]");
      }
      pair.gold = score;
    }
    ds.pairs.push_back(std::move(pair));
  }
  return ds;
}

/// Deterministic partition spec: a seeded shuffle sends the first
/// `train_count` indices to the training set.
struct SplitSpec {
  std::size_t train_count = 600;
  std::size_t validation_count = 150;
  std::uint64_t seed = 42;
};

inline std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec) {
  if (dataset.size() != spec.train_count + spec.validation_count) {
    throw SizeMismatch("split: dataset has " + std::to_string(dataset.size()) +
                       " pairs, spec wants " +
                       std::to_string(spec.train_count + spec.validation_count));
  }
  std::vector<std::size_t> indices(dataset.size());
  std::iota(indices.begin(), indices.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(indices);
  std::vector<std::size_t> train_idx(indices.begin(), indices.begin() + spec.train_count);
  std::vector<std::size_t> val_idx(indices.begin() + spec.train_count, indices.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  Dataset train, validation;
  train.role = DatasetRole::train;
  validation.role = DatasetRole::validation;
  for (std::size_t i : train_idx) train.pairs.push_back(dataset.pairs[i]);
  for (std::size_t i : val_idx) validation.pairs.push_back(dataset.pairs[i]);
  return {std::move(train), std::move(validation)};
}

/// Optional per-sentence vector cache. Line format: "<sentence-id> <f1> ...
/// <fdim>" where sentence-id is 2*row for the first sentence of a pair and
/// 2*row+1 for the second. Overrides the token-mean composition when both
/// sentences of a pair are present.
struct SentenceVectorCache {
  std::size_t dim = 0;
  std::unordered_map<std::size_t, std::vector<double>> by_id;

  const std::vector<double>* find(std::size_t id) const {
    const auto it = by_id.find(id);
    return it == by_id.end() ? nullptr : &it->second;
  }
};

inline SentenceVectorCache load_sentence_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sentence vector file: " + path);
  SentenceVectorCache cache;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() < 2) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected id and vector");
    }
    std::size_t id = 0;
    if (!detail::parse_size(fields[0], id)) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": malformed sentence id '" +
                       fields[0] + "'");
    }
    std::vector<double> vec;
    vec.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double v = 0.0;
      if (!detail::parse_double(fields[i], v)) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": malformed number '" +
                         fields[i] + "'");
      }
      vec.push_back(v);
    }
    if (cache.dim == 0) cache.dim = vec.size();
    if (vec.size() != cache.dim) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": dimension mismatch");
    }
    cache.by_id[id] = std::move(vec);
  }
  return cache;
}

/// Everything featurize_pair needs, loaded once and shared read-only.
struct FeatureContext {
  const StopwordList& stopwords;
  const IdfModel& idf;
  const EmbeddingTable& embeddings;
  const EntityLexicon& lexicon;
  const SentenceVectorCache* sentence_vectors = nullptr;
};

namespace detail {

/// Character-level view of a sentence: the normalized string with whitespace
/// runs collapsed to single spaces and trimmed. Character and sequence
/// features run on this, before stopword removal.
inline std::string char_view(const std::string& normalized) {
  std::string out;
  out.reserve(normalized.size());
  bool pending_space = false;
  for (char c : normalized) {
    if (is_ascii_space(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out += ' ';
      pending_space = false;
      out += c;
    }
  }
  return out;
}

}  // namespace detail

inline FeatureVector featurize_pair(const SentencePair& pair, const FeatureContext& ctx) {
  const TokenizedSentence t1 = preprocess(pair.s1, ctx.stopwords);
  const TokenizedSentence t2 = preprocess(pair.s2, ctx.stopwords);
  const TokenSet set1 = make_token_set(t1.tokens);
  const TokenSet set2 = make_token_set(t2.tokens);
  const std::string c1 = detail::char_view(t1.normalized);
  const std::string c2 = detail::char_view(t2.normalized);

  FeatureVector f{};
  f[kJaccard] = jaccard(set1, set2);
  f[kGeneralizedJaccard] = generalized_jaccard(set1, set2);
  f[kDice] = dice(set1, set2);
  f[kOchiai] = ochiai(set1, set2);
  f[kTfidfCosine] = tfidf_cosine(t1.tokens, t2.tokens, ctx.idf);
  f[kQGram3] = qgram_similarity(c1, c2, 3);
  f[kQGram4] = qgram_similarity(c1, c2, 4);
  f[kBag] = bag_similarity(c1, c2);
  f[kLevenshtein] = levenshtein_similarity(c1, c2);
  f[kNeedlemanWunsch] = needleman_wunsch_similarity(c1, c2);
  f[kSmithWaterman] = smith_waterman_similarity(c1, c2);

  SentenceVector u, v;
  const std::vector<double>* cu =
      ctx.sentence_vectors ? ctx.sentence_vectors->find(2 * pair.id) : nullptr;
  const std::vector<double>* cv =
      ctx.sentence_vectors ? ctx.sentence_vectors->find(2 * pair.id + 1) : nullptr;
  if (cu != nullptr && cv != nullptr) {
    u = *cu;
    v = *cv;
  } else {
    u = embed_sentence(t1.tokens, ctx.embeddings);
    v = embed_sentence(t2.tokens, ctx.embeddings);
  }
  f[kSemanticCosine] = std::clamp(cosine(u, v), 0.0, 1.0);

  const EntityMentionSet e1 = extract_entities(t1.tokens_with_stopwords, ctx.lexicon);
  const EntityMentionSet e2 = extract_entities(t2.tokens_with_stopwords, ctx.lexicon);
  f[kEntitySimilarity] = entity_similarity(e1, e2);
  f[kNumberSimilarity] = number_similarity(c1, c2, ctx.embeddings);
  return f;
}

struct FeatureMatrix {
  std::vector<std::size_t> ids;
  std::vector<FeatureVector> rows;
  std::optional<std::vector<double>> gold;
};

inline FeatureMatrix featurize_dataset(const Dataset& dataset, const FeatureContext& ctx) {
  FeatureMatrix m;
  m.ids.reserve(dataset.size());
  m.rows.reserve(dataset.size());
  bool all_gold = !dataset.pairs.empty();
  for (const auto& p : dataset.pairs) all_gold = all_gold && p.gold.has_value();
  if (all_gold) m.gold.emplace();
  for (const auto& p : dataset.pairs) {
    m.ids.push_back(p.id);
    m.rows.push_back(featurize_pair(p, ctx));
    if (all_gold) m.gold->push_back(*p.gold);
  }
  return m;
}

/// Fits idf on the token lists of a dataset: each sentence is one document.
inline IdfModel fit_idf_on(const Dataset& dataset, const StopwordList& stopwords) {
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(dataset.size() * 2);
  for (const auto& p : dataset.pairs) {
    corpus.push_back(preprocess(p.s1, stopwords).tokens);
    corpus.push_back(preprocess(p.s2, stopwords).tokens);
  }
  return idf_fit(corpus);
}

namespace detail {

inline std::string format_fixed9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", v);
  return buf;
}

}  // namespace detail

/// Writes the feature TSV: header "id f0 ... f13 [gold]", values with 9
/// fractional digits.
inline void write_features(const std::string& path, const FeatureMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write feature file: " + path);
  out << "id";
  for (std::size_t i = 0; i < kFeatureCount; ++i) out << "\tf" << i;
  if (m.gold) out << "\tgold";
  out << "\n";
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    out << m.ids[r];
    for (double v : m.rows[r]) out << '\t' << detail::format_fixed9(v);
    if (m.gold) out << '\t' << detail::format_fixed9((*m.gold)[r]);
    out << "\n";
  }
  if (!out) throw IoError("failed writing feature file: " + path);
}

inline FeatureMatrix read_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty feature file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_ws(line);
  bool has_gold = false;
  if (header.size() == kFeatureCount + 2 && header.back() == "gold") {
    has_gold = true;
  } else if (header.size() != kFeatureCount + 1) {
    throw ParseError(path + ":1: unexpected feature header");
  }
  FeatureMatrix m;
  if (has_gold) m.gold.emplace();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_ws(line);
    if (fields.size() != header.size()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " columns");
    }
    std::size_t id = 0;
    if (!detail::parse_size(fields[0], id)) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": malformed id");
    }
    FeatureVector row{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      if (!detail::parse_double(fields[1 + i], row[i])) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": malformed feature value");
      }
    }
    m.ids.push_back(id);
    m.rows.push_back(row);
    if (has_gold) {
      double g = 0.0;
      if (!detail::parse_double(fields.back(), g)) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": malformed gold value");
      }
      m.gold->push_back(g);
    }
  }
  return m;
}

}  // namespace clinsim
