// Copyright the clinsim contributors. Licensed under the terms of the Apache 2.0 license.
// See LICENSE in the project root.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "clinsim/errors.hpp"

namespace clinsim {

/// Sorted, deduplicated token collection; the X and Y of the set similarities.
using TokenSet = std::vector<std::string>;

inline TokenSet make_token_set(const std::vector<std::string>& tokens) {
  TokenSet s(tokens);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

namespace detail {

inline std::size_t intersection_size(const TokenSet& x, const TokenSet& y) {
  std::size_t i = 0, j = 0, shared = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i] == y[j]) {
      ++shared;
      ++i;
      ++j;
    } else if (x[i] < y[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return shared;
}

}  // namespace detail

/// Jaro similarity between two strings, in [0,1]. Returns 1 when both are
/// empty and 0 when there are no matching characters.
inline double jaro(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  const std::size_t la = a.size(), lb = b.size();
  const std::size_t window = std::max(la, lb) / 2 == 0 ? 0 : std::max(la, lb) / 2 - 1;
  std::vector<bool> a_matched(la, false), b_matched(lb, false);
  std::size_t matches = 0;
  for (std::size_t i = 0; i < la; ++i) {
    const std::size_t lo = i > window ? i - window : 0;
    const std::size_t hi = std::min(lb, i + window + 1);
    for (std::size_t j = lo; j < hi; ++j) {
      if (!b_matched[j] && a[i] == b[j]) {
        a_matched[i] = true;
        b_matched[j] = true;
        ++matches;
        break;
      }
    }
  }
  if (matches == 0) return 0.0;
  // Transpositions: matched characters out of order, halved.
  std::size_t transpositions = 0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < la; ++i) {
    if (!a_matched[i]) continue;
    while (!b_matched[j]) ++j;
    if (a[i] != b[j]) ++transpositions;
    ++j;
  }
  const double m = static_cast<double>(matches);
  const double t = static_cast<double>(transpositions) / 2.0;
  return (m / static_cast<double>(la) + m / static_cast<double>(lb) + (m - t) / m) / 3.0;
}

/// Equation-style Jaccard similarity |X∩Y| / |X∪Y|; 1 when both sets empty.
inline double jaccard(const TokenSet& x, const TokenSet& y) {
  if (x.empty() && y.empty()) return 1.0;
  const std::size_t shared = detail::intersection_size(x, y);
  return static_cast<double>(shared) /
         static_cast<double>(x.size() + y.size() - shared);
}

/// Dice similarity 2|X∩Y| / (|X|+|Y|); 1 when both sets empty.
inline double dice(const TokenSet& x, const TokenSet& y) {
  if (x.empty() && y.empty()) return 1.0;
  return 2.0 * static_cast<double>(detail::intersection_size(x, y)) /
         static_cast<double>(x.size() + y.size());
}

/// Ochiai similarity |X∩Y| / sqrt(|X|·|Y|); 1 when both empty, 0 when exactly
/// one is empty.
inline double ochiai(const TokenSet& x, const TokenSet& y) {
  if (x.empty() && y.empty()) return 1.0;
  if (x.empty() || y.empty()) return 0.0;
  return static_cast<double>(detail::intersection_size(x, y)) /
         std::sqrt(static_cast<double>(x.size()) * static_cast<double>(y.size()));
}

/// Jaccard generalized to near-matches: tokens pair greedily in descending
/// Jaro similarity, a pair counts when its similarity reaches the threshold,
/// and each token is used at most once. Result is
/// (sum of accepted similarities) / (|X| + |Y| - #accepted).
inline double generalized_jaccard(const TokenSet& x, const TokenSet& y,
                                  double threshold = 0.6) {
  if (x.empty() && y.empty()) return 1.0;
  if (x.empty() || y.empty()) return 0.0;
  struct Candidate {
    double sim;
    std::size_t i, j;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double s = jaro(x[i], y[j]);
      if (s >= threshold) candidates.push_back({s, i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(b.sim, a.i, a.j) < std::tie(a.sim, b.i, b.j);
  });
  std::vector<bool> used_x(x.size(), false), used_y(y.size(), false);
  double sum = 0.0;
  std::size_t accepted = 0;
  for (const auto& c : candidates) {
    if (used_x[c.i] || used_y[c.j]) continue;
    used_x[c.i] = true;
    used_y[c.j] = true;
    sum += c.sim;
    ++accepted;
  }
  return sum / static_cast<double>(x.size() + y.size() - accepted);
}

/// Smoothed inverse document frequency statistics, fitted once on a corpus of
/// token lists and immutable afterwards.
struct IdfModel {
  std::size_t doc_count = 0;
  std::unordered_map<std::string, std::size_t> doc_freq;

  /// idf(t) = ln((1 + N) / (1 + df(t))) + 1; unseen tokens have df 0.
  double idf(const std::string& token) const {
    const auto it = doc_freq.find(token);
    const std::size_t df = it == doc_freq.end() ? 0 : it->second;
    return std::log((1.0 + static_cast<double>(doc_count)) /
                    (1.0 + static_cast<double>(df))) +
           1.0;
  }
};

inline IdfModel idf_fit(const std::vector<std::vector<std::string>>& corpus) {
  if (corpus.empty()) throw EmptyCorpus("idf_fit: corpus is empty");
  IdfModel model;
  model.doc_count = corpus.size();
  for (const auto& doc : corpus) {
    TokenSet distinct = make_token_set(doc);
    for (const auto& t : distinct) ++model.doc_freq[t];
  }
  return model;
}

/// Cosine similarity between tf-idf weight vectors over the union vocabulary
/// (tf = raw count). 1 when both token lists are empty, 0 when exactly one is.
inline double tfidf_cosine(const std::vector<std::string>& x,
                           const std::vector<std::string>& y, const IdfModel& idf) {
  if (x.empty() && y.empty()) return 1.0;
  if (x.empty() || y.empty()) return 0.0;
  // Ordered map: the summation order is part of the deterministic output.
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& t : x) ++counts[t].first;
  for (const auto& t : y) ++counts[t].second;
  bool equal_counts = true;
  for (const auto& [token, c] : counts) equal_counts = equal_counts && c.first == c.second;
  if (equal_counts) return 1.0;  // identical weight vectors, exactly parallel
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (const auto& [token, c] : counts) {
    const double w = idf.idf(token);
    const double wx = static_cast<double>(c.first) * w;
    const double wy = static_cast<double>(c.second) * w;
    dot += wx * wy;
    nx += wx * wx;
    ny += wy * wy;
  }
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return dot / (std::sqrt(nx) * std::sqrt(ny));
}

/// Multiset profile of the length-q substrings of a string (no padding).
struct QGramProfile {
  std::size_t q = 3;
  std::map<std::string, std::size_t> grams;
  std::size_t total = 0;
};

inline QGramProfile qgram_profile(std::string_view s, std::size_t q) {
  QGramProfile p;
  p.q = q;
  if (s.size() >= q) {
    for (std::size_t i = 0; i + q <= s.size(); ++i) {
      ++p.grams[std::string(s.substr(i, q))];
      ++p.total;
    }
  }
  return p;
}

/// Profile-distance similarity: 1 - L1(profile_a, profile_b) / (|P_a|+|P_b|).
/// 1 when both strings are shorter than q.
inline double qgram_similarity(std::string_view a, std::string_view b, std::size_t q) {
  const QGramProfile pa = qgram_profile(a, q);
  const QGramProfile pb = qgram_profile(b, q);
  if (pa.total == 0 && pb.total == 0) return 1.0;
  std::size_t dist = 0;
  auto ia = pa.grams.begin();
  auto ib = pb.grams.begin();
  while (ia != pa.grams.end() || ib != pb.grams.end()) {
    if (ib == pb.grams.end() || (ia != pa.grams.end() && ia->first < ib->first)) {
      dist += ia->second;
      ++ia;
    } else if (ia == pa.grams.end() || ib->first < ia->first) {
      dist += ib->second;
      ++ib;
    } else {
      dist += ia->second > ib->second ? ia->second - ib->second : ib->second - ia->second;
      ++ia;
      ++ib;
    }
  }
  return 1.0 - static_cast<double>(dist) / static_cast<double>(pa.total + pb.total);
}

/// Bag similarity: 1 - max(|A\B|, |B\A|) / max(|a|,|b|) on character multisets.
inline double bag_similarity(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  std::array<std::int64_t, 256> diff{};
  for (unsigned char c : a) ++diff[c];
  for (unsigned char c : b) --diff[c];
  std::int64_t a_minus_b = 0, b_minus_a = 0;
  for (std::int64_t d : diff) {
    if (d > 0) a_minus_b += d;
    else b_minus_a -= d;
  }
  const double dist = static_cast<double>(std::max(a_minus_b, b_minus_a));
  return 1.0 - dist / static_cast<double>(std::max(a.size(), b.size()));
}

/// Unit-cost edit distance (insertions, deletions, substitutions).
inline std::size_t levenshtein_distance(std::string_view a, std::string_view b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  std::vector<std::size_t> prev(b.size() + 1), curr(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    curr[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      curr[j] = std::min({prev[j] + 1, curr[j - 1] + 1, sub});
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

inline double levenshtein_similarity(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  return 1.0 - static_cast<double>(levenshtein_distance(a, b)) /
                   static_cast<double>(std::max(a.size(), b.size()));
}

/// Symmetric alignment scoring. Defaults keep every normalized alignment
/// similarity inside [0,1].
struct AlignmentScoring {
  double match = 1.0;
  double mismatch = -1.0;
  double gap = -1.0;
};

/// Optimal global alignment score (Needleman-Wunsch dynamic program).
inline double needleman_wunsch_score(std::string_view a, std::string_view b,
                                     const AlignmentScoring& s = {}) {
  std::vector<double> prev(b.size() + 1), curr(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<double>(j) * s.gap;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    curr[0] = static_cast<double>(i) * s.gap;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const double diag = prev[j - 1] + (a[i - 1] == b[j - 1] ? s.match : s.mismatch);
      curr[j] = std::max({diag, prev[j] + s.gap, curr[j - 1] + s.gap});
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

inline double needleman_wunsch_similarity(std::string_view a, std::string_view b,
                                          const AlignmentScoring& s = {}) {
  if (a.empty() && b.empty()) return 1.0;
  const double score = needleman_wunsch_score(a, b, s);
  const double norm = s.match * static_cast<double>(std::max(a.size(), b.size()));
  return std::clamp(score / norm, 0.0, 1.0);
}

/// Best local alignment score (Smith-Waterman dynamic program, floored at 0).
inline double smith_waterman_score(std::string_view a, std::string_view b,
                                   const AlignmentScoring& s = {}) {
  std::vector<double> prev(b.size() + 1, 0.0), curr(b.size() + 1, 0.0);
  double best = 0.0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    curr[0] = 0.0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const double diag = prev[j - 1] + (a[i - 1] == b[j - 1] ? s.match : s.mismatch);
      curr[j] = std::max({0.0, diag, prev[j] + s.gap, curr[j - 1] + s.gap});
      best = std::max(best, curr[j]);
    }
    std::swap(prev, curr);
  }
  return best;
}

inline double smith_waterman_similarity(std::string_view a, std::string_view b,
                                        const AlignmentScoring& s = {}) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  const double score = smith_waterman_score(a, b, s);
  const double norm = s.match * static_cast<double>(std::min(a.size(), b.size()));
  return std::clamp(score / norm, 0.0, 1.0);
}

}  // namespace clinsim
