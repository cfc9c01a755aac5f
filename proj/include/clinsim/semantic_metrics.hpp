// Copyright the clinsim contributors. Licensed under the terms of the Apache 2.0 license.
// See LICENSE in the project root.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clinsim/errors.hpp"
#include "clinsim/text_prep.hpp"

namespace clinsim {

/// Token -> dense vector map with a uniform dimension, immutable after load.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;

  const std::vector<double>* find(const std::string& token) const {
    const auto it = vectors.find(token);
    return it == vectors.end() ? nullptr : &it->second;
  }
};

using SentenceVector = std::vector<double>;

namespace detail {

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stod(s, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == s.size() && std::isfinite(out);
}

inline bool parse_size(const std::string& s, std::size_t& out) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) return false;
  try {
    out = std::stoull(s);
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream ss(line);
  std::string f;
  while (ss >> f) fields.push_back(std::move(f));
  return fields;
}

}  // namespace detail

/// Loads the text embedding format: an optional "<count> <dim>" header line
/// followed by "<token> <f1> ... <fdim>" lines. The dimension is inferred from
/// the first vector line and enforced afterwards. Duplicate tokens: the later
/// line wins.
inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file: " + path);
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  std::size_t header_dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_ws(line);
    if (fields.empty()) continue;
    if (table.vectors.empty() && !saw_header && fields.size() == 2) {
      std::size_t count = 0, dim = 0;
      if (detail::parse_size(fields[0], count) && detail::parse_size(fields[1], dim)) {
        saw_header = true;
        header_dim = dim;
        continue;
      }
    }
    if (fields.size() < 2) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected token and vector");
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
    if (table.dim == 0) {
      table.dim = saw_header ? header_dim : vec.size();
    }
    if (vec.size() != table.dim) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": dimension mismatch, expected " +
                       std::to_string(table.dim) + " got " + std::to_string(vec.size()));
    }
    table.vectors[fields[0]] = std::move(vec);
  }
  if (table.vectors.empty()) {
    throw ParseError(path + ": no embedding vectors found");
  }
  return table;
}

/// Arithmetic mean of the in-vocabulary token vectors; the zero vector when
/// no token is known or the list is empty.
inline SentenceVector embed_sentence(const std::vector<std::string>& tokens,
                                     const EmbeddingTable& table) {
  SentenceVector mean(table.dim, 0.0);
  std::size_t hits = 0;
  for (const auto& t : tokens) {
    if (const auto* v = table.find(t)) {
      for (std::size_t i = 0; i < table.dim; ++i) mean[i] += (*v)[i];
      ++hits;
    }
  }
  if (hits > 0) {
    for (double& x : mean) x /= static_cast<double>(hits);
  }
  return mean;
}

/// Cosine similarity in [-1,1]; 0 when either vector has zero norm.
inline double cosine(const SentenceVector& u, const SentenceVector& v) {
  if (u.size() != v.size()) {
    throw DimensionMismatch("cosine: dimensions " + std::to_string(u.size()) + " vs " +
                            std::to_string(v.size()));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  if (u == v) return 1.0;  // exact on identical vectors
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

/// One number found in a sentence: its surface form, numeric value, and
/// English spell-out.
struct NumberMention {
  std::string surface;
  double value = 0.0;
  std::vector<std::string> words;
};

using NumberMentionList = std::vector<NumberMention>;

namespace detail {

inline const char* kOnes[] = {"zero", "one", "two",   "three", "four",
                              "five", "six", "seven", "eight", "nine"};
inline const char* kTeens[] = {"ten",      "eleven",  "twelve",  "thirteen", "fourteen",
                               "fifteen",  "sixteen", "seventeen", "eighteen", "nineteen"};
inline const char* kTens[] = {"",      "",      "twenty", "thirty", "forty",
                              "fifty", "sixty", "seventy", "eighty", "ninety"};

inline void spell_below_hundred(unsigned n, std::vector<std::string>& out) {
  if (n < 10) {
    out.emplace_back(kOnes[n]);
  } else if (n < 20) {
    out.emplace_back(kTeens[n - 10]);
  } else {
    out.emplace_back(kTens[n / 10]);
    if (n % 10 != 0) out.emplace_back(kOnes[n % 10]);
  }
}

/// Spell-out for integers 0-9999; larger values fall back to digit-by-digit.
inline std::vector<std::string> spell_integer(const std::string& digits) {
  std::vector<std::string> out;
  // Strip leading zeros for value interpretation ("007" -> "seven").
  std::size_t first = digits.find_first_not_of('0');
  const std::string d = first == std::string::npos ? "0" : digits.substr(first);
  if (d.size() > 4) {
    for (char c : digits) out.emplace_back(kOnes[c - '0']);
    return out;
  }
  const unsigned n = static_cast<unsigned>(std::stoul(d));
  if (n == 0) {
    out.emplace_back("zero");
    return out;
  }
  if (n >= 1000) {
    out.emplace_back(kOnes[n / 1000]);
    out.emplace_back("thousand");
  }
  const unsigned below_k = n % 1000;
  if (below_k >= 100) {
    out.emplace_back(kOnes[below_k / 100]);
    out.emplace_back("hundred");
  }
  const unsigned below_h = below_k % 100;
  if (below_h != 0) spell_below_hundred(below_h, out);
  return out;
}

}  // namespace detail

/// Converts a digit string with optional single decimal point to words:
/// "24" -> [twenty, four], "1.5" -> [one, point, five].
inline std::vector<std::string> number_to_words(const std::string& surface) {
  const std::size_t dot = surface.find('.');
  std::vector<std::string> words =
      detail::spell_integer(dot == std::string::npos ? surface : surface.substr(0, dot));
  if (dot != std::string::npos) {
    words.emplace_back("point");
    for (std::size_t i = dot + 1; i < surface.size(); ++i) {
      words.emplace_back(detail::kOnes[surface[i] - '0']);
    }
  }
  return words;
}

/// Finds maximal digit runs with an optional single decimal point in a
/// normalized sentence and converts each to its value and English words.
inline NumberMentionList extract_numbers(std::string_view sentence) {
  NumberMentionList mentions;
  std::size_t i = 0;
  const std::size_t n = sentence.size();
  while (i < n) {
    if (!detail::is_digit(sentence[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && detail::is_digit(sentence[j])) ++j;
    if (j < n && sentence[j] == '.' && j + 1 < n && detail::is_digit(sentence[j + 1])) {
      ++j;
      while (j < n && detail::is_digit(sentence[j])) ++j;
    }
    NumberMention m;
    m.surface = std::string(sentence.substr(i, j - i));
    m.value = std::stod(m.surface);
    m.words = number_to_words(m.surface);
    mentions.push_back(std::move(m));
    i = j;
  }
  return mentions;
}

namespace detail {

// Min-cost max-flow on the tiny bipartite transport graph built by wmd().
// Successive shortest paths with Bellman-Ford; exact for these sizes.
struct TransportSolver {
  struct Edge {
    std::size_t to;
    std::int64_t cap;
    double cost;
    std::size_t rev;
  };
  std::vector<std::vector<Edge>> graph;

  explicit TransportSolver(std::size_t nodes) : graph(nodes) {}

  void add_edge(std::size_t from, std::size_t to, std::int64_t cap, double cost) {
    graph[from].push_back({to, cap, cost, graph[to].size()});
    graph[to].push_back({from, 0, -cost, graph[from].size() - 1});
  }

  double min_cost_flow(std::size_t source, std::size_t sink, std::int64_t flow) {
    double total = 0.0;
    while (flow > 0) {
      const std::size_t n = graph.size();
      std::vector<double> dist(n, std::numeric_limits<double>::infinity());
      std::vector<std::size_t> prev_node(n, n), prev_edge(n, 0);
      dist[source] = 0.0;
      bool changed = true;
      while (changed) {
        changed = false;
        for (std::size_t u = 0; u < n; ++u) {
          if (!std::isfinite(dist[u])) continue;
          for (std::size_t e = 0; e < graph[u].size(); ++e) {
            const Edge& edge = graph[u][e];
            if (edge.cap > 0 && dist[u] + edge.cost < dist[edge.to] - 1e-15) {
              dist[edge.to] = dist[u] + edge.cost;
              prev_node[edge.to] = u;
              prev_edge[edge.to] = e;
              changed = true;
            }
          }
        }
      }
      if (!std::isfinite(dist[sink])) break;
      std::int64_t push = flow;
      for (std::size_t v = sink; v != source; v = prev_node[v]) {
        push = std::min(push, graph[prev_node[v]][prev_edge[v]].cap);
      }
      for (std::size_t v = sink; v != source; v = prev_node[v]) {
        Edge& e = graph[prev_node[v]][prev_edge[v]];
        e.cap -= push;
        graph[v][e.rev].cap += push;
      }
      total += dist[sink] * static_cast<double>(push);
      flow -= push;
    }
    return total;
  }
};

inline double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace detail

/// Word Mover's Distance between uniform distributions over two word lists.
/// Ground cost is the Euclidean distance between embedding vectors; words not
/// in the table map to the zero vector. Solved exactly as a transportation
/// problem (the lists here are tiny).
inline double wmd(const std::vector<std::string>& x_words,
                  const std::vector<std::string>& y_words, const EmbeddingTable& table) {
  if (x_words.empty() || y_words.empty()) {
    throw EmptyInput("wmd: both word lists must be non-empty");
  }
  // Collapse duplicates into weighted bins, in deterministic order.
  std::map<std::string, std::int64_t> xc, yc;
  for (const auto& w : x_words) ++xc[w];
  for (const auto& w : y_words) ++yc[w];
  const std::vector<double> zero(table.dim, 0.0);
  const auto vec_of = [&](const std::string& w) -> const std::vector<double>& {
    const auto* v = table.find(w);
    return v ? *v : zero;
  };
  const std::int64_t n = static_cast<std::int64_t>(x_words.size());
  const std::int64_t m = static_cast<std::int64_t>(y_words.size());
  // Scale both uniform distributions by n*m so all supplies are integers:
  // an x word with count c supplies c*m units, a y word with count d demands d*n.
  const std::size_t nodes = 2 + xc.size() + yc.size();
  detail::TransportSolver solver(nodes);
  const std::size_t source = 0, sink = nodes - 1;
  std::size_t idx = 1;
  std::vector<const std::vector<double>*> xv, yv;
  for (const auto& [w, c] : xc) {
    solver.add_edge(source, idx++, c * m, 0.0);
    xv.push_back(&vec_of(w));
  }
  const std::size_t y_base = idx;
  for (const auto& [w, c] : yc) {
    solver.add_edge(idx++, sink, c * n, 0.0);
    yv.push_back(&vec_of(w));
  }
  for (std::size_t i = 0; i < xv.size(); ++i) {
    for (std::size_t j = 0; j < yv.size(); ++j) {
      solver.add_edge(1 + i, y_base + j, n * m, detail::euclidean(*xv[i], *yv[j]));
    }
  }
  const double cost = solver.min_cost_flow(source, sink, n * m);
  return cost / static_cast<double>(n * m);
}

/// Number-similarity feature: 1 when neither sentence contains a number, 0
/// when exactly one does, and 1/(1 + wmd) over the spelled-out number words
/// when both do.
inline double number_similarity(std::string_view a, std::string_view b,
                                const EmbeddingTable& table) {
  const NumberMentionList na = extract_numbers(a);
  const NumberMentionList nb = extract_numbers(b);
  if (na.empty() && nb.empty()) return 1.0;
  if (na.empty() || nb.empty()) return 0.0;
  std::vector<std::string> wa, wb;
  for (const auto& m : na) wa.insert(wa.end(), m.words.begin(), m.words.end());
  for (const auto& m : nb) wb.insert(wb.end(), m.words.begin(), m.words.end());
  return 1.0 / (1.0 + wmd(wa, wb, table));
}

}  // namespace clinsim
