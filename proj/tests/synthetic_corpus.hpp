// Synthetic sentence-pair corpus with programmed token overlap: the gold
// score is 5 * (shared tokens / sentence length), so every lexical feature
// carries signal and an end-to-end run has a known-learnable target.
#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "clinsim/rng.hpp"

namespace synthetic {

struct CorpusFiles {
  std::string train_pairs;
  std::string test_pairs;
  std::string embeddings;
};

inline std::string word(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "tok%02zu", i);
  return buf;
}

inline void write_pairs(const std::string& path, std::size_t n, clinsim::Rng& rng,
                        std::size_t vocab_size, std::size_t sentence_len) {
  std::ofstream out(path, std::ios::binary);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t shared = rng.uniform_index(sentence_len + 1);
    // Draw 2*len - shared distinct vocabulary indices.
    std::vector<std::size_t> pool(vocab_size);
    for (std::size_t k = 0; k < vocab_size; ++k) pool[k] = k;
    rng.shuffle(pool);
    std::string s1, s2;
    for (std::size_t k = 0; k < sentence_len; ++k) {
      if (k > 0) s1 += ' ';
      s1 += word(pool[k]);
    }
    // The first `shared` tokens of s1 reappear in s2; the rest are fresh.
    for (std::size_t k = 0; k < sentence_len; ++k) {
      if (k > 0) s2 += ' ';
      s2 += word(k < shared ? pool[k] : pool[sentence_len + k]);
    }
    const double gold = 5.0 * static_cast<double>(shared) / static_cast<double>(sentence_len);
    char score[32];
    std::snprintf(score, sizeof(score), "%.3f", gold);
    out << s1 << '\t' << s2 << '\t' << score << "\n";
  }
}

inline void write_embeddings(const std::string& path, std::size_t vocab_size, std::size_t dim,
                             clinsim::Rng& rng) {
  std::ofstream out(path, std::ios::binary);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    out << word(i);
    for (std::size_t d = 0; d < dim; ++d) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), " %.6f", rng.uniform_real(-1.0, 1.0));
      out << buf;
    }
    out << "\n";
  }
}

/// Writes train/test pair TSVs plus an embedding file into `dir`.
inline CorpusFiles write_corpus(const std::string& dir, std::size_t n_train, std::size_t n_test,
                                std::uint64_t seed, std::size_t vocab_size = 80,
                                std::size_t sentence_len = 8, std::size_t dim = 16) {
  clinsim::Rng rng(seed);
  CorpusFiles files;
  files.train_pairs = dir + "/pairs_train.tsv";
  files.test_pairs = dir + "/pairs_test.tsv";
  files.embeddings = dir + "/embeddings.txt";
  write_pairs(files.train_pairs, n_train, rng, vocab_size, sentence_len);
  write_pairs(files.test_pairs, n_test, rng, vocab_size, sentence_len);
  write_embeddings(files.embeddings, vocab_size, dim, rng);
  return files;
}

}  // namespace synthetic
