// Copyright the clinsim contributors. Licensed under the terms of the Apache 2.0 license.
// See LICENSE in the project root.
#pragma once

#include <cctype>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "clinsim/errors.hpp"
#include "clinsim/stopwords_default.hpp"

namespace clinsim {

struct RawSentence {
  std::string text;
};

/// A sentence after the 4-step pre-processing pipeline. `normalized` keeps
/// every character of the lowercased input (separators only add spaces);
/// `tokens_with_stopwords` is the raw tokenizer output; `tokens` has
/// punctuation-only tokens and stopwords removed.
struct TokenizedSentence {
  std::string raw;
  std::string normalized;
  std::vector<std::string> tokens;
  std::vector<std::string> tokens_with_stopwords;
};

struct StopwordList {
  std::set<std::string> words;

  bool contains(const std::string& token) const { return words.count(token) != 0; }
};

namespace detail {

// Typographic double quotes, the only non-ASCII characters treated as punctuation.
inline constexpr std::string_view kLeftQuote = "\xe2\x80\x9c";
inline constexpr std::string_view kRightQuote = "\xe2\x80\x9d";

inline bool is_ascii_punct(unsigned char c) {
  return c < 0x80 && std::ispunct(c) != 0;
}

inline bool is_ascii_space(unsigned char c) {
  return c < 0x80 && std::isspace(c) != 0;
}

inline bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

// Word characters: ASCII alphanumerics plus any non-ASCII byte (multi-byte
// letters stay fused; the quote sequences are intercepted before this test).
inline bool is_word_byte(unsigned char c) {
  return (c < 0x80 && std::isalnum(c) != 0) || c >= 0x80;
}

inline bool quote_at(std::string_view s, std::size_t i) {
  return s.size() - i >= 3 &&
         (s.substr(i, 3) == kLeftQuote || s.substr(i, 3) == kRightQuote);
}

inline bool quote_ending_at(std::string_view s, std::size_t end) {
  return end >= 3 && quote_at(s, end - 3);
}

}  // namespace detail

/// Steps (1)-(2) of the pipeline: lowercases the sentence and inserts spaces
/// around the separators "/", ".-", "." when they join two words, plus around
/// typographic quotes. Decimal numbers ("1.5") are left intact. Idempotent;
/// never deletes a character.
inline std::string normalize(std::string_view text) {
  std::string s(text);
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + ('a' - 'A'));
  }

  std::string out;
  out.reserve(s.size() + 8);
  const auto word_before = [&](std::size_t i) {
    return i > 0 && detail::is_word_byte(static_cast<unsigned char>(s[i - 1])) &&
           !detail::quote_ending_at(s, i);
  };
  const auto word_after = [&](std::size_t i) {
    return i < s.size() && detail::is_word_byte(static_cast<unsigned char>(s[i])) &&
           !detail::quote_at(s, i);
  };

  std::size_t i = 0;
  while (i < s.size()) {
    if (detail::quote_at(s, i)) {
      if (!out.empty() && !detail::is_ascii_space(out.back())) out += ' ';
      out += s.substr(i, 3);
      i += 3;
      if (i < s.size() && !detail::is_ascii_space(s[i])) out += ' ';
      continue;
    }
    const char c = s[i];
    if (c == '.' && i + 1 < s.size() && s[i + 1] == '-' && word_before(i) &&
        word_after(i + 2)) {
      out += " .- ";
      i += 2;
      continue;
    }
    if (c == '/' && word_before(i) && word_after(i + 1)) {
      out += " / ";
      ++i;
      continue;
    }
    if (c == '.' && word_before(i) && word_after(i + 1) &&
        !(detail::is_digit(s[i - 1]) && detail::is_digit(s[i + 1]))) {
      out += " . ";
      ++i;
      continue;
    }
    out += c;
    ++i;
  }
  return out;
}

namespace detail {

inline void emit_chunk_tokens(std::string_view chunk, std::vector<std::string>& out) {
  // Detach leading punctuation.
  while (!chunk.empty()) {
    if (quote_at(chunk, 0)) {
      out.emplace_back(chunk.substr(0, 3));
      chunk.remove_prefix(3);
    } else if (is_ascii_punct(chunk.front())) {
      out.emplace_back(1, chunk.front());
      chunk.remove_prefix(1);
    } else {
      break;
    }
  }
  // Detach trailing punctuation (collected back-to-front).
  std::vector<std::string> trailing;
  while (!chunk.empty()) {
    if (quote_ending_at(chunk, chunk.size())) {
      trailing.emplace_back(chunk.substr(chunk.size() - 3));
      chunk.remove_suffix(3);
    } else if (is_ascii_punct(chunk.back())) {
      trailing.emplace_back(1, chunk.back());
      chunk.remove_suffix(1);
    } else {
      break;
    }
  }
  // Split contractions on internal apostrophes: "patient's" -> "patient", "'s".
  if (!chunk.empty()) {
    std::size_t start = 0;
    std::size_t pos = 1;
    while (pos + 1 < chunk.size()) {
      if (chunk[pos] == '\'' &&
          is_word_byte(static_cast<unsigned char>(chunk[pos - 1])) &&
          is_word_byte(static_cast<unsigned char>(chunk[pos + 1]))) {
        out.emplace_back(chunk.substr(start, pos - start));
        start = pos;
        pos += 2;
      } else {
        ++pos;
      }
    }
    out.emplace_back(chunk.substr(start));
  }
  for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) {
    out.push_back(std::move(*it));
  }
}

}  // namespace detail

/// Step (3): whitespace split followed by detachment of leading/trailing
/// punctuation and a contraction split on internal apostrophes. Expects
/// already-normalized input; never emits an empty token.
inline std::vector<std::string> tokenize(std::string_view normalized) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = normalized.size();
  while (i < n) {
    while (i < n && detail::is_ascii_space(normalized[i])) ++i;
    std::size_t j = i;
    while (j < n && !detail::is_ascii_space(normalized[j])) ++j;
    if (j > i) detail::emit_chunk_tokens(normalized.substr(i, j - i), out);
    i = j;
  }
  return out;
}

/// True when the token consists solely of punctuation characters
/// (ASCII punctuation and the typographic quotes).
inline bool is_punct_token(std::string_view token) {
  if (token.empty()) return false;
  std::size_t i = 0;
  while (i < token.size()) {
    if (detail::quote_at(token, i)) {
      i += 3;
    } else if (detail::is_ascii_punct(token[i])) {
      ++i;
    } else {
      return false;
    }
  }
  return true;
}

/// Step (4): drops punctuation-only tokens and stopwords, preserving order.
inline std::vector<std::string> remove_stop_and_punct(
    const std::vector<std::string>& tokens, const StopwordList& stopwords) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (is_punct_token(t) || stopwords.contains(t)) continue;
    out.push_back(t);
  }
  return out;
}

/// The full 4-step pipeline. Pure and deterministic.
inline TokenizedSentence preprocess(const RawSentence& raw, const StopwordList& stopwords) {
  TokenizedSentence ts;
  ts.raw = raw.text;
  ts.normalized = normalize(raw.text);
  ts.tokens_with_stopwords = tokenize(ts.normalized);
  ts.tokens = remove_stop_and_punct(ts.tokens_with_stopwords, stopwords);
  return ts;
}

inline const StopwordList& default_stopwords() {
  static const StopwordList list = [] {
    StopwordList l;
    for (auto w : detail::kDefaultStopwords) l.words.emplace(w);
    return l;
  }();
  return list;
}

/// Loads a stopword file: one token per line, '#' comment lines ignored.
/// Entries are lowercased on load.
inline StopwordList load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stopword file: " + path);
  StopwordList list;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    std::size_t b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    std::string word = line.substr(b);
    for (char& c : word) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + ('a' - 'A'));
    }
    list.words.insert(word);
  }
  return list;
}

}  // namespace clinsim
