// Copyright the clinsim contributors. Licensed under the terms of the Apache 2.0 license.
// See LICENSE in the project root.
#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "clinsim/errors.hpp"

namespace clinsim {

/// Surface form (lowercase, possibly multi-word) -> concept-id dictionary.
/// Replaces a full concept-extraction system behind the same similarity math.
struct EntityLexicon {
  std::unordered_map<std::string, std::string> entries;
  std::size_t max_words = 0;
  std::vector<std::string> warnings;
};

/// Deduplicated concept ids found in one sentence.
struct EntityMentionSet {
  std::set<std::string> concept_ids;
};

/// Loads a lexicon TSV: "surface<TAB>concept_id" per line, '#' comments
/// ignored. A surface listed twice keeps the later concept id and records a
/// warning.
inline EntityLexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon file: " + path);
  EntityLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected surface<TAB>concept_id");
    }
    std::string surface = line.substr(0, tab);
    std::string concept_id = line.substr(tab + 1);
    if (surface.empty() || concept_id.empty()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": empty surface or concept id");
    }
    for (char& c : surface) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + ('a' - 'A'));
    }
    if (lex.entries.count(surface) != 0) {
      lex.warnings.push_back(path + ":" + std::to_string(line_no) + ": duplicate surface form '" +
                             surface + "', later entry wins");
    }
    lex.entries[surface] = std::move(concept_id);
    const std::size_t words = 1 + static_cast<std::size_t>(
                                      std::count(surface.begin(), surface.end(), ' '));
    lex.max_words = std::max(lex.max_words, words);
  }
  return lex;
}

/// Greedy longest-match extraction over token spans, left to right. Matched
/// spans consume their tokens. Runs on the pre-stopword-removal token list so
/// multi-word terms containing function words stay matchable.
inline EntityMentionSet extract_entities(const std::vector<std::string>& tokens,
                                         const EntityLexicon& lexicon) {
  EntityMentionSet found;
  if (lexicon.entries.empty()) return found;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const std::size_t longest = std::min(lexicon.max_words, tokens.size() - i);
    bool matched = false;
    for (std::size_t len = longest; len >= 1; --len) {
      std::string span = tokens[i];
      for (std::size_t k = 1; k < len; ++k) {
        span += ' ';
        span += tokens[i + k];
      }
      const auto it = lexicon.entries.find(span);
      if (it != lexicon.entries.end()) {
        found.concept_ids.insert(it->second);
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return found;
}

/// Entity similarity |X∩Y| / max(|X|,|Y|); 1 when both sets are empty and 0
/// when exactly one is (the quotient is undefined there).
inline double entity_similarity(const EntityMentionSet& x, const EntityMentionSet& y) {
  if (x.concept_ids.empty() && y.concept_ids.empty()) return 1.0;
  if (x.concept_ids.empty() || y.concept_ids.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& id : x.concept_ids) {
    if (y.concept_ids.count(id) != 0) ++shared;
  }
  return static_cast<double>(shared) /
         static_cast<double>(std::max(x.concept_ids.size(), y.concept_ids.size()));
}

}  // namespace clinsim
