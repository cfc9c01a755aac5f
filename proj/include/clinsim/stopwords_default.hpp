// Copyright the clinsim contributors. Licensed under the terms of the Apache 2.0 license.
// See LICENSE in the project root.
#pragma once

#include <array>
#include <string_view>

namespace clinsim::detail {

// Bundled default stopword list: common English function words, spelled the
// way the tokenizer emits them (contraction clitics keep their apostrophe,
// negation stems appear without the "'t"). Overridable via a stopword file.
inline constexpr std::array<std::string_view, 162> kDefaultStopwords = {
    "a",       "about",   "above",    "after",   "again",      "against",
    "ain",     "all",     "am",       "an",      "and",        "any",
    "are",     "aren",    "as",       "at",      "be",         "because",
    "been",    "before",  "being",    "below",   "between",    "both",
    "but",     "by",      "can",      "couldn",  "did",        "didn",
    "do",      "does",    "doesn",    "doing",   "don",        "down",
    "during",  "each",    "few",      "for",     "from",       "further",
    "had",     "hadn",    "has",      "hasn",    "have",       "haven",
    "having",  "he",      "her",      "here",    "hers",       "herself",
    "him",     "himself", "his",      "how",     "i",          "if",
    "in",      "into",    "is",       "isn",     "it",         "its",
    "itself",  "just",    "ma",       "me",      "mightn",     "more",
    "most",    "mustn",   "my",       "myself",  "needn",      "no",
    "nor",     "not",     "now",      "o",       "of",         "off",
    "on",      "once",    "only",     "or",      "other",      "our",
    "ours",    "ourselves", "out",    "over",    "own",        "re",
    "same",    "shan",    "she",      "should",  "shouldn",    "so",
    "some",    "such",    "than",     "that",    "the",        "their",
    "theirs",  "them",    "themselves", "then",  "there",      "these",
    "they",    "this",    "those",    "through", "to",         "too",
    "under",   "until",   "up",       "very",    "was",        "wasn",
    "we",      "were",    "weren",    "what",    "when",       "where",
    "which",   "while",   "who",      "whom",    "why",        "will",
    "with",    "won",     "wouldn",   "y",       "you",        "your",
    "yours",   "yourself", "yourselves", "'s",   "'t",         "'d",
    "'ll",     "'m",      "'re",      "'ve",     "upon",       "shall",
    "would",   "could",   "might",    "must",    "ought",      "us",
};

}  // namespace clinsim::detail
