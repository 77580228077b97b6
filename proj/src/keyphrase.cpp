#include "storygen/keyphrase.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "storygen/data.hpp"
#include "storygen/special_tokens.hpp"

namespace storygen {

const std::vector<std::string>& english_stopwords() {
  static const std::vector<std::string> words = {
      "i",          "me",      "my",      "myself",  "we",       "our",     "ours",
      "ourselves",  "you",     "your",    "yours",   "yourself", "yourselves",
      "he",         "him",     "his",     "himself", "she",      "her",     "hers",
      "herself",    "it",      "its",     "itself",  "they",     "them",    "their",
      "theirs",     "themselves", "what", "which",   "who",      "whom",    "this",
      "that",       "these",   "those",   "am",      "is",       "are",     "was",
      "were",       "be",      "been",    "being",   "have",     "has",     "had",
      "having",     "do",      "does",    "did",     "doing",    "a",       "an",
      "the",        "and",     "but",     "if",      "or",       "because", "as",
      "until",      "while",   "of",      "at",      "by",       "for",     "with",
      "about",      "against", "between", "into",    "through",  "during",  "before",
      "after",      "above",   "below",   "to",      "from",     "up",      "down",
      "in",         "out",     "on",      "off",     "over",     "under",   "again",
      "further",    "then",    "once",    "here",    "there",    "when",    "where",
      "why",        "how",     "all",     "any",     "both",     "each",    "few",
      "more",       "most",    "other",   "some",    "such",     "no",      "nor",
      "not",        "only",    "own",     "same",    "so",       "than",    "too",
      "very",       "s",       "t",       "can",     "will",     "just",    "don",
      "should",     "now",
  };
  return words;
}

const std::unordered_set<std::string>& english_stopword_set() {
  static const std::unordered_set<std::string> set(english_stopwords().begin(),
                                                   english_stopwords().end());
  return set;
}

std::string KeyphraseCandidate::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i != 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<KeyphraseCandidate> rake_extract(const std::vector<std::string>& tokens,
                                             const std::unordered_set<std::string>& stopwords) {
  auto is_boundary = [&](const std::string& tok) {
    return tok.empty() || stopwords.count(tok) != 0 || is_punctuation_token(tok);
  };

  // Maximal boundary-free runs, in order of appearance.
  std::vector<std::pair<int, int>> runs;
  int n = static_cast<int>(tokens.size());
  int i = 0;
  while (i < n) {
    while (i < n && is_boundary(tokens[static_cast<std::size_t>(i)])) ++i;
    int start = i;
    while (i < n && !is_boundary(tokens[static_cast<std::size_t>(i)])) ++i;
    if (i > start) runs.emplace_back(start, i - start);
  }

  // degree/frequency tallies, one contribution per word instance.
  std::unordered_map<std::string, double> freq, degree;
  for (const auto& [start, len] : runs) {
    for (int j = start; j < start + len; ++j) {
      const auto& w = tokens[static_cast<std::size_t>(j)];
      freq[w] += 1.0;
      degree[w] += static_cast<double>(len);
    }
  }

  std::vector<KeyphraseCandidate> candidates;
  std::unordered_map<std::string, std::size_t> index_by_text;
  for (const auto& [start, len] : runs) {
    KeyphraseCandidate cand;
    cand.tokens.assign(tokens.begin() + start, tokens.begin() + start + len);
    std::string key = cand.text();
    auto it = index_by_text.find(key);
    if (it != index_by_text.end()) {
      candidates[it->second].occurrences.emplace_back(start, len);
      continue;
    }
    cand.occurrences.emplace_back(start, len);
    for (const auto& w : cand.tokens) cand.score += degree[w] / freq[w];
    index_by_text[key] = candidates.size();
    candidates.push_back(std::move(cand));
  }
  return candidates;
}

std::vector<KeyphraseCandidate> top_k_normalize(std::vector<KeyphraseCandidate> candidates,
                                                int k) {
  if (k < 1) throw std::invalid_argument("top_k_normalize: k must be >= 1");
  std::sort(candidates.begin(), candidates.end(),
            [](const KeyphraseCandidate& a, const KeyphraseCandidate& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.first_position() < b.first_position();
            });
  if (static_cast<std::size_t>(k) < candidates.size()) {
    candidates.resize(static_cast<std::size_t>(k));
  }
  double total = 0.0;
  for (const auto& c : candidates) total += c.score;
  for (auto& c : candidates) c.normalized_score = total > 0.0 ? c.score / total : 0.0;
  return candidates;
}

std::vector<double> build_score_vector(int context_len,
                                       const std::vector<KeyphraseCandidate>& retained) {
  if (context_len < 0) throw std::invalid_argument("build_score_vector: negative length");
  std::vector<double> p(static_cast<std::size_t>(context_len), 0.0);
  for (const auto& cand : retained) {
    for (const auto& [start, len] : cand.occurrences) {
      if (start < 0 || len < 1 || start + len > context_len) {
        throw std::out_of_range("build_score_vector: occurrence [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") outside context of length " +
                                std::to_string(context_len));
      }
      for (int j = start; j < start + len; ++j) {
        auto idx = static_cast<std::size_t>(j);
        p[idx] = std::max(p[idx], cand.normalized_score);
      }
    }
  }
  return p;
}

std::vector<double> context_score_vector(const std::vector<std::string>& context_tokens, int k,
                                         std::vector<KeyphraseCandidate>* retained_out) {
  // Special-token strings never form part of a phrase; the sentence delimiter
  // in particular must stop runs from spanning sentences.
  static const std::unordered_set<std::string> boundaries = [] {
    std::unordered_set<std::string> set = english_stopword_set();
    set.insert({kPadToken, kSosToken, kEosToken, kUnkToken, kSentDelimToken});
    return set;
  }();
  auto candidates = rake_extract(context_tokens, boundaries);
  if (candidates.empty()) {
    if (retained_out) retained_out->clear();
    return std::vector<double>(context_tokens.size(), 0.0);
  }
  int effective_k = k <= 0 ? static_cast<int>(candidates.size()) : k;
  auto retained = top_k_normalize(std::move(candidates), effective_k);
  auto p = build_score_vector(static_cast<int>(context_tokens.size()), retained);
  if (retained_out) *retained_out = std::move(retained);
  return p;
}

std::vector<double> context_score_vector(const std::vector<std::string>& context_tokens, int k) {
  return context_score_vector(context_tokens, k, nullptr);
}

}  // namespace storygen
