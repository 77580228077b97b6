#pragma once

// RAKE keyphrase extraction over story contexts and construction of the
// per-position score vector that conditions attention and losses.

#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace storygen {

// Bump when the shipped stopword list changes; extraction output depends on it.
inline constexpr const char* kStopwordListVersion = "en-core-127.v1";

const std::vector<std::string>& english_stopwords();
const std::unordered_set<std::string>& english_stopword_set();

struct KeyphraseCandidate {
  std::vector<std::string> tokens;
  // All occurrences of this exact token run as (start index, length).
  std::vector<std::pair<int, int>> occurrences;
  double score = 0.0;             // raw RAKE score
  double normalized_score = 0.0;  // set by top_k_normalize

  int first_position() const { return occurrences.front().first; }
  std::string text() const;
};

// Candidates are the maximal runs free of stopwords and punctuation tokens.
// Word score = degree/frequency counted per word instance across all runs;
// phrase score = sum of member word scores. Returned in order of first
// occurrence.
std::vector<KeyphraseCandidate> rake_extract(const std::vector<std::string>& tokens,
                                             const std::unordered_set<std::string>& stopwords);

// Keeps the k highest-scoring candidates (ties broken by earliest first
// occurrence) and rescales their scores to sum to 1.
std::vector<KeyphraseCandidate> top_k_normalize(std::vector<KeyphraseCandidate> candidates, int k);

// One entry per context position: the normalized score of the retained phrase
// occupying that position (maximum if several), 0 elsewhere.
std::vector<double> build_score_vector(int context_len,
                                       const std::vector<KeyphraseCandidate>& retained);

// Full pipeline over an encoded context (special tokens like the sentence
// delimiter act as phrase boundaries). k <= 0 retains every candidate.
std::vector<double> context_score_vector(const std::vector<std::string>& context_tokens, int k);

// As above but also exposes the retained phrases (for inspection dumps).
std::vector<double> context_score_vector(const std::vector<std::string>& context_tokens, int k,
                                         std::vector<KeyphraseCandidate>* retained_out);

}  // namespace storygen
