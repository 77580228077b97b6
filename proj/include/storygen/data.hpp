#pragma once

// Corpus ingestion, tokenization, vocabulary construction and batching.
// Stories are five sentences: the first four form the model input, the fifth
// is the generation target.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "storygen/rng.hpp"

namespace storygen {

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StoryExample {
  std::string story_id;
  std::vector<std::string> context_sentences;  // exactly 4
  std::string target_sentence;
  // Filled by encode_examples:
  std::vector<std::string> context_token_text;  // post-truncation, delimiters included
  std::vector<int> context_tokens;              // ids aligned with context_token_text
  std::vector<int> target_tokens;               // ids, terminated by EOS
};

enum class CorpusFormat { kRocstoriesCsv, kJsonl };

CorpusFormat parse_corpus_format(const std::string& name);

// Lowercases (ASCII), splits on whitespace, then splits leading and trailing
// punctuation characters off each word as individual tokens. Interior
// punctuation (apostrophes in contractions, etc.) stays attached.
std::vector<std::string> tokenize(const std::string& text);

bool is_punctuation_token(const std::string& token);

std::vector<StoryExample> load_corpus(const std::string& path, CorpusFormat format);

struct Vocabulary {
  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int> token_to_id;
  std::vector<std::int64_t> frequency;  // per id; specials carry synthetic counts

  int size() const { return static_cast<int>(id_to_token.size()); }

  int lookup(const std::string& token) const;
  const std::string& token(int id) const;
};

// Tokens with training-split count >= min_freq get ids (count descending,
// token ascending from id 5); the rest fold into UNK. Special-token
// frequencies are synthesized so inverse-frequency weighting is defined for
// every id: PAD=1, SOS=EOS=#examples, SENT_DELIM=3*#examples,
// UNK=max(1, total count of dropped tokens).
Vocabulary build_vocab(const std::vector<StoryExample>& examples, int min_freq);

inline constexpr int kDefaultMaxContextTokens = 120;

// Tokenizes every example in place against the vocabulary, inserting a
// sentence delimiter between the four context sentences and truncating
// contexts longer than max_context_tokens from the left. Returns the number
// of truncated contexts so the caller can warn.
int encode_examples(std::vector<StoryExample>& examples, const Vocabulary& vocab,
                    int max_context_tokens = kDefaultMaxContextTokens);

struct Batch {
  // Padded id matrices (PAD id), one row per example, plus true lengths.
  std::vector<std::vector<int>> context;
  std::vector<int> context_lengths;
  std::vector<std::vector<int>> target;
  std::vector<int> target_lengths;
  // Per-example keyphrase score vector; length equals the unpadded context.
  std::vector<std::vector<double>> scores;
};

// Deterministic shuffle under seed, then contiguous batches padded to the
// per-batch maximum lengths. scores must be empty or aligned with examples.
std::vector<Batch> make_batches(const std::vector<StoryExample>& examples,
                                const std::vector<std::vector<double>>& scores, int batch_size,
                                std::uint64_t seed);

// Deterministic templated five-sentence stories over a small vocabulary.
// Roughly half the endings are drawn from a shared generic pool; the rest
// are specific and reuse the context's adjective+noun keyphrase.
std::vector<StoryExample> synth_corpus(std::uint64_t seed, int n_stories);

}  // namespace storygen
