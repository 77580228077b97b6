#pragma once

// Diversity metrics over generated endings and the pluggable pairwise
// ending-comparison interface, plus the generations file format.

#include <cstdint>
#include <string>
#include <vector>

#include "storygen/data.hpp"
#include "storygen/decode.hpp"
#include "storygen/keyphrase.hpp"
#include "storygen/model.hpp"

namespace storygen {

struct GenerationRecord {
  std::string story_id;
  std::vector<std::string> context_sentences;
  std::vector<std::string> ending_tokens;  // may be empty
  std::vector<std::string> keyphrases;     // retained phrase texts
  std::vector<double> keyphrase_scores;    // aligned normalized scores
};

using GenerationSet = std::vector<GenerationRecord>;

struct DistResult {
  double ratio = 0.0;
  std::int64_t distinct = 0;
  std::int64_t total = 0;
  bool undefined = false;  // no n-grams at all; ratio reported as 0
};

// Corpus-level distinct-n: n-grams pooled across every ending in the set.
DistResult distinct_n(const GenerationSet& generations, int n);

struct EvalReport {
  DistResult dist1, dist2, dist3;
};

EvalReport eval_report(const GenerationSet& generations);

class EndingComparator {
 public:
  virtual ~EndingComparator() = default;
  virtual std::string name() const = 0;
  // true when the first ending is the better fit for the context.
  virtual bool first_wins(const std::vector<std::string>& context_tokens,
                          const std::vector<std::string>& ending_a,
                          const std::vector<std::string>& ending_b) const = 0;
};

// Baseline judge: the ending sharing more distinct non-stopword tokens with
// the context wins; ties go to the first argument.
class OverlapComparator : public EndingComparator {
 public:
  std::string name() const override { return "overlap"; }
  bool first_wins(const std::vector<std::string>& context_tokens,
                  const std::vector<std::string>& ending_a,
                  const std::vector<std::string>& ending_b) const override;
};

enum class Winner { kA, kB };

// Both endings must be non-empty.
Winner compare_endings(const EndingComparator& comparator,
                       const std::vector<std::string>& context_tokens,
                       const std::vector<std::string>& ending_a,
                       const std::vector<std::string>& ending_b);

struct WinRateResult {
  int pairs = 0;
  int wins_a = 0;
  double win_rate_a = 0.0;
};

// Pairs records by story_id (every id in a must appear in b). The comparator
// sees the pair in alternating argument order so a tie-to-first judge scores
// identical sets at 50%.
WinRateResult win_rate(const GenerationSet& a, const GenerationSet& b,
                       const EndingComparator& comparator);

// Generations file: one JSON object per line with fields story_id, context,
// ending, keyphrases.
void write_generations(const std::string& path, const GenerationSet& generations);
GenerationSet read_generations(const std::string& path);

// Generates one ending per story (keyphrase vectors at the given k; k <= 0
// means all candidates) and reports corpus diversity.
GenerationSet generate_endings(const ModelParameters<float>& params, const ModelConfig& config,
                               const std::vector<StoryExample>& examples, int k,
                               const DecodeConfig& decode_config, const Vocabulary& vocab);

EvalReport evaluate_model(const ModelParameters<float>& params, const ModelConfig& config,
                          const std::vector<StoryExample>& examples, int k,
                          const DecodeConfig& decode_config, const Vocabulary& vocab);

}  // namespace storygen
