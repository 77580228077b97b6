#pragma once

// Greedy generation with repetition blocking: the highest-probability token
// wins each step unless it would repeat the previous token or reuse a bigram
// already emitted, in which case the next-best unblocked token is taken.
// EOS is never blocked, so decoding always terminates.

#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "storygen/model.hpp"
#include "storygen/special_tokens.hpp"
#include "storygen/tape.hpp"

namespace storygen {

struct DecodeConfig {
  int max_len = 20;
  bool block_immediate_repeat = true;
  bool block_repeated_bigrams = true;

  void validate() const {
    if (max_len < 1) throw std::invalid_argument("decode: max_len must be >= 1");
  }
};

// Returns generated token ids; EOS terminates and is not included.
template <typename T>
std::vector<int> greedy_decode(const ModelParameters<T>& params, const ModelConfig& config,
                               const std::vector<int>& context_ids, const std::vector<double>& p,
                               const DecodeConfig& decode_config) {
  decode_config.validate();
  Tape<T> tape(/*recording=*/false);
  EncoderOutput<T> enc = encode(tape, context_ids, params, config);
  Tensor<T> p_tensor;
  if (!p.empty()) {
    if (p.size() != context_ids.size()) {
      throw std::invalid_argument("greedy_decode: score vector length mismatch");
    }
    p_tensor = score_vector_tensor<T>(p);
  }
  std::vector<Tensor<T>> states = enc.finals;
  std::vector<int> output;
  std::set<std::pair<int, int>> bigrams;
  int prev = kSosId;
  while (static_cast<int>(output.size()) < decode_config.max_len) {
    DecodeStep<T> step = decode_step_logits(tape, prev, states, enc, p_tensor, params, config);
    const auto& logits = step.logits.values();
    auto blocked = [&](int id) {
      if (id == kPadId || id == kSosId) return true;
      if (id == kEosId || output.empty()) return false;
      if (decode_config.block_immediate_repeat && id == output.back()) return true;
      if (decode_config.block_repeated_bigrams && bigrams.count({output.back(), id}) != 0) {
        return true;
      }
      return false;
    };
    int best = -1;
    for (int id = 0; id < static_cast<int>(logits.size()); ++id) {
      if (blocked(id)) continue;
      if (best < 0 || logits[static_cast<std::size_t>(id)] > logits[static_cast<std::size_t>(best)]) {
        best = id;  // ties keep the lowest id
      }
    }
    if (best == kEosId) break;
    if (!output.empty()) bigrams.insert({output.back(), best});
    output.push_back(best);
    states = std::move(step.states);
    prev = best;
  }
  return output;
}

}  // namespace storygen
