#pragma once

// Training driver: per-epoch shuffled batches, per-batch backward + Adam
// step, component logging, and best-checkpoint selection through a pluggable
// dev scorer (lower is better; defaults to per-token NLL).

#include <functional>
#include <limits>
#include <vector>

#include "storygen/config.hpp"
#include "storygen/data.hpp"
#include "storygen/model.hpp"

namespace storygen {

struct EpochStats {
  int epoch = 0;
  double total = 0.0;           // mean per-example training objective
  double reconstruction = 0.0;  // mean reconstruction component
  double coverage = 0.0;
  double keyphrase = 0.0;
  bool has_coverage = false;
  bool has_keyphrase = false;
  double per_token_nll = 0.0;  // plain NLL per target token, over the epoch
  double dev_score = 0.0;
  bool has_dev = false;
};

struct TrainHooks {
  // Scores a parameter snapshot after an epoch; lower is better. When unset,
  // selection falls back to the epoch's per-token training NLL.
  std::function<double(const ModelParameters<float>&, int epoch)> dev_scorer;
  std::function<void(const EpochStats&)> on_epoch;
  std::function<bool(const EpochStats&)> should_stop;
};

struct TrainResult {
  ModelParameters<float> params;       // after the last epoch
  ModelParameters<float> best_params;  // lowest selection score
  int best_epoch = 0;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<EpochStats> history;
};

// examples must already be encoded; scores must be empty or aligned.
TrainResult train_model(const std::vector<StoryExample>& examples,
                        const std::vector<std::vector<double>>& scores, const Vocabulary& vocab,
                        const RunConfig& config, const TrainHooks& hooks = {});

// Mean per-token NLL of a parameter set over encoded examples (the default
// dev scorer).
double per_token_nll(const ModelParameters<float>& params, const ModelConfig& config,
                     const std::vector<StoryExample>& examples,
                     const std::vector<std::vector<double>>& scores);

}  // namespace storygen
