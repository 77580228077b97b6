#include "storygen/train.hpp"

#include "storygen/adam.hpp"
#include "storygen/losses.hpp"
#include "storygen/tape.hpp"

namespace storygen {

namespace {

constexpr std::uint64_t kShuffleStream = 0x53485546ull;

const std::vector<double>& score_row(const std::vector<std::vector<double>>& scores,
                                     std::size_t i) {
  static const std::vector<double> empty;
  return scores.empty() ? empty : scores[i];
}

}  // namespace

double per_token_nll(const ModelParameters<float>& params, const ModelConfig& config,
                     const std::vector<StoryExample>& examples,
                     const std::vector<std::vector<double>>& scores) {
  double nll_sum = 0.0;
  std::int64_t tokens = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    Tape<float> tape(/*recording=*/false);
    auto fwd = forward_teacher_forced(tape, examples[i].context_tokens,
                                      examples[i].target_tokens, score_row(scores, i), params,
                                      config);
    nll_sum += nll_value_sum(fwd.logits, examples[i].target_tokens);
    tokens += static_cast<std::int64_t>(examples[i].target_tokens.size());
  }
  return tokens == 0 ? 0.0 : nll_sum / static_cast<double>(tokens);
}

TrainResult train_model(const std::vector<StoryExample>& examples,
                        const std::vector<std::vector<double>>& scores, const Vocabulary& vocab,
                        const RunConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (examples.empty()) throw DataError("train_model: no training examples");
  if (!scores.empty() && scores.size() != examples.size()) {
    throw std::invalid_argument("train_model: scores not aligned with examples");
  }
  for (const auto& ex : examples) {
    if (ex.context_tokens.empty() || ex.target_tokens.empty()) {
      throw DataError("train_model: story " + ex.story_id + " is not encoded");
    }
  }

  ModelConfig model_config = config.model_config(vocab.size());
  LossConfig loss_config = config.loss_config();
  TrainResult result;
  result.params = ModelParameters<float>::init(model_config, config.seed);

  TokenWeights weights;
  if (model_config.use_itf) weights = itf_weights(vocab, loss_config);

  std::vector<Tensor<float>> param_tensors;
  for (auto& [name, tensor] : result.params.named()) param_tensors.push_back(tensor);
  AdamConfig adam_config;
  adam_config.lr = config.lr;
  Adam<float> optimizer(param_tensors, adam_config);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    // Reshuffled batches each epoch under a distinct derived seed.
    auto batches =
        make_batches(examples, scores, config.batch_size,
                     derive_seed(config.seed, kShuffleStream + static_cast<std::uint64_t>(epoch)));

    EpochStats stats;
    stats.epoch = epoch;
    double nll_sum = 0.0;
    std::int64_t token_count = 0;

    for (const auto& batch : batches) {
      Tape<float> tape;
      std::vector<Tensor<float>> example_losses;
      for (std::size_t i = 0; i < batch.context.size(); ++i) {
        std::vector<int> context(batch.context[i].begin(),
                                 batch.context[i].begin() + batch.context_lengths[i]);
        std::vector<int> target(batch.target[i].begin(),
                                batch.target[i].begin() + batch.target_lengths[i]);
        const auto& p = batch.scores[i];
        auto fwd =
            forward_teacher_forced(tape, context, target, p, result.params, model_config);
        Tensor<float> p_tensor;
        if (!p.empty()) p_tensor = score_vector_tensor<float>(p);
        LossBreakdown breakdown;
        Tensor<float> loss =
            total_loss(tape, model_config, fwd.logits, target, fwd.trace, p_tensor,
                       model_config.use_itf ? &weights : nullptr, loss_config, &breakdown);
        example_losses.push_back(loss);
        stats.total += breakdown.total;
        stats.reconstruction += breakdown.reconstruction;
        stats.coverage += breakdown.coverage;
        stats.keyphrase += breakdown.keyphrase;
        stats.has_coverage = stats.has_coverage || breakdown.has_coverage;
        stats.has_keyphrase = stats.has_keyphrase || breakdown.has_keyphrase;
        nll_sum += nll_value_sum(fwd.logits, target);
        token_count += static_cast<std::int64_t>(target.size());
      }
      Tensor<float> batch_loss = tape.mean(tape.concat(example_losses, /*axis=*/0));
      tape.backward(batch_loss);
      optimizer.step();
    }

    double n = static_cast<double>(examples.size());
    stats.total /= n;
    stats.reconstruction /= n;
    stats.coverage /= n;
    stats.keyphrase /= n;
    stats.per_token_nll = token_count == 0 ? 0.0 : nll_sum / static_cast<double>(token_count);

    if (hooks.dev_scorer) {
      stats.dev_score = hooks.dev_scorer(result.params, epoch);
      stats.has_dev = true;
    }
    double selection = stats.has_dev ? stats.dev_score : stats.per_token_nll;
    if (selection < result.best_score) {
      result.best_score = selection;
      result.best_epoch = epoch;
      result.best_params = result.params.clone();
    }

    result.history.push_back(stats);
    if (hooks.on_epoch) hooks.on_epoch(stats);
    if (hooks.should_stop && hooks.should_stop(stats)) break;
  }

  if (result.history.empty() || result.best_epoch == 0) {
    result.best_params = result.params.clone();
    result.best_epoch = static_cast<int>(result.history.size());
  }
  return result;
}

}  // namespace storygen
