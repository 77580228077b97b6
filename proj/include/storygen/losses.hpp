#pragma once

// Training objectives: NLL, inverse-token-frequency weighted NLL, the
// coverage penalty, and the keyphrase attention loss, plus the
// variant-specific combination used by training.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "storygen/data.hpp"
#include "storygen/model.hpp"
#include "storygen/tape.hpp"
#include "storygen/tensor.hpp"

namespace storygen {

struct LossConfig {
  double coverage_lambda = 1.0;
  double keyphrase_weight = 0.9;
  double reconstruction_weight = 0.1;
  double itf_alpha = 0.4;
  double itf_weight_cap = 100.0;
  bool normalize_q = false;  // divide aggregate attention by T_dec before the MSE

  void validate() const {
    if (coverage_lambda < 0) throw std::invalid_argument("coverage_lambda must be >= 0");
    if (std::fabs(keyphrase_weight + reconstruction_weight - 1.0) > 1e-9) {
      throw std::invalid_argument("keyphrase_weight + reconstruction_weight must equal 1");
    }
    if (itf_alpha < 0) throw std::invalid_argument("itf_alpha must be >= 0");
    if (itf_weight_cap < 1.0) {
      throw std::invalid_argument("itf_weight_cap must be >= 1 (mean weight is normalized to 1)");
    }
  }
};

struct TokenWeights {
  std::vector<double> weights;  // per vocabulary id
};

// w(v) = (1/frequency)^alpha, capped, then rescaled to mean 1. Capping and
// rescaling interact, so both are iterated to a joint fixed point.
inline TokenWeights itf_weights(const Vocabulary& vocab, const LossConfig& config) {
  config.validate();
  if (vocab.size() == 0) throw std::invalid_argument("itf_weights: empty vocabulary");
  TokenWeights tw;
  tw.weights.resize(static_cast<std::size_t>(vocab.size()));
  for (int id = 0; id < vocab.size(); ++id) {
    auto f = vocab.frequency[static_cast<std::size_t>(id)];
    if (f < 1) {
      throw std::invalid_argument("itf_weights: token '" + vocab.token(id) +
                                  "' has frequency " + std::to_string(f));
    }
    tw.weights[static_cast<std::size_t>(id)] =
        std::pow(1.0 / static_cast<double>(f), config.itf_alpha);
  }
  double n = static_cast<double>(tw.weights.size());
  for (int iter = 0; iter < 1000; ++iter) {
    bool clipped = false;
    for (auto& w : tw.weights) {
      if (w > config.itf_weight_cap) {
        w = config.itf_weight_cap;
        clipped = true;
      }
    }
    double mean = 0.0;
    for (double w : tw.weights) mean += w;
    mean /= n;
    if (!clipped && std::fabs(mean - 1.0) <= 1e-12) break;
    for (auto& w : tw.weights) w /= mean;
  }
  double mean = 0.0, max_w = 0.0;
  for (double w : tw.weights) {
    mean += w;
    max_w = std::max(max_w, w);
  }
  mean /= n;
  if (std::fabs(mean - 1.0) > 1e-6 || max_w > config.itf_weight_cap + 1e-9) {
    throw std::logic_error("itf_weights: cap/normalization fixed point not reached");
  }
  return tw;
}

namespace detail {

template <typename T>
Tensor<T> per_step_nll_column(Tape<T>& tape, const std::vector<Tensor<T>>& logits,
                              const std::vector<int>& targets) {
  if (logits.empty()) throw std::invalid_argument("nll: no logit rows");
  if (logits.size() != targets.size()) {
    throw std::invalid_argument("nll: " + std::to_string(logits.size()) + " logit rows vs " +
                                std::to_string(targets.size()) + " targets");
  }
  std::vector<Tensor<T>> picks;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    int vocab = logits[t].dim(1);
    if (targets[t] < 0 || targets[t] >= vocab) {
      throw std::invalid_argument("nll: target id " + std::to_string(targets[t]) +
                                  " out of range at step " + std::to_string(t));
    }
    Tensor<T> lp = tape.log_softmax_rows(logits[t]);
    picks.push_back(tape.pick(lp, static_cast<std::size_t>(targets[t])));
  }
  return tape.concat(picks, /*axis=*/0);  // [T_dec x 1] log-probabilities
}

}  // namespace detail

// Mean over steps of -log P(target_t).
template <typename T>
Tensor<T> nll_loss(Tape<T>& tape, const std::vector<Tensor<T>>& logits,
                   const std::vector<int>& targets) {
  return tape.scale(tape.mean(detail::per_step_nll_column(tape, logits, targets)), -1.0);
}

// Mean over steps of weight(target_t) * -log P(target_t).
template <typename T>
Tensor<T> itf_nll_loss(Tape<T>& tape, const std::vector<Tensor<T>>& logits,
                       const std::vector<int>& targets, const TokenWeights& weights) {
  Tensor<T> column = detail::per_step_nll_column(tape, logits, targets);
  std::vector<T> w(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (static_cast<std::size_t>(targets[t]) >= weights.weights.size()) {
      throw std::invalid_argument("itf_nll_loss: no weight for target id " +
                                  std::to_string(targets[t]));
    }
    w[t] = static_cast<T>(weights.weights[static_cast<std::size_t>(targets[t])]);
  }
  Tensor<T> wcol = Tensor<T>::from_values({static_cast<int>(targets.size()), 1}, std::move(w));
  return tape.scale(tape.mean(tape.mul(column, wcol)), -1.0);
}

// Off-tape sum of -log P(target_t); used for reporting plain per-token NLL
// regardless of the training objective.
template <typename T>
double nll_value_sum(const std::vector<Tensor<T>>& logits, const std::vector<int>& targets) {
  double total = 0.0;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    const auto& row = logits[t].values();
    double mx = static_cast<double>(row[0]);
    for (T v : row) mx = std::max(mx, static_cast<double>(v));
    double sum = 0.0;
    for (T v : row) sum += std::exp(static_cast<double>(v) - mx);
    double lse = mx + std::log(sum);
    total += lse - static_cast<double>(row[static_cast<std::size_t>(targets[t])]);
  }
  return total;
}

// lambda * mean over steps of sum_i min(a_i^t, s_i^t), where s^t is the
// elementwise sum of rows before step t (zero at the first step).
template <typename T>
Tensor<T> coverage_penalty(Tape<T>& tape, const AttentionTrace<T>& trace, double lambda) {
  if (trace.rows.empty()) throw std::invalid_argument("coverage_penalty: empty trace");
  int src = trace.src_len();
  Tensor<T> s = Tensor<T>::zeros({1, src});
  std::vector<Tensor<T>> contributions;
  for (std::size_t t = 0; t < trace.rows.size(); ++t) {
    contributions.push_back(tape.sum(tape.minimum(trace.rows[t], s)));
    s = t == 0 ? trace.rows[0] : tape.add(s, trace.rows[t]);
  }
  return tape.scale(tape.mean(tape.concat(contributions, /*axis=*/0)), lambda);
}

// q = elementwise sum of the trace's attention rows.
template <typename T>
Tensor<T> aggregate_attention(Tape<T>& tape, const AttentionTrace<T>& trace) {
  if (trace.rows.empty()) throw std::invalid_argument("aggregate_attention: empty trace");
  Tensor<T> q = trace.rows[0];
  for (std::size_t t = 1; t < trace.rows.size(); ++t) q = tape.add(q, trace.rows[t]);
  return q;
}

// MSE(q, p) over source positions.
template <typename T>
Tensor<T> keyphrase_attention_loss(Tape<T>& tape, const Tensor<T>& q, const Tensor<T>& p) {
  if (!p.defined() || p.shape() != q.shape()) {
    throw std::invalid_argument("keyphrase_attention_loss: q " + shape_str(q.shape()) +
                                " vs p " + (p.defined() ? shape_str(p.shape()) : "(missing)"));
  }
  return tape.mean(tape.square(tape.sub(q, p)));
}

struct LossBreakdown {
  double total = 0.0;
  double reconstruction = 0.0;
  double coverage = 0.0;
  double keyphrase = 0.0;
  bool has_coverage = false;
  bool has_keyphrase = false;
};

// The per-variant training objective. p may be undefined except for the
// KeyphraseLoss variant; weights is required when config.use_itf.
template <typename T>
Tensor<T> total_loss(Tape<T>& tape, const ModelConfig& config,
                     const std::vector<Tensor<T>>& logits, const std::vector<int>& targets,
                     const AttentionTrace<T>& trace, const Tensor<T>& p,
                     const TokenWeights* weights, const LossConfig& loss_config,
                     LossBreakdown* breakdown = nullptr) {
  loss_config.validate();
  Tensor<T> reconstruction;
  if (config.use_itf) {
    if (weights == nullptr) {
      throw std::invalid_argument("total_loss: ITF enabled but no token weights supplied");
    }
    reconstruction = itf_nll_loss(tape, logits, targets, *weights);
  } else {
    reconstruction = nll_loss(tape, logits, targets);
  }
  LossBreakdown local;
  local.reconstruction = static_cast<double>(reconstruction.item());

  Tensor<T> total = reconstruction;
  switch (config.variant) {
    case Variant::kBaseline:
    case Variant::kKeyphraseAdd:
    case Variant::kContextConcat:
      break;
    case Variant::kCoverageLoss: {
      Tensor<T> cov = coverage_penalty(tape, trace, loss_config.coverage_lambda);
      local.coverage = static_cast<double>(cov.item());
      local.has_coverage = true;
      total = tape.add(reconstruction, cov);
      break;
    }
    case Variant::kKeyphraseLoss: {
      if (!p.defined()) {
        throw std::invalid_argument("total_loss: keyphrase scores required for keyphrase_loss");
      }
      Tensor<T> q = aggregate_attention(tape, trace);
      Tensor<T> mse = keyphrase_attention_loss(
          tape, loss_config.normalize_q ? tape.scale(q, 1.0 / trace.steps()) : q, p);
      local.keyphrase = static_cast<double>(mse.item());
      local.has_keyphrase = true;
      total = tape.add(tape.scale(reconstruction, loss_config.reconstruction_weight),
                       tape.scale(mse, loss_config.keyphrase_weight));
      break;
    }
  }
  local.total = static_cast<double>(total.item());
  if (breakdown) *breakdown = local;
  return total;
}

}  // namespace storygen
