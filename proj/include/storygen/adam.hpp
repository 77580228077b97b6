#pragma once

// Adam with bias correction. Parameters that received no gradient in a step
// are left untouched and their moment estimates do not advance.

#include <cmath>
#include <cstdint>
#include <vector>

#include "storygen/tensor.hpp"

namespace storygen {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::int64_t step = 0;
};

template <typename T>
void adam_step(Tensor<T>& param, AdamState<T>& state, const AdamConfig& cfg) {
  if (!param.has_grad()) return;
  const auto& g = param.grad();
  auto& p = param.mutable_values();
  if (state.m.empty()) {
    state.m.assign(p.size(), T(0));
    state.v.assign(p.size(), T(0));
  }
  state.step += 1;
  T b1 = static_cast<T>(cfg.beta1);
  T b2 = static_cast<T>(cfg.beta2);
  T corr1 = T(1) - std::pow(b1, static_cast<T>(state.step));
  T corr2 = T(1) - std::pow(b2, static_cast<T>(state.step));
  T lr = static_cast<T>(cfg.lr);
  T eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < p.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g[i];
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g[i] * g[i];
    T mhat = state.m[i] / corr1;
    T vhat = state.v[i] / corr2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamConfig cfg)
      : params_(std::move(params)), states_(params_.size()), cfg_(cfg) {}

  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i) adam_step(params_[i], states_[i], cfg_);
  }

  void zero_grad() {
    for (auto& p : params_) p.clear_grad();
  }

  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<AdamState<T>> states_;
  AdamConfig cfg_;
};

}  // namespace storygen
