#pragma once

// Central-difference gradient verification. The caller runs one analytic
// forward/backward so that every parameter carries a gradient, then hands the
// parameters plus a pure forward function here; each parameter element is
// perturbed in both directions and the numeric slope is compared against the
// stored analytic gradient.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "storygen/tensor.hpp"

namespace storygen {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "name[i]" of the element with the largest error
  std::size_t checked = 0;
};

// relative error |a - n| / max(|a|, |n|, 1e-8)
inline double grad_rel_err(double analytic, double numeric) {
  double denom = std::max(std::max(std::fabs(analytic), std::fabs(numeric)), 1e-8);
  return std::fabs(analytic - numeric) / denom;
}

template <typename T, typename ForwardFn>
GradCheckResult grad_check(const std::vector<std::pair<std::string, Tensor<T>>>& params,
                           ForwardFn forward, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) {
    throw std::invalid_argument("grad_check: eps must lie in (0, 1e-2]");
  }
  GradCheckResult result;
  for (const auto& [name, param] : params) {
    if (!param.has_grad()) {
      throw std::logic_error("grad_check: parameter '" + name +
                             "' has no analytic gradient; run backward first");
    }
    const std::vector<T> analytic = param.grad();
    Tensor<T> p = param;
    auto& vals = p.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      T saved = vals[i];
      vals[i] = saved + static_cast<T>(eps);
      double f_plus = static_cast<double>(forward());
      vals[i] = saved - static_cast<T>(eps);
      double f_minus = static_cast<double>(forward());
      vals[i] = saved;
      double numeric = (f_plus - f_minus) / (2.0 * eps);
      double err = grad_rel_err(static_cast<double>(analytic[i]), numeric);
      result.checked += 1;
      if (err > result.max_rel_err) {
        result.max_rel_err = err;
        result.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace storygen
