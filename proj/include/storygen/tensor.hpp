#pragma once

// Dense row-major tensors over float or double, with gradient storage for
// reverse-mode differentiation. A Tensor is a cheap shared handle: copying
// one aliases the same storage, which is what lets tape records and model
// parameter structs refer to the same underlying buffers.

#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace storygen {

// Thrown when an operation produces a NaN or infinity. Training aborts on
// this rather than letting bad values propagate.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) s += "x";
    s += std::to_string(shape[i]);
  }
  s += "]";
  return s;
}

inline std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) {
      throw std::invalid_argument("tensor shape has non-positive dimension " + shape_str(shape));
    }
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

template <typename T>
struct TensorStorage {
  std::vector<int> shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until a backward pass touches this tensor
  bool requires_grad = false;
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    Tensor t;
    t.storage_ = std::make_shared<TensorStorage<T>>();
    std::size_t n = shape_numel(shape);
    t.storage_->shape = std::move(shape);
    t.storage_->values.assign(n, T(0));
    t.storage_->requires_grad = requires_grad;
    return t;
  }

  // Values are validated to be finite; a bad literal is caught at the source.
  static Tensor from_values(std::vector<int> shape, std::vector<T> values,
                            bool requires_grad = false) {
    Tensor t = make(std::move(shape), std::move(values), requires_grad);
    t.check_finite("tensor literal");
    return t;
  }

  // Unvalidated construction; the tape validates op outputs itself so it can
  // name the producing primitive.
  static Tensor make(std::vector<int> shape, std::vector<T> values, bool requires_grad = false) {
    std::size_t n = shape_numel(shape);
    if (n != values.size()) {
      throw std::invalid_argument("tensor shape " + shape_str(shape) + " expects " +
                                  std::to_string(n) + " values, got " +
                                  std::to_string(values.size()));
    }
    Tensor t;
    t.storage_ = std::make_shared<TensorStorage<T>>();
    t.storage_->shape = std::move(shape);
    t.storage_->values = std::move(values);
    t.storage_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(T value) { return from_values({1, 1}, {value}); }

  bool defined() const { return static_cast<bool>(storage_); }

  const std::vector<int>& shape() const { return storage_->shape; }
  int dim(int i) const { return storage_->shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(storage_->shape.size()); }
  std::size_t numel() const { return storage_->values.size(); }

  const std::vector<T>& values() const { return storage_->values; }
  std::vector<T>& mutable_values() { return storage_->values; }

  T item() const {
    if (numel() != 1) {
      throw std::invalid_argument("item(): tensor has shape " + shape_str(shape()) +
                                  ", expected a single element");
    }
    return storage_->values[0];
  }

  bool requires_grad() const { return storage_->requires_grad; }
  void set_requires_grad(bool on) { storage_->requires_grad = on; }

  bool has_grad() const { return !storage_->grad.empty(); }

  const std::vector<T>& grad() const {
    if (!has_grad()) {
      throw std::logic_error("grad(): no gradient has been accumulated for this tensor");
    }
    return storage_->grad;
  }

  // Zero-filled on first use; backward rules accumulate into this.
  std::vector<T>& grad_accumulator() {
    if (storage_->grad.empty()) storage_->grad.assign(numel(), T(0));
    return storage_->grad;
  }

  void clear_grad() { storage_->grad.clear(); }

  // Stable identity of the underlying storage, for tape bookkeeping.
  const void* id() const { return storage_.get(); }

  void check_finite(const char* op) const {
    for (const T& v : storage_->values) {
      if (!std::isfinite(v)) {
        throw NumericError(std::string("non-finite value produced by primitive '") + op + "'");
      }
    }
  }

 private:
  std::shared_ptr<TensorStorage<T>> storage_;
};

}  // namespace storygen
