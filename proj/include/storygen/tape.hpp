#pragma once

// Reverse-mode differentiation over 2-D tensors. Every primitive records the
// operation on a tape; backward() replays the tape in reverse and accumulates
// gradients into the inputs. Single-threaded and deterministic: the same
// sequence of calls produces bitwise-identical values and gradients.
//
// Conventions used throughout the model code:
//   - all tensors are rank 2, row-major
//   - vectors are rows [1xN] unless noted; scalars are [1x1]
//   - softmax/log-softmax normalize along each row

#include <cstddef>
#include <functional>
#include <unordered_set>
#include <utility>
#include <vector>

#include "storygen/tensor.hpp"

namespace storygen {

template <typename T>
class Tape {
 public:
  // recording=false skips record creation (pure inference); finiteness checks
  // still run.
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return records_.size(); }

  // ---- primitives ----

  Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
      throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                                  " vs " + shape_str(b.shape()));
    }
    Tensor<T> out = Tensor<T>::zeros({m, n});
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.mutable_values();
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < k; ++j) {
        T aij = av[idx(i, j, k)];
        if (aij == T(0)) continue;
        for (int c = 0; c < n; ++c) ov[idx(i, c, n)] += aij * bv[idx(j, c, n)];
      }
    }
    return finish("matmul", {a, b}, out, [a, b, m, k, n](const Tensor<T>& o) {
      const auto& g = o.grad();
      Tensor<T> am = a, bm = b;
      auto& da = am.grad_accumulator();
      auto& db = bm.grad_accumulator();
      const auto& av = a.values();
      const auto& bv = b.values();
      for (int i = 0; i < m; ++i) {
        for (int c = 0; c < n; ++c) {
          T gic = g[idx(i, c, n)];
          if (gic == T(0)) continue;
          for (int j = 0; j < k; ++j) {
            da[idx(i, j, k)] += gic * bv[idx(j, c, n)];
            db[idx(j, c, n)] += av[idx(i, j, k)] * gic;
          }
        }
      }
    });
  }

  Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "add");
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    elementwise(out, a, b, [](T x, T y) { return x + y; });
    return finish("add", {a, b}, out, [a, b](const Tensor<T>& o) {
      const auto& g = o.grad();
      accumulate(a, g, [](T gi, std::size_t) { return gi; });
      accumulate(b, g, [](T gi, std::size_t) { return gi; });
    });
  }

  Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "sub");
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    elementwise(out, a, b, [](T x, T y) { return x - y; });
    return finish("sub", {a, b}, out, [a, b](const Tensor<T>& o) {
      const auto& g = o.grad();
      accumulate(a, g, [](T gi, std::size_t) { return gi; });
      accumulate(b, g, [](T gi, std::size_t) { return -gi; });
    });
  }

  Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "mul");
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    elementwise(out, a, b, [](T x, T y) { return x * y; });
    return finish("mul", {a, b}, out, [a, b](const Tensor<T>& o) {
      const auto& g = o.grad();
      const auto& av = a.values();
      const auto& bv = b.values();
      accumulate(a, g, [&bv](T gi, std::size_t i) { return gi * bv[i]; });
      accumulate(b, g, [&av](T gi, std::size_t i) { return gi * av[i]; });
    });
  }

  // out[i,j] = m[i,j] + row[0,j]
  Tensor<T> add_rows(const Tensor<T>& m, const Tensor<T>& row) {
    require_rank2(m, "add_rows");
    if (row.rank() != 2 || row.dim(0) != 1 || row.dim(1) != m.dim(1)) {
      throw std::invalid_argument("add_rows: row shape " + shape_str(row.shape()) +
                                  " does not broadcast over " + shape_str(m.shape()));
    }
    int r = m.dim(0), c = m.dim(1);
    Tensor<T> out = Tensor<T>::zeros(m.shape());
    const auto& mv = m.values();
    const auto& rv = row.values();
    auto& ov = out.mutable_values();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) ov[idx(i, j, c)] = mv[idx(i, j, c)] + rv[static_cast<std::size_t>(j)];
    return finish("add_rows", {m, row}, out, [m, row, r, c](const Tensor<T>& o) {
      const auto& g = o.grad();
      accumulate(m, g, [](T gi, std::size_t) { return gi; });
      Tensor<T> rm = row;
      auto& dr = rm.grad_accumulator();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) dr[static_cast<std::size_t>(j)] += g[idx(i, j, c)];
    });
  }

  Tensor<T> scale(const Tensor<T>& x, double factor) {
    T f = static_cast<T>(factor);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = f * xv[i];
    return finish("scale", {x}, out, [x, f](const Tensor<T>& o) {
      accumulate(x, o.grad(), [f](T gi, std::size_t) { return f * gi; });
    });
  }

  // Elementwise minimum; where the two sides tie, the gradient goes to a.
  Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "minimum");
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    elementwise(out, a, b, [](T x, T y) { return x <= y ? x : y; });
    return finish("minimum", {a, b}, out, [a, b](const Tensor<T>& o) {
      const auto& g = o.grad();
      const auto& av = a.values();
      const auto& bv = b.values();
      accumulate(a, g, [&](T gi, std::size_t i) { return av[i] <= bv[i] ? gi : T(0); });
      accumulate(b, g, [&](T gi, std::size_t i) { return av[i] <= bv[i] ? T(0) : gi; });
    });
  }

  Tensor<T> tanh(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    unary(out, x, [](T v) { return std::tanh(v); });
    return finish("tanh", {x}, out, [x](const Tensor<T>& o) {
      const auto& y = o.values();
      accumulate(x, o.grad(), [&y](T gi, std::size_t i) { return gi * (T(1) - y[i] * y[i]); });
    });
  }

  Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    unary(out, x, [](T v) {
      // Evaluate on the negative half-axis only, so exp never overflows.
      if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
      T e = std::exp(v);
      return e / (T(1) + e);
    });
    return finish("sigmoid", {x}, out, [x](const Tensor<T>& o) {
      const auto& y = o.values();
      accumulate(x, o.grad(), [&y](T gi, std::size_t i) { return gi * y[i] * (T(1) - y[i]); });
    });
  }

  Tensor<T> log(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    unary(out, x, [](T v) { return std::log(v); });
    return finish("log", {x}, out, [x](const Tensor<T>& o) {
      const auto& xv = x.values();
      accumulate(x, o.grad(), [&xv](T gi, std::size_t i) { return gi / xv[i]; });
    });
  }

  Tensor<T> square(const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    unary(out, x, [](T v) { return v * v; });
    return finish("square", {x}, out, [x](const Tensor<T>& o) {
      const auto& xv = x.values();
      accumulate(x, o.grad(), [&xv](T gi, std::size_t i) { return T(2) * xv[i] * gi; });
    });
  }

  // Row-wise softmax with the usual max-shift for stability.
  Tensor<T> softmax_rows(const Tensor<T>& x) {
    require_rank2(x, "softmax_rows");
    int r = x.dim(0), c = x.dim(1);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (int i = 0; i < r; ++i) softmax_row(xv, ov, i, c);
    return finish("softmax_rows", {x}, out, [x, r, c](const Tensor<T>& o) {
      const auto& g = o.grad();
      const auto& y = o.values();
      Tensor<T> xm = x;
      auto& dx = xm.grad_accumulator();
      for (int i = 0; i < r; ++i) {
        T dot = T(0);
        for (int j = 0; j < c; ++j) dot += g[idx(i, j, c)] * y[idx(i, j, c)];
        for (int j = 0; j < c; ++j)
          dx[idx(i, j, c)] += y[idx(i, j, c)] * (g[idx(i, j, c)] - dot);
      }
    });
  }

  // Row-wise log-softmax, computed directly so probabilities near zero keep a
  // finite log.
  Tensor<T> log_softmax_rows(const Tensor<T>& x) {
    require_rank2(x, "log_softmax_rows");
    int r = x.dim(0), c = x.dim(1);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (int i = 0; i < r; ++i) {
      T mx = xv[idx(i, 0, c)];
      for (int j = 1; j < c; ++j) mx = std::max(mx, xv[idx(i, j, c)]);
      T sum = T(0);
      for (int j = 0; j < c; ++j) sum += std::exp(xv[idx(i, j, c)] - mx);
      T lse = mx + std::log(sum);
      for (int j = 0; j < c; ++j) ov[idx(i, j, c)] = xv[idx(i, j, c)] - lse;
    }
    return finish("log_softmax_rows", {x}, out, [x, r, c](const Tensor<T>& o) {
      const auto& g = o.grad();
      const auto& y = o.values();  // log-probabilities; exp(y) is the softmax
      Tensor<T> xm = x;
      auto& dx = xm.grad_accumulator();
      for (int i = 0; i < r; ++i) {
        T gsum = T(0);
        for (int j = 0; j < c; ++j) gsum += g[idx(i, j, c)];
        for (int j = 0; j < c; ++j)
          dx[idx(i, j, c)] += g[idx(i, j, c)] - std::exp(y[idx(i, j, c)]) * gsum;
      }
    });
  }

  Tensor<T> transpose(const Tensor<T>& x) {
    require_rank2(x, "transpose");
    int r = x.dim(0), c = x.dim(1);
    Tensor<T> out = Tensor<T>::zeros({c, r});
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) ov[idx(j, i, r)] = xv[idx(i, j, c)];
    return finish("transpose", {x}, out, [x, r, c](const Tensor<T>& o) {
      const auto& g = o.grad();
      Tensor<T> xm = x;
      auto& dx = xm.grad_accumulator();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) dx[idx(i, j, c)] += g[idx(j, i, r)];
    });
  }

  Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
    for (const auto& p : parts) require_rank2(p, "concat");
    int fixed = axis == 0 ? 1 : 0;
    int fixed_dim = parts[0].dim(fixed);
    int total = 0;
    for (const auto& p : parts) {
      if (p.dim(fixed) != fixed_dim) {
        throw std::invalid_argument("concat: shape " + shape_str(p.shape()) +
                                    " does not align with " + shape_str(parts[0].shape()));
      }
      total += p.dim(axis);
    }
    Tensor<T> out = axis == 0 ? Tensor<T>::zeros({total, fixed_dim})
                              : Tensor<T>::zeros({fixed_dim, total});
    auto& ov = out.mutable_values();
    int oc = out.dim(1);
    int offset = 0;
    for (const auto& p : parts) {
      const auto& pv = p.values();
      int pr = p.dim(0), pc = p.dim(1);
      for (int i = 0; i < pr; ++i)
        for (int j = 0; j < pc; ++j) {
          if (axis == 0)
            ov[idx(offset + i, j, oc)] = pv[idx(i, j, pc)];
          else
            ov[idx(i, offset + j, oc)] = pv[idx(i, j, pc)];
        }
      offset += p.dim(axis);
    }
    return finish("concat", parts, out, [parts, axis, oc](const Tensor<T>& o) {
      const auto& g = o.grad();
      int offset = 0;
      for (const auto& p : parts) {
        Tensor<T> pm = p;
        auto& dp = pm.grad_accumulator();
        int pr = p.dim(0), pc = p.dim(1);
        for (int i = 0; i < pr; ++i)
          for (int j = 0; j < pc; ++j) {
            if (axis == 0)
              dp[idx(i, j, pc)] += g[idx(offset + i, j, oc)];
            else
              dp[idx(i, j, pc)] += g[idx(i, offset + j, oc)];
          }
        offset += p.dim(axis);
      }
    });
  }

  Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, int axis) {
    return concat(std::vector<Tensor<T>>{a, b}, axis);
  }

  // Row lookup into an embedding table; the gradient is scattered back into
  // the selected row.
  Tensor<T> embed_row(const Tensor<T>& table, int row) {
    require_rank2(table, "embed_row");
    if (row < 0 || row >= table.dim(0)) {
      throw std::invalid_argument("embed_row: row " + std::to_string(row) +
                                  " out of range for table " + shape_str(table.shape()));
    }
    int c = table.dim(1);
    Tensor<T> out = Tensor<T>::zeros({1, c});
    const auto& tv = table.values();
    auto& ov = out.mutable_values();
    for (int j = 0; j < c; ++j) ov[static_cast<std::size_t>(j)] = tv[idx(row, j, c)];
    return finish("embed_row", {table}, out, [table, row, c](const Tensor<T>& o) {
      const auto& g = o.grad();
      Tensor<T> tm = table;
      auto& dt = tm.grad_accumulator();
      for (int j = 0; j < c; ++j) dt[idx(row, j, c)] += g[static_cast<std::size_t>(j)];
    });
  }

  // Select a single element (flat row-major index) as a [1x1] scalar.
  Tensor<T> pick(const Tensor<T>& x, std::size_t flat_index) {
    if (flat_index >= x.numel()) {
      throw std::invalid_argument("pick: index " + std::to_string(flat_index) +
                                  " out of range for " + shape_str(x.shape()));
    }
    Tensor<T> out = Tensor<T>::scalar(x.values()[flat_index]);
    return finish("pick", {x}, out, [x, flat_index](const Tensor<T>& o) {
      Tensor<T> xm = x;
      xm.grad_accumulator()[flat_index] += o.grad()[0];
    });
  }

  Tensor<T> sum(const Tensor<T>& x) {
    T s = T(0);
    for (T v : x.values()) s += v;
    Tensor<T> out = Tensor<T>::scalar(s);
    return finish("sum", {x}, out, [x](const Tensor<T>& o) {
      T g = o.grad()[0];
      accumulate(x, x.values(), [g](T, std::size_t) { return g; });
    });
  }

  Tensor<T> mean(const Tensor<T>& x) {
    T s = T(0);
    for (T v : x.values()) s += v;
    T n = static_cast<T>(x.numel());
    Tensor<T> out = Tensor<T>::scalar(s / n);
    return finish("mean", {x}, out, [x, n](const Tensor<T>& o) {
      T g = o.grad()[0] / n;
      accumulate(x, x.values(), [g](T, std::size_t) { return g; });
    });
  }

  // out = x / s with s a [1x1] scalar tensor.
  Tensor<T> div_by_scalar(const Tensor<T>& x, const Tensor<T>& s) {
    if (s.numel() != 1) {
      throw std::invalid_argument("div_by_scalar: divisor has shape " + shape_str(s.shape()));
    }
    T sv = s.values()[0];
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] / sv;
    return finish("div_by_scalar", {x, s}, out, [x, s, sv](const Tensor<T>& o) {
      const auto& g = o.grad();
      const auto& xv = x.values();
      accumulate(x, g, [sv](T gi, std::size_t) { return gi / sv; });
      T dot = T(0);
      for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * xv[i];
      Tensor<T> sm = s;
      sm.grad_accumulator()[0] += -dot / (sv * sv);
    });
  }

  // ---- backward ----

  // Accumulates d(loss)/d(input) into every tensor that participated in
  // producing `loss`. Leaf tensors with requires_grad that fed the tape end
  // up with a gradient even when it is identically zero.
  void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) {
      throw std::invalid_argument("backward: loss has shape " + shape_str(loss.shape()) +
                                  ", expected a scalar");
    }
    if (on_tape_.find(loss.id()) == on_tape_.end()) {
      throw std::logic_error("backward: loss was not produced by this tape");
    }
    for (auto& rec : records_) {
      rec.output.clear_grad();
      for (auto& in : rec.inputs) in.clear_grad();
    }
    Tensor<T> seed = loss;
    seed.grad_accumulator()[0] = T(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      if (!it->output.has_grad()) continue;  // not on the path to the loss
      it->backprop(it->output);
    }
    for (auto& rec : records_) {
      for (auto& in : rec.inputs) {
        if (in.requires_grad() && !in.has_grad()) in.grad_accumulator();
      }
    }
  }

 private:
  struct Record {
    const char* op;
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    std::function<void(const Tensor<T>&)> backprop;
  };

  static std::size_t idx(int i, int j, int cols) {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) +
           static_cast<std::size_t>(j);
  }

  static void require_rank2(const Tensor<T>& t, const char* op) {
    if (t.rank() != 2) {
      throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor, got " +
                                  shape_str(t.shape()));
    }
  }

  static void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
      throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                  " vs " + shape_str(b.shape()));
    }
  }

  template <typename F>
  static void elementwise(Tensor<T>& out, const Tensor<T>& a, const Tensor<T>& b, F f) {
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < av.size(); ++i) ov[i] = f(av[i], bv[i]);
  }

  template <typename F>
  static void unary(Tensor<T>& out, const Tensor<T>& x, F f) {
    const auto& xv = x.values();
    auto& ov = out.mutable_values();
    for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = f(xv[i]);
  }

  // Adds f(g[i], i) to the gradient of `t` for every element.
  template <typename F>
  static void accumulate(const Tensor<T>& t, const std::vector<T>& g, F f) {
    Tensor<T> tm = t;
    auto& d = tm.grad_accumulator();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += f(g[i], i);
  }

  static void softmax_row(const std::vector<T>& xv, std::vector<T>& ov, int i, int c) {
    T mx = xv[idx(i, 0, c)];
    for (int j = 1; j < c; ++j) mx = std::max(mx, xv[idx(i, j, c)]);
    T sum = T(0);
    for (int j = 0; j < c; ++j) {
      T e = std::exp(xv[idx(i, j, c)] - mx);
      ov[idx(i, j, c)] = e;
      sum += e;
    }
    for (int j = 0; j < c; ++j) ov[idx(i, j, c)] /= sum;
  }

  bool tracked(const Tensor<T>& t) const {
    return t.requires_grad() || on_tape_.find(t.id()) != on_tape_.end();
  }

  template <typename F>
  Tensor<T> finish(const char* op, std::vector<Tensor<T>> inputs, Tensor<T> out, F&& backprop) {
    out.check_finite(op);
    if (recording_) {
      bool any = false;
      for (const auto& in : inputs) {
        if (tracked(in)) {
          any = true;
          break;
        }
      }
      if (any) {
        on_tape_.insert(out.id());
        records_.push_back(Record{op, std::move(inputs), out,
                                  std::function<void(const Tensor<T>&)>(std::forward<F>(backprop))});
      }
    }
    return out;
  }

  std::vector<Record> records_;
  std::unordered_set<const void*> on_tape_;
  bool recording_;
};

}  // namespace storygen
