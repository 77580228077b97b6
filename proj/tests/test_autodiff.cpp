#include <cmath>
#include <vector>

#include "doctest.h"
#include "storygen/grad_check.hpp"
#include "storygen/rng.hpp"
#include "storygen/tape.hpp"
#include "storygen/tensor.hpp"

using namespace storygen;

namespace {

Tensor<double> random_tensor(Rng& rng, int r, int c, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(static_cast<std::size_t>(r) * c);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor<double>::from_values({r, c}, std::move(v), true);
}

// Runs backward through `build`, then checks every input against central
// differences of the same scalar expression.
template <typename Build>
double check_scalar(std::vector<std::pair<std::string, Tensor<double>>> inputs, Build build) {
  Tape<double> tape;
  Tensor<double> loss = build(tape);
  tape.backward(loss);
  auto forward = [&]() {
    Tape<double> t(false);
    return build(t).item();
  };
  return grad_check(inputs, forward, 1e-5).max_rel_err;
}

}  // namespace

TEST_CASE("softmax rows on known inputs") {
  Tape<double> tape;
  auto x = Tensor<double>::from_values({1, 2}, {0.0, 0.0});
  auto y = tape.softmax_rows(x);
  CHECK(y.values()[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(y.values()[1] == doctest::Approx(0.5).epsilon(1e-12));

  auto x2 = Tensor<double>::from_values({1, 2}, {std::log(2.0), 0.0});
  auto y2 = tape.softmax_rows(x2);
  CHECK(y2.values()[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(y2.values()[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // Rows normalize independently.
  auto m = Tensor<double>::from_values({2, 3}, {1.0, 1.0, 1.0, 0.0, std::log(2.0), 0.0});
  auto ym = tape.softmax_rows(m);
  for (int j = 0; j < 3; ++j) CHECK(ym.values()[j] == doctest::Approx(1.0 / 3.0));
  CHECK(ym.values()[4] == doctest::Approx(0.5));
}

TEST_CASE("softmax handles large logits without overflow") {
  Tape<double> tape;
  auto x = Tensor<double>::from_values({1, 3}, {1000.0, 999.0, -1000.0});
  auto y = tape.softmax_rows(x);
  double z = 1.0 + std::exp(-1.0);
  CHECK(y.values()[0] == doctest::Approx(1.0 / z));
  CHECK(y.values()[1] == doctest::Approx(std::exp(-1.0) / z));
  CHECK(y.values()[2] == doctest::Approx(0.0));
}

TEST_CASE("concat shapes along both axes") {
  Tape<double> tape;
  auto a = Tensor<double>::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  auto b = Tensor<double>::from_values({1, 3}, {7, 8, 9});
  auto v = tape.concat(a, b, 0);
  CHECK(v.shape() == std::vector<int>{3, 3});
  CHECK(v.values() == std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});

  auto c = Tensor<double>::from_values({2, 1}, {10, 11});
  auto h = tape.concat(a, c, 1);
  CHECK(h.shape() == std::vector<int>{2, 4});
  CHECK(h.values() == std::vector<double>{1, 2, 3, 10, 4, 5, 6, 11});

  CHECK_THROWS_AS(tape.concat(a, c, 0), std::invalid_argument);
}

TEST_CASE("sum gradient is all ones") {
  Tape<double> tape;
  auto x = Tensor<double>::from_values({1, 3}, {2.0, -1.0, 5.0}, true);
  auto s = tape.sum(x);
  CHECK(s.item() == doctest::Approx(6.0));
  tape.backward(s);
  CHECK(x.grad() == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("tanh gradient matches closed form") {
  Tape<double> tape;
  auto x = Tensor<double>::from_values({1, 1}, {0.7}, true);
  auto y = tape.tanh(x);
  tape.backward(y);
  double t = std::tanh(0.7);
  CHECK(x.grad()[0] == doctest::Approx(1.0 - t * t).epsilon(1e-12));
}

TEST_CASE("log-softmax pick gradient is probabilities minus one-hot") {
  Tape<double> tape;
  auto logits = Tensor<double>::from_values({1, 4}, {0.3, -1.2, 2.0, 0.0}, true);
  auto logp = tape.log_softmax_rows(logits);
  auto loss = tape.scale(tape.pick(logp, 2), -1.0);
  tape.backward(loss);

  Tape<double> probe(false);
  auto probs = probe.softmax_rows(logits).values();
  for (int j = 0; j < 4; ++j) {
    double expected = probs[static_cast<std::size_t>(j)] - (j == 2 ? 1.0 : 0.0);
    CHECK(logits.grad()[static_cast<std::size_t>(j)] == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("a tensor used twice accumulates both contributions") {
  Tape<double> tape;
  auto x = Tensor<double>::from_values({1, 2}, {3.0, -2.0}, true);
  auto y = tape.sum(tape.mul(x, x));  // d/dx = 2x
  tape.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(6.0));
  CHECK(x.grad()[1] == doctest::Approx(-4.0));

  Tape<double> tape2;
  auto z = Tensor<double>::from_values({1, 2}, {1.0, 4.0}, true);
  auto w = tape2.sum(tape2.add(z, z));  // d/dz = 2
  tape2.backward(w);
  CHECK(z.grad() == std::vector<double>{2.0, 2.0});
}

TEST_CASE("minimum routes the tied gradient to the first argument") {
  Tape<double> tape;
  auto a = Tensor<double>::from_values({1, 3}, {1.0, 5.0, 2.0}, true);
  auto b = Tensor<double>::from_values({1, 3}, {1.0, 3.0, 4.0}, true);
  auto s = tape.sum(tape.minimum(a, b));
  CHECK(s.item() == doctest::Approx(6.0));
  tape.backward(s);
  CHECK(a.grad() == std::vector<double>{1.0, 0.0, 1.0});
  CHECK(b.grad() == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("every primitive passes randomized finite-difference checks") {
  Rng rng(derive_seed(2024, 11));
  int cases = 0;
  for (int trial = 0; trial < 12; ++trial) {
    int m = 1 + static_cast<int>(rng.uniform_index(3));
    int k = 1 + static_cast<int>(rng.uniform_index(3));
    int n = 1 + static_cast<int>(rng.uniform_index(3));

    {
      auto a = random_tensor(rng, m, k);
      auto b = random_tensor(rng, k, n);
      double err = check_scalar({{"a", a}, {"b", b}}, [&](Tape<double>& t) {
        return t.sum(t.tanh(t.matmul(a, b)));
      });
      CHECK(err < 1e-6);
      ++cases;
    }
    {
      auto a = random_tensor(rng, m, n);
      auto b = random_tensor(rng, m, n);
      double err = check_scalar({{"a", a}, {"b", b}}, [&](Tape<double>& t) {
        return t.sum(t.mul(t.add(a, b), t.sub(a, b)));
      });
      CHECK(err < 1e-6);
      ++cases;
    }
    {
      auto a = random_tensor(rng, m, n);
      auto b = random_tensor(rng, m, n);
      double err = check_scalar({{"a", a}, {"b", b}}, [&](Tape<double>& t) {
        return t.sum(t.minimum(a, b));
      });
      CHECK(err < 1e-6);
      ++cases;
    }
    {
      auto x = random_tensor(rng, m, n);
      auto row = random_tensor(rng, 1, n);
      double err = check_scalar({{"x", x}, {"row", row}}, [&](Tape<double>& t) {
        return t.mean(t.sigmoid(t.add_rows(x, row)));
      });
      CHECK(err < 1e-6);
      ++cases;
    }
    {
      auto x = random_tensor(rng, m, n, 0.1, 3.0);  // positive domain for log
      double err = check_scalar({{"x", x}}, [&](Tape<double>& t) {
        return t.sum(t.log(x));
      });
      CHECK(err < 1e-6);
      ++cases;
    }
    {
      auto x = random_tensor(rng, m, n);
      double err = check_scalar({{"x", x}}, [&](Tape<double>& t) {
        return t.sum(t.square(t.scale(x, 0.37)));
      });
      CHECK(err < 1e-6);
      ++cases;
    }
    {
      auto x = random_tensor(rng, m, n);
      std::size_t j = rng.uniform_index(x.numel());
      double err = check_scalar({{"x", x}}, [&](Tape<double>& t) {
        return t.pick(t.softmax_rows(x), j);
      });
      CHECK(err < 1e-6);
      ++cases;
    }
    {
      auto x = random_tensor(rng, m, n);
      std::size_t j = rng.uniform_index(x.numel());
      double err = check_scalar({{"x", x}}, [&](Tape<double>& t) {
        return t.scale(t.pick(t.log_softmax_rows(x), j), -1.0);
      });
      CHECK(err < 1e-6);
      ++cases;
    }
    {
      auto x = random_tensor(rng, m, n);
      double err = check_scalar({{"x", x}}, [&](Tape<double>& t) {
        return t.sum(t.transpose(x));
      });
      CHECK(err < 1e-6);
      ++cases;
    }
    {
      auto a = random_tensor(rng, m, n);
      auto b = random_tensor(rng, m, n);
      double err = check_scalar({{"a", a}, {"b", b}}, [&](Tape<double>& t) {
        return t.sum(t.tanh(t.concat(a, b, 1)));
      });
      CHECK(err < 1e-6);
      ++cases;
    }
    {
      auto table = random_tensor(rng, m + 2, n);
      int row = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(m + 2)));
      double err = check_scalar({{"table", table}}, [&](Tape<double>& t) {
        return t.sum(t.square(t.embed_row(table, row)));
      });
      CHECK(err < 1e-6);
      ++cases;
    }
    {
      auto x = random_tensor(rng, m, n);
      auto s = Tensor<double>::from_values({1, 1}, {rng.uniform(0.5, 2.0)}, true);
      double err = check_scalar({{"x", x}, {"s", s}}, [&](Tape<double>& t) {
        return t.sum(t.square(t.div_by_scalar(x, s)));
      });
      CHECK(err < 1e-6);
      ++cases;
    }
  }
  CHECK(cases >= 100);
}

TEST_CASE("repeated backward passes are bitwise deterministic") {
  Rng rng(derive_seed(99, 5));
  auto a = random_tensor(rng, 3, 3);
  auto b = random_tensor(rng, 3, 3);
  auto run = [&]() {
    Tape<double> tape;
    auto y = tape.sum(tape.tanh(tape.matmul(a, b)));
    tape.backward(y);
    auto r = a.grad();
    auto r2 = b.grad();
    r.insert(r.end(), r2.begin(), r2.end());
    return r;
  };
  auto g1 = run();
  auto g2 = run();
  CHECK(g1 == g2);  // exact equality, not approximate
}

TEST_CASE("untouched parameters still receive a zero gradient") {
  Tape<double> tape;
  auto used = Tensor<double>::from_values({1, 2}, {1.0, 2.0}, true);
  auto unused = Tensor<double>::from_values({1, 2}, {3.0, 4.0}, true);
  // `unused` flows into a recorded op whose output is not part of the loss.
  auto dead = tape.tanh(unused);
  (void)dead;
  auto loss = tape.sum(used);
  tape.backward(loss);
  CHECK(used.grad() == std::vector<double>{1.0, 1.0});
  REQUIRE(unused.has_grad());
  CHECK(unused.grad() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("backward rejects non-scalar losses and foreign tensors") {
  Tape<double> tape;
  auto x = Tensor<double>::from_values({1, 2}, {1.0, 2.0}, true);
  auto y = tape.tanh(x);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);

  auto stray = Tensor<double>::scalar(1.0);
  CHECK_THROWS_AS(tape.backward(stray), std::logic_error);
}

TEST_CASE("non-finite primitive outputs raise a numeric error naming the op") {
  Tape<double> tape;
  auto x = Tensor<double>::from_values({1, 1}, {-1.0});
  try {
    tape.log(x);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("log") != std::string::npos);
  }
  CHECK_THROWS_AS(tape.div_by_scalar(x, Tensor<double>::scalar(0.0)), NumericError);
}

TEST_CASE("non-recording tapes compute values but keep no records") {
  Tape<double> tape(false);
  auto x = Tensor<double>::from_values({1, 2}, {0.0, 0.0}, true);
  auto y = tape.softmax_rows(x);
  CHECK(y.values()[0] == doctest::Approx(0.5));
  CHECK(tape.size() == 0);
  CHECK_THROWS_AS(tape.backward(tape.sum(y)), std::logic_error);
}

TEST_CASE("ops over untracked tensors stay off the tape") {
  Tape<double> tape;
  auto plain = Tensor<double>::from_values({1, 2}, {1.0, 2.0});  // no requires_grad
  tape.tanh(plain);
  CHECK(tape.size() == 0);
  auto tracked = Tensor<double>::from_values({1, 2}, {1.0, 2.0}, true);
  tape.tanh(tracked);
  CHECK(tape.size() == 1);
}
