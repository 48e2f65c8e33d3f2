#include "doctest.h"

#include <cmath>
#include <random>

#include "smc/autodiff.hpp"
#include "smc/gradcheck.hpp"

using namespace smc;
using namespace smc::ad;

namespace {

std::vector<double> randn(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

Tensor leaf(Shape shape, std::mt19937_64& rng) {
  const auto n = numel(shape);
  return Tensor(std::move(shape), randn(n, rng), true);
}

}  // namespace

TEST_CASE("elementwise forward values") {
  Tape tape;
  const auto a = Tensor::vector({1.0, -2.0, 3.0}, true);
  const auto b = Tensor::vector({4.0, 5.0, -6.0}, true);
  CHECK(add(tape, a, b)[1] == 3.0);
  CHECK(sub(tape, a, b)[2] == 9.0);
  CHECK(mul(tape, a, b)[0] == 4.0);
  CHECK(div(tape, a, b)[2] == doctest::Approx(-0.5));
  CHECK(relu(tape, a)[1] == 0.0);
  CHECK(clamp(tape, b, 0.0, 4.5)[1] == 4.5);
  CHECK(sigmoid(tape, Tensor::scalar(0.0, true)).item() == 0.5);
}

TEST_CASE("product rule through the tape") {
  // f(x) = sum(x^2 * sigmoid(x)); df/dx = 2x s + x^2 s (1 - s)
  Tape tape;
  auto x = Tensor::vector({-1.5, 0.25, 2.0}, true);
  const auto f = sum_all(tape, mul(tape, square(tape, x), sigmoid(tape, x)));
  tape.backward(f);
  for (std::size_t i = 0; i < 3; ++i) {
    const double v = x[i], s = 1.0 / (1.0 + std::exp(-v));
    CHECK(x.grad()[i] == doctest::Approx(2 * v * s + v * v * s * (1 - s)).epsilon(1e-12));
  }
}

TEST_CASE("matmul matches the triple loop and its gradient identity") {
  std::mt19937_64 rng(1);
  auto a = leaf({3, 4}, rng), b = leaf({4, 2}, rng);
  Tape tape;
  const auto c = matmul(tape, a, b);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += a[i * 4 + k] * b[k * 2 + j];
      CHECK(c[i * 2 + j] == doctest::Approx(s).epsilon(1e-14));
    }
  // d sum(C) / dA[i,k] = sum_j B[k,j]
  tape.backward(sum_all(tape, c));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) CHECK(a.grad()[i * 4 + k] == doctest::Approx(b[k * 2] + b[k * 2 + 1]));
}

TEST_CASE("conv1d matches a direct loop with zero padding and stride") {
  std::mt19937_64 rng(2);
  const std::size_t T = 9, Ci = 2, Co = 3, K = 3;
  auto x = leaf({T, Ci}, rng), w = leaf({K, Ci, Co}, rng);
  for (std::size_t stride : {1u, 2u}) {
    Tape tape;
    const auto y = conv1d(tape, x, w, {stride, 1});
    const std::size_t To = (T + 2 - K) / stride + 1;
    REQUIRE(y.shape() == Shape{To, Co});
    for (std::size_t t = 0; t < To; ++t)
      for (std::size_t o = 0; o < Co; ++o) {
        double s = 0;
        for (std::size_t k = 0; k < K; ++k) {
          const long src = static_cast<long>(t * stride + k) - 1;
          if (src < 0 || src >= static_cast<long>(T)) continue;
          for (std::size_t c = 0; c < Ci; ++c) s += x[src * Ci + c] * w[(k * Ci + c) * Co + o];
        }
        CHECK(y[t * Co + o] == doctest::Approx(s).epsilon(1e-13));
      }
  }
}

TEST_CASE("conv2d matches a direct loop") {
  std::mt19937_64 rng(3);
  const std::size_t Ci = 2, H = 5, W = 6, Co = 3, KH = 3, KW = 3;
  auto x = leaf({Ci, H, W}, rng), w = leaf({Co, Ci, KH, KW}, rng);
  Tape tape;
  const auto y = conv2d(tape, x, w, {1, 2, 1, 1});
  const std::size_t Ho = H, Wo = (W + 2 - KW) / 2 + 1;
  REQUIRE(y.shape() == Shape{Co, Ho, Wo});
  for (std::size_t o = 0; o < Co; ++o)
    for (std::size_t i = 0; i < Ho; ++i)
      for (std::size_t j = 0; j < Wo; ++j) {
        double s = 0;
        for (std::size_t c = 0; c < Ci; ++c)
          for (std::size_t u = 0; u < KH; ++u)
            for (std::size_t v = 0; v < KW; ++v) {
              const long r = static_cast<long>(i + u) - 1, q = static_cast<long>(j * 2 + v) - 1;
              if (r < 0 || q < 0 || r >= static_cast<long>(H) || q >= static_cast<long>(W)) continue;
              s += x[(c * H + r) * W + q] * w[((o * Ci + c) * KH + u) * KW + v];
            }
        CHECK(y[(o * Ho + i) * Wo + j] == doctest::Approx(s).epsilon(1e-13));
      }
}

TEST_CASE("max_pool2d picks window maxima and routes the gradient to them") {
  Tape tape;
  auto x = Tensor({1, 2, 5}, {1, 9, 3, 4, 7,  //
                              2, 0, 8, 5, 6},
                  true);
  const auto y = max_pool2d(tape, x, 2, 2);
  REQUIRE(y.shape() == Shape{1, 1, 2});  // trailing column dropped
  CHECK(y[0] == 9.0);
  CHECK(y[1] == 8.0);
  tape.backward(sum_all(tape, y));
  const std::vector<double> expect = {0, 1, 0, 0, 0, 0, 0, 1, 0, 0};
  for (std::size_t i = 0; i < 10; ++i) CHECK(x.grad()[i] == expect[i]);
}

TEST_CASE("add_bias broadcasts along the chosen axis") {
  Tape tape;
  auto x = Tensor({2, 3}, {0, 0, 0, 0, 0, 0}, true);
  auto b = Tensor::vector({1, 2, 3}, true);
  const auto y = add_bias(tape, x, b, 1);
  CHECK(y[4] == 2.0);
  tape.backward(sum_all(tape, y));
  for (double g : b.grad()) CHECK(g == 2.0);
  Tape t2;
  auto s = Tensor::vector({5.0}, true);
  CHECK(add_bias(t2, x, s, 0)[5] == 5.0);
  CHECK_THROWS_AS(add_bias(t2, x, Tensor::vector({1, 2, 3, 4}), 1), Error);
}

TEST_CASE("reductions, concat, gather and transpose") {
  Tape tape;
  auto x = Tensor({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  const auto s0 = sum(tape, x, 0);
  CHECK(s0.shape() == Shape{1, 3});
  CHECK(s0[2] == 9.0);
  CHECK(mean(tape, x, 1)[1] == 5.0);
  CHECK(mean_all(tape, x).item() == 3.5);
  const auto c = concat(tape, {x, x}, 1);
  CHECK(c.shape() == Shape{2, 6});
  CHECK(c[3] == 1.0);
  const auto t = transpose(tape, x);
  CHECK(t.shape() == Shape{3, 2});
  CHECK(t[1] == 4.0);
  const auto g = gather(tape, x, {5, 5, 0}, {3});
  tape.backward(sum_all(tape, g));
  CHECK(x.grad()[5] == 2.0);
  CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("gradients accumulate until cleared and a tape runs backward once") {
  auto x = Tensor::vector({2.0}, true);
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    tape.backward(sum_all(tape, square(tape, x)));
  }
  CHECK(x.grad()[0] == 8.0);
  x.zero_grad();
  Tape tape;
  const auto y = sum_all(tape, square(tape, x));
  tape.backward(y);
  CHECK(x.grad()[0] == 4.0);
  CHECK_THROWS_AS(tape.backward(y), Error);
}

TEST_CASE("a loss without a path to any leaf reports detached") {
  Tape tape;
  auto x = Tensor::vector({1.0}, true);
  (void)square(tape, x);
  const auto unrelated = Tensor::scalar(3.0);
  const auto rep = tape.backward(unrelated);
  CHECK(rep.detached);
}

TEST_CASE("inference without gradient-requiring inputs records nothing") {
  Tape tape;
  const auto x = Tensor::vector({1.0, 2.0});
  (void)relu(tape, add(tape, x, x));
  CHECK(tape.size() == 0);
}

TEST_CASE("non-finite inputs are rejected when checking") {
  Tape tape;
  auto x = Tensor::vector({std::nan("")}, true);
  CHECK_THROWS_AS(square(tape, x), Error);
  CHECK_THROWS_AS(log(tape, Tensor::vector({-1.0}, true)), Error);
}

TEST_CASE("shape mismatches are errors") {
  Tape tape;
  CHECK_THROWS_AS(add(tape, Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), Error);
  CHECK_THROWS_AS(matmul(tape, Tensor({2, 3}, std::vector<double>(6)), Tensor({2, 3}, std::vector<double>(6))),
                  Error);
  CHECK_THROWS_AS(reshape(tape, Tensor::vector({1, 2, 3}), {2, 2}), Error);
}

TEST_CASE("branch signature follows relu sign changes only") {
  auto run = [](double v) {
    Tape tape;
    (void)relu(tape, Tensor::vector({v, 1.0}, true));
    return tape.branch_signature();
  };
  CHECK(run(0.5) == run(0.7));
  CHECK(run(0.5) != run(-0.5));
}

TEST_CASE("gradcheck accepts a correct rule and rejects a wrong one") {
  std::mt19937_64 rng(5);
  const auto x = leaf({6}, rng);
  const auto good = gradcheck([](Tape& t, const Tensor& v) { return sum_all(t, tanh(t, v)); }, x);
  CHECK(good.pass);
  CHECK(good.max_rel_err < 1e-8);
  // Custom node whose backward is off by a factor of two.
  const auto bad = gradcheck(
      [](Tape& t, const Tensor& v) {
        std::vector<double> out(v.data().begin(), v.data().end());
        const auto y = t.record("double_wrong", {v}, v.shape(), out,
                                [](std::span<const double>, std::span<const double> g, std::span<std::vector<double>*> gi) {
                                  for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += 2.0 * g[i];
                                });
        return sum_all(t, y);
      },
      x);
  CHECK_FALSE(bad.pass);
  CHECK(bad.max_rel_err == doctest::Approx(0.5));
}

TEST_CASE("gradcheck skips probes that straddle a kink") {
  auto x = Tensor::vector({1e-5, 0.5}, true);
  const auto rep = gradcheck([](Tape& t, const Tensor& v) { return sum_all(t, relu(t, v)); }, x);
  CHECK(rep.pass);
  CHECK(rep.coords_skipped == 1);
  CHECK(rep.coords_checked == 1);
}
