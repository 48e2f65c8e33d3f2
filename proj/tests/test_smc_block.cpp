#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "smc/smc_block.hpp"

using namespace smc;

namespace {

std::vector<double> column(const std::vector<double>& x, std::size_t C, std::size_t c) {
  std::vector<double> out;
  for (std::size_t t = 0; t < x.size() / C; ++t) out.push_back(x[t * C + c]);
  return out;
}

}  // namespace

TEST_CASE("default filter bank is 1, 5, ..., 57") {
  const auto l = SMCConfig::default_filter_lengths();
  REQUIRE(l.size() == 15);
  CHECK(l.front() == 1);
  CHECK(l.back() == 57);
}

TEST_CASE("config validation") {
  SMCConfig cfg;
  cfg.filter_lengths = {};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.filter_lengths = {3, 3};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.filter_lengths = {1, 4};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.filter_lengths = {1, 3};
  cfg.epsilon = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK_THROWS_AS(parse_weight_sharing("both"), Error);
  CHECK(parse_init_scheme(to_string(InitScheme::xavier_uniform)) == InitScheme::xavier_uniform);
}

TEST_CASE("shared forward equals the weighted sum of oracle filters") {
  std::mt19937_64 rng(21);
  SMCConfig cfg;
  cfg.filter_lengths = {1, 3, 7};
  cfg.epsilon = 1e-3;
  const std::size_t T = 16, C = 3;
  const auto x = oracle::tie_free(T * C, rng);
  const auto params = smc_init(cfg, C, 4);
  ad::Tape tape;
  const auto z = smc_forward(tape, ad::Tensor({T, C}, x), params, cfg);
  for (std::size_t c = 0; c < C; ++c) {
    const auto col = column(x, C, c);
    std::vector<double> expect(T, params.bias[0]);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto y = oracle::soft_median_filter(col, cfg.filter_lengths[i], 1e-3, true);
      for (std::size_t t = 0; t < T; ++t) expect[t] += params.weights[i] * y[t];
    }
    for (std::size_t t = 0; t < T; ++t) CHECK(z[t * C + c] == doctest::Approx(expect[t]).epsilon(1e-12));
  }
}

TEST_CASE("per-channel forward uses each channel's own weights") {
  std::mt19937_64 rng(22);
  SMCConfig cfg;
  cfg.filter_lengths = {1, 5};
  cfg.weight_sharing = WeightSharing::per_channel;
  const std::size_t T = 10, C = 2;
  const auto x = oracle::tie_free(T * C, rng);
  const auto params = smc_init(cfg, C, 9);
  REQUIRE(params.weights.shape() == ad::Shape{2, C});
  REQUIRE(params.bias.shape() == ad::Shape{C});
  ad::Tape tape;
  const auto z = smc_forward(tape, ad::Tensor({T, C}, x), params, cfg);
  for (std::size_t c = 0; c < C; ++c) {
    const auto col = column(x, C, c);
    const auto y5 = oracle::soft_median_filter(col, 5, cfg.epsilon, true);
    for (std::size_t t = 0; t < T; ++t) {
      const double expect = params.weights[c] * col[t] + params.weights[C + c] * y5[t] + params.bias[c];
      CHECK(z[t * C + c] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("all-length-1 bank is an affine map") {
  SMCConfig cfg;
  cfg.filter_lengths = {1};
  auto params = smc_init(cfg, 2, 1);
  params.weights.mutable_data()[0] = 1.5;
  params.bias.mutable_data()[0] = -0.25;
  ad::Tape tape;
  const auto z = smc_forward(tape, ad::Tensor({3, 2}, {1, 2, 3, 4, 5, 6}), params, cfg);
  for (std::size_t i = 0; i < 6; ++i) CHECK(z[i] == doctest::Approx(1.5 * (i + 1) - 0.25));
}

TEST_CASE("weight and bias gradients are the filter outputs and the element count") {
  std::mt19937_64 rng(23);
  SMCConfig cfg;
  cfg.filter_lengths = {1, 3, 5};
  const std::size_t T = 12, C = 2;
  const auto x = oracle::tie_free(T * C, rng);
  auto params = smc_init(cfg, C, 2);
  ad::Tape tape;
  tape.backward(ad::sum_all(tape, smc_forward(tape, ad::Tensor({T, C}, x, true), params, cfg)));
  for (std::size_t i = 0; i < 3; ++i) {
    double total = 0;
    for (std::size_t c = 0; c < C; ++c) {
      for (double v : oracle::soft_median_filter(column(x, C, c), cfg.filter_lengths[i], cfg.epsilon, true)) total += v;
    }
    CHECK(params.weights.grad()[i] == doctest::Approx(total).epsilon(1e-10));
  }
  CHECK(params.bias.grad()[0] == doctest::Approx(static_cast<double>(T * C)));
}

TEST_CASE("initialization bounds, determinism and bias switch") {
  SMCConfig cfg;
  const double bound = smc_init_bound(cfg);
  CHECK(bound == doctest::Approx(1.0 / std::sqrt(15.0)));  // negative slope sqrt(5)
  const auto a = smc_init(cfg, 4, 7), b = smc_init(cfg, 4, 7), c = smc_init(cfg, 4, 8);
  for (std::size_t i = 0; i < 15; ++i) {
    CHECK(std::abs(a.weights[i]) < bound);
    CHECK(a.weights[i] == b.weights[i]);
  }
  CHECK(a.weights[0] != c.weights[0]);
  cfg.init = InitScheme::xavier_uniform;
  cfg.init_gain = 1.0;
  CHECK(smc_init_bound(cfg) == doctest::Approx(std::sqrt(6.0 / 16.0)));
  cfg.use_bias = false;
  const auto nb = smc_init(cfg, 4, 1);
  CHECK(nb.bias[0] == 0.0);
  CHECK_FALSE(nb.bias.requires_grad());
}

TEST_CASE("shape errors") {
  SMCConfig cfg;
  const auto params = smc_init(cfg, 3, 1);
  ad::Tape tape;
  CHECK_THROWS_AS(smc_forward(tape, ad::Tensor({4}, {1, 2, 3, 4}), params, cfg), Error);
  cfg.filter_lengths = {1, 3};
  CHECK_THROWS_AS(smc_forward(tape, ad::Tensor({4, 3}, std::vector<double>(12)), params, cfg), Error);
}
