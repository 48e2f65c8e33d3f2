#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "smc/median.hpp"

using namespace smc;

TEST_CASE("padding index maps") {
  // reflect: d c b | a b c d | c b a
  const auto r = padded_source_indices(4, 7, PaddingPolicy::reflect);
  CHECK(r == std::vector<std::size_t>{3, 2, 1, 0, 1, 2, 3, 2, 1, 0});
  const auto p = padded_source_indices(4, 5, PaddingPolicy::replicate);
  CHECK(p == std::vector<std::size_t>{0, 0, 0, 1, 2, 3, 3, 3});
  // windows longer than the signal keep folding
  const auto longer = padded_source_indices(3, 11, PaddingPolicy::reflect);
  for (std::size_t j = 0; j < longer.size(); ++j) {
    CHECK(longer[j] == oracle::reflect_index(static_cast<long>(j) - 5, 3));
  }
}

TEST_CASE("argmedian filter hand cases") {
  const std::vector<double> x = {5, 1, 9, 2, 8};
  CHECK(argmedian_filter(x, {1}) == x);
  // reflect pads 1 | 5 1 9 2 8 | 2
  CHECK(argmedian_filter(x, {3, 1e-4, PaddingPolicy::reflect}) == std::vector<double>{1, 5, 2, 8, 2});
  // replicate pads 5 | 5 1 9 2 8 | 8
  CHECK(argmedian_filter(x, {3, 1e-4, PaddingPolicy::replicate}) == std::vector<double>{5, 5, 2, 8, 8});
  CHECK_THROWS_AS(argmedian_filter(x, {4}), Error);
  CHECK_THROWS_AS(argmedian_filter(std::vector<double>{}, {3}), Error);
}

TEST_CASE("argmedian filter equals the sorting oracle, including ties") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> small(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t T = 1 + rng() % 40;
    std::vector<double> x(T);
    for (auto& v : x) v = small(rng);  // many ties
    for (std::size_t L = 1; L <= 15; L += 2) {
      for (bool reflect : {true, false}) {
        const auto got = argmedian_filter(x, {L, 1e-4, reflect ? PaddingPolicy::reflect : PaddingPolicy::replicate});
        CHECK(got == oracle::median_filter(x, L, reflect));
      }
    }
  }
}

TEST_CASE("soft-median of a hand-sized window") {
  // weights of [1, 2, 100] about m = 2 with eps 0.01: 1/1.01, 1/0.01, 1/9604.01
  const double w1 = 1 / 1.01, w2 = 100.0, w3 = 1 / 9604.01;
  const double expect = (w1 * 1 + w2 * 2 + w3 * 100) / (w1 + w2 + w3);
  CHECK(softmedian_window(std::vector<double>{1, 2, 100}, 0.01) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(softmedian_window(std::vector<double>{1, 2, 100}, 0.01) == doctest::Approx(1.99030).epsilon(1e-5));
}

TEST_CASE("soft-median weights are normalized and peak at the median") {
  const std::vector<double> w = {0.3, -1.0, 2.5, 0.1, 0.9};
  const auto weights = softmedian_weights(w, 1e-3);
  double total = 0;
  for (double v : weights) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::max_element(weights.begin(), weights.end()) - weights.begin() == 0);
}

TEST_CASE("soft-median invariants") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const auto w = oracle::tie_free(7, rng);
    const double y = softmedian_window(w, 1e-3);
    CHECK(y >= *std::min_element(w.begin(), w.end()));
    CHECK(y <= *std::max_element(w.begin(), w.end()));
    // shift equivariance
    std::vector<double> shifted = w;
    for (auto& v : shifted) v += 3.0;
    CHECK(softmedian_window(shifted, 1e-3) == doctest::Approx(y + 3.0).epsilon(1e-12));
    // permutation invariance
    std::vector<double> perm = w;
    std::reverse(perm.begin(), perm.end());
    CHECK(softmedian_window(perm, 1e-3) == doctest::Approx(y).epsilon(1e-13));
  }
  // constant window
  CHECK(softmedian_window(std::vector<double>{4, 4, 4}, 1e-4) == doctest::Approx(4.0));
  CHECK_THROWS_AS(softmedian_window(std::vector<double>{1, 2}, 1e-4), Error);
  CHECK_THROWS_AS(softmedian_window(std::vector<double>{1, 2, 3}, 0.0), Error);
}

TEST_CASE("tape soft-median window equals the plain value") {
  const auto w = ad::Tensor::vector({1, 2, 100}, true);
  ad::Tape tape;
  CHECK(softmedian_window(tape, w, 0.01).item() == doctest::Approx(softmedian_window(w.data(), 0.01)));
}

TEST_CASE("soft-median filter equals the definition oracle") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t T = 1 + rng() % 30;
    const auto x = oracle::tie_free(T, rng);
    for (std::size_t L : {1u, 3u, 7u, 31u}) {
      for (bool reflect : {true, false}) {
        const MedianWindowConfig cfg{L, 1e-3, reflect ? PaddingPolicy::reflect : PaddingPolicy::replicate};
        ad::Tape tape;
        const auto y = softmedian_filter(tape, ad::Tensor({T}, x), cfg);
        const auto expect = oracle::soft_median_filter(x, L, 1e-3, reflect);
        for (std::size_t t = 0; t < T; ++t) CHECK(y[t] == doctest::Approx(expect[t]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("multi-column filtering treats columns independently") {
  std::mt19937_64 rng(14);
  const auto a = oracle::tie_free(12, rng), b = oracle::tie_free(12, rng);
  std::vector<double> both;
  for (std::size_t t = 0; t < 12; ++t) {
    both.push_back(a[t]);
    both.push_back(b[t]);
  }
  ad::Tape tape;
  const auto y = softmedian_filter(tape, ad::Tensor({12, 2}, both), {5, 1e-3});
  const auto ea = oracle::soft_median_filter(a, 5, 1e-3, true);
  const auto eb = oracle::soft_median_filter(b, 5, 1e-3, true);
  for (std::size_t t = 0; t < 12; ++t) {
    CHECK(y[2 * t] == doctest::Approx(ea[t]).epsilon(1e-12));
    CHECK(y[2 * t + 1] == doctest::Approx(eb[t]).epsilon(1e-12));
  }
}

TEST_CASE("filter bank equals separate filters in value and gradient") {
  std::mt19937_64 rng(15);
  const std::vector<std::size_t> lengths = {1, 5, 9, 13};
  std::normal_distribution<double> nd;
  for (auto padding : {PaddingPolicy::reflect, PaddingPolicy::replicate}) {
    const auto x = oracle::tie_free(20 * 3, rng);
    std::vector<double> g(lengths.size() * 60);
    for (auto& v : g) v = nd(rng);
    const ad::Tensor weights({lengths.size(), 20, 3}, g);

    auto xa = ad::Tensor({20, 3}, x, true);
    ad::Tape ta;
    const auto bank = softmedian_bank(ta, xa, lengths, 1e-3, padding);
    REQUIRE(bank.shape() == ad::Shape{lengths.size(), 20, 3});
    ta.backward(ad::sum_all(ta, ad::mul(ta, bank, weights)));

    auto xb = ad::Tensor({20, 3}, x, true);
    ad::Tape tb;
    std::vector<ad::Tensor> parts;
    for (auto L : lengths) {
      parts.push_back(ad::reshape(tb, softmedian_filter(tb, xb, {L, 1e-3, padding}), {1, 20, 3}));
    }
    const auto sep = ad::concat(tb, parts, 0);
    tb.backward(ad::sum_all(tb, ad::mul(tb, sep, weights)));

    for (std::size_t i = 0; i < bank.numel(); ++i) CHECK(bank[i] == doctest::Approx(sep[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < 60; ++i) CHECK(xa.grad()[i] == doctest::Approx(xb.grad()[i]).epsilon(1e-9));
  }
  ad::Tape tape;
  CHECK_THROWS_AS(softmedian_bank(tape, ad::Tensor({4}, {1, 2, 3, 4}), std::vector<std::size_t>{5, 3}, 1e-3,
                                  PaddingPolicy::reflect),
                  Error);
}

TEST_CASE("soft-median filter approaches the hard median as epsilon shrinks") {
  std::mt19937_64 rng(16);
  const auto x = oracle::tie_free(25, rng, 0.1);
  const auto hard = argmedian_filter(x, {9});
  double prev = 1e300;
  for (double eps : {1e-2, 1e-4, 1e-6, 1e-8}) {
    ad::Tape tape;
    const auto y = softmedian_filter(tape, ad::Tensor({25}, x), {9, eps});
    double worst = 0;
    for (std::size_t t = 0; t < 25; ++t) worst = std::max(worst, std::abs(y[t] - hard[t]));
    CHECK(worst <= prev);
    prev = worst;
  }
  CHECK(prev < 1e-5);
}
