#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "smc/model.hpp"

using namespace smc;

namespace {

std::vector<double> randn(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// One GRU direction, straight from the gate equations.
std::vector<double> gru_oracle(const std::vector<double>& x, std::size_t T, std::size_t I, std::size_t H,
                               const std::vector<double>& wi, const std::vector<double>& wh,
                               const std::vector<double>& bi, const std::vector<double>& bh, bool reverse) {
  std::vector<double> out(T * H), h(H, 0.0);
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    std::vector<double> gi(3 * H), gh(3 * H);
    for (std::size_t j = 0; j < 3 * H; ++j) {
      gi[j] = bi[j];
      gh[j] = bh[j];
      for (std::size_t k = 0; k < I; ++k) gi[j] += x[t * I + k] * wi[k * 3 * H + j];
      for (std::size_t k = 0; k < H; ++k) gh[j] += h[k] * wh[k * 3 * H + j];
    }
    std::vector<double> next(H);
    for (std::size_t j = 0; j < H; ++j) {
      const double r = sig(gi[j] + gh[j]);
      const double z = sig(gi[H + j] + gh[H + j]);
      const double n = std::tanh(gi[2 * H + j] + r * gh[2 * H + j]);
      next[j] = (1 - z) * n + z * h[j];
    }
    h = next;
    for (std::size_t j = 0; j < H; ++j) out[t * H + j] = h[j];
  }
  return out;
}

ModelConfig small_model() {
  ModelConfig cfg;
  cfg.num_classes = 3;
  cfg.freq_bins = 8;
  cfg.conv2d_channels = {4};
  cfg.conv2d_time_pool = {2};
  cfg.conv2d_freq_pool = {2};
  cfg.conv1d_channels = {5};
  cfg.rnn_hidden = 4;
  cfg.smc.filter_lengths = {1, 3, 5};
  return cfg;
}

}  // namespace

TEST_CASE("GRU layer matches the gate equations in both directions") {
  std::mt19937_64 rng(31);
  const std::size_t T = 7, I = 3, H = 4;
  const auto x = randn(T * I, rng), wi = randn(I * 3 * H, rng, 0.5), wh = randn(H * 3 * H, rng, 0.5),
             bi = randn(3 * H, rng, 0.1), bh = randn(3 * H, rng, 0.1);
  for (bool reverse : {false, true}) {
    ad::Tape tape;
    const auto y = gru_layer(tape, ad::Tensor({T, I}, x), ad::Tensor({I, 3 * H}, wi), ad::Tensor({H, 3 * H}, wh),
                             ad::Tensor({3 * H}, bi), ad::Tensor({3 * H}, bh), reverse);
    const auto expect = gru_oracle(x, T, I, H, wi, wh, bi, bh, reverse);
    REQUIRE(y.shape() == ad::Shape{T, H});
    for (std::size_t i = 0; i < T * H; ++i) CHECK(y[i] == doctest::Approx(expect[i]).epsilon(1e-13));
  }
}

TEST_CASE("linear softmax pooling") {
  ad::Tape tape;
  const auto y = linear_softmax_pool(tape, ad::Tensor({3, 2}, {0.1, 0.9, 0.2, 0.9, 0.3, 0.0}));
  CHECK(y[0] == doctest::Approx((0.01 + 0.04 + 0.09) / (0.6 + 1e-8)));
  CHECK(y[1] == doctest::Approx(0.9).epsilon(1e-7));  // y^2 / y of equal frames
  const auto zero = linear_softmax_pool(tape, ad::Tensor({2, 1}, {0.0, 0.0}));
  CHECK(zero[0] == 0.0);
}

TEST_CASE("sed loss is frame BCE plus weighted clip BCE") {
  ad::Tape tape;
  const ad::Tensor sp({2, 1}, {0.8, 0.3}), sr({2, 1}, {1.0, 0.0}), wp({1}, {0.6}), wr({1}, {1.0});
  const double strong = -(std::log(0.8) + std::log(0.7)) / 2;
  const double weak = -std::log(0.6);
  CHECK(sed_loss(tape, sp, sr, wp, wr, 0.5).item() == doctest::Approx(strong + 0.5 * weak).epsilon(1e-13));
  CHECK(sed_loss(tape, sp, sr, wp, wr, 0.0).item() == doctest::Approx(strong).epsilon(1e-13));
  // saturated predictions stay finite
  const ad::Tensor hard({1, 1}, {1.0}), miss({1, 1}, {0.0});
  CHECK(std::isfinite(sed_loss(tape, hard, miss, ad::Tensor({1}, {1.0}), ad::Tensor({1}, {0.0})).item()));
}

TEST_CASE("placements decide where the SMC parameters live") {
  auto cfg = small_model();
  const auto names = [](const ModelParams& p) {
    std::vector<std::string> n;
    for (const auto& e : p.entries) n.push_back(e.name);
    return n;
  };
  auto index_of = [&](const ModelParams& p, const std::string& name) {
    const auto n = names(p);
    return std::find(n.begin(), n.end(), name) - n.begin();
  };
  const auto cnn = init_params(cfg, 1);
  CHECK(index_of(cnn, "smc.weights") < index_of(cnn, "gru.0.fwd.w_input"));
  CHECK(cnn.get("smc.weights").shape() == ad::Shape{3});
  cfg.smc_placement = SMCPlacement::after_rnn;
  const auto rnn = init_params(cfg, 1);
  CHECK(index_of(rnn, "smc.weights") > index_of(rnn, "gru.0.bwd.b_hidden"));
  cfg.smc_placement = SMCPlacement::probabilities_per_class;
  CHECK(init_params(cfg, 1).get("smc.weights").shape() == ad::Shape{3, 3});
  cfg.smc_placement = SMCPlacement::none;
  CHECK_FALSE(init_params(cfg, 1).contains("smc.weights"));
  CHECK(parse_placement(to_string(SMCPlacement::probabilities_global)) == SMCPlacement::probabilities_global);
  CHECK_THROWS_AS(parse_placement("middle"), Error);
}

TEST_CASE("forward shapes and value ranges for every placement") {
  std::mt19937_64 rng(32);
  for (auto placement : {SMCPlacement::none, SMCPlacement::after_cnn, SMCPlacement::after_rnn,
                         SMCPlacement::probabilities_global, SMCPlacement::probabilities_per_class}) {
    auto cfg = small_model();
    cfg.smc_placement = placement;
    const auto params = init_params(cfg, 3);
    ad::Tape tape;
    const auto out = model_forward(tape, ad::Tensor({16, 8}, randn(128, rng)), params, cfg);
    CHECK(out.strong.shape() == ad::Shape{8, 3});
    CHECK(out.weak.shape() == ad::Shape{3});
    for (double v : out.strong.data()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
  auto cfg = small_model();
  ad::Tape tape;
  CHECK_THROWS_AS(model_forward(tape, ad::Tensor({1, 8}, std::vector<double>(8)), init_params(cfg, 1), cfg), Error);
  CHECK_THROWS_AS(model_forward(tape, ad::Tensor({16, 7}, std::vector<double>(112)), init_params(cfg, 1), cfg), Error);
}

TEST_CASE("initialization is deterministic in the seed") {
  const auto cfg = small_model();
  const auto a = init_params(cfg, 5), b = init_params(cfg, 5), c = init_params(cfg, 6);
  CHECK(encode_checkpoint(a) == encode_checkpoint(b));
  CHECK(encode_checkpoint(a) != encode_checkpoint(c));
}

TEST_CASE("checkpoint round trip and corruption") {
  const auto cfg = small_model();
  const auto params = init_params(cfg, 7);
  const auto bytes = encode_checkpoint(params);
  const auto back = decode_checkpoint(bytes);
  check_params(back, cfg);
  CHECK(encode_checkpoint(back) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "smc_test_checkpoint.smcm";
  save_checkpoint(params, path);
  CHECK(encode_checkpoint(load_checkpoint(path)) == bytes);
  std::filesystem::remove(path);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), Error);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), Error);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/checkpoint.smcm"), Error);

  auto other = cfg;
  other.rnn_hidden = 5;
  CHECK_THROWS_AS(check_params(back, other), Error);
}

TEST_CASE("sizes derived from the config") {
  ModelConfig cfg;
  CHECK(cfg.time_pool_factor() == 4);
  CHECK(cfg.output_frames(128) == 32);
  CHECK(cfg.smc_channels() == 8);
  cfg.smc_placement = SMCPlacement::after_rnn;
  CHECK(cfg.smc_channels() == 32);
  cfg.smc_placement = SMCPlacement::probabilities_per_class;
  CHECK(cfg.effective_smc().weight_sharing == WeightSharing::per_channel);
  cfg.conv2d_kernel = 4;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
