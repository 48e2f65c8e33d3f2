#include "smc/smc_block.hpp"

#include <cmath>
#include <random>
#include <string>

namespace smc {

WeightSharing parse_weight_sharing(std::string_view name) {
  if (name == "shared_scalar") return WeightSharing::shared_scalar;
  if (name == "per_channel") return WeightSharing::per_channel;
  fail(ErrorCode::invalid_argument, "unknown weight sharing '" + std::string(name) + "' (expected shared_scalar|per_channel)");
}

std::string_view to_string(WeightSharing sharing) {
  return sharing == WeightSharing::shared_scalar ? "shared_scalar" : "per_channel";
}

InitScheme parse_init_scheme(std::string_view name) {
  if (name == "he_uniform") return InitScheme::he_uniform;
  if (name == "xavier_uniform") return InitScheme::xavier_uniform;
  fail(ErrorCode::invalid_argument, "unknown init scheme '" + std::string(name) + "' (expected he_uniform|xavier_uniform)");
}

std::string_view to_string(InitScheme scheme) {
  return scheme == InitScheme::he_uniform ? "he_uniform" : "xavier_uniform";
}

std::vector<std::size_t> SMCConfig::default_filter_lengths() {
  std::vector<std::size_t> lengths;
  for (std::size_t l = 1; l < 60; l += 4) lengths.push_back(l);
  return lengths;
}

void SMCConfig::validate() const {
  if (filter_lengths.empty()) fail(ErrorCode::invalid_argument, "smc: filter_lengths must not be empty");
  for (std::size_t i = 0; i < filter_lengths.size(); ++i) {
    if (filter_lengths[i] % 2 == 0) {
      fail(ErrorCode::invalid_argument, "smc: window length must be odd (got " + std::to_string(filter_lengths[i]) + ")");
    }
    if (i > 0 && filter_lengths[i] <= filter_lengths[i - 1]) {
      fail(ErrorCode::invalid_argument, "smc: filter_lengths must be strictly increasing");
    }
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail(ErrorCode::invalid_argument, "smc: epsilon must be positive");
  if (!(init_gain > 0.0) || !std::isfinite(init_gain)) fail(ErrorCode::invalid_argument, "smc: init_gain must be positive");
}

double smc_init_bound(const SMCConfig& cfg) {
  const auto fan_in = static_cast<double>(cfg.num_filters());
  if (cfg.init == InitScheme::he_uniform) {
    const double a = cfg.init_gain;
    return std::sqrt(2.0 / (1.0 + a * a)) * std::sqrt(3.0 / fan_in);
  }
  constexpr double fan_out = 1.0;
  return cfg.init_gain * std::sqrt(6.0 / (fan_in + fan_out));
}

SMCParams smc_init(const SMCConfig& cfg, std::size_t channels, std::uint64_t seed) {
  cfg.validate();
  if (channels == 0) fail(ErrorCode::invalid_argument, "smc: channels must be positive");
  const std::size_t n = cfg.num_filters();
  const bool shared = cfg.weight_sharing == WeightSharing::shared_scalar;
  const std::size_t width = shared ? 1 : channels;

  std::mt19937_64 rng(seed);
  const double wb = smc_init_bound(cfg);
  std::uniform_real_distribution<double> wdist(-wb, wb);
  std::vector<double> w(n * width);
  for (auto& v : w) v = wdist(rng);

  const double bb = 1.0 / std::sqrt(static_cast<double>(n));
  std::uniform_real_distribution<double> bdist(-bb, bb);
  std::vector<double> b(width, 0.0);
  if (cfg.use_bias)
    for (auto& v : b) v = bdist(rng);

  SMCParams params;
  params.weights = shared ? ad::Tensor({n}, std::move(w), true) : ad::Tensor({n, width}, std::move(w), true);
  params.bias = ad::Tensor({width}, std::move(b), cfg.use_bias);
  return params;
}

ad::Tensor smc_forward(ad::Tape& tape, const ad::Tensor& features, const SMCParams& params, const SMCConfig& cfg) {
  cfg.validate();
  if (features.rank() != 2) {
    fail(ErrorCode::shape_mismatch, "smc_forward: features must be [T x C], got " + ad::to_string(features.shape()));
  }
  const std::size_t T = features.extent(0), C = features.extent(1), N = cfg.num_filters();
  const bool shared = cfg.weight_sharing == WeightSharing::shared_scalar;
  const ad::Shape want_w = shared ? ad::Shape{N} : ad::Shape{N, C};
  const ad::Shape want_b = shared ? ad::Shape{1} : ad::Shape{C};
  if (params.weights.shape() != want_w || (cfg.use_bias && params.bias.shape() != want_b)) {
    fail(ErrorCode::shape_mismatch, "smc_forward: params " + ad::to_string(params.weights.shape()) + "/" +
                                        ad::to_string(params.bias.shape()) + " do not match config (expected " +
                                        ad::to_string(want_w) + "/" + ad::to_string(want_b) + ")");
  }

  auto bank = softmedian_bank(tape, features, cfg.filter_lengths, cfg.epsilon, cfg.padding);
  auto stack = ad::reshape(tape, bank, {N, T * C});

  ad::Tensor z;
  if (shared) {
    z = ad::matmul(tape, ad::reshape(tape, params.weights, {1, N}), stack);
    z = ad::reshape(tape, z, {T, C});
  } else {
    auto stack3 = ad::reshape(tape, stack, {N, T, C});
    auto w = ad::broadcast(tape, ad::reshape(tape, params.weights, {N, 1, C}), {N, T, C});
    z = ad::reshape(tape, ad::sum(tape, ad::mul(tape, stack3, w), 0), {T, C});
  }
  if (!cfg.use_bias) return z;
  return ad::add_bias(tape, z, params.bias, 1);
}

}  // namespace smc
