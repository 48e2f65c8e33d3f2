#pragma once

// Soft-Median Choice block: a bank of soft-median filters of increasing
// lengths whose outputs y_i are mixed by a learnable linear choice,
//
//   z = sum_i w_i * y_i + b
//
// Filter lengths are hyperparameters; only the weights and bias learn.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "smc/autodiff.hpp"
#include "smc/median.hpp"

namespace smc {

enum class WeightSharing { shared_scalar, per_channel };
enum class InitScheme { he_uniform, xavier_uniform };

WeightSharing parse_weight_sharing(std::string_view name);
std::string_view to_string(WeightSharing sharing);
InitScheme parse_init_scheme(std::string_view name);
std::string_view to_string(InitScheme scheme);

struct SMCConfig {
  std::vector<std::size_t> filter_lengths = default_filter_lengths();
  double epsilon = 1e-4;
  PaddingPolicy padding = PaddingPolicy::reflect;
  WeightSharing weight_sharing = WeightSharing::shared_scalar;
  bool use_bias = true;
  // he_uniform: `init_gain` is the negative-slope parameter a, giving the
  // bound sqrt(2 / (1 + a^2)) * sqrt(3 / fan_in); a = sqrt(5) yields
  // 1 / sqrt(fan_in). xavier_uniform: `init_gain` multiplies
  // sqrt(6 / (fan_in + fan_out)).
  InitScheme init = InitScheme::he_uniform;
  double init_gain = 2.23606797749979;  // sqrt(5)

  // 1, 5, 9, ..., 57
  static std::vector<std::size_t> default_filter_lengths();
  void validate() const;
  std::size_t num_filters() const { return filter_lengths.size(); }
};

struct SMCParams {
  ad::Tensor weights;  // [N] shared, or [N x C] per channel
  ad::Tensor bias;     // [1] shared, or [C] per channel

  std::vector<ad::Tensor> tensors() const { return {weights, bias}; }
};

// Bound of the uniform weight initialization for fan-in N.
double smc_init_bound(const SMCConfig& cfg);

// Weights i.i.d. uniform on (-bound, bound); bias uniform on
// (-1/sqrt(N), 1/sqrt(N)). Deterministic in `seed`. `channels` only matters
// for per-channel sharing. Without bias the bias tensor is zero and does not
// require a gradient.
SMCParams smc_init(const SMCConfig& cfg, std::size_t channels, std::uint64_t seed);

// features [T x C] -> [T x C]. Each column is smoothed along time by every
// filter; the results are combined per the sharing mode.
ad::Tensor smc_forward(ad::Tape& tape, const ad::Tensor& features, const SMCParams& params, const SMCConfig& cfg);

}  // namespace smc
