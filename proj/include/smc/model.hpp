#pragma once

// CRNN-shaped sound event detector with a Soft-Median Choice block:
//
//   features [T x F]
//     -> conv2d stack (same padding, ReLU, max pool over time/frequency)
//     -> conv1d stack along time (same padding, ReLU)
//     -> SMC block (default placement)
//     -> bidirectional GRU layers
//     -> linear + sigmoid            = strong prediction [T' x C]
//     -> linear softmax pooling      = weak prediction   [C]
//
// Checkpoints ("SMCM"): magic "SMCM", u32 version, u32 record count, then per
// record u32 name length, name bytes, u32 rank, rank x u32 extents and the
// values as little-endian float64. All integers are little-endian.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "smc/autodiff.hpp"
#include "smc/smc_block.hpp"

namespace smc {

enum class SMCPlacement { none, after_cnn, after_rnn, probabilities_global, probabilities_per_class };

SMCPlacement parse_placement(std::string_view name);
std::string_view to_string(SMCPlacement placement);

struct ModelConfig {
  std::size_t num_classes = 4;
  std::size_t freq_bins = 16;
  std::vector<std::size_t> conv2d_channels = {8, 8};
  std::vector<std::size_t> conv2d_time_pool = {2, 2};
  std::vector<std::size_t> conv2d_freq_pool = {4, 4};
  std::size_t conv2d_kernel = 3;
  std::vector<std::size_t> conv1d_channels = {8};
  std::size_t conv1d_kernel = 3;
  std::size_t rnn_layers = 1;
  std::size_t rnn_hidden = 16;  // per direction; the layer output is 2x this
  SMCConfig smc;
  SMCPlacement smc_placement = SMCPlacement::after_cnn;

  void validate() const;
  std::size_t time_pool_factor() const;
  std::size_t min_frames() const { return time_pool_factor(); }
  std::size_t output_frames(std::size_t input_frames) const;
  // Channel count the SMC block sees at its placement.
  std::size_t smc_channels() const;
  // SMC config with the sharing mode implied by the placement.
  SMCConfig effective_smc() const;
};

struct NamedTensor {
  std::string name;
  ad::Tensor tensor;
};

class ModelParams {
 public:
  std::vector<NamedTensor> entries;

  const ad::Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::vector<ad::Tensor> tensors() const;
  std::size_t total_size() const;
  void zero_grads();
  // Deep copy with fresh leaves.
  ModelParams clone() const;
};

// Uniform fan-in initialization everywhere (bound 1/sqrt(fan_in)); SMC
// weights follow the SMC init scheme. Deterministic in `seed`.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Checks names and shapes against the config.
void check_params(const ModelParams& params, const ModelConfig& cfg);

struct ModelOutput {
  ad::Tensor strong;  // [T' x C], values in (0, 1)
  ad::Tensor weak;    // [C]
};

ModelOutput model_forward(ad::Tape& tape, const ad::Tensor& features, const ModelParams& params,
                          const ModelConfig& cfg);

// One GRU direction over x [T x I] (gate order reset, update, new; PyTorch
// convention). w_input [I x 3H], w_hidden [H x 3H], biases [3H]. Recorded as
// a single tape node with a backpropagation-through-time rule.
ad::Tensor gru_layer(ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& w_input, const ad::Tensor& w_hidden,
                     const ad::Tensor& b_input, const ad::Tensor& b_hidden, bool reverse);

// Per class: sum_t y_t^2 / (sum_t y_t + 1e-8). strong [T x C] -> [C].
ad::Tensor linear_softmax_pool(ad::Tape& tape, const ad::Tensor& strong);

// Frame BCE + weak_weight * clip BCE, predictions clamped to [1e-7, 1 - 1e-7].
// Both terms are means over their elements.
ad::Tensor sed_loss(ad::Tape& tape, const ad::Tensor& strong_pred, const ad::Tensor& strong_ref,
                    const ad::Tensor& weak_pred, const ad::Tensor& weak_ref, double weak_weight = 1.0);

std::string encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(std::string_view bytes, const std::string& source = "checkpoint");
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace smc
