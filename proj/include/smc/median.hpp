#pragma once

// Hard (arg-)median filtering and its differentiable soft-median relaxation.
//
// The soft-median of a window x_1..x_L with exact median m weights each
// element by the normalized inverse squared distance to the median:
//
//   W_k = [(x_k - m)^2 + eps]^-1 / sum_j [(x_j - m)^2 + eps]^-1
//   y   = sum_k W_k x_k
//
// Weights are normalized before they multiply the values. As eps -> 0 the
// weight mass concentrates on the median element.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "smc/autodiff.hpp"

namespace smc {

// reflect mirrors about the edge sample without repeating it (d c b | a b c d | c b a);
// replicate repeats the edge sample.
enum class PaddingPolicy { reflect, replicate };

PaddingPolicy parse_padding(std::string_view name);
std::string_view to_string(PaddingPolicy policy);

struct MedianWindowConfig {
  std::size_t length = 1;
  double epsilon = 1e-4;
  PaddingPolicy padding = PaddingPolicy::reflect;

  void validate() const;
};

// Source index for every position of the padded sequence: entry j maps padded
// position j (covering original positions j - L/2) back into [0, T).
std::vector<std::size_t> padded_source_indices(std::size_t frames, std::size_t length, PaddingPolicy policy);

// Exact median of every centered window. Not differentiable.
std::vector<double> argmedian_filter(std::span<const double> x, const MedianWindowConfig& cfg);

// Plain-value soft-median of one window.
double softmedian_window(std::span<const double> window, double epsilon);

// The weights W_k for one window, in window order.
std::vector<double> softmedian_weights(std::span<const double> window, double epsilon);

// Tape-recorded soft-median of a single window (rank-1 tensor of odd length),
// returns a rank-0 tensor.
ad::Tensor softmedian_window(ad::Tape& tape, const ad::Tensor& window, double epsilon);

// Soft-median filter along axis 0 of a [T] or [T x C] tensor; each column is
// filtered independently. Built from autodiff primitives: the median of each
// window is located in the forward pass and enters the graph through a
// gather at that fixed index.
ad::Tensor softmedian_filter(ad::Tape& tape, const ad::Tensor& x, const MedianWindowConfig& cfg);

// A bank of soft-median filters over the same input, recorded as one node
// with a hand-written backward: out[f] equals softmedian_filter(x, lengths[f])
// in value and gradient. x [T] or [T x C] -> [N x T x C] (C = 1 for rank 1).
// This is the route the SMC block uses; softmedian_filter is its reference.
ad::Tensor softmedian_bank(ad::Tape& tape, const ad::Tensor& x, std::span<const std::size_t> lengths, double epsilon,
                           PaddingPolicy padding);

}  // namespace smc
