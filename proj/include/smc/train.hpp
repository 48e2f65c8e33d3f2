#pragma once

// Mini-batch SGD over a split, plus inference helpers.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "smc/data.hpp"
#include "smc/model.hpp"
#include "smc/postproc.hpp"

namespace smc {

struct TrainHyper {
  double lr = 0.1;
  double momentum = 0.0;
  std::size_t epochs = 200;
  std::size_t batch = 8;
  std::uint64_t seed = 1;
  double weak_weight = 1.0;

  void validate() const;
};

struct TrainResult {
  ModelParams params;
  // [0] is the loss of the initial parameters over the whole split; entry e
  // (e >= 1) is the mean per-clip loss seen during epoch e.
  std::vector<double> loss_curve;
};

// Called after every epoch with (epoch, mean loss).
using EpochCallback = std::function<void(std::size_t, double)>;

// Targets for one clip at the model's output resolution.
struct ClipTargets {
  ad::Tensor strong;  // [frames x classes]
  ad::Tensor weak;    // [classes]
};
ClipTargets clip_targets(const Clip& clip, const Dataset& dataset, const ModelConfig& cfg);

double clip_loss(const Clip& clip, const Dataset& dataset, const ModelParams& params, const ModelConfig& cfg,
                 double weak_weight = 1.0);

// Mean clip loss over a split without recording gradients.
double split_loss(const Split& split, const Dataset& dataset, const ModelParams& params, const ModelConfig& cfg,
                  double weak_weight = 1.0);

// Parameters are initialized from hyper.seed unless `initial` is given.
TrainResult train(const Dataset& dataset, const ModelConfig& cfg, const TrainHyper& hyper,
                  const ModelParams* initial = nullptr, const EpochCallback& on_epoch = {});

// Strong predictions for every clip of a split.
std::vector<ClipPrediction> predict(const Split& split, const ModelParams& params, const ModelConfig& cfg);

// Copy whose tensors do not require gradients (forward passes stay off the tape).
ModelParams frozen(const ModelParams& params);

}  // namespace smc
