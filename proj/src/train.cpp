#include "smc/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace smc {

void TrainHyper::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail(ErrorCode::invalid_argument, "train: lr must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail(ErrorCode::invalid_argument, "train: momentum must be in [0, 1)");
  if (batch == 0) fail(ErrorCode::invalid_argument, "train: batch must be positive");
  if (!(weak_weight >= 0.0) || !std::isfinite(weak_weight)) {
    fail(ErrorCode::invalid_argument, "train: weak_weight must be finite and >= 0");
  }
}

ModelParams frozen(const ModelParams& params) {
  ModelParams out;
  for (const auto& e : params.entries) out.entries.push_back({e.name, e.tensor.detach()});
  return out;
}

ClipTargets clip_targets(const Clip& clip, const Dataset& dataset, const ModelConfig& cfg) {
  const std::size_t frames = clip.features.extent(0);
  if (cfg.time_pool_factor() != dataset.label_frames) {
    fail(ErrorCode::invalid_argument, "model time pooling (" + std::to_string(cfg.time_pool_factor()) +
                                          ") must equal the dataset label_frames (" +
                                          std::to_string(dataset.label_frames) + ")");
  }
  const std::size_t out_frames = cfg.output_frames(frames);
  const auto m = strong_targets(clip, out_frames, dataset.label_hop(), dataset.class_labels);
  std::vector<double> strong(m.values.begin(), m.values.end());
  std::vector<double> weak(m.classes, 0.0);
  for (const auto& tag : clip.tags) {
    const auto it = std::find(dataset.class_labels.begin(), dataset.class_labels.end(), tag);
    if (it == dataset.class_labels.end()) fail(ErrorCode::format, clip.id + ": unknown tag '" + tag + "'");
    weak[static_cast<std::size_t>(it - dataset.class_labels.begin())] = 1.0;
  }
  return {ad::Tensor({m.frames, m.classes}, std::move(strong)), ad::Tensor({m.classes}, std::move(weak))};
}

namespace {

double loss_with(ad::Tape& tape, const Clip& clip, const ClipTargets& targets, const ModelParams& params,
                 const ModelConfig& cfg, double weak_weight, bool backward) {
  const auto out = model_forward(tape, clip.features, params, cfg);
  const auto loss = sed_loss(tape, out.strong, targets.strong, out.weak, targets.weak, weak_weight);
  if (backward) tape.backward(loss);
  return loss.item();
}

}  // namespace

double clip_loss(const Clip& clip, const Dataset& dataset, const ModelParams& params, const ModelConfig& cfg,
                 double weak_weight) {
  ad::Tape tape;
  return loss_with(tape, clip, clip_targets(clip, dataset, cfg), frozen(params), cfg, weak_weight, false);
}

double split_loss(const Split& split, const Dataset& dataset, const ModelParams& params, const ModelConfig& cfg,
                  double weak_weight) {
  if (split.clips.empty()) fail(ErrorCode::invalid_argument, "split '" + split.name + "' has no clips");
  const auto fixed = frozen(params);
  double total = 0.0;
  for (const auto& clip : split.clips) {
    ad::Tape tape;
    total += loss_with(tape, clip, clip_targets(clip, dataset, cfg), fixed, cfg, weak_weight, false);
  }
  return total / static_cast<double>(split.clips.size());
}

TrainResult train(const Dataset& dataset, const ModelConfig& cfg, const TrainHyper& hyper,
                  const ModelParams* initial, const EpochCallback& on_epoch) {
  cfg.validate();
  hyper.validate();
  const auto& clips = dataset.train.clips;
  if (clips.empty()) fail(ErrorCode::invalid_argument, "train: the train split is empty");

  TrainResult result;
  if (initial) {
    check_params(*initial, cfg);
    result.params = initial->clone();
  } else {
    result.params = init_params(cfg, hyper.seed);
  }
  auto& params = result.params;

  std::vector<ClipTargets> targets;
  targets.reserve(clips.size());
  for (const auto& clip : clips) targets.push_back(clip_targets(clip, dataset, cfg));

  result.loss_curve.push_back(split_loss(dataset.train, dataset, params, cfg, hyper.weak_weight));

  std::vector<std::vector<double>> velocity;
  for (const auto& e : params.entries) velocity.emplace_back(e.tensor.numel(), 0.0);

  std::vector<std::size_t> order(clips.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(hyper.seed ^ 0x5eedf00dULL);

  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
      const std::size_t stop = std::min(order.size(), start + hyper.batch);
      params.zero_grads();
      for (std::size_t i = start; i < stop; ++i) {
        ad::Tape tape({.check_finite = false, .track_branches = false});
        const auto k = order[i];
        epoch_loss += loss_with(tape, clips[k], targets[k], params, cfg, hyper.weak_weight, true);
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (std::size_t p = 0; p < params.entries.size(); ++p) {
        auto& t = params.entries[p].tensor;
        if (!t.has_grad()) continue;
        const auto g = t.grad();
        auto v = t.mutable_data();
        auto& vel = velocity[p];
        for (std::size_t j = 0; j < v.size(); ++j) {
          vel[j] = hyper.momentum * vel[j] + g[j] * scale;
          v[j] -= hyper.lr * vel[j];
        }
      }
    }
    const double mean = epoch_loss / static_cast<double>(clips.size());
    if (!std::isfinite(mean)) {
      fail(ErrorCode::non_finite, "train: loss became non-finite in epoch " + std::to_string(epoch) +
                                      " (try a smaller lr)");
    }
    result.loss_curve.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  params.zero_grads();
  return result;
}

std::vector<ClipPrediction> predict(const Split& split, const ModelParams& params, const ModelConfig& cfg) {
  const auto fixed = frozen(params);
  std::vector<ClipPrediction> out;
  out.reserve(split.clips.size());
  for (const auto& clip : split.clips) {
    ad::Tape tape;
    const auto res = model_forward(tape, clip.features, fixed, cfg);
    const auto values = res.strong.data();
    out.push_back({clip.id, {res.strong.extent(0), res.strong.extent(1), {values.begin(), values.end()}}});
  }
  return out;
}

}  // namespace smc
