#pragma once

// Evaluation-time post-processing of posteriograms: per-class thresholding
// followed by hard median filtering. The global variant fixes the threshold
// at 0.5 and the window at 0.45 s; the class-dependent variant grid-searches
// both per class on a validation split.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "smc/metrics.hpp"

namespace smc {

// Row-major [frames x classes] probabilities.
struct Posteriogram {
  std::size_t frames = 0;
  std::size_t classes = 0;
  std::vector<double> values;

  double at(std::size_t t, std::size_t c) const { return values[t * classes + c]; }
};

struct PostprocParams {
  std::vector<double> thresholds;         // per class, in (0, 1)
  std::vector<std::size_t> filter_sizes;  // per class, odd
  double hop_seconds = 0.064;

  void validate(std::size_t classes) const;
  static PostprocParams uniform(std::size_t classes, double threshold, std::size_t filter_size, double hop_seconds);
};

// out[t, c] = probs[t, c] >= thresholds[c]
BinaryMatrix threshold_probs(const Posteriogram& probs, std::span<const double> thresholds);

// Per-class hard median filter (reflect padding). Stays binary.
BinaryMatrix median_postfilter(const BinaryMatrix& activity, std::span<const std::size_t> filter_sizes);

BinaryMatrix apply_postproc(const Posteriogram& probs, const PostprocParams& params);

// Nearest odd integer to 0.45 / hop, at least 1.
std::size_t gpp_window(double hop_seconds);
PostprocParams gpp_params(std::size_t classes, double hop_seconds);
BinaryMatrix gpp(const Posteriogram& probs, double hop_seconds);

struct ClipPrediction {
  std::string filename;
  Posteriogram probs;
};

struct CdppGrid {
  std::vector<double> thresholds = default_thresholds();
  std::vector<std::size_t> filter_sizes = default_filter_sizes();

  static std::vector<double> default_thresholds();         // 0.1, 0.2, ..., 0.9
  static std::vector<std::size_t> default_filter_sizes();  // 1, 3, ..., 61
};

struct CdppResult {
  PostprocParams params;
  std::vector<double> class_f1;         // best validation F1 per class
  std::vector<bool> fallback;           // class had no reference events
};

// Scores one class on the validation clips under a single (threshold, size)
// pair; other classes are ignored.
ClassScores score_class(std::span<const ClipPrediction> clips, const EventList& reference, std::size_t class_index,
                        std::span<const std::string> class_labels, double threshold, std::size_t filter_size,
                        double hop_seconds, const Collars& collars);

// Exhaustive per-class search over the grid. Ties keep the smaller filter
// size, then the smaller threshold. Classes without reference events get
// (0.5, 1).
CdppResult cdpp_search(std::span<const ClipPrediction> clips, const EventList& reference,
                       std::span<const std::string> class_labels, double hop_seconds, const CdppGrid& grid = {},
                       const Collars& collars = {});

// Plain-text table, one line per class: label<TAB>threshold<TAB>filter_size.
void write_postproc_params(const std::filesystem::path& path, const PostprocParams& params,
                           std::span<const std::string> class_labels);
PostprocParams read_postproc_params(const std::filesystem::path& path, std::span<const std::string> class_labels,
                                    double hop_seconds);

}  // namespace smc
