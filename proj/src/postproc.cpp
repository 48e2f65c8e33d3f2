#include "smc/postproc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "smc/error.hpp"
#include "smc/median.hpp"
#include "smc/text.hpp"

namespace smc {

namespace {

constexpr double kGlobalThreshold = 0.5;
constexpr double kGlobalWindowSeconds = 0.45;

void filter_column(const BinaryMatrix& in, BinaryMatrix& out, std::size_t c, std::size_t size,
                   std::vector<double>& column) {
  column.resize(in.frames);
  for (std::size_t t = 0; t < in.frames; ++t) column[t] = in.at(t, c);
  const auto filtered = argmedian_filter(column, MedianWindowConfig{size, 1.0, PaddingPolicy::reflect});
  for (std::size_t t = 0; t < in.frames; ++t) out.at(t, c) = filtered[t] > 0.5 ? 1 : 0;
}

}  // namespace

void PostprocParams::validate(std::size_t classes) const {
  if (thresholds.size() != classes || filter_sizes.size() != classes) {
    fail(ErrorCode::shape_mismatch, "postproc params cover " + std::to_string(thresholds.size()) + "/" +
                                        std::to_string(filter_sizes.size()) + " classes, expected " +
                                        std::to_string(classes));
  }
  for (double th : thresholds) {
    if (!(th > 0.0 && th < 1.0)) fail(ErrorCode::invalid_argument, "postproc threshold must lie in (0, 1)");
  }
  for (auto s : filter_sizes) {
    if (s == 0 || s % 2 == 0) {
      fail(ErrorCode::invalid_argument, "window length must be odd (got " + std::to_string(s) + ")");
    }
  }
  if (!(hop_seconds > 0.0)) fail(ErrorCode::invalid_argument, "postproc hop must be positive");
}

PostprocParams PostprocParams::uniform(std::size_t classes, double threshold, std::size_t filter_size,
                                       double hop_seconds) {
  return PostprocParams{std::vector<double>(classes, threshold), std::vector<std::size_t>(classes, filter_size),
                        hop_seconds};
}

BinaryMatrix threshold_probs(const Posteriogram& probs, std::span<const double> thresholds) {
  if (thresholds.size() != probs.classes) {
    fail(ErrorCode::shape_mismatch, "threshold_probs: " + std::to_string(thresholds.size()) + " thresholds for " +
                                        std::to_string(probs.classes) + " classes");
  }
  BinaryMatrix out(probs.frames, probs.classes);
  for (std::size_t t = 0; t < probs.frames; ++t)
    for (std::size_t c = 0; c < probs.classes; ++c) out.at(t, c) = probs.at(t, c) >= thresholds[c] ? 1 : 0;
  return out;
}

BinaryMatrix median_postfilter(const BinaryMatrix& activity, std::span<const std::size_t> filter_sizes) {
  if (filter_sizes.size() != activity.classes) {
    fail(ErrorCode::shape_mismatch, "median_postfilter: " + std::to_string(filter_sizes.size()) +
                                        " filter sizes for " + std::to_string(activity.classes) + " classes");
  }
  BinaryMatrix out = activity;
  std::vector<double> column;
  for (std::size_t c = 0; c < activity.classes; ++c) {
    if (filter_sizes[c] == 1) continue;
    filter_column(activity, out, c, filter_sizes[c], column);
  }
  return out;
}

BinaryMatrix apply_postproc(const Posteriogram& probs, const PostprocParams& params) {
  params.validate(probs.classes);
  return median_postfilter(threshold_probs(probs, params.thresholds), params.filter_sizes);
}

std::size_t gpp_window(double hop_seconds) {
  if (!(hop_seconds > 0.0)) fail(ErrorCode::invalid_argument, "gpp: hop must be positive");
  // odd integers are 2k + 1; pick the k closest to the target
  const double target = kGlobalWindowSeconds / hop_seconds;
  const double k = std::round((target - 1.0) / 2.0);
  return k <= 0.0 ? 1 : static_cast<std::size_t>(2.0 * k + 1.0);
}

PostprocParams gpp_params(std::size_t classes, double hop_seconds) {
  return PostprocParams::uniform(classes, kGlobalThreshold, gpp_window(hop_seconds), hop_seconds);
}

BinaryMatrix gpp(const Posteriogram& probs, double hop_seconds) {
  return apply_postproc(probs, gpp_params(probs.classes, hop_seconds));
}

std::vector<double> CdppGrid::default_thresholds() {
  std::vector<double> v;
  for (int k = 1; k <= 9; ++k) v.push_back(k / 10.0);
  return v;
}

std::vector<std::size_t> CdppGrid::default_filter_sizes() {
  std::vector<std::size_t> v;
  for (std::size_t s = 1; s <= 61; s += 2) v.push_back(s);
  return v;
}

ClassScores score_class(std::span<const ClipPrediction> clips, const EventList& reference, std::size_t class_index,
                        std::span<const std::string> class_labels, double threshold, std::size_t filter_size,
                        double hop_seconds, const Collars& collars) {
  const std::string& label = class_labels[class_index];
  EventList refs;
  for (const auto& e : reference)
    if (e.label == label) refs.push_back(e);

  EventList preds;
  std::vector<double> column;
  const std::string one_label[] = {label};
  for (const auto& clip : clips) {
    BinaryMatrix col(clip.probs.frames, 1);
    for (std::size_t t = 0; t < clip.probs.frames; ++t) col.at(t, 0) = clip.probs.at(t, class_index) >= threshold;
    BinaryMatrix filtered = col;
    if (filter_size > 1) filter_column(col, filtered, 0, filter_size, column);
    auto events = decode_events(filtered, hop_seconds, one_label, clip.filename);
    preds.insert(preds.end(), events.begin(), events.end());
  }
  return event_based_f1(preds, refs, collars, one_label).per_class.at(label);
}

CdppResult cdpp_search(std::span<const ClipPrediction> clips, const EventList& reference,
                       std::span<const std::string> class_labels, double hop_seconds, const CdppGrid& grid,
                       const Collars& collars) {
  if (clips.empty()) fail(ErrorCode::invalid_argument, "cdpp_search: empty validation set");
  if (grid.thresholds.empty() || grid.filter_sizes.empty()) fail(ErrorCode::invalid_argument, "cdpp_search: empty grid");
  const std::size_t classes = class_labels.size();
  for (const auto& clip : clips) {
    if (clip.probs.classes != classes) {
      fail(ErrorCode::shape_mismatch, "cdpp_search: clip '" + clip.filename + "' has " +
                                          std::to_string(clip.probs.classes) + " classes, expected " +
                                          std::to_string(classes));
    }
  }
  for (auto s : grid.filter_sizes) {
    if (s == 0 || s % 2 == 0) fail(ErrorCode::invalid_argument, "window length must be odd (got " + std::to_string(s) + ")");
  }

  CdppResult result;
  result.params = PostprocParams::uniform(classes, kGlobalThreshold, 1, hop_seconds);
  result.class_f1.assign(classes, 0.0);
  result.fallback.assign(classes, false);

  for (std::size_t c = 0; c < classes; ++c) {
    const bool has_refs = std::any_of(reference.begin(), reference.end(),
                                      [&](const Event& e) { return e.label == class_labels[c]; });
    if (!has_refs) {
      result.fallback[c] = true;
      result.class_f1[c] =
          score_class(clips, reference, c, class_labels, kGlobalThreshold, 1, hop_seconds, collars).f1;
      continue;
    }
    double best = -1.0;
    for (auto size : grid.filter_sizes) {
      for (double th : grid.thresholds) {
        const double f1 = score_class(clips, reference, c, class_labels, th, size, hop_seconds, collars).f1;
        if (f1 > best) {
          best = f1;
          result.params.thresholds[c] = th;
          result.params.filter_sizes[c] = size;
        }
      }
    }
    result.class_f1[c] = best;
  }
  return result;
}

void write_postproc_params(const std::filesystem::path& path, const PostprocParams& params,
                           std::span<const std::string> class_labels) {
  params.validate(class_labels.size());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  for (std::size_t c = 0; c < class_labels.size(); ++c) {
    out << class_labels[c] << '\t' << text::format_double(params.thresholds[c]) << '\t' << params.filter_sizes[c]
        << '\n';
  }
  if (!out) fail(ErrorCode::io, "write failed for '" + path.string() + "'");
}

PostprocParams read_postproc_params(const std::filesystem::path& path, std::span<const std::string> class_labels,
                                    double hop_seconds) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  const std::size_t classes = class_labels.size();
  PostprocParams params = PostprocParams::uniform(classes, kGlobalThreshold, 1, hop_seconds);
  std::vector<bool> seen(classes, false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, '\t');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 3) fail(ErrorCode::format, where + ": expected 3 tab-separated fields");
    const auto it = std::find(class_labels.begin(), class_labels.end(), fields[0]);
    if (it == class_labels.end()) fail(ErrorCode::format, where + ": unknown class '" + fields[0] + "'");
    const auto c = static_cast<std::size_t>(it - class_labels.begin());
    params.thresholds[c] = text::parse_double(fields[1], where);
    params.filter_sizes[c] = text::parse_size(fields[2], where);
    seen[c] = true;
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (!seen[c]) fail(ErrorCode::format, path.string() + ": no row for class '" + class_labels[c] + "'");
  }
  params.validate(classes);
  return params;
}

}  // namespace smc
