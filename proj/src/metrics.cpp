#include "smc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "smc/error.hpp"

namespace smc {

namespace {

// Absorbs rounding in boundaries that are products of frame index and hop.
constexpr double kTimeSlack = 1e-9;

std::vector<std::string> resolve_labels(const EventList& a, const EventList& b, std::span<const std::string> given) {
  if (!given.empty()) return {given.begin(), given.end()};
  std::set<std::string> seen;
  for (const auto& e : a) seen.insert(e.label);
  for (const auto& e : b) seen.insert(e.label);
  return {seen.begin(), seen.end()};
}

}  // namespace

EventList decode_events(const BinaryMatrix& activity, double hop_seconds, std::span<const std::string> class_labels,
                        const std::string& filename) {
  if (!(hop_seconds > 0.0)) fail(ErrorCode::invalid_argument, "decode_events: hop must be positive");
  if (class_labels.size() != activity.classes) {
    fail(ErrorCode::shape_mismatch, "decode_events: " + std::to_string(class_labels.size()) + " labels for " +
                                        std::to_string(activity.classes) + " classes");
  }
  EventList events;
  for (std::size_t c = 0; c < activity.classes; ++c) {
    std::size_t t = 0;
    while (t < activity.frames) {
      if (!activity.at(t, c)) {
        ++t;
        continue;
      }
      const std::size_t start = t;
      while (t < activity.frames && activity.at(t, c)) ++t;
      events.push_back(Event{filename, class_labels[c], static_cast<double>(start) * hop_seconds,
                             static_cast<double>(t) * hop_seconds});
    }
  }
  return events;
}

BinaryMatrix render_events(const EventList& events, std::size_t frames, double hop_seconds,
                           std::span<const std::string> class_labels) {
  if (!(hop_seconds > 0.0)) fail(ErrorCode::invalid_argument, "render_events: hop must be positive");
  BinaryMatrix out(frames, class_labels.size());
  const double slack = hop_seconds * 1e-6;
  for (const auto& e : events) {
    const auto it = std::find(class_labels.begin(), class_labels.end(), e.label);
    if (it == class_labels.end()) fail(ErrorCode::invalid_argument, "render_events: unknown label '" + e.label + "'");
    const auto c = static_cast<std::size_t>(it - class_labels.begin());
    for (std::size_t t = 0; t < frames; ++t) {
      const double lo = static_cast<double>(t) * hop_seconds;
      const double hi = static_cast<double>(t + 1) * hop_seconds;
      if (e.onset < hi - slack && e.offset > lo + slack) out.at(t, c) = 1;
    }
  }
  return out;
}

void validate_events(const EventList& events) {
  for (const auto& e : events) {
    if (!std::isfinite(e.onset) || !std::isfinite(e.offset) || e.onset < 0.0 || !(e.offset > e.onset)) {
      fail(ErrorCode::invalid_argument, "malformed event '" + e.label + "' in '" + e.filename + "': onset " +
                                            std::to_string(e.onset) + ", offset " + std::to_string(e.offset));
    }
  }
}

ClassScores finalize_scores(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassScores s{tp, fp, fn};
  s.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

EvalResult event_based_f1(const EventList& predicted, const EventList& reference, const Collars& collars,
                          std::span<const std::string> class_labels) {
  if (!(collars.onset > 0.0) || !(collars.offset_abs > 0.0) || collars.offset_pct < 0.0) {
    fail(ErrorCode::invalid_argument, "event_based_f1: collars must be positive");
  }
  validate_events(predicted);
  validate_events(reference);

  using Key = std::pair<std::string, std::string>;  // (label, filename)
  std::map<Key, std::vector<const Event*>> refs, preds;
  for (const auto& e : reference) refs[{e.label, e.filename}].push_back(&e);
  for (const auto& e : predicted) preds[{e.label, e.filename}].push_back(&e);

  auto by_onset = [](const Event* a, const Event* b) {
    return std::tie(a->onset, a->offset) < std::tie(b->onset, b->offset);
  };

  std::map<std::string, std::size_t> tp, n_ref, n_pred;
  for (auto& [key, list] : refs) n_ref[key.first] += list.size();
  for (auto& [key, list] : preds) n_pred[key.first] += list.size();

  for (auto& [key, ref_list] : refs) {
    auto it = preds.find(key);
    if (it == preds.end()) continue;
    auto& pred_list = it->second;
    std::stable_sort(ref_list.begin(), ref_list.end(), by_onset);
    std::stable_sort(pred_list.begin(), pred_list.end(), by_onset);
    std::vector<bool> used(pred_list.size(), false);
    for (const Event* r : ref_list) {
      const double offset_collar = std::max(collars.offset_abs, collars.offset_pct * (r->offset - r->onset));
      for (std::size_t j = 0; j < pred_list.size(); ++j) {
        if (used[j]) continue;
        const Event* p = pred_list[j];
        if (std::abs(p->onset - r->onset) <= collars.onset + kTimeSlack &&
            std::abs(p->offset - r->offset) <= offset_collar + kTimeSlack) {
          used[j] = true;
          ++tp[key.first];
          break;
        }
      }
    }
  }

  EvalResult result;
  double f1_sum = 0.0;
  std::size_t scored = 0;
  for (const auto& label : resolve_labels(predicted, reference, class_labels)) {
    const std::size_t t = tp[label], r = n_ref[label], p = n_pred[label];
    result.per_class[label] = finalize_scores(t, p - t, r - t);
    if (r + p > 0) {
      f1_sum += result.per_class[label].f1;
      ++scored;
    }
  }
  result.macro_f1 = scored > 0 ? f1_sum / static_cast<double>(scored) : 1.0;
  return result;
}

}  // namespace smc
