#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace smc {

struct Event {
  std::string filename;
  std::string label;
  double onset = 0.0;   // seconds
  double offset = 0.0;  // seconds, > onset

  bool operator==(const Event&) const = default;
};

using EventList = std::vector<Event>;

// Row-major [frames x classes] activity matrix.
struct BinaryMatrix {
  std::size_t frames = 0;
  std::size_t classes = 0;
  std::vector<unsigned char> values;

  BinaryMatrix() = default;
  BinaryMatrix(std::size_t frames, std::size_t classes)
      : frames(frames), classes(classes), values(frames * classes, 0) {}

  unsigned char& at(std::size_t t, std::size_t c) { return values[t * classes + c]; }
  unsigned char at(std::size_t t, std::size_t c) const { return values[t * classes + c]; }
};

// Maximal runs of 1s in each column become events; frames [a, b] map to
// (a * hop, (b + 1) * hop). Frame i covers [i * hop, (i + 1) * hop).
EventList decode_events(const BinaryMatrix& activity, double hop_seconds, std::span<const std::string> class_labels,
                        const std::string& filename = {});

// Inverse of decode_events for frame-aligned events: frame i is active when
// [i * hop, (i + 1) * hop) overlaps the event.
BinaryMatrix render_events(const EventList& events, std::size_t frames, double hop_seconds,
                           std::span<const std::string> class_labels);

struct Collars {
  double onset = 0.2;       // seconds
  double offset_abs = 0.2;  // seconds
  double offset_pct = 0.2;  // fraction of the reference duration
};

struct ClassScores {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct EvalResult {
  std::map<std::string, ClassScores> per_class;
  double macro_f1 = 0.0;
};

void validate_events(const EventList& events);

// Event-based scores. A prediction matches a same-file, same-class reference
// when |onset_p - onset_r| <= onset collar and |offset_p - offset_r| <=
// max(offset_abs, offset_pct * reference duration). Matching is one-to-one:
// references are visited in onset order and each takes the earliest-onset
// unmatched compatible prediction.
//
// The macro F1 averages the classes in `class_labels` (or, when empty, every
// label seen in either list) that have at least one reference or predicted
// event. Classes with neither are reported with zero counts and left out of
// the average. With nothing to score at all the macro F1 is 1.
EvalResult event_based_f1(const EventList& predicted, const EventList& reference, const Collars& collars = {},
                          std::span<const std::string> class_labels = {});

ClassScores finalize_scores(std::size_t tp, std::size_t fp, std::size_t fn);

}  // namespace smc
