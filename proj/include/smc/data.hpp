#pragma once

// Synthetic sound-event data and the on-disk formats for features and labels.
//
// Feature files ("SMCF"): magic "SMCF", u32 version, u32 frames, u32 bins,
// then frames * bins little-endian float64 values, row-major.
// Strong labels: TSV rows filename<TAB>onset<TAB>offset<TAB>event_label with a
// header line. Weak tags: TSV rows filename<TAB>comma-joined labels.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smc/autodiff.hpp"
#include "smc/metrics.hpp"

namespace smc {

struct DurationRange {
  std::size_t min = 1;  // label frames
  std::size_t max = 1;
};

struct SynthConfig {
  std::size_t num_classes = 4;
  std::size_t train_clips = 200;
  std::size_t validation_clips = 50;
  std::size_t evaluation_clips = 50;
  std::size_t frames = 128;     // feature frames per clip
  std::size_t freq_bins = 16;
  double frame_hop = 0.016;     // seconds per feature frame
  std::size_t label_frames = 4; // feature frames per label frame
  std::size_t min_events = 1;
  std::size_t max_events = 3;
  // One range per class, in label frames. Short and long classes differ on
  // purpose so per-class post-processing has something to find.
  std::vector<DurationRange> durations = {{1, 3}, {2, 6}, {4, 10}, {8, 16}};
  std::vector<double> amplitudes = {1.0, 1.25, 1.5, 1.75};
  double noise_std = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t label_frames_per_clip() const { return frames / label_frames; }
  double label_hop() const { return frame_hop * static_cast<double>(label_frames); }
  // Frequency bins [band_begin(c), band_begin(c) + band_width()) carry class c.
  std::size_t band_width() const { return freq_bins / num_classes; }
};

std::vector<std::string> synth_class_labels(std::size_t num_classes);

struct Clip {
  std::string id;          // also the filename column of label files
  ad::Tensor features;     // [frames x freq_bins]
  EventList events;        // strong labels, seconds
  std::vector<std::string> tags;  // weak labels, sorted
};

struct Split {
  std::string name;
  std::vector<Clip> clips;
};

struct Dataset {
  std::vector<std::string> class_labels;
  double frame_hop = 0.016;
  std::size_t label_frames = 4;
  Split train{"train", {}};
  Split validation{"validation", {}};
  Split evaluation{"evaluation", {}};

  double label_hop() const { return frame_hop * static_cast<double>(label_frames); }
  const Split& split(const std::string& name) const;
};

Dataset synth_dataset(const SynthConfig& cfg);

// Target matrix [label frames x classes] for one clip.
BinaryMatrix strong_targets(const Clip& clip, std::size_t label_frames_per_clip, double label_hop,
                            const std::vector<std::string>& class_labels);

void write_features(const std::filesystem::path& path, const ad::Tensor& features);
ad::Tensor read_features(const std::filesystem::path& path);

void write_labels(const std::filesystem::path& path, const EventList& events);
EventList read_labels(const std::filesystem::path& path);

struct WeakTags {
  std::string filename;
  std::vector<std::string> labels;
  bool operator==(const WeakTags&) const = default;
};
void write_weak_labels(const std::filesystem::path& path, const std::vector<WeakTags>& tags);
std::vector<WeakTags> read_weak_labels(const std::filesystem::path& path);

// Directory layout: dataset.tsv (metadata), <split>_strong.tsv,
// <split>_weak.tsv and features/<split>/<clip id>.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace smc
