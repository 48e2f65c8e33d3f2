#include "smc/data.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "smc/error.hpp"
#include "smc/text.hpp"

namespace smc {

namespace {

constexpr char kFeatureMagic[4] = {'S', 'M', 'C', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;
constexpr std::string_view kStrongHeader = "filename\tonset\toffset\tevent_label";
constexpr std::string_view kWeakHeader = "filename\tevent_labels";

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::io, "write failed for '" + path.string() + "'");
}

std::string clip_id(const std::string& split, std::size_t index) {
  std::ostringstream os;
  os << split << '_';
  os.width(4);
  os.fill('0');
  os << index << ".smcf";
  return os.str();
}

Split synth_split(const SynthConfig& cfg, const std::string& name, std::size_t count, std::uint64_t stream,
                  const std::vector<std::string>& labels) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::mt19937_64 rng(seq);
  const std::size_t slots = cfg.label_frames_per_clip();
  const double hop = cfg.label_hop();
  const std::size_t band = cfg.band_width();

  Split split{name, {}};
  for (std::size_t i = 0; i < count; ++i) {
    Clip clip;
    clip.id = clip_id(name, i);
    // activity[c][slot]
    std::vector<std::vector<unsigned char>> active(cfg.num_classes, std::vector<unsigned char>(slots, 0));
    std::uniform_int_distribution<std::size_t> n_events(cfg.min_events, cfg.max_events);
    std::uniform_int_distribution<std::size_t> pick_class(0, cfg.num_classes - 1);
    const std::size_t wanted = n_events(rng);
    for (std::size_t e = 0; e < wanted; ++e) {
      const std::size_t c = pick_class(rng);
      const auto& range = cfg.durations[c];
      std::uniform_int_distribution<std::size_t> pick_duration(range.min, range.max);
      const std::size_t dur = pick_duration(rng);
      std::uniform_int_distribution<std::size_t> pick_onset(0, slots - dur);
      // same-class events keep at least one free slot between them so that
      // the labels decode back to the same events
      for (int attempt = 0; attempt < 64; ++attempt) {
        const std::size_t on = pick_onset(rng);
        const std::size_t lo = on == 0 ? 0 : on - 1;
        const std::size_t hi = std::min(slots, on + dur + 1);
        if (std::any_of(active[c].begin() + static_cast<std::ptrdiff_t>(lo),
                        active[c].begin() + static_cast<std::ptrdiff_t>(hi), [](unsigned char v) { return v != 0; })) {
          continue;
        }
        std::fill_n(active[c].begin() + static_cast<std::ptrdiff_t>(on), dur, 1);
        clip.events.push_back(Event{clip.id, labels[c], static_cast<double>(on) * hop,
                                    static_cast<double>(on + dur) * hop});
        break;
      }
    }
    std::sort(clip.events.begin(), clip.events.end(),
              [](const Event& a, const Event& b) { return a.onset < b.onset || (a.onset == b.onset && a.label < b.label); });

    std::vector<double> feats(cfg.frames * cfg.freq_bins, 0.0);
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
      for (std::size_t t = 0; t < cfg.frames; ++t) {
        if (!active[c][t / cfg.label_frames]) continue;
        for (std::size_t b = c * band; b < (c + 1) * band; ++b) feats[t * cfg.freq_bins + b] = cfg.amplitudes[c];
      }
    }
    if (cfg.noise_std > 0.0) {
      std::normal_distribution<double> noise(0.0, cfg.noise_std);
      for (auto& v : feats) v += noise(rng);
    }
    clip.features = ad::Tensor({cfg.frames, cfg.freq_bins}, std::move(feats));

    std::set<std::string> tags;
    for (const auto& ev : clip.events) tags.insert(ev.label);
    clip.tags.assign(tags.begin(), tags.end());
    split.clips.push_back(std::move(clip));
  }
  return split;
}

}  // namespace

void SynthConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::invalid_argument, "synth: " + what); };
  if (num_classes == 0) bad("num_classes must be positive");
  if (freq_bins < num_classes) bad("freq_bins must be at least num_classes");
  if (frames == 0 || label_frames == 0) bad("frames and label_frames must be positive");
  if (frames % label_frames != 0) bad("frames must be a multiple of label_frames");
  if (!(frame_hop > 0.0)) bad("frame_hop must be positive");
  if (min_events > max_events) bad("min_events must not exceed max_events");
  if (durations.size() != num_classes) bad("need one duration range per class");
  if (amplitudes.size() != num_classes) bad("need one amplitude per class");
  for (const auto& d : durations) {
    if (d.min < 1 || d.max < d.min || d.max > label_frames_per_clip()) {
      bad("durations must satisfy 1 <= min <= max <= clip length in label frames");
    }
  }
  if (!(noise_std >= 0.0)) bad("noise_std must be non-negative");
}

std::vector<std::string> synth_class_labels(std::size_t num_classes) {
  std::vector<std::string> labels;
  for (std::size_t c = 0; c < num_classes; ++c) labels.push_back("class_" + std::to_string(c));
  return labels;
}

const Split& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "validation") return validation;
  if (name == "evaluation") return evaluation;
  fail(ErrorCode::invalid_argument, "unknown split '" + name + "' (expected train|validation|evaluation)");
}

Dataset synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.class_labels = synth_class_labels(cfg.num_classes);
  ds.frame_hop = cfg.frame_hop;
  ds.label_frames = cfg.label_frames;
  ds.train = synth_split(cfg, "train", cfg.train_clips, 0, ds.class_labels);
  ds.validation = synth_split(cfg, "validation", cfg.validation_clips, 1, ds.class_labels);
  ds.evaluation = synth_split(cfg, "evaluation", cfg.evaluation_clips, 2, ds.class_labels);
  return ds;
}

BinaryMatrix strong_targets(const Clip& clip, std::size_t label_frames_per_clip, double label_hop,
                            const std::vector<std::string>& class_labels) {
  return render_events(clip.events, label_frames_per_clip, label_hop, class_labels);
}

// ---- features --------------------------------------------------------------

void write_features(const std::filesystem::path& path, const ad::Tensor& features) {
  if (features.rank() != 2) {
    fail(ErrorCode::shape_mismatch, "write_features: expected [T x F], got " + ad::to_string(features.shape()));
  }
  std::string bytes(kFeatureMagic, 4);
  binary::put_u32(bytes, kFeatureVersion);
  binary::put_u32(bytes, static_cast<std::uint32_t>(features.extent(0)));
  binary::put_u32(bytes, static_cast<std::uint32_t>(features.extent(1)));
  for (double v : features.data()) binary::put_f64(bytes, v);
  dump(path, bytes);
}

ad::Tensor read_features(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  binary::Reader in(bytes, path.string());
  if (in.take(4, "magic") != std::string_view(kFeatureMagic, 4)) {
    fail(ErrorCode::format, path.string() + ": bad magic (not an SMCF feature file)");
  }
  const auto version = in.u32("version");
  if (version != kFeatureVersion) {
    fail(ErrorCode::format, path.string() + ": unsupported feature file version " + std::to_string(version));
  }
  const std::size_t frames = in.u32("frame count");
  const std::size_t bins = in.u32("bin count");
  if (frames == 0 || bins == 0) fail(ErrorCode::format, path.string() + ": zero extent in header");
  if (in.remaining() != frames * bins * 8) {
    fail(ErrorCode::format, path.string() + ": payload is " + std::to_string(in.remaining()) + " bytes, header says " +
                                std::to_string(frames) + "x" + std::to_string(bins) + "x8");
  }
  std::vector<double> values(frames * bins);
  for (auto& v : values) v = in.f64("feature value");
  return ad::Tensor({frames, bins}, std::move(values));
}

// ---- labels ----------------------------------------------------------------

void write_labels(const std::filesystem::path& path, const EventList& events) {
  validate_events(events);
  std::string out(kStrongHeader);
  out += '\n';
  for (const auto& e : events) {
    out += e.filename + '\t' + text::format_double(e.onset) + '\t' + text::format_double(e.offset) + '\t' + e.label +
           '\n';
  }
  dump(path, out);
}

EventList read_labels(const std::filesystem::path& path) {
  std::istringstream in(slurp(path));
  EventList events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line == kStrongHeader)) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto f = text::split(line, '\t');
    if (f.size() != 4) fail(ErrorCode::format, where + ": expected 4 tab-separated fields");
    Event e{f[0], f[3], text::parse_double(f[1], where), text::parse_double(f[2], where)};
    if (!(e.offset > e.onset)) fail(ErrorCode::format, where + ": offset must be greater than onset");
    events.push_back(std::move(e));
  }
  return events;
}

void write_weak_labels(const std::filesystem::path& path, const std::vector<WeakTags>& tags) {
  std::string out(kWeakHeader);
  out += '\n';
  for (const auto& t : tags) {
    out += t.filename + '\t';
    for (std::size_t i = 0; i < t.labels.size(); ++i) out += (i ? "," : "") + t.labels[i];
    out += '\n';
  }
  dump(path, out);
}

std::vector<WeakTags> read_weak_labels(const std::filesystem::path& path) {
  std::istringstream in(slurp(path));
  std::vector<WeakTags> tags;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line == kWeakHeader)) continue;
    const auto f = text::split(line, '\t');
    if (f.size() != 2) fail(ErrorCode::format, path.string() + ":" + std::to_string(line_no) + ": expected 2 fields");
    WeakTags t{f[0], {}};
    if (!f[1].empty()) t.labels = text::split(f[1], ',');
    tags.push_back(std::move(t));
  }
  return tags;
}

// ---- dataset directories ---------------------------------------------------

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  std::string meta = "classes\t";
  for (std::size_t c = 0; c < dataset.class_labels.size(); ++c) meta += (c ? "," : "") + dataset.class_labels[c];
  meta += "\nframe_hop\t" + text::format_double(dataset.frame_hop) + "\nlabel_frames\t" +
          std::to_string(dataset.label_frames) + "\n";
  for (const Split* split : {&dataset.train, &dataset.validation, &dataset.evaluation}) {
    meta += split->name + "_clips\t" + std::to_string(split->clips.size()) + "\n";
    const auto feat_dir = dir / "features" / split->name;
    std::filesystem::create_directories(feat_dir);
    EventList events;
    std::vector<WeakTags> weak;
    for (const auto& clip : split->clips) {
      write_features(feat_dir / clip.id, clip.features);
      events.insert(events.end(), clip.events.begin(), clip.events.end());
      weak.push_back({clip.id, clip.tags});
    }
    write_labels(dir / (split->name + "_strong.tsv"), events);
    write_weak_labels(dir / (split->name + "_weak.tsv"), weak);
  }
  dump(dir / "dataset.tsv", meta);
}

Dataset read_dataset(const std::filesystem::path& dir) {
  std::map<std::string, std::string> meta;
  {
    std::istringstream in(slurp(dir / "dataset.tsv"));
    std::string line;
    while (std::getline(in, line)) {
      const auto f = text::split(line, '\t');
      if (f.size() == 2) meta[f[0]] = f[1];
    }
  }
  for (const char* key : {"classes", "frame_hop", "label_frames"}) {
    if (!meta.count(key)) fail(ErrorCode::format, (dir / "dataset.tsv").string() + ": missing '" + key + "'");
  }
  Dataset ds;
  ds.class_labels = text::split(meta["classes"], ',');
  ds.frame_hop = text::parse_double(meta["frame_hop"], "dataset frame_hop");
  ds.label_frames = text::parse_size(meta["label_frames"], "dataset label_frames");

  for (Split* split : {&ds.train, &ds.validation, &ds.evaluation}) {
    const auto weak = read_weak_labels(dir / (split->name + "_weak.tsv"));
    const auto events = read_labels(dir / (split->name + "_strong.tsv"));
    std::map<std::string, std::size_t> index;
    for (const auto& w : weak) {
      index[w.filename] = split->clips.size();
      split->clips.push_back(Clip{w.filename, read_features(dir / "features" / split->name / w.filename), {}, w.labels});
    }
    for (const auto& e : events) {
      const auto it = index.find(e.filename);
      if (it == index.end()) fail(ErrorCode::format, split->name + ": label for unknown clip '" + e.filename + "'");
      split->clips[it->second].events.push_back(e);
    }
  }
  return ds;
}

}  // namespace smc
