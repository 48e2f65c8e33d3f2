#include "smc/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "smc/error.hpp"
#include "smc/text.hpp"

namespace smc {

PostprocMode parse_postproc_mode(std::string_view name) {
  if (name == "none") return PostprocMode::none;
  if (name == "gpp") return PostprocMode::gpp;
  if (name == "cdpp") return PostprocMode::cdpp;
  fail(ErrorCode::invalid_argument, "unknown post-processing '" + std::string(name) + "' (none, gpp, cdpp)");
}

std::string_view to_string(PostprocMode mode) {
  switch (mode) {
    case PostprocMode::none: return "none";
    case PostprocMode::gpp: return "gpp";
    case PostprocMode::cdpp: return "cdpp";
  }
  return "?";
}

namespace {

void check_split(const std::string& split, const char* key) {
  if (split != "train" && split != "validation" && split != "evaluation") {
    fail(ErrorCode::invalid_argument, std::string(key) + ": unknown split '" + split +
                                          "' (train, validation, evaluation)");
  }
}

}  // namespace

void RunConfig::validate() {
  synth.validate();
  model.num_classes = synth.num_classes;
  model.freq_bins = synth.freq_bins;
  model.validate();
  train.validate();
  if (model.time_pool_factor() != synth.label_frames) {
    fail(ErrorCode::invalid_argument, "model time pooling (product of model.conv2d_time_pool = " +
                                          std::to_string(model.time_pool_factor()) +
                                          ") must equal synth.label_frames (" +
                                          std::to_string(synth.label_frames) + ")");
  }
  if (!(collars.onset > 0.0) || !(collars.offset_abs > 0.0) || !(collars.offset_pct >= 0.0)) {
    fail(ErrorCode::invalid_argument, "metrics: collars must be positive");
  }
  check_split(eval.split, "eval.split");
  check_split(sweep.split, "sweep.split");
  if (sweep.grid.thresholds.empty() || sweep.grid.filter_sizes.empty()) {
    fail(ErrorCode::invalid_argument, "sweep: the grid must not be empty");
  }
  for (double t : sweep.grid.thresholds) {
    if (!(t > 0.0 && t < 1.0)) fail(ErrorCode::invalid_argument, "sweep.thresholds: values must lie in (0, 1)");
  }
  for (auto s : sweep.grid.filter_sizes) {
    if (s % 2 == 0) fail(ErrorCode::invalid_argument, "sweep.filter_sizes: sizes must be odd");
  }
  if (!(gradcheck.step > 0.0) || !(gradcheck.tolerance > 0.0) || gradcheck.points == 0 ||
      gradcheck.model_coords_per_leaf == 0) {
    fail(ErrorCode::invalid_argument, "gradcheck: step, tolerance, points and model_coords must be positive");
  }
  if (run.root.empty()) fail(ErrorCode::invalid_argument, "run.root must not be empty");
}

namespace {

struct Entry {
  ConfigKey key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <class T>
using Access = T& (*)(RunConfig&);

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "," : "") + parts[i];
  return out;
}

std::vector<std::string> list_items(std::string_view value) {
  std::vector<std::string> items;
  if (text::trim(value).empty()) return items;
  for (const auto& part : text::split(value, ',')) items.emplace_back(text::trim(part));
  return items;
}

// Value codecs. `what` is the key name, used in parse errors.
std::string encode(std::size_t v) { return std::to_string(v); }
std::string encode(double v) { return text::format_double(v); }
std::string encode(bool v) { return v ? "true" : "false"; }
std::string encode(const std::string& v) { return v; }
std::string encode(const std::vector<std::size_t>& v) {
  std::vector<std::string> parts;
  for (auto x : v) parts.push_back(std::to_string(x));
  return join(parts);
}
std::string encode(const std::vector<double>& v) {
  std::vector<std::string> parts;
  for (auto x : v) parts.push_back(text::format_double(x));
  return join(parts);
}
std::string encode(const std::vector<DurationRange>& v) {
  std::vector<std::string> parts;
  for (const auto& d : v) parts.push_back(std::to_string(d.min) + "-" + std::to_string(d.max));
  return join(parts);
}

void decode(std::string_view s, std::string_view what, std::size_t& out) { out = text::parse_size(s, what); }
void decode(std::string_view s, std::string_view what, double& out) { out = text::parse_double(s, what); }
void decode(std::string_view s, std::string_view what, bool& out) { out = text::parse_bool(s, what); }
void decode(std::string_view s, std::string_view, std::string& out) { out = std::string(text::trim(s)); }
void decode(std::string_view s, std::string_view what, std::vector<std::size_t>& out) {
  out.clear();
  for (const auto& item : list_items(s)) out.push_back(text::parse_size(item, what));
}
void decode(std::string_view s, std::string_view what, std::vector<double>& out) {
  out.clear();
  for (const auto& item : list_items(s)) out.push_back(text::parse_double(item, what));
}
void decode(std::string_view s, std::string_view what, std::vector<DurationRange>& out) {
  out.clear();
  for (const auto& item : list_items(s)) {
    const auto ends = text::split(item, '-');
    if (ends.size() != 2) fail(ErrorCode::invalid_argument, std::string(what) + ": expected min-max, got '" + item + "'");
    out.push_back({text::parse_size(ends[0], what), text::parse_size(ends[1], what)});
  }
}

template <class T>
Entry plain(std::string name, std::string help, Access<T> access) {
  return {{name, std::move(help)},
          [access](const RunConfig& c) { return encode(access(const_cast<RunConfig&>(c))); },
          [access, name](RunConfig& c, std::string_view v) { decode(v, name, access(c)); }};
}

Entry seed(std::string name, std::string help, std::uint64_t& (*access)(RunConfig&)) {
  return {{name, std::move(help)},
          [access](const RunConfig& c) { return std::to_string(access(const_cast<RunConfig&>(c))); },
          [access, name](RunConfig& c, std::string_view v) {
            access(c) = static_cast<std::uint64_t>(text::parse_size(v, name));
          }};
}

template <class E>
Entry named(std::string name, std::string help, E& (*access)(RunConfig&), E (*parse)(std::string_view),
            std::string_view (*show)(E)) {
  return {{name, std::move(help)},
          [access, show](const RunConfig& c) { return std::string(show(access(const_cast<RunConfig&>(c)))); },
          [access, parse](RunConfig& c, std::string_view v) { access(c) = parse(text::trim(v)); }};
}

#define FIELD(type, expr) +[](RunConfig& c) -> type& { return c.expr; }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      plain("synth.num_classes", "number of event classes", FIELD(std::size_t, synth.num_classes)),
      plain("synth.train_clips", "clips in the train split", FIELD(std::size_t, synth.train_clips)),
      plain("synth.validation_clips", "clips in the validation split", FIELD(std::size_t, synth.validation_clips)),
      plain("synth.evaluation_clips", "clips in the evaluation split", FIELD(std::size_t, synth.evaluation_clips)),
      plain("synth.frames", "feature frames per clip", FIELD(std::size_t, synth.frames)),
      plain("synth.freq_bins", "feature bins per frame", FIELD(std::size_t, synth.freq_bins)),
      plain("synth.frame_hop", "seconds per feature frame", FIELD(double, synth.frame_hop)),
      plain("synth.label_frames", "feature frames per label frame", FIELD(std::size_t, synth.label_frames)),
      plain("synth.min_events", "fewest events per clip", FIELD(std::size_t, synth.min_events)),
      plain("synth.max_events", "most events per clip", FIELD(std::size_t, synth.max_events)),
      plain("synth.durations", "per-class event length ranges in label frames, min-max,...",
            FIELD(std::vector<DurationRange>, synth.durations)),
      plain("synth.amplitudes", "per-class band amplitude", FIELD(std::vector<double>, synth.amplitudes)),
      plain("synth.noise_std", "standard deviation of the additive Gaussian noise", FIELD(double, synth.noise_std)),
      seed("synth.seed", "dataset seed", FIELD(std::uint64_t, synth.seed)),

      plain("model.conv2d_channels", "output channels per conv2d layer",
            FIELD(std::vector<std::size_t>, model.conv2d_channels)),
      plain("model.conv2d_time_pool", "time pooling per conv2d layer",
            FIELD(std::vector<std::size_t>, model.conv2d_time_pool)),
      plain("model.conv2d_freq_pool", "frequency pooling per conv2d layer",
            FIELD(std::vector<std::size_t>, model.conv2d_freq_pool)),
      plain("model.conv2d_kernel", "square conv2d kernel size (odd)", FIELD(std::size_t, model.conv2d_kernel)),
      plain("model.conv1d_channels", "output channels per conv1d layer",
            FIELD(std::vector<std::size_t>, model.conv1d_channels)),
      plain("model.conv1d_kernel", "conv1d kernel size (odd)", FIELD(std::size_t, model.conv1d_kernel)),
      plain("model.rnn_layers", "bidirectional GRU layers", FIELD(std::size_t, model.rnn_layers)),
      plain("model.rnn_hidden", "GRU hidden units per direction", FIELD(std::size_t, model.rnn_hidden)),
      named("model.smc_placement",
            "none, after_cnn, after_rnn, probabilities_global, probabilities_per_class",
            FIELD(SMCPlacement, model.smc_placement), &parse_placement,
            static_cast<std::string_view (*)(SMCPlacement)>(&to_string)),

      plain("smc.filter_lengths", "soft-median filter lengths (odd, increasing)",
            FIELD(std::vector<std::size_t>, model.smc.filter_lengths)),
      plain("smc.epsilon", "soft-median smoothing constant", FIELD(double, model.smc.epsilon)),
      named("smc.padding", "reflect or replicate", FIELD(PaddingPolicy, model.smc.padding), &parse_padding,
            static_cast<std::string_view (*)(PaddingPolicy)>(&to_string)),
      named("smc.weight_sharing", "shared_scalar or per_channel", FIELD(WeightSharing, model.smc.weight_sharing),
            &parse_weight_sharing, static_cast<std::string_view (*)(WeightSharing)>(&to_string)),
      plain("smc.use_bias", "learn a bias after the linear choice", FIELD(bool, model.smc.use_bias)),
      named("smc.init", "he_uniform or xavier_uniform", FIELD(InitScheme, model.smc.init), &parse_init_scheme,
            static_cast<std::string_view (*)(InitScheme)>(&to_string)),
      plain("smc.init_gain", "init scheme parameter", FIELD(double, model.smc.init_gain)),

      plain("train.lr", "SGD learning rate", FIELD(double, train.lr)),
      plain("train.momentum", "SGD momentum", FIELD(double, train.momentum)),
      plain("train.epochs", "passes over the train split", FIELD(std::size_t, train.epochs)),
      plain("train.batch", "clips per update", FIELD(std::size_t, train.batch)),
      seed("train.seed", "initialization and shuffling seed", FIELD(std::uint64_t, train.seed)),
      plain("train.weak_weight", "weight of the clip-level loss term", FIELD(double, train.weak_weight)),

      plain("metrics.onset_collar", "onset tolerance in seconds", FIELD(double, collars.onset)),
      plain("metrics.offset_collar", "minimum offset tolerance in seconds", FIELD(double, collars.offset_abs)),
      plain("metrics.offset_collar_pct", "offset tolerance as a fraction of the reference duration",
            FIELD(double, collars.offset_pct)),

      named("eval.postproc", "none, gpp or cdpp", FIELD(PostprocMode, eval.postproc), &parse_postproc_mode,
            static_cast<std::string_view (*)(PostprocMode)>(&to_string)),
      plain("eval.split", "split to evaluate", FIELD(std::string, eval.split)),
      plain("eval.params_file", "cdpp parameter table (default: this run's sweep table)",
            FIELD(std::string, eval.params_file)),

      plain("sweep.split", "split searched by sweep", FIELD(std::string, sweep.split)),
      plain("sweep.thresholds", "threshold grid", FIELD(std::vector<double>, sweep.grid.thresholds)),
      plain("sweep.filter_sizes", "median filter size grid (odd)",
            FIELD(std::vector<std::size_t>, sweep.grid.filter_sizes)),

      plain("gradcheck.step", "finite-difference step", FIELD(double, gradcheck.step)),
      plain("gradcheck.tolerance", "largest accepted relative error", FIELD(double, gradcheck.tolerance)),
      plain("gradcheck.points", "random points per check", FIELD(std::size_t, gradcheck.points)),
      seed("gradcheck.seed", "seed for the random points", FIELD(std::uint64_t, gradcheck.seed)),
      plain("gradcheck.model_coords", "coordinates probed per parameter tensor in the model check",
            FIELD(std::size_t, gradcheck.model_coords_per_leaf)),

      plain("run.root", "directory holding data and run directories", FIELD(std::string, run.root)),
      plain("run.force", "replace existing artifacts", FIELD(bool, run.force)),
  };
  return table;
}

#undef FIELD

const Entry& find(std::string_view key) {
  for (const auto& e : entries()) {
    if (e.key.name == key) return e;
  }
  fail(ErrorCode::invalid_argument, "unknown config key '" + std::string(key) + "'");
}

bool has_prefix(const std::string& name, const std::vector<std::string>& prefixes) {
  if (prefixes.empty()) return true;
  for (const auto& p : prefixes) {
    if (name.compare(0, p.size(), p) == 0) return true;
  }
  return false;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

bool is_config_key(std::string_view key) {
  for (const auto& e : entries()) {
    if (e.key.name == key) return true;
  }
  return false;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) { find(key).set(cfg, value); }

std::string get_config_value(const RunConfig& cfg, std::string_view key) { return find(key).get(cfg); }

void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& source) {
  std::map<std::string, std::size_t> seen;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(ErrorCode::format, where + "expected 'key = value'");
    const std::string key(text::trim(line.substr(0, eq)));
    if (!is_config_key(key)) fail(ErrorCode::invalid_argument, where + "unknown config key '" + key + "'");
    if (const auto it = seen.find(key); it != seen.end()) {
      fail(ErrorCode::format, where + "'" + key + "' already set on line " + std::to_string(it->second));
    }
    seen[key] = line_no;
    try {
      set_config_value(cfg, key, line.substr(eq + 1));
    } catch (const Error& e) {
      fail(e.code(), where + e.what());
    }
  }
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str(), path.string());
}

std::string dump_config(const RunConfig& cfg, const std::vector<std::string>& prefixes) {
  std::string out;
  for (const auto& e : entries()) {
    if (has_prefix(e.key.name, prefixes)) out += e.key.name + " = " + e.get(cfg) + "\n";
  }
  return out;
}

std::string config_hash(const RunConfig& cfg, const std::vector<std::string>& prefixes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump_config(cfg, prefixes)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return out;
}

}  // namespace smc
