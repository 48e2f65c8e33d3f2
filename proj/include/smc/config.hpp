#pragma once

// Run configuration: every setting of every command as one flat key space
// ("section.name"). A config file holds `key = value` lines ('#' starts a
// comment); command-line flags use the same keys. Unknown keys are errors.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "smc/data.hpp"
#include "smc/metrics.hpp"
#include "smc/model.hpp"
#include "smc/postproc.hpp"
#include "smc/train.hpp"

namespace smc {

enum class PostprocMode { none, gpp, cdpp };

PostprocMode parse_postproc_mode(std::string_view name);
std::string_view to_string(PostprocMode mode);

struct EvalSettings {
  PostprocMode postproc = PostprocMode::none;
  std::string split = "evaluation";
  // cdpp only; empty means the sweep table of this run for sweep.split.
  std::string params_file;
};

struct SweepSettings {
  std::string split = "validation";
  CdppGrid grid;
};

struct GradcheckSettings {
  double step = 1e-4;
  double tolerance = 1e-3;
  std::size_t points = 20;
  std::uint64_t seed = 1;
  std::size_t model_coords_per_leaf = 16;
};

struct RunSettings {
  std::string root = "runs";
  bool force = false;
};

struct RunConfig {
  SynthConfig synth;
  // num_classes and freq_bins follow synth.* and have no keys of their own.
  ModelConfig model;
  TrainHyper train;
  Collars collars;
  EvalSettings eval;
  SweepSettings sweep;
  GradcheckSettings gradcheck;
  RunSettings run;

  // Copies the synth sizes into the model and checks every section plus the
  // cross-section constraints.
  void validate();
};

struct ConfigKey {
  std::string name;
  std::string help;
};

const std::vector<ConfigKey>& config_keys();
bool is_config_key(std::string_view key);

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& cfg, std::string_view key);

// Applies `key = value` lines. Errors name the source and line.
void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& source = "config");
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

// `key = value` lines for the keys whose names start with one of the
// prefixes (all keys when empty), in schema order.
std::string dump_config(const RunConfig& cfg, const std::vector<std::string>& prefixes = {});

// 64-bit FNV-1a of dump_config(cfg, prefixes), as 16 hex digits.
std::string config_hash(const RunConfig& cfg, const std::vector<std::string>& prefixes);

}  // namespace smc
