#pragma once

// The commands behind the CLI. Artifacts land under run.root:
//
//   data-<hash of synth.*>/                          dataset (synth)
//   run-<hash of synth.*, model.*, smc.*, train.*>/  checkpoint.smcm, loss_curve.csv, config.txt (train)
//     sweep-<split>-<hash>/                          postproc.tsv, report.txt, report.json (sweep)
//     eval-<postproc>-<split>-<hash>/                events.tsv, report.txt, report.json (eval)
//
// Each command builds its directory under a temporary name and renames it
// into place when done, so a failed command leaves nothing behind. An
// existing directory is only replaced when run.force is set.

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "smc/config.hpp"
#include "smc/gradcheck_suite.hpp"

namespace smc {

using LogFn = std::function<void(const std::string&)>;

std::filesystem::path data_dir(const RunConfig& cfg);
std::filesystem::path run_dir(const RunConfig& cfg);
std::filesystem::path eval_dir(const RunConfig& cfg);
std::filesystem::path sweep_dir(const RunConfig& cfg);

// Each command validates (a copy of) the config first and returns the
// directory it wrote.
std::filesystem::path cmd_synth(RunConfig cfg, const LogFn& log = {});
std::filesystem::path cmd_train(RunConfig cfg, const LogFn& log = {});

struct EvalOutcome {
  std::filesystem::path dir;
  EvalResult result;
};
EvalOutcome cmd_eval(RunConfig cfg, const LogFn& log = {});
std::filesystem::path cmd_sweep(RunConfig cfg, const LogFn& log = {});

// Writes nothing; the caller decides the exit status from report.pass.
SuiteReport cmd_gradcheck(RunConfig cfg, const LogFn& log = {});

// Reference events of every clip in a split, in clip order.
EventList split_events(const Split& split);

// Post-processes every prediction and decodes the events.
EventList predicted_events(std::span<const ClipPrediction> predictions, const PostprocParams& params,
                           std::span<const std::string> class_labels);

PostprocParams plain_threshold_params(std::size_t classes, double hop_seconds);

}  // namespace smc
