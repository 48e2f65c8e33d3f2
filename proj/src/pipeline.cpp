#include "smc/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <system_error>

#include "json.hpp"
#include "smc/error.hpp"
#include "smc/text.hpp"

namespace smc {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

const std::vector<std::string> kDataKeys = {"synth."};
const std::vector<std::string> kRunKeys = {"synth.", "model.", "smc.", "train."};
const std::vector<std::string> kReportKeys = {"synth.", "model.", "smc.", "train.", "metrics."};

std::string short_hash(const RunConfig& cfg, const std::vector<std::string>& prefixes) {
  return config_hash(cfg, prefixes).substr(0, 8);
}

void note(const LogFn& log, const std::string& line) {
  if (log) log(line);
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
  if (!out) fail(ErrorCode::io, "cannot write '" + path.string() + "'");
}

// Output directory built under "<name>.partial" and renamed on commit.
class StagedDir {
 public:
  StagedDir(fs::path target, bool force) : target_(std::move(target)) {
    if (fs::exists(target_) && !force) {
      fail(ErrorCode::exists, target_.string() + " already exists (set run.force to replace it)");
    }
    staging_ = target_;
    staging_ += ".partial";
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;
  ~StagedDir() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }

  const fs::path& path() const { return staging_; }

  const fs::path& commit() {
    fs::remove_all(target_);
    fs::rename(staging_, target_);
    committed_ = true;
    return target_;
  }

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

Dataset load_dataset(const RunConfig& cfg) {
  const auto dir = data_dir(cfg);
  if (!fs::exists(dir / "dataset.tsv")) {
    fail(ErrorCode::state, "no dataset at " + dir.string() + "; run synth with the same synth.* settings first");
  }
  return read_dataset(dir);
}

ModelParams load_trained(const RunConfig& cfg) {
  const auto path = run_dir(cfg) / "checkpoint.smcm";
  if (!fs::exists(path)) {
    fail(ErrorCode::state, "no checkpoint at " + path.string() + "; run train with the same settings first");
  }
  auto params = load_checkpoint(path);
  check_params(params, cfg.model);
  return params;
}

Json config_json(const RunConfig& cfg) {
  Json out = Json::object();
  for (const auto& key : config_keys()) {
    for (const auto& p : kReportKeys) {
      if (key.name.compare(0, p.size(), p) == 0) out[key.name] = get_config_value(cfg, key.name);
    }
  }
  return out;
}

Json params_json(const PostprocParams& params, std::span<const std::string> labels) {
  Json out = Json::array();
  for (std::size_t c = 0; c < labels.size(); ++c) {
    out.push_back({{"class", labels[c]}, {"threshold", params.thresholds[c]}, {"filter_size", params.filter_sizes[c]}});
  }
  return out;
}

std::string params_text(const PostprocParams& params, std::span<const std::string> labels) {
  std::string out = "class\tthreshold\tfilter_size\n";
  for (std::size_t c = 0; c < labels.size(); ++c) {
    out += labels[c] + "\t" + text::format_double(params.thresholds[c]) + "\t" +
           std::to_string(params.filter_sizes[c]) + "\n";
  }
  return out;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

fs::path data_dir(const RunConfig& cfg) { return fs::path(cfg.run.root) / ("data-" + config_hash(cfg, kDataKeys)); }

fs::path run_dir(const RunConfig& cfg) { return fs::path(cfg.run.root) / ("run-" + config_hash(cfg, kRunKeys)); }

fs::path eval_dir(const RunConfig& cfg) {
  return run_dir(cfg) / ("eval-" + std::string(to_string(cfg.eval.postproc)) + "-" + cfg.eval.split + "-" +
                         short_hash(cfg, {"eval.", "sweep.", "metrics."}));
}

fs::path sweep_dir(const RunConfig& cfg) {
  return run_dir(cfg) / ("sweep-" + cfg.sweep.split + "-" + short_hash(cfg, {"sweep.", "metrics."}));
}

EventList split_events(const Split& split) {
  EventList out;
  for (const auto& clip : split.clips) out.insert(out.end(), clip.events.begin(), clip.events.end());
  return out;
}

EventList predicted_events(std::span<const ClipPrediction> predictions, const PostprocParams& params,
                           std::span<const std::string> class_labels) {
  EventList out;
  for (const auto& p : predictions) {
    const auto events = decode_events(apply_postproc(p.probs, params), params.hop_seconds, class_labels, p.filename);
    out.insert(out.end(), events.begin(), events.end());
  }
  return out;
}

PostprocParams plain_threshold_params(std::size_t classes, double hop_seconds) {
  return PostprocParams::uniform(classes, 0.5, 1, hop_seconds);
}

fs::path cmd_synth(RunConfig cfg, const LogFn& log) {
  cfg.validate();
  StagedDir dir(data_dir(cfg), cfg.run.force);
  const auto dataset = synth_dataset(cfg.synth);
  write_dataset(dir.path(), dataset);
  write_text(dir.path() / "config.txt", dump_config(cfg, kDataKeys));
  const auto& out = dir.commit();
  note(log, "wrote dataset to " + out.string());
  return out;
}

fs::path cmd_train(RunConfig cfg, const LogFn& log) {
  cfg.validate();
  const auto dataset = load_dataset(cfg);
  StagedDir dir(run_dir(cfg), cfg.run.force);
  const std::size_t every = std::max<std::size_t>(1, cfg.train.epochs / 20);
  const auto result = train(dataset, cfg.model, cfg.train, nullptr, [&](std::size_t epoch, double loss) {
    if (epoch == 1 || epoch % every == 0 || epoch == cfg.train.epochs) {
      note(log, "epoch " + std::to_string(epoch) + "/" + std::to_string(cfg.train.epochs) + " loss " + fixed(loss));
    }
  });
  save_checkpoint(result.params, dir.path() / "checkpoint.smcm");
  std::string csv = "epoch,loss\n";
  for (std::size_t e = 0; e < result.loss_curve.size(); ++e) {
    csv += std::to_string(e) + "," + text::format_double(result.loss_curve[e]) + "\n";
  }
  write_text(dir.path() / "loss_curve.csv", csv);
  write_text(dir.path() / "config.txt", dump_config(cfg, kRunKeys));
  const auto& out = dir.commit();
  note(log, "loss " + fixed(result.loss_curve.front()) + " -> " + fixed(result.loss_curve.back()) + "; wrote " +
                out.string());
  return out;
}

fs::path cmd_sweep(RunConfig cfg, const LogFn& log) {
  cfg.validate();
  const auto dataset = load_dataset(cfg);
  const auto params = load_trained(cfg);
  const auto& split = dataset.split(cfg.sweep.split);
  const auto predictions = predict(split, params, cfg.model);
  const auto reference = split_events(split);
  const auto& labels = dataset.class_labels;
  const auto found = cdpp_search(predictions, reference, labels, dataset.label_hop(), cfg.sweep.grid, cfg.collars);

  StagedDir dir(sweep_dir(cfg), cfg.run.force);
  write_postproc_params(dir.path() / "postproc.tsv", found.params, labels);

  std::string report = "[config]\n" + dump_config(cfg, kReportKeys) + "\n[sweep]\n" +
                       dump_config(cfg, {"sweep."}) + "\nclass\tthreshold\tfilter_size\tf1\tfallback\n";
  Json classes = Json::array();
  for (std::size_t c = 0; c < labels.size(); ++c) {
    report += labels[c] + "\t" + text::format_double(found.params.thresholds[c]) + "\t" +
              std::to_string(found.params.filter_sizes[c]) + "\t" + fixed(found.class_f1[c]) + "\t" +
              (found.fallback[c] ? "yes" : "no") + "\n";
    classes.push_back({{"class", labels[c]},
                       {"threshold", found.params.thresholds[c]},
                       {"filter_size", found.params.filter_sizes[c]},
                       {"f1", found.class_f1[c]},
                       {"fallback", static_cast<bool>(found.fallback[c])}});
  }
  write_text(dir.path() / "report.txt", report);
  const Json json = {{"config", config_json(cfg)},
                     {"split", cfg.sweep.split},
                     {"thresholds", cfg.sweep.grid.thresholds},
                     {"filter_sizes", cfg.sweep.grid.filter_sizes},
                     {"classes", classes}};
  write_text(dir.path() / "report.json", json.dump(2) + "\n");
  const auto& out = dir.commit();
  note(log, "wrote " + (out / "postproc.tsv").string());
  return out;
}

EvalOutcome cmd_eval(RunConfig cfg, const LogFn& log) {
  cfg.validate();
  const auto dataset = load_dataset(cfg);
  const auto params = load_trained(cfg);
  const auto& labels = dataset.class_labels;
  const double hop = dataset.label_hop();

  PostprocParams pp;
  std::string source = "builtin";
  switch (cfg.eval.postproc) {
    case PostprocMode::none: pp = plain_threshold_params(labels.size(), hop); break;
    case PostprocMode::gpp: pp = gpp_params(labels.size(), hop); break;
    case PostprocMode::cdpp: {
      const fs::path file =
          cfg.eval.params_file.empty() ? sweep_dir(cfg) / "postproc.tsv" : fs::path(cfg.eval.params_file);
      if (!fs::exists(file)) {
        fail(ErrorCode::state, "no post-processing table at " + file.string() +
                                   (cfg.eval.params_file.empty() ? "; run sweep first or set eval.params_file" : ""));
      }
      pp = read_postproc_params(file, labels, hop);
      source = file.string();
      break;
    }
  }

  const auto& split = dataset.split(cfg.eval.split);
  const auto predictions = predict(split, params, cfg.model);
  const auto events = predicted_events(predictions, pp, labels);
  EvalOutcome outcome;
  outcome.result = event_based_f1(events, split_events(split), cfg.collars, labels);
  const auto& result = outcome.result;

  StagedDir dir(eval_dir(cfg), cfg.run.force);
  write_labels(dir.path() / "events.tsv", events);

  std::string report = "[config]\n" + dump_config(cfg, kReportKeys) + "\n[post-processing]\nmode = " +
                       std::string(to_string(cfg.eval.postproc)) + "\nsource = " + source + "\n" +
                       params_text(pp, labels) + "\n[scores]\nsplit = " + cfg.eval.split +
                       "\nclass\ttp\tfp\tfn\tprecision\trecall\tf1\n";
  Json per_class = Json::object();
  for (const auto& label : labels) {
    const auto& s = result.per_class.at(label);
    report += label + "\t" + std::to_string(s.tp) + "\t" + std::to_string(s.fp) + "\t" + std::to_string(s.fn) + "\t" +
              fixed(s.precision) + "\t" + fixed(s.recall) + "\t" + fixed(s.f1) + "\n";
    per_class[label] = {{"tp", s.tp}, {"fp", s.fp}, {"fn", s.fn},
                        {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  }
  report += "macro_f1 = " + fixed(result.macro_f1) + "\n";
  write_text(dir.path() / "report.txt", report);
  const Json json = {{"config", config_json(cfg)},
                     {"postproc", {{"mode", to_string(cfg.eval.postproc)}, {"source", source},
                                   {"params", params_json(pp, labels)}}},
                     {"scores", {{"split", cfg.eval.split}, {"per_class", per_class}, {"macro_f1", result.macro_f1}}}};
  write_text(dir.path() / "report.json", json.dump(2) + "\n");
  outcome.dir = dir.commit();
  note(log, "macro F1 " + fixed(result.macro_f1) + " on " + cfg.eval.split + "; wrote " + outcome.dir.string());
  return outcome;
}

SuiteReport cmd_gradcheck(RunConfig cfg, const LogFn& log) {
  cfg.validate();
  SuiteOptions options;
  options.check.step = cfg.gradcheck.step;
  options.check.tolerance = cfg.gradcheck.tolerance;
  options.points = cfg.gradcheck.points;
  options.seed = cfg.gradcheck.seed;
  options.model_coords_per_leaf = cfg.gradcheck.model_coords_per_leaf;
  auto report = run_gradcheck_suite(cfg.model, options, [&](const SuiteEntry& e) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-36s %s  max_rel_err %.3g  coords %zu  skipped %zu", e.name.c_str(),
                  e.report.pass ? "ok  " : "FAIL", e.report.max_rel_err, e.report.coords_checked,
                  e.report.coords_skipped);
    note(log, buf);
  });
  char buf[128];
  std::snprintf(buf, sizeof(buf), "gradcheck %s: max relative error %.3g (tolerance %g)",
                report.pass ? "passed" : "FAILED", report.max_rel_err, cfg.gradcheck.tolerance);
  note(log, buf);
  return report;
}

}  // namespace smc
