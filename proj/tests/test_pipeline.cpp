#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>

#include "json.hpp"
#include "smc/pipeline.hpp"

using namespace smc;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config(const fs::path& root) {
  RunConfig cfg;
  apply_config_text(cfg,
                    "synth.train_clips = 6\n"
                    "synth.validation_clips = 4\n"
                    "synth.evaluation_clips = 4\n"
                    "synth.frames = 32\n"
                    "synth.durations = 1-2,1-3,2-4,2-5\n"
                    "model.conv2d_channels = 4,4\n"
                    "model.conv1d_channels = 6\n"
                    "model.rnn_hidden = 4\n"
                    "smc.filter_lengths = 1,3,5\n"
                    "train.epochs = 3\n"
                    "sweep.filter_sizes = 1,3\n",
                    "tiny");
  cfg.run.root = root.string();
  return cfg;
}

fs::path fresh_root(const std::string& name) {
  const auto root = fs::temp_directory_path() / ("smc_test_pipeline_" + name);
  fs::remove_all(root);
  return root;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_text(e.path());
  }
  return files;
}

}  // namespace

TEST_CASE("synth, train, sweep and eval end to end") {
  const auto root = fresh_root("e2e");
  auto cfg = tiny_config(root);

  CHECK_THROWS_AS(cmd_train(cfg), Error);  // no dataset yet
  const auto data = cmd_synth(cfg);
  CHECK(data == data_dir(cfg));
  CHECK(fs::exists(data / "config.txt"));

  std::vector<std::string> lines;
  const auto run = cmd_train(cfg, [&](const std::string& l) { lines.push_back(l); });
  CHECK(run == run_dir(cfg));
  CHECK_FALSE(lines.empty());
  CHECK(fs::exists(run / "checkpoint.smcm"));
  const auto curve = read_text(run / "loss_curve.csv");
  CHECK(curve.rfind("epoch,loss\n0,", 0) == 0);
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 5);  // header + initial + 3 epochs

  cfg.eval.postproc = PostprocMode::cdpp;
  CHECK_THROWS_AS(cmd_eval(cfg), Error);  // no sweep table yet
  const auto sweep = cmd_sweep(cfg);
  CHECK(sweep.parent_path() == run);
  CHECK(fs::exists(sweep / "postproc.tsv"));

  const auto cdpp = cmd_eval(cfg);
  cfg.eval.postproc = PostprocMode::none;
  const auto none = cmd_eval(cfg);
  cfg.eval.postproc = PostprocMode::gpp;
  const auto gpp = cmd_eval(cfg);
  CHECK(none.dir != gpp.dir);
  CHECK(cdpp.dir != gpp.dir);

  for (const auto* out : {&none, &gpp, &cdpp}) {
    CHECK(fs::exists(out->dir / "events.tsv"));
    const auto report = nlohmann::json::parse(read_text(out->dir / "report.json"));
    CHECK(report["scores"]["macro_f1"].get<double>() == doctest::Approx(out->result.macro_f1));
    CHECK(report["scores"]["split"] == "evaluation");
  }
  const auto rn = nlohmann::json::parse(read_text(none.dir / "report.json"));
  const auto rg = nlohmann::json::parse(read_text(gpp.dir / "report.json"));
  CHECK(rn["postproc"]["mode"] == "none");
  CHECK(rg["postproc"]["mode"] == "gpp");
  CHECK(rg["postproc"]["params"][0]["filter_size"] == 7);
  // only the post-processing differs in the recorded config
  auto cn = rn["config"], cg = rg["config"];
  cn.erase("eval.postproc");
  cg.erase("eval.postproc");
  CHECK(cn == cg);
  fs::remove_all(root);
}

TEST_CASE("existing outputs are kept unless forced") {
  const auto root = fresh_root("force");
  auto cfg = tiny_config(root);
  cmd_synth(cfg);
  std::ofstream(data_dir(cfg) / "stamp") << "x";
  try {
    cmd_synth(cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::exists);
  }
  CHECK(fs::exists(data_dir(cfg) / "stamp"));
  cfg.run.force = true;
  cmd_synth(cfg);
  CHECK_FALSE(fs::exists(data_dir(cfg) / "stamp"));
  for (const auto& e : fs::directory_iterator(root)) CHECK(e.path().extension() != ".partial");
  fs::remove_all(root);
}

TEST_CASE("repeated runs produce identical trees") {
  const auto a = fresh_root("det_a"), b = fresh_root("det_b");
  for (const auto& root : {a, b}) {
    auto cfg = tiny_config(root);
    cmd_synth(cfg);
    cmd_train(cfg);
    cmd_eval(cfg);
  }
  CHECK(tree(a) == tree(b));
  auto cfg = tiny_config(a);
  cfg.train.seed = 2;
  CHECK(run_dir(cfg) != run_dir(tiny_config(a)));
  CHECK(data_dir(cfg) == data_dir(tiny_config(a)));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("gradcheck command on a small model") {
  auto cfg = tiny_config(fresh_root("gc"));
  cfg.gradcheck.points = 2;
  cfg.gradcheck.model_coords_per_leaf = 4;
  std::size_t lines = 0;
  const auto report = cmd_gradcheck(cfg, [&](const std::string&) { ++lines; });
  CHECK(report.pass);
  CHECK(lines >= report.entries.size());
  CHECK_FALSE(fs::exists(cfg.run.root));
}
