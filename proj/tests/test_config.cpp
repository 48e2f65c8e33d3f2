#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "smc/config.hpp"

using namespace smc;

TEST_CASE("every key round-trips through get and set") {
  RunConfig cfg;
  for (const auto& key : config_keys()) {
    RunConfig copy;
    set_config_value(copy, key.name, get_config_value(cfg, key.name));
    CHECK(get_config_value(copy, key.name) == get_config_value(cfg, key.name));
  }
  CHECK(dump_config(cfg) == dump_config(RunConfig{}));
}

TEST_CASE("typed values") {
  RunConfig cfg;
  set_config_value(cfg, "smc.epsilon", "1e-6");
  CHECK(cfg.model.smc.epsilon == 1e-6);
  set_config_value(cfg, "smc.filter_lengths", "1, 3,5");
  CHECK(cfg.model.smc.filter_lengths == std::vector<std::size_t>{1, 3, 5});
  set_config_value(cfg, "synth.durations", "1-2,3-4,5-6,7-8");
  CHECK(cfg.synth.durations[2].max == 6);
  set_config_value(cfg, "model.smc_placement", "after_rnn");
  CHECK(cfg.model.smc_placement == SMCPlacement::after_rnn);
  set_config_value(cfg, "run.force", "yes");
  CHECK(cfg.run.force);
  set_config_value(cfg, "eval.postproc", "cdpp");
  CHECK(get_config_value(cfg, "eval.postproc") == "cdpp");
  CHECK_THROWS_AS(set_config_value(cfg, "smc.epsilon", "small"), Error);
  CHECK_THROWS_AS(set_config_value(cfg, "train.epochs", "-3"), Error);
  CHECK_THROWS_AS(set_config_value(cfg, "synth.durations", "1:2"), Error);
  CHECK_THROWS_AS(set_config_value(cfg, "smc.padding", "zero"), Error);
  CHECK_THROWS_AS(set_config_value(cfg, "smc.unknown", "1"), Error);
}

TEST_CASE("config text: comments, errors with line numbers, unknown and repeated keys") {
  RunConfig cfg;
  apply_config_text(cfg, "# comment\n\ntrain.epochs = 12  # trailing\nsmc.epsilon=0.5\n", "f.cfg");
  CHECK(cfg.train.epochs == 12);
  CHECK(cfg.model.smc.epsilon == 0.5);
  auto error_of = [](const std::string& text) {
    RunConfig c;
    try {
      apply_config_text(c, text, "f.cfg");
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(error_of("train.epochs = 1\nbogus.key = 2\n").find("f.cfg:2") != std::string::npos);
  CHECK(error_of("train.epochs = 1\nno equals sign\n").find("f.cfg:2") != std::string::npos);
  CHECK(error_of("train.epochs = 1\ntrain.epochs = 2\n").find("already set") != std::string::npos);
  CHECK(error_of("train.lr = abc\n").find("f.cfg:1") != std::string::npos);
}

TEST_CASE("file then overrides: later values win") {
  const auto path = std::filesystem::temp_directory_path() / "smc_test.cfg";
  std::ofstream(path) << "train.epochs = 7\ntrain.lr = 0.3\n";
  RunConfig cfg;
  load_config_file(cfg, path);
  set_config_value(cfg, "train.lr", "0.2");  // a flag
  CHECK(cfg.train.epochs == 7);
  CHECK(cfg.train.lr == 0.2);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_config_file(cfg, path), Error);
}

TEST_CASE("hashes depend on the selected sections only") {
  RunConfig a, b;
  set_config_value(b, "eval.postproc", "gpp");
  CHECK(config_hash(a, {"synth.", "model."}) == config_hash(b, {"synth.", "model."}));
  set_config_value(b, "smc.epsilon", "0.001");
  CHECK(config_hash(a, {"smc."}) != config_hash(b, {"smc."}));
  CHECK(config_hash(a, {}).size() == 16);
  // FNV-1a of the empty dump is the offset basis
  CHECK(config_hash(a, {"no_such_section."}) == "cbf29ce484222325");
}

TEST_CASE("validation across sections") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.model.num_classes == cfg.synth.num_classes);
  cfg.synth.label_frames = 8;
  cfg.synth.durations = {{1, 2}, {1, 2}, {1, 2}, {1, 2}};
  CHECK_THROWS_AS(cfg.validate(), Error);  // model pools time by 4
  cfg = RunConfig{};
  cfg.eval.split = "test";
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = RunConfig{};
  cfg.sweep.grid.filter_sizes = {2};
  CHECK_THROWS_AS(cfg.validate(), Error);
}
