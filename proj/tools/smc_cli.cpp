// smc-cli: synth / train / eval / sweep / gradcheck over the C API.
//
// Every config key is also a flag (--smc.epsilon 1e-4). Values are applied in
// the order default < --config file < flags.

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "smc/smc.h"

namespace {

struct KeyFlag {
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
};

struct Command {
  CLI::App* app = nullptr;
  std::string config_file;
  std::vector<KeyFlag> flags;
};

void print_line(const char* line, void*) {
  std::printf("%s\n", line);
  std::fflush(stdout);
}

std::string default_value(const smc_config* cfg, const char* key) {
  std::size_t needed = 0;
  smc_config_get(cfg, key, nullptr, 0, &needed);
  std::string buf(needed + 1, '\0');
  smc_config_get(cfg, key, buf.data(), buf.size(), nullptr);
  buf.resize(needed);
  return buf;
}

void add_command(CLI::App& app, Command& cmd, const char* name, const char* description, const smc_config* defaults) {
  cmd.app = app.add_subcommand(name, description);
  cmd.app->add_option("-c,--config", cmd.config_file, "key = value config file")->check(CLI::ExistingFile);
  const std::size_t n = smc_config_key_count();
  cmd.flags.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& flag = cmd.flags[i];
    flag.key = smc_config_key_name(i);
    const auto current = default_value(defaults, flag.key.c_str());
    flag.option = cmd.app->add_option("--" + flag.key, flag.value,
                                      std::string(smc_config_key_help(i)) + " [" + current + "]")
                      ->group("Config keys");
    // Boolean keys may be given bare: --run.force
    if (current == "true" || current == "false") flag.option->expected(0, 1);
  }
}

int fail_with(smc_status status) {
  std::fprintf(stderr, "error (%s): %s\n", smc_status_name(status), smc_last_error());
  return 1;
}

// Builds the effective config of the chosen command.
smc_status resolve(const Command& cmd, smc_config** out) {
  smc_config* cfg = nullptr;
  auto st = smc_config_create(&cfg);
  if (st != SMC_OK) return st;
  if (!cmd.config_file.empty()) st = smc_config_load_file(cfg, cmd.config_file.c_str());
  for (const auto& flag : cmd.flags) {
    if (st != SMC_OK) break;
    if (flag.option->count() == 0) continue;
    const auto& given = flag.option->results();
    const std::string value = given.empty() || given.front().empty() ? "true" : flag.value;
    st = smc_config_set(cfg, flag.key.c_str(), value.c_str());
  }
  if (st != SMC_OK) {
    smc_config_destroy(cfg);
    return st;
  }
  *out = cfg;
  return SMC_OK;
}

}  // namespace

int main(int argc, char** argv) {
  smc_config* defaults = nullptr;
  if (smc_config_create(&defaults) != SMC_OK) return fail_with(SMC_ERR_INTERNAL);

  CLI::App app{"Soft-median choice sound event detection toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(smc_version()));

  Command synth, train, eval, sweep, gradcheck, config;
  add_command(app, synth, "synth", "generate the synthetic dataset", defaults);
  add_command(app, train, "train", "train a model; writes the checkpoint and loss curve", defaults);
  add_command(app, eval, "eval", "evaluate a checkpoint with none, gpp or cdpp post-processing", defaults);
  add_command(app, sweep, "sweep", "grid-search per-class post-processing on a split", defaults);
  add_command(app, gradcheck, "gradcheck", "finite-difference check of every gradient", defaults);
  add_command(app, config, "config", "print the effective config", defaults);
  smc_config_destroy(defaults);

  CLI11_PARSE(app, argc, argv);

  const std::pair<Command*, int> commands[] = {{&synth, 0}, {&train, 1}, {&eval, 2},
                                               {&sweep, 3}, {&gradcheck, 4}, {&config, 5}};
  for (const auto& [cmd, id] : commands) {
    if (!cmd->app->parsed()) continue;
    smc_config* cfg = nullptr;
    auto st = resolve(*cmd, &cfg);
    if (st != SMC_OK) return fail_with(st);
    int exit_code = 0;
    switch (id) {
      case 0: st = smc_cmd_synth(cfg, print_line, nullptr); break;
      case 1: st = smc_cmd_train(cfg, print_line, nullptr); break;
      case 2: st = smc_cmd_eval(cfg, print_line, nullptr, nullptr); break;
      case 3: st = smc_cmd_sweep(cfg, print_line, nullptr); break;
      case 4: {
        int passed = 0;
        st = smc_cmd_gradcheck(cfg, print_line, nullptr, &passed, nullptr);
        if (st == SMC_OK && !passed) exit_code = 2;
        break;
      }
      case 5: {
        std::size_t needed = 0;
        smc_config_dump(cfg, nullptr, 0, &needed);
        std::string text(needed + 1, '\0');
        st = smc_config_dump(cfg, text.data(), text.size(), nullptr);
        if (st == SMC_OK) std::fputs(text.c_str(), stdout);
        break;
      }
    }
    smc_config_destroy(cfg);
    if (st != SMC_OK) return fail_with(st);
    return exit_code;
  }
  return 0;
}
