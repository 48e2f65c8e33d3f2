#include "smc/smc.h"

#include <algorithm>
#include <cstring>
#include <exception>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "smc/config.hpp"
#include "smc/error.hpp"
#include "smc/median.hpp"
#include "smc/pipeline.hpp"

struct smc_config {
  smc::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

smc_status status_of(smc::ErrorCode code) {
  switch (code) {
    case smc::ErrorCode::invalid_argument: return SMC_ERR_INVALID_ARGUMENT;
    case smc::ErrorCode::shape_mismatch: return SMC_ERR_SHAPE;
    case smc::ErrorCode::non_finite: return SMC_ERR_NON_FINITE;
    case smc::ErrorCode::io: return SMC_ERR_IO;
    case smc::ErrorCode::format: return SMC_ERR_FORMAT;
    case smc::ErrorCode::state: return SMC_ERR_STATE;
    case smc::ErrorCode::exists: return SMC_ERR_EXISTS;
  }
  return SMC_ERR_INTERNAL;
}

template <class F>
smc_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return SMC_OK;
  } catch (const smc::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return SMC_ERR_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) smc::fail(smc::ErrorCode::invalid_argument, what);
}

void copy_out(const std::string& s, char* buffer, std::size_t capacity, std::size_t* needed) {
  if (needed) *needed = s.size();
  require(buffer != nullptr || capacity == 0, "buffer is NULL");
  if (capacity < s.size() + 1) {
    if (capacity > 0) buffer[0] = '\0';
    smc::fail(smc::ErrorCode::invalid_argument,
              "buffer too small: need " + std::to_string(s.size() + 1) + " bytes");
  }
  std::memcpy(buffer, s.c_str(), s.size() + 1);
}

smc::LogFn logger(smc_log_fn log, void* user) {
  if (!log) return {};
  return [log, user](const std::string& line) { log(line.c_str(), user); };
}

smc::PaddingPolicy padding_of(smc_padding p) {
  switch (p) {
    case SMC_PAD_REFLECT: return smc::PaddingPolicy::reflect;
    case SMC_PAD_REPLICATE: return smc::PaddingPolicy::replicate;
  }
  smc::fail(smc::ErrorCode::invalid_argument, "unknown padding value");
}

}  // namespace

extern "C" {

const char* smc_version(void) { return "1.0.0"; }

const char* smc_status_name(smc_status status) {
  switch (status) {
    case SMC_OK: return "ok";
    case SMC_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case SMC_ERR_SHAPE: return "shape_mismatch";
    case SMC_ERR_NON_FINITE: return "non_finite";
    case SMC_ERR_IO: return "io";
    case SMC_ERR_FORMAT: return "format";
    case SMC_ERR_STATE: return "state";
    case SMC_ERR_EXISTS: return "exists";
    case SMC_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* smc_last_error(void) { return g_last_error.c_str(); }

smc_status smc_config_create(smc_config** out) {
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    *out = new smc_config();
  });
}

void smc_config_destroy(smc_config* cfg) { delete cfg; }

smc_status smc_config_load_file(smc_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg && path, "config or path is NULL");
    smc::load_config_file(cfg->cfg, path);
  });
}

smc_status smc_config_set(smc_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg && key && value, "config, key or value is NULL");
    smc::set_config_value(cfg->cfg, key, value);
  });
}

smc_status smc_config_get(const smc_config* cfg, const char* key, char* buffer, size_t capacity, size_t* needed) {
  return guarded([&] {
    require(cfg && key, "config or key is NULL");
    copy_out(smc::get_config_value(cfg->cfg, key), buffer, capacity, needed);
  });
}

smc_status smc_config_dump(const smc_config* cfg, char* buffer, size_t capacity, size_t* needed) {
  return guarded([&] {
    require(cfg != nullptr, "config is NULL");
    copy_out(smc::dump_config(cfg->cfg), buffer, capacity, needed);
  });
}

size_t smc_config_key_count(void) { return smc::config_keys().size(); }

const char* smc_config_key_name(size_t index) {
  const auto& keys = smc::config_keys();
  return index < keys.size() ? keys[index].name.c_str() : nullptr;
}

const char* smc_config_key_help(size_t index) {
  const auto& keys = smc::config_keys();
  return index < keys.size() ? keys[index].help.c_str() : nullptr;
}

smc_status smc_cmd_synth(const smc_config* cfg, smc_log_fn log, void* user) {
  return guarded([&] {
    require(cfg != nullptr, "config is NULL");
    smc::cmd_synth(cfg->cfg, logger(log, user));
  });
}

smc_status smc_cmd_train(const smc_config* cfg, smc_log_fn log, void* user) {
  return guarded([&] {
    require(cfg != nullptr, "config is NULL");
    smc::cmd_train(cfg->cfg, logger(log, user));
  });
}

smc_status smc_cmd_eval(const smc_config* cfg, smc_log_fn log, void* user, double* macro_f1) {
  return guarded([&] {
    require(cfg != nullptr, "config is NULL");
    const auto outcome = smc::cmd_eval(cfg->cfg, logger(log, user));
    if (macro_f1) *macro_f1 = outcome.result.macro_f1;
  });
}

smc_status smc_cmd_sweep(const smc_config* cfg, smc_log_fn log, void* user) {
  return guarded([&] {
    require(cfg != nullptr, "config is NULL");
    smc::cmd_sweep(cfg->cfg, logger(log, user));
  });
}

smc_status smc_cmd_gradcheck(const smc_config* cfg, smc_log_fn log, void* user, int* passed, double* max_rel_err) {
  return guarded([&] {
    require(cfg != nullptr, "config is NULL");
    const auto report = smc::cmd_gradcheck(cfg->cfg, logger(log, user));
    if (passed) *passed = report.pass ? 1 : 0;
    if (max_rel_err) *max_rel_err = report.max_rel_err;
  });
}

smc_status smc_argmedian_filter(const double* x, size_t n, size_t length, smc_padding padding, double* out) {
  return guarded([&] {
    require((x && out) || n == 0, "x or out is NULL");
    smc::MedianWindowConfig mc{length, 1e-4, padding_of(padding)};
    const auto y = smc::argmedian_filter({x, n}, mc);
    std::copy(y.begin(), y.end(), out);
  });
}

smc_status smc_softmedian_window(const double* window, size_t n, double epsilon, double* out) {
  return guarded([&] {
    require(window && out, "window or out is NULL");
    *out = smc::softmedian_window(std::span<const double>(window, n), epsilon);
  });
}

smc_status smc_softmedian_filter(const double* x, size_t n, size_t length, double epsilon, smc_padding padding,
                                 double* out) {
  return guarded([&] {
    require(x && out, "x or out is NULL");
    smc::MedianWindowConfig mc{length, epsilon, padding_of(padding)};
    mc.validate();
    smc::ad::Tape tape;
    const smc::ad::Tensor input({n}, std::vector<double>(x, x + n));
    const auto y = smc::softmedian_filter(tape, input, mc);
    const auto values = y.data();
    std::copy(values.begin(), values.end(), out);
  });
}

smc_status smc_score_event_files(const char* predicted_tsv, const char* reference_tsv, double* macro_f1) {
  return guarded([&] {
    require(predicted_tsv && reference_tsv && macro_f1, "argument is NULL");
    const auto predicted = smc::read_labels(predicted_tsv);
    const auto reference = smc::read_labels(reference_tsv);
    *macro_f1 = smc::event_based_f1(predicted, reference).macro_f1;
  });
}

}  // extern "C"
