/* C interface to the soft-median choice toolkit.
 *
 * Every function returns an smc_status; on failure smc_last_error() describes
 * the most recent error of the calling thread. Handles are opaque and owned by
 * the caller. No C++ exception crosses this boundary. */
#ifndef SMC_SMC_H
#define SMC_SMC_H

#include <stddef.h>

#if defined(_WIN32)
#define SMC_API __declspec(dllexport)
#else
#define SMC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum smc_status {
  SMC_OK = 0,
  SMC_ERR_INVALID_ARGUMENT = 1,
  SMC_ERR_SHAPE = 2,
  SMC_ERR_NON_FINITE = 3,
  SMC_ERR_IO = 4,
  SMC_ERR_FORMAT = 5,
  SMC_ERR_STATE = 6,
  SMC_ERR_EXISTS = 7,
  SMC_ERR_INTERNAL = 99
} smc_status;

typedef enum smc_padding { SMC_PAD_REFLECT = 0, SMC_PAD_REPLICATE = 1 } smc_padding;

typedef struct smc_config smc_config;

/* Receives one line of progress output (no trailing newline). */
typedef void (*smc_log_fn)(const char* line, void* user);

SMC_API const char* smc_version(void);
SMC_API const char* smc_status_name(smc_status status);
/* Message of the last failure on this thread; "" when there was none. */
SMC_API const char* smc_last_error(void);

/* ---- configuration ---- */
SMC_API smc_status smc_config_create(smc_config** out);
SMC_API void smc_config_destroy(smc_config* cfg);
SMC_API smc_status smc_config_load_file(smc_config* cfg, const char* path);
SMC_API smc_status smc_config_set(smc_config* cfg, const char* key, const char* value);
/* String results: writes up to `capacity` bytes including the terminator
 * and stores the full length (without terminator) in *needed when given.
 * A too-small buffer yields SMC_ERR_INVALID_ARGUMENT with *needed set. */
SMC_API smc_status smc_config_get(const smc_config* cfg, const char* key, char* buffer, size_t capacity,
                                  size_t* needed);
SMC_API smc_status smc_config_dump(const smc_config* cfg, char* buffer, size_t capacity, size_t* needed);
SMC_API size_t smc_config_key_count(void);
/* NULL when index is out of range. */
SMC_API const char* smc_config_key_name(size_t index);
SMC_API const char* smc_config_key_help(size_t index);

/* ---- commands ---- */
/* The directory each command wrote is reported through `log`. */
SMC_API smc_status smc_cmd_synth(const smc_config* cfg, smc_log_fn log, void* user);
SMC_API smc_status smc_cmd_train(const smc_config* cfg, smc_log_fn log, void* user);
/* macro_f1 may be NULL. */
SMC_API smc_status smc_cmd_eval(const smc_config* cfg, smc_log_fn log, void* user, double* macro_f1);
SMC_API smc_status smc_cmd_sweep(const smc_config* cfg, smc_log_fn log, void* user);
/* SMC_OK means the suite ran; *passed says whether every check passed. */
SMC_API smc_status smc_cmd_gradcheck(const smc_config* cfg, smc_log_fn log, void* user, int* passed,
                                     double* max_rel_err);

/* ---- numeric entry points ---- */
SMC_API smc_status smc_argmedian_filter(const double* x, size_t n, size_t length, smc_padding padding, double* out);
SMC_API smc_status smc_softmedian_window(const double* window, size_t n, double epsilon, double* out);
SMC_API smc_status smc_softmedian_filter(const double* x, size_t n, size_t length, double epsilon,
                                         smc_padding padding, double* out);
/* Macro event-based F1 of two event TSV files with the default collars. */
SMC_API smc_status smc_score_event_files(const char* predicted_tsv, const char* reference_tsv, double* macro_f1);

#ifdef __cplusplus
}
#endif

#endif /* SMC_SMC_H */
