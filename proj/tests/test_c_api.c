/* Plain C client of the shared library. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "smc/smc.h"

static int failures = 0;

#define EXPECT(cond)                                             \
  do {                                                           \
    if (!(cond)) {                                               \
      fprintf(stderr, "%s:%d: failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                \
    }                                                            \
  } while (0)

static void count_lines(const char* line, void* user) {
  (void)line;
  ++*(int*)user;
}

static void test_config(void) {
  smc_config* cfg = NULL;
  char small[4];
  char buf[64];
  size_t needed = 0;
  size_t i, n;
  char* dump;

  EXPECT(smc_config_create(&cfg) == SMC_OK);
  EXPECT(smc_config_create(NULL) == SMC_ERR_INVALID_ARGUMENT);

  EXPECT(smc_config_set(cfg, "train.epochs", "17") == SMC_OK);
  EXPECT(smc_config_get(cfg, "train.epochs", buf, sizeof buf, &needed) == SMC_OK);
  EXPECT(strcmp(buf, "17") == 0);
  EXPECT(needed == 2);

  EXPECT(smc_config_get(cfg, "smc.padding", small, 3, &needed) == SMC_ERR_INVALID_ARGUMENT);
  EXPECT(needed == strlen("reflect"));

  EXPECT(smc_config_set(cfg, "no.such_key", "1") == SMC_ERR_INVALID_ARGUMENT);
  EXPECT(strstr(smc_last_error(), "no.such_key") != NULL);
  EXPECT(smc_config_set(cfg, "train.lr", "fast") == SMC_ERR_INVALID_ARGUMENT);
  EXPECT(smc_config_load_file(cfg, "/nonexistent/smc.cfg") == SMC_ERR_IO);

  EXPECT(smc_config_dump(cfg, NULL, 0, &needed) == SMC_ERR_INVALID_ARGUMENT);
  dump = malloc(needed + 1);
  EXPECT(smc_config_dump(cfg, dump, needed + 1, &needed) == SMC_OK);
  EXPECT(strstr(dump, "train.epochs = 17\n") != NULL);
  free(dump);

  n = smc_config_key_count();
  EXPECT(n > 40);
  for (i = 0; i < n; ++i) {
    EXPECT(smc_config_key_name(i) != NULL);
    EXPECT(strlen(smc_config_key_help(i)) > 0);
  }
  EXPECT(smc_config_key_name(n) == NULL);
  smc_config_destroy(cfg);
  smc_config_destroy(NULL);
}

static void test_numeric(void) {
  const double x[5] = {5, 1, 9, 2, 8};
  const double w[3] = {1, 2, 100};
  double out[5];
  double v = 0;

  EXPECT(smc_argmedian_filter(x, 5, 3, SMC_PAD_REFLECT, out) == SMC_OK);
  EXPECT(out[0] == 1 && out[1] == 5 && out[2] == 2 && out[3] == 8 && out[4] == 2);
  EXPECT(smc_argmedian_filter(x, 5, 3, SMC_PAD_REPLICATE, out) == SMC_OK);
  EXPECT(out[0] == 5 && out[1] == 5 && out[2] == 2 && out[3] == 8 && out[4] == 8);
  EXPECT(smc_argmedian_filter(x, 5, 4, SMC_PAD_REFLECT, out) == SMC_ERR_INVALID_ARGUMENT);
  EXPECT(smc_argmedian_filter(NULL, 5, 3, SMC_PAD_REFLECT, out) == SMC_ERR_INVALID_ARGUMENT);

  EXPECT(smc_softmedian_window(w, 3, 0.01, &v) == SMC_OK);
  EXPECT(fabs(v - 1.99030) < 1e-4);
  EXPECT(smc_softmedian_window(w, 3, 0.0, &v) == SMC_ERR_INVALID_ARGUMENT);

  EXPECT(smc_softmedian_filter(x, 5, 3, 1e-8, SMC_PAD_REFLECT, out) == SMC_OK);
  EXPECT(fabs(out[2] - 2.0) < 1e-4);
  EXPECT(fabs(out[3] - 8.0) < 1e-4);
}

static void test_scoring(void) {
  const char* path = "c_api_events.tsv";
  double f1 = -1;
  FILE* f = fopen(path, "w");
  fputs("filename\tonset\toffset\tevent_label\na\t1.0\t2.0\tdog\na\t3.0\t3.5\tcat\n", f);
  fclose(f);
  EXPECT(smc_score_event_files(path, path, &f1) == SMC_OK);
  EXPECT(f1 == 1.0);
  EXPECT(smc_score_event_files("missing.tsv", path, &f1) == SMC_ERR_IO);
  remove(path);
}

static void test_commands(void) {
  smc_config* cfg = NULL;
  int lines = 0, passed = 0;
  double err = -1;
  smc_config_create(&cfg);
  smc_config_set(cfg, "run.root", "c_api_runs");
  EXPECT(smc_cmd_train(cfg, count_lines, &lines) == SMC_ERR_STATE);
  EXPECT(strlen(smc_last_error()) > 0);
  smc_config_set(cfg, "gradcheck.points", "1");
  smc_config_set(cfg, "gradcheck.model_coords", "2");
  smc_config_set(cfg, "model.conv2d_channels", "4,4");
  smc_config_set(cfg, "model.conv1d_channels", "4");
  smc_config_set(cfg, "model.rnn_hidden", "4");
  smc_config_set(cfg, "smc.filter_lengths", "1,3");
  EXPECT(smc_cmd_gradcheck(cfg, count_lines, &lines, &passed, &err) == SMC_OK);
  EXPECT(passed == 1);
  EXPECT(err >= 0 && err < 1e-3);
  EXPECT(lines > 0);
  EXPECT(smc_cmd_synth(NULL, NULL, NULL) == SMC_ERR_INVALID_ARGUMENT);
  smc_config_destroy(cfg);
}

int main(void) {
  EXPECT(strlen(smc_version()) > 0);
  EXPECT(strcmp(smc_status_name(SMC_ERR_EXISTS), "exists") == 0);
  test_config();
  test_numeric();
  test_scoring();
  test_commands();
  if (failures) {
    fprintf(stderr, "%d failure(s)\n", failures);
    return 1;
  }
  printf("c api: all checks passed\n");
  return 0;
}
