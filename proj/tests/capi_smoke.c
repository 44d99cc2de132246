/* Copyright 2026 The hedist Authors
 * SPDX-License-Identifier: Apache-2.0 */

/* Compiles hedist.h as C and exercises the handle lifecycle. */

#include <stdio.h>
#include <string.h>

#include "hedist.h"

static int failures = 0;

#define CHECK(cond)                                            \
  do {                                                         \
    if (!(cond)) {                                             \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                              \
    }                                                          \
  } while (0)

static int rounds_seen = 0;
static void on_round(const hedist_round* r, void* user) {
  (void)user;
  CHECK(r->round == (uint64_t)rounds_seen + 1);
  ++rounds_seen;
}

int main(void) {
  hedist_config* cfg = NULL;
  CHECK(hedist_config_new(&cfg) == HEDIST_OK);
  CHECK(hedist_config_set(cfg, "bogus", "1") == HEDIST_E_CONFIG);
  CHECK(strstr(hedist_last_error(), "bogus") != NULL);
  CHECK(hedist_config_set(cfg, "dataset", "synth") == HEDIST_OK);
  CHECK(strlen(hedist_last_error()) == 0);
  CHECK(hedist_config_set(cfg, "synth_n", "200") == HEDIST_OK);
  CHECK(hedist_config_set(cfg, "synth_d", "6") == HEDIST_OK);
  CHECK(hedist_config_set(cfg, "profile", "small") == HEDIST_OK);
  CHECK(hedist_config_set(cfg, "backend", "mock") == HEDIST_OK);
  CHECK(hedist_config_set(cfg, "workers", "2") == HEDIST_OK);
  CHECK(hedist_config_set(cfg, "iterations", "6") == HEDIST_OK);
  CHECK(hedist_config_set(cfg, "refresh_interval", "1") == HEDIST_OK);
  CHECK(hedist_config_validate(cfg, "dist") == HEDIST_OK);
  CHECK(hedist_config_validate(cfg, "sideways") == HEDIST_E_CONFIG);

  size_t need = 0;
  CHECK(hedist_config_dump(cfg, NULL, 0, &need) == HEDIST_E_INVALID_ARGUMENT);
  CHECK(need > 1);
  char dump[4096];
  CHECK(need <= sizeof dump);
  CHECK(hedist_config_dump(cfg, dump, sizeof dump, &need) == HEDIST_OK);
  CHECK(strstr(dump, "workers=2\n") != NULL);

  hedist_hooks hooks;
  memset(&hooks, 0, sizeof hooks);
  hooks.on_round = on_round;
  hedist_run* run = NULL;
  CHECK(hedist_run_experiment(cfg, "dist", &hooks, &run) == HEDIST_OK);
  CHECK(run != NULL);
  CHECK(rounds_seen == 6);
  CHECK(hedist_run_round_count(run) == 6);

  hedist_summary s;
  CHECK(hedist_run_summary(run, &s) == HEDIST_OK);
  CHECK(s.rounds == 6);
  CHECK(s.refreshes == 12);
  CHECK(s.final_acc > 0.5);
  CHECK(s.alpha[0] == 0.5);

  hedist_round r;
  CHECK(hedist_run_round(run, 2, &r) == HEDIST_OK);
  CHECK(r.iter == 3);
  CHECK(hedist_run_round(run, 6, &r) == HEDIST_E_INVALID_ARGUMENT);

  double w[6];
  size_t dim = 0;
  CHECK(hedist_run_weights(run, w, 2, &dim) == HEDIST_E_INVALID_ARGUMENT);
  CHECK(dim == 6);
  CHECK(hedist_run_weights(run, w, 6, &dim) == HEDIST_OK);

  double alpha[4], residual = 0;
  CHECK(hedist_fit_poly("deviance", -8, 8, 20000, 1, alpha, &residual) == HEDIST_OK);
  CHECK(alpha[0] > 0.4 && alpha[1] < 0);
  CHECK(hedist_fit_poly("nope", -8, 8, 20000, 1, alpha, &residual) == HEDIST_E_CONFIG);
  CHECK(hedist_run_experiment(NULL, "dist", NULL, &run) == HEDIST_E_INVALID_ARGUMENT);
  CHECK(strcmp(hedist_status_name(HEDIST_E_PROTOCOL), "protocol-violation") == 0);

  hedist_run_free(run);
  hedist_config_free(cfg);
  if (failures == 0) printf("capi smoke: ok\n");
  return failures == 0 ? 0 : 1;
}
