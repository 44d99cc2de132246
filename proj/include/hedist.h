/* Copyright 2026 The hedist Authors
 * SPDX-License-Identifier: Apache-2.0 */

/* C interface to libhedist. Every function returns HEDIST_OK or one of the
 * error codes below; hedist_last_error() then describes the failure on the
 * calling thread. Handles are opaque and owned by the caller. */

#ifndef HEDIST_H_
#define HEDIST_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HEDIST_API __declspec(dllexport)
#else
#define HEDIST_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hedist_status {
  HEDIST_OK = 0,
  HEDIST_E_STRUCTURAL = 1,
  HEDIST_E_DEPTH_EXHAUSTED = 2,
  HEDIST_E_SCALE_MISMATCH = 3,
  HEDIST_E_KEY_MISSING = 4,
  HEDIST_E_ENCODING_OVERFLOW = 5,
  HEDIST_E_LAYOUT_INFEASIBLE = 6,
  HEDIST_E_FIT_FAILED = 7,
  HEDIST_E_TRANSPORT_CLOSED = 8,
  HEDIST_E_FRAME_TRUNCATED = 9,
  HEDIST_E_BAD_VERSION = 10,
  HEDIST_E_OVERSIZE = 11,
  HEDIST_E_BAD_KIND = 12,
  HEDIST_E_CONFIG = 13,
  HEDIST_E_PROTOCOL = 14,
  HEDIST_E_IO = 15,
  HEDIST_E_SECRET_KEY_REQUIRED = 16,
  HEDIST_E_INVALID_ARGUMENT = 17,
  HEDIST_E_INTERNAL = 99
} hedist_status;

typedef struct hedist_config hedist_config;
typedef struct hedist_run hedist_run;

/* Message for the last failure on this thread; empty after success. */
HEDIST_API const char* hedist_last_error(void);
HEDIST_API const char* hedist_status_name(hedist_status s);
HEDIST_API const char* hedist_version(void);

/* Configuration: flat key=value settings with defaults for every key. */
HEDIST_API hedist_status hedist_config_new(hedist_config** out);
HEDIST_API void hedist_config_free(hedist_config* cfg);
HEDIST_API hedist_status hedist_config_set(hedist_config* cfg, const char* key, const char* value);
HEDIST_API hedist_status hedist_config_load(hedist_config* cfg, const char* path);
/* Copies the full key=value listing into buf. *needed receives the size
 * including the terminator; a short buffer gets HEDIST_E_INVALID_ARGUMENT. */
HEDIST_API hedist_status hedist_config_dump(const hedist_config* cfg, char* buf, size_t cap,
                                            size_t* needed);
/* mode is one of "plain", "enc", "dist", "central". */
HEDIST_API hedist_status hedist_config_validate(const hedist_config* cfg, const char* mode);

typedef struct hedist_round {
  uint64_t round;
  uint64_t iter;
  double wall_ms;
  double acc;
  double noise_est;
  uint64_t he_add;
  uint64_t he_mul;
  uint64_t rotations;
  uint64_t refreshes;
  uint64_t bytes_tx;
  uint64_t bytes_rx;
} hedist_round;

typedef void (*hedist_round_fn)(const hedist_round* r, void* user);
typedef void (*hedist_listen_fn)(uint16_t port, void* user);

typedef struct hedist_hooks {
  hedist_round_fn on_round;   /* may be NULL */
  hedist_listen_fn on_listen; /* tcp carrier; may be NULL */
  void* user;
  /* Non-zero: the server waits for workers started elsewhere (see
   * hedist_worker_run) instead of starting worker threads. */
  int external_workers;
} hedist_hooks;

HEDIST_API hedist_status hedist_run_experiment(const hedist_config* cfg, const char* mode,
                                               const hedist_hooks* hooks, hedist_run** out);
HEDIST_API void hedist_run_free(hedist_run* run);

typedef struct hedist_summary {
  double final_acc;
  double test_acc; /* 0 when no held-out split was made */
  double wall_seconds;
  double compute_seconds;
  double comm_seconds;
  double serialize_seconds;
  uint64_t rounds;
  uint64_t he_add;
  uint64_t he_mul;
  uint64_t rotations;
  uint64_t refreshes;
  uint64_t bytes_tx;
  uint64_t bytes_rx;
  uint64_t messages;
  double alpha[4];
  double poly_residual;
} hedist_summary;

HEDIST_API hedist_status hedist_run_summary(const hedist_run* run, hedist_summary* out);
HEDIST_API size_t hedist_run_round_count(const hedist_run* run);
HEDIST_API hedist_status hedist_run_round(const hedist_run* run, size_t index, hedist_round* out);
/* Model weights; *dim receives the dimension even when cap is too small. */
HEDIST_API hedist_status hedist_run_weights(const hedist_run* run, double* buf, size_t cap,
                                            size_t* dim);
/* metrics.csv, manifest.txt and plot.py under dir. */
HEDIST_API hedist_status hedist_run_write_outputs(const hedist_run* run, const hedist_config* cfg,
                                                  const char* dir);

/* Cubic least-squares fit of the descent direction of loss ("deviance",
 * "hinge", "huber") on [lo, hi]; residual is the dense-grid sup error. */
HEDIST_API hedist_status hedist_fit_poly(const char* loss, double lo, double hi, size_t samples,
                                         uint64_t seed, double alpha[4], double* residual);
/* The coefficients shipped as defaults for loss. */
HEDIST_API hedist_status hedist_published_poly(const char* loss, double alpha[4],
                                               double* residual);

typedef struct hedist_op_timing {
  char op[16];
  double median_us;
  int level;
  size_t bytes;
} hedist_op_timing;

/* Fills up to cap entries; *count receives the number of timed operations. */
HEDIST_API hedist_status hedist_bench_ops(const char* profile, const char* backend, int reps,
                                          uint64_t seed, hedist_op_timing* out, size_t cap,
                                          size_t* count);

/* Connects to a parameter server over TCP and serves as worker worker_id
 * until the server finishes. */
HEDIST_API hedist_status hedist_worker_run(const char* host, uint16_t port, uint32_t worker_id,
                                           double connect_timeout_seconds);

#ifdef __cplusplus
}
#endif

#endif /* HEDIST_H_ */
