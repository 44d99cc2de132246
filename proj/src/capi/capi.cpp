// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include "hedist.h"

#include <algorithm>
#include <cstring>
#include <new>
#include <string>

#include "hedist/error.hpp"
#include "hedist/experiment.hpp"

struct hedist_config {
  hedist::ExperimentConfig cfg;
};

struct hedist_run {
  hedist::ExperimentResult res;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
hedist_status guard(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return HEDIST_OK;
  } catch (const hedist::Error& e) {
    g_last_error = e.what();
    return static_cast<hedist_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return HEDIST_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HEDIST_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return HEDIST_E_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) hedist::fail(hedist::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

hedist_round to_c(const hedist::RoundRecord& r) {
  hedist_round o{};
  o.round = r.round;
  o.iter = r.iter;
  o.wall_ms = r.wall_ms;
  o.acc = r.acc;
  o.noise_est = r.noise_est;
  o.he_add = r.ops.add;
  o.he_mul = r.ops.total_mul();
  o.rotations = r.ops.rotate;
  o.refreshes = r.refreshes;
  o.bytes_tx = r.bytes_tx;
  o.bytes_rx = r.bytes_rx;
  return o;
}

hedist::BackendKind parse_backend(const char* name) {
  const std::string s = name;
  if (s == "lattice") return hedist::BackendKind::kLattice;
  if (s == "mock") return hedist::BackendKind::kMock;
  hedist::fail(hedist::ErrorCode::kConfig, "unknown backend: " + s);
}

}  // namespace

extern "C" {

const char* hedist_last_error(void) { return g_last_error.c_str(); }

const char* hedist_status_name(hedist_status s) {
  if (s == HEDIST_OK) return "ok";
  if (s == HEDIST_E_INTERNAL) return "internal";
  return hedist::error_code_name(static_cast<hedist::ErrorCode>(s));
}

const char* hedist_version(void) { return "0.1.0"; }

hedist_status hedist_config_new(hedist_config** out) {
  return guard([&] {
    need(out, "out");
    *out = new hedist_config;
  });
}

void hedist_config_free(hedist_config* cfg) { delete cfg; }

hedist_status hedist_config_set(hedist_config* cfg, const char* key, const char* value) {
  return guard([&] {
    need(cfg, "config");
    need(key, "key");
    need(value, "value");
    cfg->cfg.set(key, value);
  });
}

hedist_status hedist_config_load(hedist_config* cfg, const char* path) {
  return guard([&] {
    need(cfg, "config");
    need(path, "path");
    cfg->cfg.load(path);
  });
}

hedist_status hedist_config_dump(const hedist_config* cfg, char* buf, size_t cap, size_t* needed) {
  return guard([&] {
    need(cfg, "config");
    const std::string s = cfg->cfg.dump();
    if (needed) *needed = s.size() + 1;
    if (buf == nullptr || cap < s.size() + 1)
      hedist::fail(hedist::ErrorCode::kInvalidArgument, "buffer too small for config dump");
    std::memcpy(buf, s.c_str(), s.size() + 1);
  });
}

hedist_status hedist_config_validate(const hedist_config* cfg, const char* mode) {
  return guard([&] {
    need(cfg, "config");
    need(mode, "mode");
    cfg->cfg.validate(hedist::parse_mode(mode));
  });
}

hedist_status hedist_run_experiment(const hedist_config* cfg, const char* mode,
                                    const hedist_hooks* hooks, hedist_run** out) {
  return guard([&] {
    need(cfg, "config");
    need(mode, "mode");
    need(out, "out");
    *out = nullptr;
    std::function<void(const hedist::RoundRecord&)> on_round;
    std::function<void(uint16_t)> on_listen;
    bool external = false;
    if (hooks) {
      if (hooks->on_round) {
        on_round = [hooks](const hedist::RoundRecord& r) {
          const hedist_round c = to_c(r);
          hooks->on_round(&c, hooks->user);
        };
      }
      if (hooks->on_listen)
        on_listen = [hooks](uint16_t port) { hooks->on_listen(port, hooks->user); };
      external = hooks->external_workers != 0;
    }
    auto run = std::make_unique<hedist_run>();
    run->res = hedist::run_experiment(cfg->cfg, hedist::parse_mode(mode), on_round, on_listen,
                                      external);
    *out = run.release();
  });
}

void hedist_run_free(hedist_run* run) { delete run; }

hedist_status hedist_run_summary(const hedist_run* run, hedist_summary* out) {
  return guard([&] {
    need(run, "run");
    need(out, "out");
    const auto& r = run->res.run;
    hedist_summary s{};
    s.final_acc = r.final_acc;
    s.test_acc = run->res.test_acc;
    s.wall_seconds = r.wall_seconds;
    s.compute_seconds = r.ops.compute_seconds;
    s.comm_seconds = r.comm.comm_seconds;
    s.serialize_seconds = r.serialize_seconds;
    s.rounds = r.rounds.size();
    s.he_add = r.ops.add;
    s.he_mul = r.ops.total_mul();
    s.rotations = r.ops.rotate;
    s.refreshes = r.rounds.empty() ? r.ops.refresh : r.rounds.back().refreshes;
    s.bytes_tx = r.comm.bytes_tx;
    s.bytes_rx = r.comm.bytes_rx;
    s.messages = r.comm.msgs_tx;
    std::copy(run->res.poly.alpha.begin(), run->res.poly.alpha.end(), s.alpha);
    s.poly_residual = run->res.poly.residual;
    *out = s;
  });
}

size_t hedist_run_round_count(const hedist_run* run) {
  return run ? run->res.run.rounds.size() : 0;
}

hedist_status hedist_run_round(const hedist_run* run, size_t index, hedist_round* out) {
  return guard([&] {
    need(run, "run");
    need(out, "out");
    if (index >= run->res.run.rounds.size())
      hedist::fail(hedist::ErrorCode::kInvalidArgument, "round index out of range");
    *out = to_c(run->res.run.rounds[index]);
  });
}

hedist_status hedist_run_weights(const hedist_run* run, double* buf, size_t cap, size_t* dim) {
  return guard([&] {
    need(run, "run");
    const auto& w = run->res.run.w;
    if (dim) *dim = w.size();
    if (buf == nullptr || cap < w.size())
      hedist::fail(hedist::ErrorCode::kInvalidArgument, "buffer too small for weights");
    std::copy(w.begin(), w.end(), buf);
  });
}

hedist_status hedist_run_write_outputs(const hedist_run* run, const hedist_config* cfg,
                                       const char* dir) {
  return guard([&] {
    need(run, "run");
    need(cfg, "config");
    need(dir, "dir");
    hedist::write_outputs(dir, cfg->cfg, run->res);
  });
}

hedist_status hedist_fit_poly(const char* loss, double lo, double hi, size_t samples, uint64_t seed,
                              double alpha[4], double* residual) {
  return guard([&] {
    need(loss, "loss");
    need(alpha, "alpha");
    if (!(lo < hi)) hedist::fail(hedist::ErrorCode::kConfig, "fit interval must have lo < hi");
    hedist::Prng rng(seed);
    const hedist::PolyApprox p =
        hedist::fit_poly_grad(hedist::parse_loss(loss), 3, lo, hi, samples, rng);
    std::copy(p.alpha.begin(), p.alpha.end(), alpha);
    if (residual) *residual = p.residual;
  });
}

hedist_status hedist_published_poly(const char* loss, double alpha[4], double* residual) {
  return guard([&] {
    need(loss, "loss");
    need(alpha, "alpha");
    const hedist::PolyApprox p = hedist::published_coeffs(hedist::parse_loss(loss));
    std::copy(p.alpha.begin(), p.alpha.end(), alpha);
    if (residual) *residual = hedist::dense_grid_residual(p);
  });
}

hedist_status hedist_bench_ops(const char* profile, const char* backend, int reps, uint64_t seed,
                               hedist_op_timing* out, size_t cap, size_t* count) {
  return guard([&] {
    need(profile, "profile");
    need(backend, "backend");
    const auto t = hedist::bench_ops(hedist::HeParams::from_profile(profile),
                                     parse_backend(backend), reps, seed);
    if (count) *count = t.size();
    for (size_t i = 0; i < t.size() && i < cap && out; ++i) {
      hedist_op_timing o{};
      std::strncpy(o.op, t[i].op.c_str(), sizeof o.op - 1);
      o.median_us = t[i].median_us;
      o.level = t[i].level;
      o.bytes = t[i].bytes;
      out[i] = o;
    }
  });
}

hedist_status hedist_worker_run(const char* host, uint16_t port, uint32_t worker_id,
                                double connect_timeout_seconds) {
  return guard([&] {
    need(host, "host");
    auto ep = hedist::tcp_connect(host, port, connect_timeout_seconds);
    hedist::worker_run(*ep, worker_id);
  });
}

}  // extern "C"
