// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Talks to the library only through hedist.h.

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hedist.h"

extern char** environ;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int report(hedist_status s, const char* what) {
  std::fprintf(stderr, "hedist: %s failed (%s): %s\n", what, hedist_status_name(s),
               hedist_last_error());
  return s == HEDIST_E_CONFIG || s == HEDIST_E_INVALID_ARGUMENT ? kExitConfig : kExitRuntime;
}

struct ConfigArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  bool quiet = false;
};

void add_config_args(CLI::App* sub, ConfigArgs& a) {
  sub->add_option("-c,--config", a.config, "key=value config file (a manifest works too)");
  sub->add_option("-s,--set", a.sets, "override one key, as key=value; repeatable");
  sub->add_option("-o,--out", a.out, "output directory (overrides output_dir)");
  sub->add_flag("-q,--quiet", a.quiet, "no per-round progress");
}

// Returns an exit code, or -1 on success with *cfg filled in.
int build_config(const ConfigArgs& a, hedist_config** cfg) {
  hedist_status s = hedist_config_new(cfg);
  if (s != HEDIST_OK) return report(s, "config");
  if (!a.config.empty() && (s = hedist_config_load(*cfg, a.config.c_str())) != HEDIST_OK)
    return report(s, "loading config");
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "hedist: --set expects key=value, got '%s'\n", kv.c_str());
      return kExitConfig;
    }
    s = hedist_config_set(*cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (s != HEDIST_OK) return report(s, "--set");
  }
  if (!a.out.empty() && (s = hedist_config_set(*cfg, "output_dir", a.out.c_str())) != HEDIST_OK)
    return report(s, "--out");
  return -1;
}

std::string config_value(const hedist_config* cfg, const std::string& key) {
  size_t need = 0;
  hedist_config_dump(cfg, nullptr, 0, &need);
  std::string buf(need, '\0');
  if (hedist_config_dump(cfg, buf.data(), buf.size(), &need) != HEDIST_OK) return "";
  const std::string prefix = key + "=";
  size_t pos = 0;
  while (pos < buf.size()) {
    const size_t end = buf.find('\n', pos);
    const std::string line = buf.substr(pos, end - pos);
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return "";
}

void print_round(const hedist_round* r, void* user) {
  if (*static_cast<bool*>(user)) return;
  std::printf("round %3llu  iter %4llu  acc %.4f  wall %9.1f ms  mul %llu  rot %llu  tx %llu B\n",
              static_cast<unsigned long long>(r->round), static_cast<unsigned long long>(r->iter),
              r->acc, r->wall_ms, static_cast<unsigned long long>(r->he_mul),
              static_cast<unsigned long long>(r->rotations),
              static_cast<unsigned long long>(r->bytes_tx));
  std::fflush(stdout);
}

// Worker processes for the TCP carrier, started once the server listens.
struct Spawner {
  std::string host;
  int workers = 0;
  std::vector<pid_t> pids;
  bool failed = false;

  static void on_listen(uint16_t port, void* user) {
    auto* self = static_cast<Spawner*>(user);
    const std::string port_s = std::to_string(port);
    for (int i = 0; i < self->workers; ++i) {
      const std::string id = std::to_string(i);
      std::vector<std::string> args = {"hedist-cli", "worker", "--host", self->host,
                                       "--port",     port_s,   "--id",   id};
      std::vector<char*> argv;
      for (auto& s : args) argv.push_back(s.data());
      argv.push_back(nullptr);
      pid_t pid = 0;
      if (posix_spawn(&pid, "/proc/self/exe", nullptr, nullptr, argv.data(), environ) != 0) {
        self->failed = true;
        continue;
      }
      self->pids.push_back(pid);
    }
  }

  // Reaps the workers; kills them first if the server gave up.
  bool reap(bool kill_first) {
    bool ok = !failed;
    for (pid_t p : pids) {
      if (kill_first) ::kill(p, SIGTERM);
      int st = 0;
      ::waitpid(p, &st, 0);
      if (!kill_first && !(WIFEXITED(st) && WEXITSTATUS(st) == 0)) ok = false;
    }
    pids.clear();
    return ok;
  }
};

// Single round callback user data: the progress printer's quiet flag plus,
// for tcp, the spawner.
struct RunUser {
  bool quiet = false;
  Spawner* spawner = nullptr;
};

int run_mode(const ConfigArgs& a, const char* mode) {
  hedist_config* cfg = nullptr;
  if (int rc = build_config(a, &cfg); rc >= 0) {
    hedist_config_free(cfg);
    return rc;
  }
  if (hedist_status s = hedist_config_validate(cfg, mode); s != HEDIST_OK) {
    const int rc = report(s, "validating config");
    hedist_config_free(cfg);
    return rc;
  }

  RunUser user;
  user.quiet = a.quiet;
  Spawner spawner;
  hedist_hooks hooks{};
  hooks.on_round = [](const hedist_round* r, void* u) {
    print_round(r, &static_cast<RunUser*>(u)->quiet);
  };
  hooks.user = &user;
  if (std::string(mode) == "dist" && config_value(cfg, "carrier") == "tcp") {
    spawner.host = config_value(cfg, "host");
    spawner.workers = std::stoi(config_value(cfg, "workers"));
    user.spawner = &spawner;
    hooks.external_workers = 1;
    hooks.on_listen = [](uint16_t port, void* u) {
      Spawner::on_listen(port, static_cast<RunUser*>(u)->spawner);
    };
  }

  hedist_run* run = nullptr;
  const hedist_status s = hedist_run_experiment(cfg, mode, &hooks, &run);
  const bool workers_ok = spawner.reap(s != HEDIST_OK);
  if (s != HEDIST_OK) {
    const int rc = report(s, mode);
    hedist_config_free(cfg);
    return rc;
  }
  int rc = kExitOk;
  if (!workers_ok) {
    std::fprintf(stderr, "hedist: a worker process did not exit cleanly\n");
    rc = kExitRuntime;
  }

  hedist_summary sum{};
  hedist_run_summary(run, &sum);
  std::printf(
      "%s: rounds %llu  validation acc %.4f  test acc %s\n"
      "  wall %.2f s  compute %.2f s  comm %.3f s  serialize %.3f s\n"
      "  he_add %llu  he_mul %llu  rotations %llu  refreshes %llu  bytes tx %llu rx %llu\n"
      "  poly alpha %.6g %.6g %.6g %.6g  residual %.4f\n",
      mode, static_cast<unsigned long long>(sum.rounds), sum.final_acc,
      sum.test_acc > 0 ? std::to_string(sum.test_acc).substr(0, 6).c_str() : "n/a",
      sum.wall_seconds, sum.compute_seconds, sum.comm_seconds, sum.serialize_seconds,
      static_cast<unsigned long long>(sum.he_add), static_cast<unsigned long long>(sum.he_mul),
      static_cast<unsigned long long>(sum.rotations),
      static_cast<unsigned long long>(sum.refreshes),
      static_cast<unsigned long long>(sum.bytes_tx), static_cast<unsigned long long>(sum.bytes_rx),
      sum.alpha[0], sum.alpha[1], sum.alpha[2], sum.alpha[3], sum.poly_residual);

  const std::string dir = config_value(cfg, "output_dir");
  if (hedist_status w = hedist_run_write_outputs(run, cfg, dir.c_str()); w != HEDIST_OK) {
    rc = report(w, "writing outputs");
  } else {
    std::printf("  outputs in %s\n", dir.c_str());
  }
  hedist_run_free(run);
  hedist_config_free(cfg);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Encrypted logistic-regression training with a refreshing parameter server"};
  app.require_subcommand(1);
  app.set_version_flag("--version", hedist_version());

  struct {
    std::string loss = "deviance";
    double lo = -8, hi = 8;
    size_t samples = 100000;
    uint64_t seed = 1;
  } fit;
  auto* fit_cmd = app.add_subcommand("fit-poly", "fit the cubic descent-direction polynomial");
  fit_cmd->add_option("--loss", fit.loss, "deviance, hinge or huber")->capture_default_str();
  fit_cmd->add_option("--lo", fit.lo)->capture_default_str();
  fit_cmd->add_option("--hi", fit.hi)->capture_default_str();
  fit_cmd->add_option("--samples", fit.samples)->capture_default_str();
  fit_cmd->add_option("--seed", fit.seed)->capture_default_str();

  ConfigArgs plain_a, enc_a, dist_a, central_a;
  auto* plain_cmd = app.add_subcommand("train-plain", "plaintext reference trainer");
  add_config_args(plain_cmd, plain_a);
  auto* enc_cmd = app.add_subcommand("train-enc", "single-process encrypted trainer");
  add_config_args(enc_cmd, enc_a);
  auto* dist_cmd = app.add_subcommand("train-dist", "parameter server with encrypted workers");
  add_config_args(dist_cmd, dist_a);
  auto* central_cmd =
      app.add_subcommand("baseline-central", "deep-chain trainer with a timed bootstrap stub");
  add_config_args(central_cmd, central_a);

  struct {
    std::string profile = "distributed";
    std::string backend = "lattice";
    int reps = 5;
    uint64_t seed = 1;
  } bench;
  auto* bench_cmd = app.add_subcommand("bench-ops", "time each homomorphic operation");
  bench_cmd->add_option("--profile", bench.profile)->capture_default_str();
  bench_cmd->add_option("--backend", bench.backend)->capture_default_str();
  bench_cmd->add_option("--reps", bench.reps)->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed)->capture_default_str();

  struct {
    std::string host = "127.0.0.1";
    uint16_t port = 0;
    uint32_t id = 0;
    double timeout = 30;
  } worker;
  auto* worker_cmd = app.add_subcommand("worker", "join a parameter server over TCP");
  worker_cmd->add_option("--host", worker.host)->capture_default_str();
  worker_cmd->add_option("--port", worker.port)->required();
  worker_cmd->add_option("--id", worker.id)->required();
  worker_cmd->add_option("--timeout", worker.timeout, "connect timeout, seconds")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (*fit_cmd) {
    double alpha[4], residual = 0, pub[4], pub_residual = 0;
    hedist_status s = hedist_fit_poly(fit.loss.c_str(), fit.lo, fit.hi, fit.samples, fit.seed,
                                      alpha, &residual);
    if (s != HEDIST_OK) return report(s, "fit-poly");
    s = hedist_published_poly(fit.loss.c_str(), pub, &pub_residual);
    if (s != HEDIST_OK) return report(s, "fit-poly");
    std::printf("loss %s on [%g, %g], %zu samples, seed %llu\n", fit.loss.c_str(), fit.lo, fit.hi,
                fit.samples, static_cast<unsigned long long>(fit.seed));
    std::printf("fitted     alpha0..3 = %+.6f %+.6f %+.6f %+.6f  sup error %.4f\n", alpha[0],
                alpha[1], alpha[2], alpha[3], residual);
    std::printf("published  alpha0..3 = %+.6f %+.6f %+.6f %+.6f  sup error %.4f\n", pub[0], pub[1],
                pub[2], pub[3], pub_residual);
    std::printf("poly_alpha=%.17g,%.17g,%.17g,%.17g\n", alpha[0], alpha[1], alpha[2], alpha[3]);
    return kExitOk;
  }
  if (*plain_cmd) return run_mode(plain_a, "plain");
  if (*enc_cmd) return run_mode(enc_a, "enc");
  if (*dist_cmd) return run_mode(dist_a, "dist");
  if (*central_cmd) return run_mode(central_a, "central");
  if (*bench_cmd) {
    hedist_op_timing t[32];
    size_t n = 0;
    const hedist_status s = hedist_bench_ops(bench.profile.c_str(), bench.backend.c_str(),
                                             bench.reps, bench.seed, t, 32, &n);
    if (s != HEDIST_OK) return report(s, "bench-ops");
    std::printf("%-12s %12s %6s %10s\n", "op", "median_us", "level", "bytes");
    for (size_t i = 0; i < n && i < 32; ++i)
      std::printf("%-12s %12.1f %6d %10zu\n", t[i].op, t[i].median_us, t[i].level, t[i].bytes);
    return kExitOk;
  }
  if (*worker_cmd) {
    const hedist_status s =
        hedist_worker_run(worker.host.c_str(), worker.port, worker.id, worker.timeout);
    if (s != HEDIST_OK) return report(s, "worker");
    return kExitOk;
  }
  return kExitConfig;
}
