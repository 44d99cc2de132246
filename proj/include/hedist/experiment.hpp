// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment configuration as flat key=value text, dataset selection, and the
// run modes the command line exposes. A manifest written after a run is
// itself a config file that reproduces the run.

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "hedist/engine.hpp"

namespace hedist {

enum class RunMode {
  kPlain,    // plaintext trainer on the distributed schedule
  kEnc,      // single-process encrypted trainer, trusted refresh, no stub latency
  kDist,     // parameter server and workers
  kCentral,  // deep chain with the bootstrap stub
};

struct ExperimentConfig {
  TrainConfig train;

  // Polynomial: "published" uses the published coefficients, "fit" refits,
  // "given" takes poly_alpha verbatim.
  std::string poly_source = "published";
  std::array<double, 4> poly_alpha{};
  double fit_lo = -8.0;
  double fit_hi = 8.0;
  size_t fit_samples = kDefaultFitSamples;

  std::string profile = "distributed";
  std::string central_profile = "centralized";
  size_t central_interval = 3;
  double bootstrap_factor = 10.0;
  BackendKind backend = BackendKind::kLattice;
  Carrier carrier = Carrier::kInproc;
  std::string host = "127.0.0.1";
  uint16_t port = 0;
  double latency_ms = 0;

  std::string dataset = "mnist";  // mnist | synth
  std::filesystem::path mnist_dir = "data/mnist";
  double test_fraction = 0.1;
  size_t subsample = 0;  // keep this many training samples; 0 keeps all
  size_t synth_n = 1000;
  size_t synth_d = 16;
  double synth_margin = 2.0;

  std::filesystem::path output_dir = "out";

  /// Throws kConfig naming the key for unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  /// Lines of key=value; '#' starts a comment.
  void load(const std::filesystem::path& path);
  void parse(std::istream& in, const std::string& origin);
  /// Every key, one per line, in a form load() reads back.
  std::string dump() const;
  /// Cross-field checks; kConfig names the violated constraint.
  void validate(RunMode mode) const;

  static std::vector<std::string> keys();
};

struct ExperimentData {
  Dataset train;
  Dataset test;        // held-out part of the re-split, may be empty
  Dataset validation;  // evaluated every round
};

ExperimentData load_experiment_data(const ExperimentConfig& cfg);

/// Resolves poly_source into coefficients; "fit" is seeded from train.seed.
PolyApprox resolve_poly(const ExperimentConfig& cfg);

struct ExperimentResult {
  RunMode mode = RunMode::kPlain;
  RunResult run;
  PolyApprox poly;
  double test_acc = 0;
  HeParams params;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, RunMode mode,
                                const std::function<void(const RoundRecord&)>& on_round = {},
                                const std::function<void(uint16_t)>& on_listen = {},
                                bool external_workers = false);

/// metrics.csv, manifest.txt and plot.py in `dir`.
void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                   const ExperimentResult& res);

struct OpTiming {
  std::string op;
  double median_us = 0;
  int level = 0;     // level of the input ciphertext
  size_t bytes = 0;  // serialized size, for serialize/deserialize
};

/// Median timings of each backend operation at the top level.
std::vector<OpTiming> bench_ops(const HeParams& params, BackendKind kind, int reps, uint64_t seed);

RunMode parse_mode(const std::string& name);
const char* mode_name(RunMode m) noexcept;

}  // namespace hedist
