// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

// Training loops: the plaintext reference trainer, the encrypted worker, the
// parameter server that refreshes and averages worker models, and a
// single-machine baseline that stands in bootstrapping with a timed stub.
//
// The update applied per iteration on a mini-batch B is
//   w' = (1 - eta*lambda) w + (eta/|B|) sum_i p(y_i w.x_i) y_i x_i
// where p approximates the descent direction -dL/dm.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hedist/approx.hpp"
#include "hedist/backend.hpp"
#include "hedist/data.hpp"
#include "hedist/packing.hpp"
#include "hedist/transport.hpp"

namespace hedist {

/// Levels one encrypted iteration consumes: scores, two for the polynomial,
/// one for the gradient combine.
inline constexpr int kIterDepth = 4;

struct TrainConfig {
  double eta = 1.0;
  double lambda = 0.0;
  size_t refresh_interval = 1;  // iterations between server refreshes
  size_t iterations = 60;       // per worker
  size_t batch = 128;
  size_t workers = 1;
  double skew = 0.0;  // label skew of the worker partition
  uint64_t seed = 1;
  PolyApprox poly = published_coeffs(LossKind::kBinomialDeviance);

  /// kConfig when the level budget cannot hold one refresh window.
  void validate(int max_level) const;
  size_t rounds() const noexcept { return iterations / refresh_interval; }
};

/// Deterministic cyclic mini-batches over a packed shard: batch k is the run
/// of `blocks_per_batch` blocks starting at block k*blocks_per_batch, modulo
/// the block count.
struct BatchSchedule {
  size_t rows = 0;
  size_t blocks = 0;
  size_t blocks_per_batch = 0;
  double norm = 0;  // divisor of the gradient sum

  BatchSchedule() = default;
  BatchSchedule(const PackLayout& layout, size_t batch);
  std::vector<size_t> blocks_for(size_t iter) const;
};

/// A worker's slice of the training set in packing order.
struct ShardPlan {
  std::vector<size_t> samples;  // global training indices, packing order
  PackLayout layout;
  BatchSchedule schedule;

  /// Packed positions of iteration `iter`'s samples, as global indices.
  std::vector<size_t> batch_samples(size_t iter) const;
};

std::vector<ShardPlan> plan_shards(const Dataset& train, const TrainConfig& cfg, size_t slots);

double accuracy(std::span<const double> w, const Dataset& ds);

/// One reference step on the samples `idx` of `ds`.
std::vector<double> plain_step(std::span<const double> w, const Dataset& ds,
                               std::span<const size_t> idx, const PolyApprox& p, double eta,
                               double lambda, double norm);

/// Encrypted analogue of plain_step over the label-signed `blocks`; the
/// result sits kIterDepth levels below `w`.
Ciphertext enc_step(Backend& be, const Ciphertext& w, std::span<const Ciphertext> blocks,
                    const PackLayout& layout, const PolyApprox& p, double eta, double lambda,
                    double norm);

/// Synchronous averaging of worker models.
std::vector<double> aggregate(std::span<const std::vector<double>> received);

struct RoundRecord {
  size_t round = 0;
  size_t iter = 0;
  double wall_ms = 0;
  double acc = 0;
  double noise_est = 0;
  OpCounts ops;  // cumulative over workers and server
  uint64_t refreshes = 0;
  uint64_t bytes_tx = 0;  // server side, cumulative
  uint64_t bytes_rx = 0;
};

struct LogEntry {
  bool sent = false;
  MsgKind kind = MsgKind::kHello;
  uint32_t worker = 0;
  uint64_t round = 0;
  size_t payload_bytes = 0;
  uint64_t payload_hash = 0;  // FNV-1a, excluding a trailing worker report

  bool operator==(const LogEntry&) const = default;
};

struct RunResult {
  std::vector<double> w;
  double final_acc = 0;
  std::vector<RoundRecord> rounds;
  /// Aggregated model after each round, and the largest tracked noise among
  /// the worker models that produced it.
  std::vector<std::vector<double>> trajectory;
  std::vector<double> trajectory_noise;
  OpCounts ops;        // workers plus server
  ChannelStats comm;   // all endpoints
  double serialize_seconds = 0;
  double wall_seconds = 0;
  /// Every message the server sent or received after the handshake, in
  /// order, for protocol and carrier-equivalence checks.
  std::vector<LogEntry> server_log;
};

/// Plain mirror of the distributed schedule: same shards, batches and
/// averaging. `trajectory` holds the model after each round.
RunResult train_plain(const Dataset& train, const Dataset& validation, const TrainConfig& cfg,
                      size_t slots);

enum class Carrier { kInproc, kTcp };

struct RunOptions {
  TrainConfig cfg;
  HeParams params = HeParams::from_profile("distributed");
  BackendKind backend = BackendKind::kLattice;
  Carrier carrier = Carrier::kInproc;
  std::string host = "127.0.0.1";
  uint16_t port = 0;  // 0 picks a free port
  double latency_ms = 0;
  /// TCP only: workers run elsewhere (e.g. separate processes) and connect
  /// on their own; no worker threads are started.
  bool external_workers = false;
  /// TCP only: how long the server waits for each worker to connect.
  double accept_timeout_seconds = 120;
  /// TCP only: called with the bound port once the server is listening.
  std::function<void(uint16_t)> on_listen;
  /// Called after every round; for progress output.
  std::function<void(const RoundRecord&)> on_round;
};

/// Server plus W worker threads on the chosen carrier.
RunResult run_distributed(const Dataset& train, const Dataset& validation, const RunOptions& opts);

/// Worker side of the protocol, usable from another process over TCP.
void worker_run(Endpoint& ep, uint32_t worker_id);

/// Reads each worker's Hello and returns the endpoints ordered by worker id.
std::vector<std::unique_ptr<Endpoint>> order_by_hello(std::vector<std::unique_ptr<Endpoint>> eps);

/// Server side once every worker has said Hello; one endpoint per worker in
/// worker-id order.
RunResult server_run(const Dataset& train, const Dataset& validation, const RunOptions& opts,
                     std::span<Endpoint* const> workers);

struct CentralOptions {
  TrainConfig cfg;  // workers is forced to 1; refresh_interval is the bootstrap period
  HeParams params = HeParams::from_profile("centralized");
  BackendKind backend = BackendKind::kLattice;
  /// Stub bootstrap latency as a multiple of one measured ciphertext multiply.
  double bootstrap_factor = 10.0;
  std::function<void(const RoundRecord&)> on_round;
};

/// Single machine, deep modulus chain, no server. Every refresh_interval
/// iterations the model is refreshed locally and the thread sleeps for the
/// stub bootstrap latency.
RunResult run_centralized(const Dataset& train, const Dataset& validation,
                          const CentralOptions& opts);

/// Median wall time of one ciphertext multiply at the top level.
double measure_mul_seconds(Backend& be, int reps = 5);

void write_metrics_csv(const std::filesystem::path& path, std::span<const RoundRecord> rounds);
inline constexpr const char* kMetricsHeader =
    "round,iter,wall_ms,acc,noise_est,he_add,he_mul,rotations,refreshes,bytes_tx,bytes_rx";

}  // namespace hedist
