// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "backend_fixture.hpp"
#include "hedist/engine.hpp"
#include "hedist/error.hpp"

namespace hedist {
namespace {

using testing::backend_env;
using testing::make_backend;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{0};
}

double linf(std::span<const double> a, std::span<const double> b) {
  double d = 0;
  for (size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

std::vector<double> random_vec(size_t n, double lo, double hi, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

RunOptions small_opts(BackendKind backend, size_t workers, size_t iters, size_t l) {
  RunOptions o;
  o.params = HeParams::from_profile("small");
  o.backend = backend;
  o.cfg.workers = workers;
  o.cfg.iterations = iters;
  o.cfg.refresh_interval = l;
  o.cfg.batch = 32;
  o.cfg.seed = 5;
  return o;
}

// --- plain_step -------------------------------------------------------------

TEST(PlainStep, IdentityCases) {
  const Dataset ds = synth_dataset(20, 5, 1.0, 1);
  std::vector<size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto w = random_vec(5, -1, 1, 2);
  const PolyApprox p = published_coeffs(LossKind::kBinomialDeviance);
  EXPECT_EQ(plain_step(w, ds, idx, p, 0.0, 0.3, 20), w);
  PolyApprox zero = p;
  zero.alpha = {0, 0, 0, 0};
  EXPECT_EQ(plain_step(w, ds, idx, zero, 1.0, 0.0, 20), w);
  const auto decayed = plain_step(w, ds, idx, zero, 0.5, 0.2, 20);
  for (size_t j = 0; j < w.size(); ++j) EXPECT_DOUBLE_EQ(decayed[j], 0.9 * w[j]);
}

TEST(PlainStep, AscendsTheSurrogateObjective) {
  // p is the derivative of P(m) = sum_i alpha_i m^(i+1) / (i+1); the step is
  // eta times the gradient of F(w) = (1/norm) sum P(y w.x).
  const Dataset ds = synth_dataset(1, 4, 1.0, 3);
  const std::vector<size_t> idx = {0};
  PolyApprox p;
  p.alpha = {0.5, -0.2, 0.03, -0.004};
  const auto w = random_vec(4, -1, 1, 4);
  auto objective = [&](std::span<const double> v) {
    const auto x = ds.row(0);
    const double m = ds.y[0] * std::inner_product(x.begin(), x.end(), v.begin(), 0.0);
    double s = 0;
    for (int i = 0; i < 4; ++i) s += p.alpha[i] * std::pow(m, i + 1) / (i + 1);
    return s / 3.0;
  };
  const double eta = 0.7;
  const auto next = plain_step(w, ds, idx, p, eta, 0.0, 3.0);
  const double h = 1e-6;
  for (size_t j = 0; j < w.size(); ++j) {
    auto up = w, dn = w;
    up[j] += h;
    dn[j] -= h;
    const double fd = (objective(up) - objective(dn)) / (2 * h);
    EXPECT_NEAR((next[j] - w[j]) / eta, fd, 1e-7);
  }
}

// --- enc_step ---------------------------------------------------------------

struct StepCase {
  Dataset ds = synth_dataset(16, 8, 1.0, 9);
  PackLayout layout = plan_layout(16, 8, 512, 16);
  std::vector<double> w = random_vec(8, -0.5, 0.5, 10);
  PolyApprox p = published_coeffs(LossKind::kBinomialDeviance);

  std::vector<Ciphertext> blocks(Backend& be) const {
    const auto packed = pack_signed(ds.x, ds.y, layout);
    std::vector<Ciphertext> out;
    for (const auto& b : packed) out.push_back(be.encrypt(b, be.max_level()));
    return out;
  }
  std::vector<size_t> all() const {
    std::vector<size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
};

class EncStep : public ::testing::TestWithParam<BackendKind> {};

TEST_P(EncStep, MatchesPlainStep) {
  auto be = make_backend(backend_env("small"), GetParam(), 3);
  StepCase c;
  ASSERT_EQ(c.layout.blocks, 1u);
  const auto blocks = c.blocks(*be);
  const Ciphertext w = be->encrypt(pack_weights(c.w, c.layout), be->max_level());
  for (double lambda : {0.0, 0.1}) {
    const Ciphertext out = enc_step(*be, w, blocks, c.layout, c.p, 1.0, lambda, 16);
    EXPECT_EQ(out.level, w.level - kIterDepth);
    const auto got = unpack_weights(be->decrypt(out), c.layout);
    const auto want = plain_step(c.w, c.ds, c.all(), c.p, 1.0, lambda, 16);
    EXPECT_LE(linf(got, want), 1e-2);
    EXPECT_LE(linf(got, want), out.noise);
  }
}

TEST_P(EncStep, ZeroRateKeepsModel) {
  auto be = make_backend(backend_env("small"), GetParam(), 4);
  StepCase c;
  const auto blocks = c.blocks(*be);
  const Ciphertext w = be->encrypt(pack_weights(c.w, c.layout), be->max_level());
  const Ciphertext out = enc_step(*be, w, blocks, c.layout, c.p, 0.0, 0.0, 16);
  const auto got = unpack_weights(be->decrypt(out), c.layout);
  EXPECT_LE(linf(got, c.w), out.noise);
  EXPECT_LE(linf(got, c.w), 1e-3);
}

TEST_P(EncStep, NeedsFourLevels) {
  auto be = make_backend(backend_env("small"), GetParam(), 5);
  StepCase c;
  const auto blocks = c.blocks(*be);
  const Ciphertext w = be->encrypt(pack_weights(c.w, c.layout), kIterDepth - 1);
  EXPECT_EQ(code_of([&] { enc_step(*be, w, blocks, c.layout, c.p, 1.0, 0.0, 16); }),
            ErrorCode::kDepthExhausted);
}

INSTANTIATE_TEST_SUITE_P(Backends, EncStep,
                         ::testing::Values(BackendKind::kLattice, BackendKind::kMock),
                         [](const auto& info) {
                           return info.param == BackendKind::kLattice ? "Lattice" : "Mock";
                         });

TEST(EncStep, IdenticalWorkersAggregateToAnyOne) {
  // Three workers with the same shard and seed hold equal models, and their
  // average is that model.
  StepCase c;
  std::vector<std::vector<double>> received;
  for (int i = 0; i < 3; ++i) {
    auto be = make_backend(backend_env("small"), BackendKind::kMock, 11);
    const auto blocks = c.blocks(*be);
    const Ciphertext w = be->encrypt(pack_weights(c.w, c.layout), be->max_level());
    const Ciphertext out = enc_step(*be, w, blocks, c.layout, c.p, 1.0, 0.0, 16);
    received.push_back(unpack_weights(be->decrypt(out), c.layout));
  }
  EXPECT_EQ(received[0], received[1]);
  EXPECT_EQ(received[1], received[2]);
  const auto avg = aggregate(received);
  EXPECT_LE(linf(avg, received[0]), 1e-15);
}

// --- aggregate, config, schedule --------------------------------------------

TEST(Aggregate, Definition) {
  const std::vector<std::vector<double>> one = {{1.5, -2.0}};
  EXPECT_EQ(aggregate(one), one[0]);
  const std::vector<std::vector<double>> opposite = {{1.0, -3.0}, {-1.0, 3.0}};
  EXPECT_EQ(aggregate(opposite), (std::vector<double>{0.0, 0.0}));
  std::vector<std::vector<double>> triple;
  for (int i = 0; i < 3; ++i) triple.push_back(random_vec(6, -2, 2, 20 + i));
  const auto mean = aggregate(triple);
  for (size_t j = 0; j < 6; ++j)
    EXPECT_NEAR(mean[j], (triple[0][j] + triple[1][j] + triple[2][j]) / 3.0, 1e-15);
  const std::vector<std::vector<double>> ragged = {{1.0}, {1.0, 2.0}};
  EXPECT_EQ(code_of([&] { aggregate(ragged); }), ErrorCode::kStructural);
  EXPECT_EQ(code_of([&] { aggregate({}); }), ErrorCode::kInvalidArgument);
}

TEST(Config, LevelBudget) {
  TrainConfig cfg;
  cfg.refresh_interval = 1;
  EXPECT_NO_THROW(cfg.validate(6));
  cfg.refresh_interval = 2;
  EXPECT_EQ(code_of([&] { cfg.validate(6); }), ErrorCode::kConfig);
  EXPECT_NO_THROW(cfg.validate(24));
  cfg.eta = 0;
  EXPECT_EQ(code_of([&] { cfg.validate(24); }), ErrorCode::kConfig);
}

TEST(Schedule, CyclesBlocks) {
  const PackLayout layout = plan_layout(100, 3, 64, 12);  // 8 rows, 13 blocks
  const BatchSchedule s(layout, 12);
  EXPECT_EQ(s.blocks_per_batch, 2u);
  EXPECT_DOUBLE_EQ(s.norm, 16.0);
  EXPECT_EQ(s.blocks_for(0), (std::vector<size_t>{0, 1}));
  EXPECT_EQ(s.blocks_for(6), (std::vector<size_t>{12, 0}));
  EXPECT_EQ(s.blocks_for(7), (std::vector<size_t>{1, 2}));
}

TEST(Shards, EqualDisjointComplete) {
  const Dataset ds = synth_dataset(100, 4, 1.0, 1);
  TrainConfig cfg;
  cfg.workers = 2;
  cfg.batch = 16;
  const auto plans = plan_shards(ds, cfg, 512);
  ASSERT_EQ(plans.size(), 2u);
  EXPECT_EQ(plans[0].samples.size(), 50u);
  EXPECT_EQ(plans[1].samples.size(), 50u);
  std::set<size_t> all(plans[0].samples.begin(), plans[0].samples.end());
  all.insert(plans[1].samples.begin(), plans[1].samples.end());
  EXPECT_EQ(all.size(), 100u);
  const auto again = plan_shards(ds, cfg, 512);
  EXPECT_EQ(again[0].samples, plans[0].samples);
}

TEST(Plain, SeparableDataReachesFullAccuracy) {
  const Dataset ds = synth_dataset(200, 6, 2.0, 13);
  TrainConfig cfg;
  cfg.iterations = 200;
  cfg.batch = 32;
  const RunResult r = train_plain(ds, ds, cfg, 512);
  EXPECT_DOUBLE_EQ(r.final_acc, 1.0);
}

// --- protocol ---------------------------------------------------------------

// Forwards to a real endpoint and keeps every message it carries.
class TapEndpoint final : public Endpoint {
 public:
  explicit TapEndpoint(std::unique_ptr<Endpoint> inner) : inner_(std::move(inner)) {}
  void send(const Message& m) override {
    sent.push_back(m);
    inner_->send(m);
  }
  Message recv() override { return inner_->recv(); }
  void close() override { inner_->close(); }

  std::vector<Message> sent;

 private:
  std::unique_ptr<Endpoint> inner_;
};

struct TappedRun {
  RunResult res;
  std::vector<std::unique_ptr<TapEndpoint>> taps;
};

TappedRun run_tapped(const Dataset& train, const Dataset& val, const RunOptions& opts) {
  TappedRun out;
  std::vector<std::unique_ptr<Endpoint>> server_eps;
  for (size_t i = 0; i < opts.cfg.workers; ++i) {
    auto [a, b] = make_inproc_pair();
    server_eps.push_back(std::move(a));
    out.taps.push_back(std::make_unique<TapEndpoint>(std::move(b)));
  }
  std::vector<std::thread> threads;
  for (uint32_t i = 0; i < opts.cfg.workers; ++i)
    threads.emplace_back([&, i] { worker_run(*out.taps[i], i); });
  server_eps = order_by_hello(std::move(server_eps));
  std::vector<Endpoint*> raw;
  for (auto& ep : server_eps) raw.push_back(ep.get());
  out.res = server_run(train, val, opts, raw);
  for (auto& t : threads) t.join();
  return out;
}

std::vector<double> decrypt_payload(const Message& m, const RunOptions& opts,
                                    const PackLayout& layout) {
  auto be = make_mock_backend(HeContext::create(opts.params), true, 1);
  size_t off = 0;
  return unpack_weights(be->decrypt(be->deserialize(m.payload, off)), layout);
}

TEST(Protocol, ServerAveragesDecryptedWorkerModels) {
  const Dataset ds = synth_dataset(120, 6, 1.0, 3);
  for (size_t workers : {1u, 2u}) {
    const RunOptions opts = small_opts(BackendKind::kMock, workers, 3, 1);
    const TappedRun run = run_tapped(ds, ds, opts);
    const PackLayout layout = plan_shards(ds, opts.cfg, 512)[0].layout;
    ASSERT_EQ(run.res.trajectory.size(), 3u);
    for (size_t r = 0; r < 3; ++r) {
      std::vector<std::vector<double>> got;
      for (const auto& tap : run.taps) {
        const Message& req = tap->sent[1 + r];
        ASSERT_EQ(req.kind, MsgKind::kRefreshRequest);
        ASSERT_EQ(req.round, r + 1);
        got.push_back(decrypt_payload(req, opts, layout));
      }
      std::vector<double> mean(got[0].size(), 0.0);
      for (const auto& g : got)
        for (size_t j = 0; j < mean.size(); ++j) mean[j] += g[j] / static_cast<double>(got.size());
      EXPECT_LE(linf(run.res.trajectory[r], mean), 1e-12) << "workers " << workers << " round " << r;
    }
  }
}

size_t count_kind(const RunResult& r, MsgKind kind, bool sent) {
  return static_cast<size_t>(std::count_if(r.server_log.begin(), r.server_log.end(), [&](const LogEntry& e) {
    return e.kind == kind && e.sent == sent;
  }));
}

TEST(Protocol, RefreshCounts) {
  const Dataset ds = synth_dataset(64, 4, 1.0, 2);
  {
    const auto r = run_distributed(ds, ds, small_opts(BackendKind::kMock, 1, 1, 1));
    EXPECT_EQ(count_kind(r, MsgKind::kRefreshRequest, false), 1u);
    EXPECT_EQ(count_kind(r, MsgKind::kRefreshReply, true), 1u);
    EXPECT_EQ(r.ops.refresh, 1u);
    EXPECT_EQ(r.rounds.size(), 1u);
  }
  {
    RunOptions o = small_opts(BackendKind::kMock, 1, 6, 3);
    o.params.max_level = 13;
    const auto r = run_distributed(ds, ds, o);
    EXPECT_EQ(count_kind(r, MsgKind::kRefreshRequest, false), 2u);
    EXPECT_EQ(r.ops.refresh, 2u);
  }
  {
    // 7 = 2*3 + 1: two refresh rounds and a final partial window.
    RunOptions o = small_opts(BackendKind::kMock, 2, 7, 3);
    o.params.max_level = 13;
    const auto r = run_distributed(ds, ds, o);
    EXPECT_EQ(count_kind(r, MsgKind::kRefreshRequest, false), 4u);
    EXPECT_EQ(count_kind(r, MsgKind::kDone, false), 2u);
    EXPECT_EQ(r.rounds.size(), 3u);
    EXPECT_EQ(r.rounds.back().iter, 7u);
  }
}

TEST(Protocol, NoDepthErrorWhenBudgetHoldsOneWindow) {
  const Dataset ds = synth_dataset(64, 4, 1.0, 2);
  for (size_t l = 1; l <= 5; ++l) {
    RunOptions o = small_opts(BackendKind::kMock, 1, 2 * l + 1, l);
    o.cfg.eta = 0.1;  // keeps margins inside the fit interval over long windows
    o.params.max_level = static_cast<int>(l * kIterDepth + 1);
    EXPECT_NO_THROW(run_distributed(ds, ds, o)) << "l=" << l;
    o.params.max_level = static_cast<int>(l * kIterDepth - 1);
    EXPECT_EQ(code_of([&] { run_distributed(ds, ds, o); }), ErrorCode::kConfig) << "l=" << l;
  }
}

TEST(Protocol, DeterministicOnMock) {
  const Dataset ds = synth_dataset(150, 6, 1.0, 4);
  const RunOptions o = small_opts(BackendKind::kMock, 2, 4, 1);
  const auto a = run_distributed(ds, ds, o);
  const auto b = run_distributed(ds, ds, o);
  EXPECT_EQ(a.w, b.w);
  EXPECT_EQ(a.server_log, b.server_log);
  EXPECT_EQ(a.comm.msgs_tx, b.comm.msgs_tx);
  EXPECT_EQ(a.comm.bytes_tx, b.comm.bytes_tx);
  EXPECT_EQ(a.comm.bytes_rx, b.comm.bytes_rx);
  RunOptions other = o;
  other.cfg.seed = 6;
  EXPECT_NE(run_distributed(ds, ds, other).w, a.w);
}

TEST(Protocol, DeterministicCountsOnLattice) {
  const Dataset ds = synth_dataset(64, 4, 1.0, 4);
  const RunOptions o = small_opts(BackendKind::kLattice, 1, 2, 1);
  const auto a = run_distributed(ds, ds, o);
  const auto b = run_distributed(ds, ds, o);
  ASSERT_EQ(a.server_log.size(), b.server_log.size());
  for (size_t i = 0; i < a.server_log.size(); ++i) {
    EXPECT_EQ(a.server_log[i].kind, b.server_log[i].kind);
    EXPECT_EQ(a.server_log[i].payload_bytes, b.server_log[i].payload_bytes);
  }
  EXPECT_EQ(a.comm.bytes_tx, b.comm.bytes_tx);
  EXPECT_LE(linf(a.w, b.w), 1e-2);
}

TEST(Protocol, CarriersCarryIdenticalMessages) {
  const Dataset ds = synth_dataset(100, 5, 1.0, 8);
  RunOptions o = small_opts(BackendKind::kMock, 2, 3, 1);
  const auto inproc = run_distributed(ds, ds, o);
  o.carrier = Carrier::kTcp;
  const auto tcp = run_distributed(ds, ds, o);
  EXPECT_EQ(inproc.server_log, tcp.server_log);
  EXPECT_EQ(inproc.w, tcp.w);
  EXPECT_EQ(inproc.comm.bytes_tx, tcp.comm.bytes_tx);
}

TEST(Protocol, RejectsWrongWorkerAndDisconnect) {
  const Dataset ds = synth_dataset(64, 4, 1.0, 2);
  const RunOptions o = small_opts(BackendKind::kMock, 1, 2, 1);
  {
    auto [srv, wrk] = make_inproc_pair();
    std::thread t([&, &wrk = wrk] {
      wrk->recv();  // InitParams
      wrk->recv();  // Shard
      wrk->close();
    });
    Endpoint* raw[] = {srv.get()};
    EXPECT_EQ(code_of([&] { server_run(ds, ds, o, raw); }), ErrorCode::kTransportClosed);
    t.join();
  }
  {
    auto [srv, wrk] = make_inproc_pair();
    wrk->send(Message{kProtocolVersion, MsgKind::kHello, 3, 0, {}});
    std::vector<std::unique_ptr<Endpoint>> eps;
    eps.push_back(std::move(srv));
    EXPECT_EQ(code_of([&] { order_by_hello(std::move(eps)); }), ErrorCode::kProtocol);
  }
}

TEST(Protocol, MockTrajectoryFollowsPlainTrainer) {
  const Dataset ds = synth_dataset(400, 8, 1.0, 21);
  const RunOptions o = small_opts(BackendKind::kMock, 1, 8, 1);
  const auto enc = run_distributed(ds, ds, o);
  const auto plain = train_plain(ds, ds, o.cfg, 512);
  const auto plan = plan_shards(ds, o.cfg, 512)[0];
  ASSERT_EQ(enc.trajectory.size(), plain.trajectory.size());
  std::vector<double> prev(ds.dim, 0.0);
  for (size_t r = 0; r < enc.trajectory.size(); ++r) {
    // One refresh window: the worker starts from the refreshed master.
    const auto want = plain_step(prev, ds, plan.batch_samples(r), o.cfg.poly, o.cfg.eta,
                                 o.cfg.lambda, plan.schedule.norm);
    const double err = linf(enc.trajectory[r], want);
    EXPECT_LE(err, 3 * enc.trajectory_noise[r]) << "round " << r;
    EXPECT_LE(err, 1e-2) << "round " << r;
    prev = enc.trajectory[r];
  }
  EXPECT_LE(linf(enc.w, plain.w), 5e-2);
  EXPECT_NEAR(enc.final_acc, plain.final_acc, 0.005);
}

// --- centralized baseline ---------------------------------------------------

TEST(Central, BootstrapStubEvents) {
  const Dataset ds = synth_dataset(64, 4, 1.0, 2);
  CentralOptions o;
  o.params = HeParams::from_profile("small");
  o.params.max_level = 13;
  o.backend = BackendKind::kMock;
  o.cfg.iterations = 6;
  o.cfg.refresh_interval = 3;
  o.cfg.batch = 32;
  const auto r = run_centralized(ds, ds, o);
  EXPECT_EQ(r.ops.refresh, 2u);
  EXPECT_EQ(r.rounds.size(), 2u);
  o.cfg.iterations = 7;
  const auto r7 = run_centralized(ds, ds, o);
  EXPECT_EQ(r7.ops.refresh, 2u);
  EXPECT_EQ(r7.rounds.size(), 3u);
}

TEST(Central, DeepChainMultipliesSlower) {
  const auto& shallow = backend_env("distributed");
  const auto& deep = backend_env("centralized");
  auto a = make_backend(shallow, BackendKind::kLattice);
  auto b = make_backend(deep, BackendKind::kLattice);
  EXPECT_GT(measure_mul_seconds(*b, 3), measure_mul_seconds(*a, 3));
}

TEST(Metrics, CsvSchema) {
  RoundRecord rec;
  rec.round = 1;
  rec.iter = 1;
  const auto path = std::filesystem::temp_directory_path() / "hedist_metrics_test.csv";
  write_metrics_csv(path, std::span<const RoundRecord>(&rec, 1));
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, kMetricsHeader);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 10);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace hedist
