// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include "hedist/engine.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <thread>

#include "hedist/error.hpp"

namespace hedist {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Little-endian scalars for message payloads.
class Writer {
 public:
  explicit Writer(std::vector<uint8_t>& out) : out_(out) {}
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    uint64_t b;
    std::memcpy(&b, &v, 8);
    u64(b);
  }

 private:
  std::vector<uint8_t>& out_;
};

class Reader {
 public:
  Reader(std::span<const uint8_t> in, size_t& off) : in_(in), off_(off) {}
  uint64_t u64() {
    require(off_ + 8 <= in_.size(), ErrorCode::kProtocol, "payload truncated");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t{in_[off_ + static_cast<size_t>(i)]} << (8 * i);
    off_ += 8;
    return v;
  }
  double f64() {
    const uint64_t b = u64();
    double v;
    std::memcpy(&v, &b, 8);
    return v;
  }

 private:
  std::span<const uint8_t> in_;
  size_t& off_;
};

uint64_t fnv1a(std::span<const uint8_t> b) {
  uint64_t h = 1469598103934665603ull;
  for (uint8_t c : b) h = (h ^ c) * 1099511628211ull;
  return h;
}

// What a worker reports with each RefreshRequest and Done.
struct WorkerReport {
  OpCounts ops;
  ChannelStats comm;
  double serialize_seconds = 0;

  void write(Writer& w) const {
    for (uint64_t v : {ops.add, ops.mul, ops.mul_plain, ops.rotate, ops.drop, ops.encrypt,
                       ops.decrypt, ops.refresh})
      w.u64(v);
    w.f64(ops.compute_seconds);
    for (uint64_t v : {comm.msgs_tx, comm.msgs_rx, comm.bytes_tx, comm.bytes_rx}) w.u64(v);
    w.f64(comm.comm_seconds);
    w.f64(serialize_seconds);
  }
  static WorkerReport read(Reader& r) {
    WorkerReport p;
    for (uint64_t* v : {&p.ops.add, &p.ops.mul, &p.ops.mul_plain, &p.ops.rotate, &p.ops.drop,
                        &p.ops.encrypt, &p.ops.decrypt, &p.ops.refresh})
      *v = r.u64();
    p.ops.compute_seconds = r.f64();
    for (uint64_t* v : {&p.comm.msgs_tx, &p.comm.msgs_rx, &p.comm.bytes_tx, &p.comm.bytes_rx})
      *v = r.u64();
    p.comm.comm_seconds = r.f64();
    p.serialize_seconds = r.f64();
    return p;
  }
};

std::shared_ptr<LatticeKeys> full_keys(const HeContextPtr& ctx, uint64_t seed) {
  Prng rng(seed);
  KeySet ks = keygen(ctx, rng);
  auto k = std::make_shared<LatticeKeys>();
  k->sk = std::move(ks.sk);
  k->pk = std::move(ks.pk);
  k->evk = std::move(ks.evk);
  k->rot = std::move(ks.rot);
  return k;
}

// Seeds derived from the run seed, one stream per role.
uint64_t derive(uint64_t seed, uint64_t role) {
  std::seed_seq seq{seed, role, uint64_t{0x68656469}};
  std::array<uint32_t, 2> raw{};
  seq.generate(raw.begin(), raw.end());
  return (uint64_t{raw[0]} << 32) | raw[1];
}

constexpr uint64_t kRoleKeys = 1, kRoleServerBackend = 2, kRolePartition = 3, kRoleShard = 100,
                   kRoleWorker = 1000;

std::unique_ptr<Backend> server_backend(const HeContextPtr& ctx, BackendKind kind, uint64_t seed,
                                        std::shared_ptr<LatticeKeys>* keys_out = nullptr) {
  if (kind == BackendKind::kMock) return make_mock_backend(ctx, true, derive(seed, kRoleServerBackend));
  auto keys = full_keys(ctx, derive(seed, kRoleKeys));
  if (keys_out) *keys_out = keys;
  return make_lattice_backend(ctx, keys, derive(seed, kRoleServerBackend));
}

// Blocks per Shard message; 64 top-level ciphertexts at N=8192, L=6 are
// about 60 MB.
constexpr size_t kShardChunkBlocks = 64;

std::vector<Ciphertext> encrypt_shard(Backend& be, const Dataset& train, const ShardPlan& plan) {
  const Dataset part = train.subset(plan.samples);
  const SlotVectors z = pack_signed(part.x, part.y, plan.layout);
  std::vector<Ciphertext> out;
  out.reserve(z.size());
  for (const auto& v : z) out.push_back(be.encrypt(v, be.max_level()));
  return out;
}

std::vector<Ciphertext> pick(std::span<const Ciphertext> blocks, std::span<const size_t> ids) {
  std::vector<Ciphertext> out;
  out.reserve(ids.size());
  for (size_t b : ids) out.push_back(blocks[b]);
  return out;
}

}  // namespace

void TrainConfig::validate(int max_level) const {
  require(eta > 0 && std::isfinite(eta), ErrorCode::kConfig, "eta must be positive");
  require(lambda >= 0 && std::isfinite(lambda), ErrorCode::kConfig, "lambda must be non-negative");
  require(iterations >= 1, ErrorCode::kConfig, "iterations must be at least 1");
  require(refresh_interval >= 1, ErrorCode::kConfig, "refresh interval must be at least 1");
  require(batch >= 1, ErrorCode::kConfig, "batch must be at least 1");
  require(workers >= 1, ErrorCode::kConfig, "at least one worker required");
  require(skew >= 0 && skew <= 1, ErrorCode::kConfig, "skew must be in [0, 1]");
  if (static_cast<long long>(refresh_interval) * kIterDepth > max_level) {
    fail(ErrorCode::kConfig, "refresh interval " + std::to_string(refresh_interval) + " needs " +
                                 std::to_string(refresh_interval * kIterDepth) +
                                 " levels but the profile has " + std::to_string(max_level));
  }
}

BatchSchedule::BatchSchedule(const PackLayout& layout, size_t batch)
    : rows(layout.rows), blocks(layout.blocks) {
  blocks_per_batch = std::min((batch + rows - 1) / rows, blocks);
  norm = static_cast<double>(blocks_per_batch * rows);
}

std::vector<size_t> BatchSchedule::blocks_for(size_t iter) const {
  std::vector<size_t> ids(blocks_per_batch);
  const size_t start = (iter * blocks_per_batch) % blocks;
  for (size_t j = 0; j < blocks_per_batch; ++j) ids[j] = (start + j) % blocks;
  return ids;
}

std::vector<size_t> ShardPlan::batch_samples(size_t iter) const {
  std::vector<size_t> out;
  for (size_t b : schedule.blocks_for(iter)) {
    const size_t end = std::min((b + 1) * layout.rows, samples.size());
    for (size_t p = b * layout.rows; p < end; ++p) out.push_back(samples[p]);
  }
  return out;
}

std::vector<ShardPlan> plan_shards(const Dataset& train, const TrainConfig& cfg, size_t slots) {
  const auto parts = skewed_partition(train, cfg.workers, cfg.skew, derive(cfg.seed, kRolePartition));
  std::vector<ShardPlan> plans(parts.size());
  for (size_t w = 0; w < parts.size(); ++w) {
    ShardPlan& p = plans[w];
    p.samples = parts[w];
    std::mt19937_64 rng(derive(cfg.seed, kRoleShard + w));
    std::shuffle(p.samples.begin(), p.samples.end(), rng);
    p.layout = plan_layout(p.samples.size(), train.dim, slots, cfg.batch);
    p.schedule = BatchSchedule(p.layout, cfg.batch);
  }
  return plans;
}

double accuracy(std::span<const double> w, const Dataset& ds) {
  if (ds.size() == 0) return 0;
  size_t hit = 0;
  for (size_t i = 0; i < ds.size(); ++i) {
    const auto x = ds.row(i);
    double m = 0;
    for (size_t j = 0; j < ds.dim; ++j) m += w[j] * x[j];
    hit += (m >= 0 ? 1.0 : -1.0) == ds.y[i];
  }
  return static_cast<double>(hit) / static_cast<double>(ds.size());
}

std::vector<double> plain_step(std::span<const double> w, const Dataset& ds,
                               std::span<const size_t> idx, const PolyApprox& p, double eta,
                               double lambda, double norm) {
  require(w.size() == ds.dim, ErrorCode::kStructural, "weight length does not match data");
  std::vector<double> g(ds.dim, 0.0);
  for (size_t i : idx) {
    const auto x = ds.row(i);
    double m = 0;
    for (size_t j = 0; j < ds.dim; ++j) m += w[j] * x[j];
    const double coef = eval_poly_plain(p, ds.y[i] * m) * ds.y[i];
    for (size_t j = 0; j < ds.dim; ++j) g[j] += coef * x[j];
  }
  std::vector<double> out(ds.dim);
  for (size_t j = 0; j < ds.dim; ++j) out[j] = (1.0 - eta * lambda) * w[j] + eta / norm * g[j];
  return out;
}

Ciphertext enc_step(Backend& be, const Ciphertext& w, std::span<const Ciphertext> blocks,
                    const PackLayout& layout, const PolyApprox& p, double eta, double lambda,
                    double norm) {
  if (w.level < kIterDepth)
    fail(ErrorCode::kDepthExhausted, "model ciphertext has too few levels for an iteration");
  const double c = eta / norm;
  std::vector<Ciphertext> coefs;
  coefs.reserve(blocks.size());
  for (const Ciphertext& b : blocks) {
    const Ciphertext s = enc_scores(be, b, w, layout);
    coefs.push_back(broadcast_rows(be, enc_poly_rows(be, p, s, c, layout), layout));
  }
  const Ciphertext g = enc_grad(be, blocks, coefs, layout);
  const double decay = 1.0 - eta * lambda;
  const Ciphertext base =
      decay == 1.0 ? be.drop_to(w, g.level) : be.mul_const(be.drop_to(w, g.level + 1), decay);
  return be.add(base, g);
}

std::vector<double> aggregate(std::span<const std::vector<double>> received) {
  require(!received.empty(), ErrorCode::kInvalidArgument, "nothing to aggregate");
  std::vector<double> out(received[0].size(), 0.0);
  for (const auto& r : received) {
    require(r.size() == out.size(), ErrorCode::kStructural, "model dimensions differ");
    for (size_t j = 0; j < out.size(); ++j) out[j] += r[j];
  }
  for (auto& v : out) v /= static_cast<double>(received.size());
  return out;
}

RunResult train_plain(const Dataset& train, const Dataset& validation, const TrainConfig& cfg,
                      size_t slots) {
  const auto shards = plan_shards(train, cfg, slots);
  const auto t0 = Clock::now();
  RunResult res;
  res.w.assign(train.dim, 0.0);
  const size_t l = cfg.refresh_interval;
  const size_t windows = (cfg.iterations + l - 1) / l;
  for (size_t r = 0; r < windows; ++r) {
    const size_t steps = std::min(l, cfg.iterations - r * l);
    std::vector<std::vector<double>> locals;
    for (const ShardPlan& sp : shards) {
      std::vector<double> v = res.w;
      for (size_t i = 0; i < steps; ++i) {
        const auto idx = sp.batch_samples(r * l + i);
        v = plain_step(v, train, idx, cfg.poly, cfg.eta, cfg.lambda, sp.schedule.norm);
      }
      locals.push_back(std::move(v));
    }
    res.w = aggregate(locals);
    res.trajectory.push_back(res.w);
    res.trajectory_noise.push_back(0.0);
    RoundRecord rec;
    rec.round = r + 1;
    rec.iter = r * l + steps;
    rec.wall_ms = since(t0) * 1e3;
    rec.acc = accuracy(res.w, validation);
    res.rounds.push_back(rec);
  }
  res.final_acc = accuracy(res.w, validation);
  res.wall_seconds = since(t0);
  return res;
}

// --- Protocol --------------------------------------------------------------

namespace {

struct WorkerInit {
  BackendKind backend = BackendKind::kMock;
  HeParams params;
  TrainConfig cfg;
  PackLayout layout;
  BatchSchedule schedule;
  uint64_t seed = 0;
};

void write_init(std::vector<uint8_t>& out, const WorkerInit& in) {
  Writer w(out);
  w.u64(static_cast<uint64_t>(in.backend));
  serialize(in.params, out);
  w.f64(in.cfg.eta);
  w.f64(in.cfg.lambda);
  w.u64(in.cfg.refresh_interval);
  w.u64(in.cfg.iterations);
  w.u64(static_cast<uint64_t>(in.cfg.poly.kind));
  for (double a : in.cfg.poly.alpha) w.f64(a);
  for (uint64_t v : {in.layout.n_samples, in.layout.dim, in.layout.slots, in.layout.h,
                     in.layout.rows, in.layout.blocks})
    w.u64(v);
  w.u64(in.schedule.blocks_per_batch);
  w.f64(in.schedule.norm);
  w.u64(in.seed);
}

WorkerInit read_init(std::span<const uint8_t> in, size_t& off) {
  Reader r(in, off);
  WorkerInit wi;
  const uint64_t kind = r.u64();
  require(kind <= 1, ErrorCode::kProtocol, "unknown backend kind");
  wi.backend = static_cast<BackendKind>(kind);
  wi.params = deserialize_params(in, off);
  wi.cfg.eta = r.f64();
  wi.cfg.lambda = r.f64();
  wi.cfg.refresh_interval = r.u64();
  wi.cfg.iterations = r.u64();
  wi.cfg.poly.kind = static_cast<LossKind>(r.u64());
  for (double& a : wi.cfg.poly.alpha) a = r.f64();
  for (size_t* v : {&wi.layout.n_samples, &wi.layout.dim, &wi.layout.slots, &wi.layout.h,
                    &wi.layout.rows, &wi.layout.blocks})
    *v = r.u64();
  wi.schedule.rows = wi.layout.rows;
  wi.schedule.blocks = wi.layout.blocks;
  wi.schedule.blocks_per_batch = r.u64();
  wi.schedule.norm = r.f64();
  wi.seed = r.u64();
  require(wi.cfg.refresh_interval >= 1 && wi.schedule.blocks_per_batch >= 1 &&
              wi.schedule.blocks_per_batch <= wi.layout.blocks,
          ErrorCode::kProtocol, "inconsistent worker configuration");
  return wi;
}

Message expect(Endpoint& ep, MsgKind kind, uint32_t worker) {
  Message m = ep.recv();
  if (m.kind == MsgKind::kAbort) {
    fail(ErrorCode::kProtocol, "peer aborted: " + std::string(m.payload.begin(), m.payload.end()));
  }
  if (m.kind != kind) {
    fail(ErrorCode::kProtocol, std::string("expected ") + msg_kind_name(kind) + ", got " +
                                   msg_kind_name(m.kind));
  }
  if (m.worker != worker) fail(ErrorCode::kProtocol, "message for the wrong worker id");
  return m;
}

}  // namespace

void worker_run(Endpoint& ep, uint32_t worker_id) {
  double ser = 0;
  std::unique_ptr<Backend> be;
  auto report = [&](std::vector<uint8_t>& out) {
    Writer w(out);
    WorkerReport rep;
    rep.ops = be->counts();
    rep.comm = ep.stats();
    rep.serialize_seconds = ser;
    rep.write(w);
  };
  try {
    ep.send(Message{kProtocolVersion, MsgKind::kHello, worker_id, 0, {}});
    const Message init = expect(ep, MsgKind::kInitParams, worker_id);
    auto t0 = Clock::now();
    size_t off = 0;
    const WorkerInit wi = read_init(init.payload, off);
    const HeContextPtr ctx = HeContext::create(wi.params);
    if (wi.backend == BackendKind::kLattice) {
      auto keys = std::make_shared<LatticeKeys>();
      deserialize_public(ctx, init.payload, off, keys->pk, keys->evk, keys->rot);
      be = make_lattice_backend(ctx, keys, wi.seed);
    } else {
      be = make_mock_backend(ctx, false, wi.seed);
    }
    Ciphertext w = be->deserialize(init.payload, off);
    ser += since(t0);

    std::vector<Ciphertext> blocks;
    blocks.reserve(wi.layout.blocks);
    while (blocks.size() < wi.layout.blocks) {
      const Message shard = expect(ep, MsgKind::kShard, worker_id);
      t0 = Clock::now();
      off = 0;
      size_t first = 0, count = 0;
      {
        Reader r(shard.payload, off);
        first = r.u64();
        count = r.u64();
      }
      require(first == blocks.size() && count >= 1 && first + count <= wi.layout.blocks,
              ErrorCode::kProtocol, "shard chunk out of order");
      for (size_t b = 0; b < count; ++b) blocks.push_back(be->deserialize(shard.payload, off));
      ser += since(t0);
    }

    const size_t l = wi.cfg.refresh_interval;
    for (size_t k = 0; k < wi.cfg.iterations; ++k) {
      const auto batch = pick(blocks, wi.schedule.blocks_for(k));
      w = enc_step(*be, w, batch, wi.layout, wi.cfg.poly, wi.cfg.eta, wi.cfg.lambda,
                   wi.schedule.norm);
      if ((k + 1) % l != 0) continue;
      const uint64_t round = (k + 1) / l;
      Message req{kProtocolVersion, MsgKind::kRefreshRequest, worker_id, round, {}};
      t0 = Clock::now();
      be->serialize(w, req.payload);
      ser += since(t0);
      report(req.payload);
      ep.send(req);
      const Message rep = expect(ep, MsgKind::kRefreshReply, worker_id);
      if (rep.round != round) fail(ErrorCode::kProtocol, "refresh reply for the wrong round");
      t0 = Clock::now();
      off = 0;
      w = be->deserialize(rep.payload, off);
      ser += since(t0);
    }
    Message done{kProtocolVersion, MsgKind::kDone, worker_id, wi.cfg.iterations / l + 1, {}};
    t0 = Clock::now();
    be->serialize(w, done.payload);
    ser += since(t0);
    report(done.payload);
    ep.send(done);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kTransportClosed) {
      const std::string what = e.what();
      try {
        ep.send(Message{kProtocolVersion, MsgKind::kAbort, worker_id, 0,
                        std::vector<uint8_t>(what.begin(), what.end())});
      } catch (const Error&) {
      }
    }
    throw;
  }
}

std::vector<std::unique_ptr<Endpoint>> order_by_hello(std::vector<std::unique_ptr<Endpoint>> eps) {
  std::vector<std::unique_ptr<Endpoint>> out(eps.size());
  for (auto& ep : eps) {
    const Message m = ep->recv();
    if (m.kind != MsgKind::kHello) fail(ErrorCode::kProtocol, "expected Hello");
    if (m.worker >= out.size() || out[m.worker])
      fail(ErrorCode::kProtocol, "duplicate or out-of-range worker id");
    out[m.worker] = std::move(ep);
  }
  return out;
}

RunResult server_run(const Dataset& train, const Dataset& validation, const RunOptions& opts,
                     std::span<Endpoint* const> workers) {
  const TrainConfig& cfg = opts.cfg;
  cfg.validate(opts.params.max_level);
  require(workers.size() == cfg.workers, ErrorCode::kConfig, "endpoint count differs from workers");
  train.validate();
  const auto t_start = Clock::now();
  RunResult res;
  double ser = 0;

  // Worker reports carry timings, so only the bytes before them are hashed.
  auto log = [&](bool sent, const Message& m, size_t hashed) {
    res.server_log.push_back(LogEntry{sent, m.kind, m.worker, m.round, m.payload.size(),
                                      fnv1a(std::span(m.payload).first(hashed))});
  };
  auto send = [&](uint32_t i, const Message& m) {
    log(true, m, m.payload.size());
    workers[i]->send(m);
  };
  const HeContextPtr ctx = HeContext::create(opts.params);
  std::shared_ptr<LatticeKeys> keys;
  auto be = server_backend(ctx, opts.backend, cfg.seed, &keys);
  const int top = ctx->max_level();

  const auto shards = plan_shards(train, cfg, ctx->slots());
  const PackLayout& wl = shards[0].layout;
  res.w.assign(train.dim, 0.0);
  const Ciphertext w0 = be->encrypt(pack_weights(res.w, wl), top);

  std::vector<uint8_t> keys_blob;
  if (keys) serialize(keys->pk, keys->evk, keys->rot, keys_blob);

  for (uint32_t i = 0; i < workers.size(); ++i) {
    const ShardPlan& sp = shards[i];
    WorkerInit wi{opts.backend, opts.params, cfg, sp.layout, sp.schedule,
                  derive(cfg.seed, kRoleWorker + i)};
    Message init{kProtocolVersion, MsgKind::kInitParams, i, 0, {}};
    auto t0 = Clock::now();
    write_init(init.payload, wi);
    init.payload.insert(init.payload.end(), keys_blob.begin(), keys_blob.end());
    be->serialize(w0, init.payload);
    ser += since(t0);
    send(i, init);

    // The shard goes out in chunks so no frame outgrows the payload limit
    // and only one chunk is held encrypted at a time.
    const Dataset part = train.subset(sp.samples);
    const SlotVectors z = pack_signed(part.x, part.y, sp.layout);
    for (size_t first = 0; first < z.size(); first += kShardChunkBlocks) {
      const size_t count = std::min(kShardChunkBlocks, z.size() - first);
      std::vector<Ciphertext> chunk;
      chunk.reserve(count);
      for (size_t b = first; b < first + count; ++b)
        chunk.push_back(be->encrypt(z[b], be->max_level()));
      Message shard{kProtocolVersion, MsgKind::kShard, i, 0, {}};
      t0 = Clock::now();
      Writer wr(shard.payload);
      wr.u64(first);
      wr.u64(count);
      for (const auto& b : chunk) be->serialize(b, shard.payload);
      ser += since(t0);
      send(i, shard);
    }
  }

  std::vector<WorkerReport> reports(workers.size());
  auto collect = [&](MsgKind kind, uint64_t round, double& noise) {
    std::vector<std::vector<double>> models;
    for (uint32_t i = 0; i < workers.size(); ++i) {
      const Message m = expect(*workers[i], kind, i);
      if (m.round != round) fail(ErrorCode::kProtocol, "worker is in a different round");
      const auto t0 = Clock::now();
      size_t off = 0;
      const Ciphertext ct = be->deserialize(m.payload, off);
      log(false, m, off);
      Reader r(m.payload, off);
      reports[i] = WorkerReport::read(r);
      ser += since(t0);
      noise = std::max(noise, ct.noise);
      models.push_back(unpack_weights(be->decrypt(ct), wl));
    }
    return models;
  };
  auto record = [&](size_t round, size_t iter, double noise) {
    RoundRecord rec;
    rec.round = round;
    rec.iter = iter;
    rec.wall_ms = since(t_start) * 1e3;
    rec.acc = accuracy(res.w, validation);
    rec.noise_est = noise;
    rec.ops = be->counts();
    for (const auto& rep : reports) rec.ops += rep.ops;
    rec.refreshes = rec.ops.refresh;
    for (Endpoint* ep : workers) {
      rec.bytes_tx += ep->stats().bytes_tx;
      rec.bytes_rx += ep->stats().bytes_rx;
    }
    res.rounds.push_back(rec);
    res.trajectory.push_back(res.w);
    res.trajectory_noise.push_back(noise);
    if (opts.on_round) opts.on_round(rec);
  };

  const size_t l = cfg.refresh_interval;
  for (size_t r = 1; r <= cfg.rounds(); ++r) {
    double noise = 0;
    const auto models = collect(MsgKind::kRefreshRequest, r, noise);
    res.w = aggregate(models);
    const Ciphertext fresh = be->encrypt(pack_weights(res.w, wl), top);
    // One encryption serves every worker; each of them holds a refreshed model.
    for (size_t i = 0; i < workers.size(); ++i) be->note_refresh();
    std::vector<uint8_t> blob;
    auto t0 = Clock::now();
    be->serialize(fresh, blob);
    ser += since(t0);
    for (uint32_t i = 0; i < workers.size(); ++i)
      send(i, Message{kProtocolVersion, MsgKind::kRefreshReply, i, r, blob});
    record(r, r * l, noise);
  }
  double noise = 0;
  const auto finals = collect(MsgKind::kDone, cfg.rounds() + 1, noise);
  if (cfg.iterations % l != 0) {
    res.w = aggregate(finals);
    record(cfg.rounds() + 1, cfg.iterations, noise);
  }

  res.final_acc = accuracy(res.w, validation);
  res.ops = be->counts();
  for (const auto& rep : reports) {
    res.ops += rep.ops;
    res.comm += rep.comm;
    res.serialize_seconds += rep.serialize_seconds;
  }
  for (Endpoint* ep : workers) res.comm += ep->stats();
  res.serialize_seconds += ser;
  res.wall_seconds = since(t_start);
  return res;
}

RunResult run_distributed(const Dataset& train, const Dataset& validation, const RunOptions& opts) {
  const size_t w_count = opts.cfg.workers;
  opts.cfg.validate(opts.params.max_level);
  std::vector<std::unique_ptr<Endpoint>> server_eps;
  std::vector<std::unique_ptr<Endpoint>> worker_eps(w_count);
  std::unique_ptr<TcpListener> listener;
  if (opts.carrier == Carrier::kInproc) {
    for (size_t i = 0; i < w_count; ++i) {
      auto [a, b] = make_inproc_pair();
      server_eps.push_back(std::move(a));
      worker_eps[i] = std::move(b);
    }
  } else {
    listener = std::make_unique<TcpListener>(opts.host, opts.port);
    if (opts.on_listen) opts.on_listen(listener->port());
  }
  require(!opts.external_workers || listener, ErrorCode::kConfig,
          "external workers need the TCP carrier");

  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(w_count);
  for (uint32_t i = 0; i < w_count && !opts.external_workers; ++i) {
    threads.emplace_back([&, i] {
      try {
        if (!worker_eps[i]) worker_eps[i] = tcp_connect(opts.host, listener->port());
        worker_eps[i]->set_latency_ms(opts.latency_ms);
        worker_run(*worker_eps[i], i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }

  RunResult res;
  std::exception_ptr server_error;
  try {
    if (listener) {
      for (size_t i = 0; i < w_count; ++i) server_eps.push_back(listener->accept(opts.accept_timeout_seconds));
    }
    server_eps = order_by_hello(std::move(server_eps));
    std::vector<Endpoint*> raw;
    for (auto& ep : server_eps) {
      ep->set_latency_ms(opts.latency_ms);
      raw.push_back(ep.get());
    }
    res = server_run(train, validation, opts, raw);
  } catch (...) {
    server_error = std::current_exception();
    for (auto& ep : server_eps)
      if (ep) ep->close();
  }
  for (auto& t : threads) t.join();
  for (auto& ep : server_eps)
    if (ep) ep->close();
  // A worker's own failure explains the run better than the server's view.
  for (auto& e : errors) {
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::kTransportClosed || !server_error) throw;
    }
  }
  if (server_error) std::rethrow_exception(server_error);
  return res;
}

double measure_mul_seconds(Backend& be, int reps) {
  std::vector<double> v(be.slots());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1, 1);
  for (auto& x : v) x = d(rng);
  const Ciphertext a = be.encrypt(v, be.max_level());
  const Ciphertext b = be.encrypt(v, be.max_level());
  std::vector<double> t;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = Clock::now();
    (void)be.mul(a, b);
    t.push_back(since(t0));
  }
  std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
  return t[t.size() / 2];
}

RunResult run_centralized(const Dataset& train, const Dataset& validation,
                          const CentralOptions& opts) {
  TrainConfig cfg = opts.cfg;
  cfg.workers = 1;
  cfg.validate(opts.params.max_level);
  require(opts.bootstrap_factor >= 0, ErrorCode::kConfig, "bootstrap factor must be non-negative");
  train.validate();
  const auto t_start = Clock::now();
  const HeContextPtr ctx = HeContext::create(opts.params);
  auto be = server_backend(ctx, opts.backend, cfg.seed);
  const int top = ctx->max_level();
  const double stub_seconds = opts.bootstrap_factor * measure_mul_seconds(*be);
  be->reset_counts();

  const ShardPlan sp = plan_shards(train, cfg, ctx->slots())[0];
  const auto blocks = encrypt_shard(*be, train, sp);
  RunResult res;
  res.w.assign(train.dim, 0.0);
  Ciphertext w = be->encrypt(pack_weights(res.w, sp.layout), top);

  const size_t l = cfg.refresh_interval;
  for (size_t k = 0; k < cfg.iterations; ++k) {
    w = enc_step(*be, w, pick(blocks, sp.schedule.blocks_for(k)), sp.layout, cfg.poly, cfg.eta,
                 cfg.lambda, sp.schedule.norm);
    const bool boot = (k + 1) % l == 0;
    if (!boot && k + 1 != cfg.iterations) continue;
    const double noise = w.noise;
    res.w = unpack_weights(be->decrypt(w), sp.layout);
    if (boot) {
      w = be->encrypt(pack_weights(res.w, sp.layout), top);
      be->note_refresh();
      std::this_thread::sleep_for(std::chrono::duration<double>(stub_seconds));
    }
    RoundRecord rec;
    rec.round = res.rounds.size() + 1;
    rec.iter = k + 1;
    rec.wall_ms = since(t_start) * 1e3;
    rec.acc = accuracy(res.w, validation);
    rec.noise_est = noise;
    rec.ops = be->counts();
    rec.refreshes = rec.ops.refresh;
    res.rounds.push_back(rec);
    res.trajectory.push_back(res.w);
    res.trajectory_noise.push_back(noise);
    if (opts.on_round) opts.on_round(rec);
  }
  res.final_acc = accuracy(res.w, validation);
  res.ops = be->counts();
  res.wall_seconds = since(t_start);
  return res;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const RoundRecord> rounds) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << kMetricsHeader << '\n';
  out.precision(10);
  for (const auto& r : rounds) {
    out << r.round << ',' << r.iter << ',' << r.wall_ms << ',' << r.acc << ',' << r.noise_est
        << ',' << r.ops.add << ',' << r.ops.total_mul() << ',' << r.ops.rotate << ','
        << r.refreshes << ',' << r.bytes_tx << ',' << r.bytes_rx << '\n';
  }
}

}  // namespace hedist
