// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include "hedist/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "hedist/error.hpp"

namespace hedist {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  fail(ErrorCode::kConfig, "bad value '" + value + "' for " + key + ": expected " + want);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::string fmt(double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

const char* backend_name(BackendKind k) { return k == BackendKind::kLattice ? "lattice" : "mock"; }
const char* carrier_name(Carrier c) { return c == Carrier::kInproc ? "inproc" : "tcp"; }

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;
struct Field {
  Setter set;
  Getter get;
};

template <typename T>
Field num(T ExperimentConfig::*m) {
  return {[m](ExperimentConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_floating_point_v<T>) {
              c.*m = to_double(k, v);
            } else {
              const uint64_t x = to_u64(k, v);
              if (x > std::numeric_limits<T>::max()) bad_value(k, v, "a smaller integer");
              c.*m = static_cast<T>(x);
            }
          },
          [m](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*m);
            else return std::to_string(c.*m);
          }};
}

template <typename T>
Field train_num(T TrainConfig::*m) {
  return {[m](ExperimentConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_floating_point_v<T>) c.train.*m = to_double(k, v);
            else c.train.*m = static_cast<T>(to_u64(k, v));
          },
          [m](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.train.*m);
            else return std::to_string(c.train.*m);
          }};
}

Field str(std::string ExperimentConfig::*m) {
  return {[m](ExperimentConfig& c, const std::string&, const std::string& v) { c.*m = v; },
          [m](const ExperimentConfig& c) { return c.*m; }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = {
      {"eta", train_num(&TrainConfig::eta)},
      {"lambda", train_num(&TrainConfig::lambda)},
      {"refresh_interval", train_num(&TrainConfig::refresh_interval)},
      {"iterations", train_num(&TrainConfig::iterations)},
      {"batch", train_num(&TrainConfig::batch)},
      {"workers", train_num(&TrainConfig::workers)},
      {"skew", train_num(&TrainConfig::skew)},
      {"seed", train_num(&TrainConfig::seed)},
      {"loss",
       {[](ExperimentConfig& c, const std::string&, const std::string& v) {
          c.train.poly.kind = parse_loss(v);
        },
        [](const ExperimentConfig& c) { return std::string(loss_name(c.train.poly.kind)); }}},
      {"poly_source",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          if (v != "published" && v != "fit" && v != "given") bad_value(k, v, "published, fit or given");
          c.poly_source = v;
        },
        [](const ExperimentConfig& c) { return c.poly_source; }}},
      {"poly_alpha",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          std::stringstream ss(v);
          std::string item;
          size_t i = 0;
          while (std::getline(ss, item, ',')) {
            if (i == 4) bad_value(k, v, "four comma-separated numbers");
            c.poly_alpha[i++] = to_double(k, trim(item));
          }
          if (i != 4) bad_value(k, v, "four comma-separated numbers");
        },
        [](const ExperimentConfig& c) {
          return fmt(c.poly_alpha[0]) + "," + fmt(c.poly_alpha[1]) + "," + fmt(c.poly_alpha[2]) +
                 "," + fmt(c.poly_alpha[3]);
        }}},
      {"fit_lo", num(&ExperimentConfig::fit_lo)},
      {"fit_hi", num(&ExperimentConfig::fit_hi)},
      {"fit_samples", num(&ExperimentConfig::fit_samples)},
      {"profile", str(&ExperimentConfig::profile)},
      {"central_profile", str(&ExperimentConfig::central_profile)},
      {"central_interval", num(&ExperimentConfig::central_interval)},
      {"bootstrap_factor", num(&ExperimentConfig::bootstrap_factor)},
      {"backend",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          if (v == "lattice") c.backend = BackendKind::kLattice;
          else if (v == "mock") c.backend = BackendKind::kMock;
          else bad_value(k, v, "lattice or mock");
        },
        [](const ExperimentConfig& c) { return std::string(backend_name(c.backend)); }}},
      {"carrier",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          if (v == "inproc") c.carrier = Carrier::kInproc;
          else if (v == "tcp") c.carrier = Carrier::kTcp;
          else bad_value(k, v, "inproc or tcp");
        },
        [](const ExperimentConfig& c) { return std::string(carrier_name(c.carrier)); }}},
      {"host", str(&ExperimentConfig::host)},
      {"port", num(&ExperimentConfig::port)},
      {"latency_ms", num(&ExperimentConfig::latency_ms)},
      {"dataset",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          if (v != "mnist" && v != "synth") bad_value(k, v, "mnist or synth");
          c.dataset = v;
        },
        [](const ExperimentConfig& c) { return c.dataset; }}},
      {"mnist_dir",
       {[](ExperimentConfig& c, const std::string&, const std::string& v) { c.mnist_dir = v; },
        [](const ExperimentConfig& c) { return c.mnist_dir.string(); }}},
      {"test_fraction", num(&ExperimentConfig::test_fraction)},
      {"subsample", num(&ExperimentConfig::subsample)},
      {"synth_n", num(&ExperimentConfig::synth_n)},
      {"synth_d", num(&ExperimentConfig::synth_d)},
      {"synth_margin", num(&ExperimentConfig::synth_margin)},
      {"output_dir",
       {[](ExperimentConfig& c, const std::string&, const std::string& v) { c.output_dir = v; },
        [](const ExperimentConfig& c) { return c.output_dir.string(); }}},
  };
  return f;
}

HeParams profile_params(const std::string& name) { return HeParams::from_profile(name); }

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(trim(key));
  if (it == fields().end()) fail(ErrorCode::kConfig, "unknown config key: " + key);
  it->second.set(*this, it->first, trim(value));
}

void ExperimentConfig::parse(std::istream& in, const std::string& origin) {
  std::string line;
  size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::kConfig, origin + ":" + std::to_string(no) + ": expected key=value");
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

void ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, "cannot read config file " + path.string());
  parse(in, path.string());
}

std::string ExperimentConfig::dump() const {
  std::string out;
  for (const auto& [key, f] : fields()) out += key + "=" + f.get(*this) + "\n";
  return out;
}

std::vector<std::string> ExperimentConfig::keys() {
  std::vector<std::string> k;
  for (const auto& [key, f] : fields()) k.push_back(key);
  return k;
}

void ExperimentConfig::validate(RunMode mode) const {
  require(fit_lo < fit_hi, ErrorCode::kConfig, "fit_lo must be below fit_hi");
  require(fit_samples >= 4, ErrorCode::kConfig, "fit_samples must be at least 4");
  require(test_fraction >= 0 && test_fraction < 1, ErrorCode::kConfig,
          "test_fraction must be in [0, 1)");
  require(bootstrap_factor >= 0, ErrorCode::kConfig, "bootstrap_factor must be non-negative");
  require(latency_ms >= 0, ErrorCode::kConfig, "latency_ms must be non-negative");
  require(synth_n >= 1 && synth_d >= 2, ErrorCode::kConfig, "synth_n >= 1 and synth_d >= 2 required");
  if (mode == RunMode::kCentral) {
    TrainConfig t = train;
    t.refresh_interval = central_interval;
    t.validate(profile_params(central_profile).max_level);
  } else {
    train.validate(profile_params(profile).max_level);
  }
  if (mode == RunMode::kDist && carrier == Carrier::kTcp)
    require(!host.empty(), ErrorCode::kConfig, "host must be set for the tcp carrier");
}

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
  ExperimentData d;
  if (cfg.dataset == "mnist") {
    MnistSplit s = load_mnist_3v8(cfg.mnist_dir, cfg.test_fraction, cfg.train.seed);
    d.train = std::move(s.train);
    d.test = std::move(s.test);
    d.validation = std::move(s.validation);
  } else {
    const Dataset all = synth_dataset(cfg.synth_n, cfg.synth_d, cfg.synth_margin, cfg.train.seed);
    if (cfg.test_fraction > 0) {
      std::tie(d.train, d.validation) = random_split(all, cfg.test_fraction, cfg.train.seed);
    } else {
      d.train = all;
      d.validation = all;
    }
  }
  if (cfg.subsample > 0 && cfg.subsample < d.train.size()) {
    std::vector<size_t> idx(cfg.subsample);
    std::iota(idx.begin(), idx.end(), 0);
    d.train = d.train.subset(idx);
  }
  d.train.validate();
  return d;
}

PolyApprox resolve_poly(const ExperimentConfig& cfg) {
  const LossKind kind = cfg.train.poly.kind;
  if (cfg.poly_source == "published") return published_coeffs(kind);
  if (cfg.poly_source == "fit") {
    Prng rng(cfg.train.seed);
    return fit_poly_grad(kind, 3, cfg.fit_lo, cfg.fit_hi, cfg.fit_samples, rng);
  }
  PolyApprox p;
  p.kind = kind;
  p.alpha = cfg.poly_alpha;
  p.lo = cfg.fit_lo;
  p.hi = cfg.fit_hi;
  p.residual = dense_grid_residual(p);
  return p;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, RunMode mode,
                                const std::function<void(const RoundRecord&)>& on_round,
                                const std::function<void(uint16_t)>& on_listen,
                                bool external_workers) {
  cfg.validate(mode);
  const ExperimentData data = load_experiment_data(cfg);
  ExperimentResult res;
  res.mode = mode;
  res.poly = resolve_poly(cfg);
  TrainConfig tc = cfg.train;
  tc.poly = res.poly;

  switch (mode) {
    case RunMode::kPlain: {
      res.params = profile_params(cfg.profile);
      res.run = train_plain(data.train, data.validation, tc, res.params.slots());
      if (on_round)
        for (const auto& r : res.run.rounds) on_round(r);
      break;
    }
    case RunMode::kEnc:
    case RunMode::kCentral: {
      CentralOptions o;
      o.cfg = tc;
      o.backend = cfg.backend;
      o.on_round = on_round;
      if (mode == RunMode::kEnc) {
        o.params = profile_params(cfg.profile);
        o.bootstrap_factor = 0;
      } else {
        o.params = profile_params(cfg.central_profile);
        o.cfg.refresh_interval = cfg.central_interval;
        o.bootstrap_factor = cfg.bootstrap_factor;
      }
      res.params = o.params;
      res.run = run_centralized(data.train, data.validation, o);
      break;
    }
    case RunMode::kDist: {
      RunOptions o;
      o.cfg = tc;
      o.params = profile_params(cfg.profile);
      o.backend = cfg.backend;
      o.carrier = cfg.carrier;
      o.host = cfg.host;
      o.port = cfg.port;
      o.latency_ms = cfg.latency_ms;
      o.external_workers = external_workers;
      o.on_listen = on_listen;
      o.on_round = on_round;
      res.params = o.params;
      res.run = run_distributed(data.train, data.validation, o);
      break;
    }
  }
  if (data.test.size() > 0) res.test_acc = accuracy(res.run.w, data.test);
  return res;
}

namespace {

constexpr const char* kPlotScript = R"PY(#!/usr/bin/env python3
# Validation accuracy against log wall time, one curve per metrics file.
# Usage: plot.py [metrics.csv ...] [-o figure.png]
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main(argv):
    out = "accuracy_vs_time.png"
    paths = []
    it = iter(argv)
    for a in it:
        if a == "-o":
            out = next(it)
        else:
            paths.append(a)
    if not paths:
        paths = ["metrics.csv"]
    fig, ax = plt.subplots(figsize=(6, 4))
    for p in paths:
        with open(p) as f:
            rows = list(csv.DictReader(f))
        t = [float(r["wall_ms"]) / 1000.0 for r in rows]
        acc = [100.0 * float(r["acc"]) for r in rows]
        ax.plot(t, acc, marker="o", markersize=3, label=p)
    ax.set_xscale("log")
    ax.set_xlabel("wall time (s, log scale)")
    ax.set_ylabel("validation accuracy (%)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print("wrote", out)


if __name__ == "__main__":
    main(sys.argv[1:])
)PY";

}  // namespace

void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                   const ExperimentResult& res) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  write_metrics_csv(dir / "metrics.csv", res.run.rounds);

  // The manifest pins the coefficients actually used, so re-running it does
  // not depend on refitting.
  ExperimentConfig pinned = cfg;
  pinned.poly_source = "given";
  pinned.poly_alpha = res.poly.alpha;
  std::ofstream m(dir / "manifest.txt");
  if (!m) fail(ErrorCode::kIo, "cannot write manifest in " + dir.string());
  const HeParams& p = res.params;
  m << "# hedist run manifest; load with --config to reproduce\n"
    << "# mode: " << mode_name(res.mode) << '\n'
    << "# poly: " << loss_name(res.poly.kind) << " from " << cfg.poly_source << ", residual "
    << fmt(res.poly.residual) << " on [" << fmt(res.poly.lo) << ", " << fmt(res.poly.hi) << "]\n"
    << "# he profile: " << p.profile << " N=" << p.ring_degree << " L=" << p.max_level
    << " log_scale=" << p.log_scale << " base_bits=" << p.base_bits
    << " special_bits=" << p.special_bits << " sigma=" << fmt(p.sigma) << '\n'
    << "# seeds: all derived from seed=" << cfg.train.seed << '\n'
    << "# final validation accuracy: " << fmt(res.run.final_acc) << '\n';
  if (res.test_acc > 0) m << "# held-out test accuracy: " << fmt(res.test_acc) << '\n';
  m << "# wall seconds: " << fmt(res.run.wall_seconds)
    << ", compute seconds: " << fmt(res.run.ops.compute_seconds)
    << ", comm seconds: " << fmt(res.run.comm.comm_seconds)
    << ", serialize seconds: " << fmt(res.run.serialize_seconds) << '\n'
    << pinned.dump();

  std::ofstream py(dir / "plot.py");
  if (!py) fail(ErrorCode::kIo, "cannot write plot script in " + dir.string());
  py << kPlotScript;
  py.close();
  std::filesystem::permissions(dir / "plot.py", std::filesystem::perms::owner_exec,
                               std::filesystem::perm_options::add, ec);
}

std::vector<OpTiming> bench_ops(const HeParams& params, BackendKind kind, int reps, uint64_t seed) {
  require(reps >= 1, ErrorCode::kConfig, "reps must be at least 1");
  const HeContextPtr ctx = HeContext::create(params);
  std::unique_ptr<Backend> be;
  if (kind == BackendKind::kMock) {
    be = make_mock_backend(ctx, true, seed);
  } else {
    Prng rng(seed);
    KeySet ks = keygen(ctx, rng);
    auto keys = std::make_shared<LatticeKeys>();
    keys->sk = std::move(ks.sk);
    keys->pk = std::move(ks.pk);
    keys->evk = std::move(ks.evk);
    keys->rot = std::move(ks.rot);
    be = make_lattice_backend(ctx, keys, seed + 1);
  }
  std::vector<double> v(be->slots());
  Prng rng(seed + 2);
  std::uniform_real_distribution<double> d(-1, 1);
  for (auto& x : v) x = d(rng);
  const int top = be->max_level();
  const Ciphertext a = be->encrypt(v, top);
  const Ciphertext b = be->encrypt(v, top);
  std::vector<uint8_t> bytes;
  be->serialize(a, bytes);

  std::vector<OpTiming> out;
  auto time = [&](const char* name, const std::function<void()>& fn, size_t nbytes = 0) {
    std::vector<double> t;
    for (int i = 0; i < reps; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      fn();
      t.push_back(std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0)
                      .count());
    }
    std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
    out.push_back({name, t[t.size() / 2], top, nbytes});
  };
  time("encrypt", [&] { (void)be->encrypt(v, top); });
  time("decrypt", [&] { (void)be->decrypt(a); });
  time("add", [&] { (void)be->add(a, b); });
  time("mul", [&] { (void)be->mul(a, b); });
  time("mul_plain", [&] { (void)be->mul_plain(a, v); });
  time("mul_const", [&] { (void)be->mul_const(a, 0.5); });
  time("rotate", [&] { (void)be->rotate(a, 1); });
  time("refresh", [&] { (void)be->refresh(a, top); });
  time("serialize", [&] {
    std::vector<uint8_t> buf;
    be->serialize(a, buf);
  }, bytes.size());
  time("deserialize", [&] {
    size_t off = 0;
    (void)be->deserialize(bytes, off);
  }, bytes.size());
  return out;
}

RunMode parse_mode(const std::string& name) {
  if (name == "plain") return RunMode::kPlain;
  if (name == "enc") return RunMode::kEnc;
  if (name == "dist") return RunMode::kDist;
  if (name == "central") return RunMode::kCentral;
  fail(ErrorCode::kConfig, "unknown run mode: " + name);
}

const char* mode_name(RunMode m) noexcept {
  switch (m) {
    case RunMode::kPlain:
      return "plain";
    case RunMode::kEnc:
      return "enc";
    case RunMode::kDist:
      return "dist";
    case RunMode::kCentral:
      return "central";
  }
  return "?";
}

}  // namespace hedist
