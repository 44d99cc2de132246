// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include "hedist/backend.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>

#include "hedist/error.hpp"

namespace hedist {

namespace {

// 7-sigma tail times the safety factor of two; see the noise model.
constexpr double kBoundToStd = 14.0;

class ScopedTimer {
 public:
  explicit ScopedTimer(double& acc) : acc_(acc), t0_(std::chrono::steady_clock::now()) {}
  ~ScopedTimer() {
    acc_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  double& acc_;
  std::chrono::steady_clock::time_point t0_;
};

double max_abs(std::span<const double> v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

class LatticeBackend final : public Backend {
 public:
  LatticeBackend(HeContextPtr ctx, std::shared_ptr<const LatticeKeys> keys, uint64_t seed)
      : Backend(std::move(ctx)), keys_(std::move(keys)), enc_(ctx_), rng_(seed) {}

  BackendKind kind() const noexcept override { return BackendKind::kLattice; }
  bool has_secret() const noexcept override { return keys_->sk.has_value(); }

  Ciphertext encrypt(std::span<const double> values, int level) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.encrypt;
    return hedist::encrypt(ctx_, keys_->pk, enc_.encode(values, level), rng_);
  }
  std::vector<double> decrypt(const Ciphertext& ct) override {
    require(has_secret(), ErrorCode::kSecretKeyRequired, "decrypt needs the secret key");
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.decrypt;
    return enc_.decode(hedist::decrypt(ctx_, *keys_->sk, ct));
  }
  Ciphertext add(const Ciphertext& a, const Ciphertext& b) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.add;
    return he_add(ctx_, a, b);
  }
  Ciphertext sub(const Ciphertext& a, const Ciphertext& b) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.add;
    return he_sub(ctx_, a, b);
  }
  Ciphertext add_plain(const Ciphertext& a, std::span<const double> values) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.add;
    return he_add_plain(ctx_, a, enc_.encode(values, a.scale, a.level));
  }
  Ciphertext mul(const Ciphertext& a, const Ciphertext& b) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.mul;
    return he_mul(ctx_, a, b, keys_->evk);
  }
  Ciphertext mul_plain(const Ciphertext& a, std::span<const double> values) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.mul_plain;
    return he_mul_plain(ctx_, a, enc_.encode(values, a.level));
  }
  Ciphertext mul_const(const Ciphertext& a, double c) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.mul_plain;
    return he_mul_const(ctx_, a, c);
  }
  Ciphertext rotate(const Ciphertext& a, int step) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.rotate;
    return he_rotate(ctx_, a, step, keys_->rot);
  }
  Ciphertext drop_to(const Ciphertext& a, int level) override {
    if (level == a.level) return a;
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.drop;
    return he_drop_to(ctx_, a, level);
  }

 private:
  std::shared_ptr<const LatticeKeys> keys_;
  Encoder enc_;
  Prng rng_;
};

class MockBackend final : public Backend {
 public:
  MockBackend(HeContextPtr ctx, bool holds_secret, uint64_t seed)
      : Backend(std::move(ctx)), secret_(holds_secret), rng_(seed) {}

  BackendKind kind() const noexcept override { return BackendKind::kMock; }
  bool has_secret() const noexcept override { return secret_; }

  Ciphertext encrypt(std::span<const double> values, int level) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.encrypt;
    require(values.size() <= slots(), ErrorCode::kStructural, "more values than slots");
    require(level >= 0 && level <= max_level(), ErrorCode::kStructural, "level out of range");
    const double mag = max_abs(values);
    require(mag <= ctx_->params().value_bound, ErrorCode::kEncodingOverflow,
            "value magnitude exceeds the configured bound");
    Ciphertext c;
    c.slots.assign(slots(), 0.0);
    std::copy(values.begin(), values.end(), c.slots.begin());
    return finish(std::move(c), track::fresh(*ctx_, level, ctx_->level_scale(level), mag));
  }
  std::vector<double> decrypt(const Ciphertext& ct) override {
    require(has_secret(), ErrorCode::kSecretKeyRequired, "decrypt needs the secret key");
    check(ct);
    ++counts_.decrypt;
    return ct.slots;
  }
  Ciphertext add(const Ciphertext& a, const Ciphertext& b) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.add;
    check_pair(a, b);
    Ciphertext c = a;
    for (size_t i = 0; i < c.slots.size(); ++i) c.slots[i] += b.slots[i];
    set_meta(c, track::add(meta_of(a), meta_of(b)));
    return c;
  }
  Ciphertext sub(const Ciphertext& a, const Ciphertext& b) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.add;
    check_pair(a, b);
    Ciphertext c = a;
    for (size_t i = 0; i < c.slots.size(); ++i) c.slots[i] -= b.slots[i];
    set_meta(c, track::add(meta_of(a), meta_of(b)));
    return c;
  }
  Ciphertext add_plain(const Ciphertext& a, std::span<const double> values) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.add;
    check(a);
    check_plain(values);
    Ciphertext c = a;
    for (size_t i = 0; i < values.size(); ++i) c.slots[i] += values[i];
    return finish(std::move(c), track::add_plain(*ctx_, meta_of(a), max_abs(values)));
  }
  Ciphertext mul(const Ciphertext& a, const Ciphertext& b) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.mul;
    check_pair(a, b);
    const CtMeta m = track::mul(*ctx_, meta_of(a), meta_of(b));
    Ciphertext c = a;
    for (size_t i = 0; i < c.slots.size(); ++i) c.slots[i] *= b.slots[i];
    return finish(std::move(c), m);
  }
  Ciphertext mul_plain(const Ciphertext& a, std::span<const double> values) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.mul_plain;
    check(a);
    check_plain(values);
    const CtMeta m = track::mul_plain(*ctx_, meta_of(a), max_abs(values));
    const double inject = track::mul_plain(*ctx_, actual(a), max_abs(values)).op_error;
    Ciphertext c = a;
    for (size_t i = 0; i < c.slots.size(); ++i) c.slots[i] *= i < values.size() ? values[i] : 0.0;
    return finish(std::move(c), m, inject);
  }
  Ciphertext mul_const(const Ciphertext& a, double k) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.mul_plain;
    check(a);
    const CtMeta m = track::mul_const(*ctx_, meta_of(a), k);
    const double inject = track::mul_const(*ctx_, actual(a), k).op_error;
    Ciphertext c = a;
    for (auto& v : c.slots) v *= k;
    return finish(std::move(c), m, inject);
  }
  Ciphertext rotate(const Ciphertext& a, int step) override {
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.rotate;
    check(a);
    const int n = static_cast<int>(slots());
    const int k = ((step % n) + n) % n;
    if (k == 0) return a;
    Ciphertext c = a;
    std::rotate(c.slots.begin(), c.slots.begin() + k, c.slots.end());
    // Same key-switch count as the lattice path with the default key set.
    const int hops = std::has_single_bit(static_cast<unsigned>(k)) ||
                             std::has_single_bit(static_cast<unsigned>(n - k))
                         ? 1
                         : std::min(std::popcount(static_cast<unsigned>(k)),
                                    std::popcount(static_cast<unsigned>(n - k)));
    CtMeta m = meta_of(a);
    double op = 0;
    for (int h = 0; h < hops; ++h) {
      m = track::rotate(*ctx_, m);
      op += m.op_error;
    }
    m.op_error = op;
    return finish(std::move(c), m);
  }
  Ciphertext drop_to(const Ciphertext& a, int level) override {
    if (level == a.level) return a;
    ScopedTimer t(counts_.compute_seconds);
    ++counts_.drop;
    check(a);
    require(level >= 0 && level <= a.level, ErrorCode::kStructural, "cannot drop to a higher level");
    const auto [rel, k] = track::drop_factor(*ctx_, meta_of(a), level);
    (void)k;
    return finish(Ciphertext(a), track::drop(*ctx_, meta_of(a), level, rel),
                  track::drop(*ctx_, actual(a), level, rel).op_error);
  }

 private:
  void check(const Ciphertext& c) const {
    require(c.kind() == BackendKind::kMock && c.slots.size() == slots(), ErrorCode::kStructural,
            "expected a mock ciphertext");
  }
  void check_pair(const Ciphertext& a, const Ciphertext& b) const {
    check(a);
    check(b);
    require(a.level == b.level, ErrorCode::kStructural, "ciphertext level mismatch");
    require(std::abs(a.scale - b.scale) <= 1e-6 * std::max(a.scale, b.scale),
            ErrorCode::kScaleMismatch, "ciphertext scales differ; rescale required");
  }
  void check_plain(std::span<const double> v) const {
    require(v.size() <= slots(), ErrorCode::kStructural, "more values than slots");
    require(max_abs(v) <= ctx_->params().value_bound, ErrorCode::kEncodingOverflow,
            "value magnitude exceeds the configured bound");
  }
  // Errors that scale with the encoded values follow the values actually
  // held, as they do on the lattice, rather than the tracked bounds. The
  // held values already include their error, so it is not counted twice.
  static CtMeta actual(const Ciphertext& a) {
    CtMeta m = meta_of(a);
    m.magnitude = std::min(m.magnitude + m.noise, max_abs(a.slots));
    m.noise = 0;
    return m;
  }
  Ciphertext finish(Ciphertext c, const CtMeta& m) { return finish(std::move(c), m, m.op_error); }
  Ciphertext finish(Ciphertext c, const CtMeta& m, double inject) {
    set_meta(c, m);
    const double sd = inject / kBoundToStd;
    if (sd > 0) {
      std::normal_distribution<double> d(0.0, sd);
      for (auto& v : c.slots) v += d(rng_);
    }
    return c;
  }

  bool secret_;
  Prng rng_;
};

}  // namespace

OpCounts& OpCounts::operator+=(const OpCounts& o) {
  add += o.add;
  mul += o.mul;
  mul_plain += o.mul_plain;
  rotate += o.rotate;
  drop += o.drop;
  encrypt += o.encrypt;
  decrypt += o.decrypt;
  refresh += o.refresh;
  compute_seconds += o.compute_seconds;
  return *this;
}

Ciphertext Backend::refresh(const Ciphertext& ct, int level) {
  const auto values = decrypt(ct);
  ++counts_.refresh;
  return encrypt(values, level);
}

void Backend::serialize(const Ciphertext& ct, std::vector<uint8_t>& out) const {
  hedist::serialize(ct, out);
}

Ciphertext Backend::deserialize(std::span<const uint8_t> in, size_t& offset) const {
  Ciphertext c = deserialize_ciphertext(ctx_, in, offset);
  require(c.kind() == kind(), ErrorCode::kStructural, "ciphertext from a different backend");
  return c;
}

std::unique_ptr<Backend> make_lattice_backend(HeContextPtr ctx,
                                              std::shared_ptr<const LatticeKeys> keys,
                                              uint64_t seed) {
  require(keys != nullptr, ErrorCode::kInvalidArgument, "lattice backend needs keys");
  return std::make_unique<LatticeBackend>(std::move(ctx), std::move(keys), seed);
}

std::unique_ptr<Backend> make_mock_backend(HeContextPtr ctx, bool holds_secret, uint64_t seed) {
  return std::make_unique<MockBackend>(std::move(ctx), holds_secret, seed);
}

}  // namespace hedist
