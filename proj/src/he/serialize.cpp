// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include "hedist/bytes.hpp"
#include "hedist/error.hpp"
#include "hedist/he.hpp"

namespace hedist {

namespace {

constexpr uint8_t kTagLattice = 0xC1;
constexpr uint8_t kTagMock = 0xC2;
constexpr uint8_t kTagParams = 0xA1;
constexpr uint8_t kTagKeys = 0xB1;

void put_pair(const RingPoly& b, const RingPoly& a, std::vector<uint8_t>& out) {
  serialize(b, out);
  serialize(a, out);
}

}  // namespace

void serialize(const Ciphertext& ct, std::vector<uint8_t>& out) {
  ByteWriter w(out);
  const bool lattice = ct.kind() == BackendKind::kLattice;
  w.u8(lattice ? kTagLattice : kTagMock);
  w.i64(ct.level);
  w.f64(ct.scale);
  w.f64(ct.noise);
  w.f64(ct.magnitude);
  if (lattice) {
    w.u64(ct.parts.size());
    for (const auto& p : ct.parts) serialize(p, out);
  } else {
    w.f64s(ct.slots);
  }
}

Ciphertext deserialize_ciphertext(const HeContextPtr& ctx, std::span<const uint8_t> in,
                                  size_t& offset) {
  ByteReader r(in, offset);
  const uint8_t tag = r.u8();
  require(tag == kTagLattice || tag == kTagMock, ErrorCode::kStructural, "bad ciphertext tag");
  Ciphertext ct;
  const int64_t level = r.i64();
  require(level >= 0 && level <= ctx->max_level(), ErrorCode::kStructural,
          "ciphertext level exceeds chain");
  ct.level = static_cast<int>(level);
  ct.scale = r.f64();
  ct.noise = r.f64();
  ct.magnitude = r.f64();
  if (tag == kTagLattice) {
    const uint64_t parts = r.u64();
    require(parts == 2, ErrorCode::kStructural, "lattice ciphertext must have two parts");
    for (uint64_t i = 0; i < parts; ++i) {
      ct.parts.push_back(deserialize_poly(ctx->ring(), in, offset));
      require(ct.parts.back().level() == ct.level && !ct.parts.back().extended(),
              ErrorCode::kStructural, "ciphertext part level mismatch");
    }
  } else {
    ct.slots = r.f64s();
    require(ct.slots.size() == ctx->slots(), ErrorCode::kStructural, "mock slot count mismatch");
  }
  return ct;
}

void serialize(const HeParams& p, std::vector<uint8_t>& out) {
  ByteWriter w(out);
  w.u8(kTagParams);
  w.str(p.profile);
  w.u64(p.ring_degree);
  w.i64(p.log_scale);
  w.i64(p.max_level);
  w.i64(p.base_bits);
  w.i64(p.special_bits);
  w.f64(p.sigma);
  w.f64(p.value_bound);
}

HeParams deserialize_params(std::span<const uint8_t> in, size_t& offset) {
  ByteReader r(in, offset);
  require(r.u8() == kTagParams, ErrorCode::kStructural, "bad parameter tag");
  HeParams p;
  p.profile = r.str();
  p.ring_degree = r.u64();
  p.log_scale = static_cast<int>(r.i64());
  p.max_level = static_cast<int>(r.i64());
  p.base_bits = static_cast<int>(r.i64());
  p.special_bits = static_cast<int>(r.i64());
  p.sigma = r.f64();
  p.value_bound = r.f64();
  p.validate();
  return p;
}

void serialize(const PublicKey& pk, const EvalKey& evk, const RotKeys& rot,
               std::vector<uint8_t>& out) {
  ByteWriter w(out);
  w.u8(kTagKeys);
  put_pair(pk.b, pk.a, out);
  put_pair(evk.relin.b, evk.relin.a, out);
  w.u64(rot.by_step.size());
  for (const auto& [step, key] : rot.by_step) {
    w.i64(step);
    put_pair(key.b, key.a, out);
  }
}

void deserialize_public(const HeContextPtr& ctx, std::span<const uint8_t> in, size_t& offset,
                        PublicKey& pk, EvalKey& evk, RotKeys& rot) {
  ByteReader r(in, offset);
  require(r.u8() == kTagKeys, ErrorCode::kStructural, "bad key bundle tag");
  const auto& ring = ctx->ring();
  auto check = [&](const RingPoly& p, bool extended) {
    require(p.level() == ctx->max_level() && p.extended() == extended &&
                p.form() == PolyForm::kEvaluation,
            ErrorCode::kStructural, "key polynomial has the wrong shape");
  };
  pk.b = deserialize_poly(ring, in, offset);
  pk.a = deserialize_poly(ring, in, offset);
  check(pk.b, false);
  check(pk.a, false);
  evk.relin.b = deserialize_poly(ring, in, offset);
  evk.relin.a = deserialize_poly(ring, in, offset);
  check(evk.relin.b, true);
  check(evk.relin.a, true);
  const uint64_t count = r.u64();
  require(count <= ctx->slots(), ErrorCode::kStructural, "too many rotation keys");
  rot.by_step.clear();
  for (uint64_t i = 0; i < count; ++i) {
    const int64_t step = r.i64();
    require(step > 0 && step < static_cast<int64_t>(ctx->slots()), ErrorCode::kStructural,
            "rotation step out of range");
    SwitchKey k;
    k.b = deserialize_poly(ring, in, offset);
    k.a = deserialize_poly(ring, in, offset);
    check(k.b, true);
    check(k.a, true);
    rot.by_step.emplace(static_cast<int>(step), std::move(k));
  }
}

}  // namespace hedist
