// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <bit>
#include <cmath>

#include "hedist/error.hpp"
#include "hedist/he.hpp"

namespace hedist {

namespace {

// Pointwise a[l] *= key[l] where the key lives at level L (extended) and `a`
// is an extended polynomial at a lower level; limbs are matched by modulus.
RingPoly mul_by_key(const RingPoly& a, const RingPoly& key) {
  RingPoly out = a;
  const auto level = static_cast<size_t>(a.level());
  const auto key_level = static_cast<size_t>(key.level());
  for (size_t l = 0; l < a.limb_count(); ++l) {
    const size_t kl = l <= level ? l : key_level + (l - level);
    const Modulus& q = a.modulus(l);
    auto x = out.limb(l);
    auto y = key.limb(kl);
    for (size_t i = 0; i < x.size(); ++i) x[i] = q.mul(x[i], y[i]);
  }
  return out;
}

// Prefix of the chain limbs of `s` (an extended key-level polynomial).
RingPoly chain_prefix(const RingPoly& s, int level) {
  RingPoly out(s.context_ptr(), level, s.form(), false);
  for (size_t l = 0; l <= static_cast<size_t>(level); ++l) {
    auto src = s.limb(l);
    std::copy(src.begin(), src.end(), out.limb(l).begin());
  }
  return out;
}

RingPoly signed_eval(const RingContextPtr& ring, std::span<const int64_t> v, int level,
                     bool extended) {
  auto p = RingPoly::from_signed(ring, v, level, extended);
  to_evaluation(p);
  return p;
}

// Switches d (evaluation form, decrypting under the key's source secret) to
// the secret behind `key`; returns the pair (r0, r1) to add to (c0, c1).
std::pair<RingPoly, RingPoly> key_switch(const HeContext& ctx, const RingPoly& d_eval,
                                         const SwitchKey& key) {
  RingPoly d = d_eval;
  to_coefficient(d);
  RingPoly ext = ctx.mod_up(d);
  const auto level = static_cast<size_t>(d.level());
  // Chain limbs are already known in evaluation form; only the special limbs need an NTT.
  for (size_t l = 0; l <= level; ++l) {
    auto src = d_eval.limb(l);
    std::copy(src.begin(), src.end(), ext.limb(l).begin());
  }
  for (size_t l = level + 1; l < ext.limb_count(); ++l) ext.ntt(l).forward(ext.limb(l));
  ext.set_form(PolyForm::kEvaluation);
  RingPoly r0 = ctx.mod_down(mul_by_key(ext, key.b));
  RingPoly r1 = ctx.mod_down(mul_by_key(ext, key.a));
  return {std::move(r0), std::move(r1)};
}

void check_lattice(const Ciphertext& c) {
  require(c.kind() == BackendKind::kLattice && c.parts.size() == 2, ErrorCode::kStructural,
          "expected a two-part lattice ciphertext");
}

void check_binary(const HeContext& ctx, const Ciphertext& a, const Ciphertext& b) {
  check_lattice(a);
  check_lattice(b);
  require(a.level == b.level, ErrorCode::kStructural, "ciphertext level mismatch");
  require(std::abs(a.scale - b.scale) <= 1e-6 * std::max(a.scale, b.scale),
          ErrorCode::kScaleMismatch, "ciphertext scales differ; rescale required");
  (void)ctx;
}

Ciphertext rotate_once(const HeContext& ctx, const Ciphertext& a, int step, const SwitchKey& key) {
  const auto map = ctx.eval_map(ctx.galois_for_step(step));
  RingPoly c0 = apply_automorphism_eval(a.parts[0], map);
  RingPoly c1 = apply_automorphism_eval(a.parts[1], map);
  auto [r0, r1] = key_switch(ctx, c1, key);
  add_inplace(r0, c0);
  Ciphertext out;
  set_meta(out, track::rotate(ctx, meta_of(a)));
  out.parts = {std::move(r0), std::move(r1)};
  return out;
}

}  // namespace

KeySet keygen(const HeContextPtr& ctx, Prng& rng, std::span<const int> extra_steps) {
  const auto& ring = ctx->ring();
  const int L = ctx->max_level();
  const size_t n = ctx->n();
  KeySet ks;
  ks.sk.s = signed_eval(ring, sample_ternary(n, rng), L, true);

  const RingPoly s_chain = chain_prefix(ks.sk.s, L);
  ks.pk.a = sample_uniform(ring, L, false, PolyForm::kEvaluation, rng);
  RingPoly e = signed_eval(ring, sample_gaussian(n, ctx->params().sigma, rng), L, false);
  ks.pk.b = ring_mul(ks.pk.a, s_chain);
  ks.pk.b = ring_neg(ks.pk.b);
  add_inplace(ks.pk.b, e);

  RingPoly s2 = ks.sk.s;
  mul_pointwise_inplace(s2, ks.sk.s);
  ks.evk.relin = make_switch_key(ctx, ks.sk, s2, rng);

  const int slots = static_cast<int>(ctx->slots());
  std::vector<int> steps;
  for (int s = 1; s < slots; s <<= 1) {
    steps.push_back(s);
    steps.push_back(slots - s);
  }
  for (int s : extra_steps) steps.push_back(((s % slots) + slots) % slots);
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  for (int step : steps) {
    if (step == 0) continue;
    const auto map = ctx->eval_map(ctx->galois_for_step(step));
    RingPoly target = apply_automorphism_eval(ks.sk.s, map);
    ks.rot.by_step.emplace(step, make_switch_key(ctx, ks.sk, target, rng));
  }
  return ks;
}

SwitchKey make_switch_key(const HeContextPtr& ctx, const SecretKey& sk, const RingPoly& target,
                          Prng& rng) {
  const auto& ring = ctx->ring();
  const int L = ctx->max_level();
  require(target.extended() && target.level() == L && target.form() == PolyForm::kEvaluation,
          ErrorCode::kStructural, "switch key target must be an extended level-L polynomial");
  SwitchKey k;
  k.a = sample_uniform(ring, L, true, PolyForm::kEvaluation, rng);
  RingPoly e = signed_eval(ring, sample_gaussian(ctx->n(), ctx->params().sigma, rng), L, true);
  k.b = ring_mul(k.a, sk.s);
  k.b = ring_neg(k.b);
  add_inplace(k.b, e);
  // + P * target on the chain limbs; P vanishes on the special limbs.
  for (size_t l = 0; l <= static_cast<size_t>(L); ++l) {
    const Modulus& q = ring->modulus(l);
    uint64_t p_mod = 1;
    for (size_t i = 0; i < ring->special_size(); ++i)
      p_mod = q.mul(p_mod, q.reduce(ring->special_modulus(i).value()));
    const uint64_t ps = q.shoup(p_mod);
    auto dst = k.b.limb(l);
    auto src = target.limb(l);
    for (size_t i = 0; i < dst.size(); ++i) dst[i] = q.add(dst[i], q.mul_shoup(src[i], p_mod, ps));
  }
  return k;
}

Plaintext Encoder::encode(std::span<const double> values, double scale, int level) const {
  const size_t slots = ctx_->slots();
  require(values.size() <= slots, ErrorCode::kStructural, "more values than slots");
  require(level >= 0 && level <= ctx_->max_level(), ErrorCode::kStructural, "level out of range");
  double mag = 0;
  for (double v : values) {
    require(std::isfinite(v), ErrorCode::kEncodingOverflow, "non-finite value in encoding");
    mag = std::max(mag, std::abs(v));
  }
  require(mag <= ctx_->params().value_bound, ErrorCode::kEncodingOverflow,
          "value magnitude exceeds the configured bound");
  std::vector<std::complex<double>> u(slots);
  for (size_t i = 0; i < values.size(); ++i) u[i] = values[i];
  ctx_->fft_special_inv(u);
  const double limit = std::ldexp(1.0, 62);
  std::vector<int64_t> coeffs(ctx_->n());
  for (size_t i = 0; i < slots; ++i) {
    const double re = std::round(u[i].real() * scale);
    const double im = std::round(u[i].imag() * scale);
    require(std::abs(re) < limit && std::abs(im) < limit, ErrorCode::kEncodingOverflow,
            "encoded coefficient overflows");
    coeffs[i] = static_cast<int64_t>(re);
    coeffs[i + slots] = static_cast<int64_t>(im);
  }
  Plaintext pt;
  pt.poly = signed_eval(ctx_->ring(), coeffs, level, false);
  pt.scale = scale;
  pt.level = level;
  pt.magnitude = mag;
  return pt;
}

std::vector<std::complex<double>> Encoder::decode_complex(const Plaintext& pt) const {
  RingPoly p = drop_to_level(pt.poly, 0);
  to_coefficient(p);
  const Modulus& q0 = p.modulus(0);
  const size_t slots = ctx_->slots();
  auto c = p.limb(0);
  std::vector<std::complex<double>> u(slots);
  for (size_t i = 0; i < slots; ++i) {
    u[i] = {static_cast<double>(q0.to_signed(c[i])) / pt.scale,
            static_cast<double>(q0.to_signed(c[i + slots])) / pt.scale};
  }
  ctx_->fft_special(u);
  return u;
}

std::vector<double> Encoder::decode(const Plaintext& pt) const {
  const auto u = decode_complex(pt);
  std::vector<double> out(u.size());
  for (size_t i = 0; i < u.size(); ++i) out[i] = u[i].real();
  return out;
}

Ciphertext encrypt(const HeContextPtr& ctx, const PublicKey& pk, const Plaintext& pt, Prng& rng) {
  const int level = pt.level;
  const auto& ring = ctx->ring();
  const size_t n = ctx->n();
  RingPoly v = signed_eval(ring, sample_ternary(n, rng), level, false);
  RingPoly e0 = signed_eval(ring, sample_gaussian(n, ctx->params().sigma, rng), level, false);
  RingPoly e1 = signed_eval(ring, sample_gaussian(n, ctx->params().sigma, rng), level, false);
  RingPoly c0 = drop_to_level(pk.b, level);
  mul_pointwise_inplace(c0, v);
  add_inplace(c0, e0);
  add_inplace(c0, pt.poly);
  RingPoly c1 = drop_to_level(pk.a, level);
  mul_pointwise_inplace(c1, v);
  add_inplace(c1, e1);
  Ciphertext ct;
  set_meta(ct, track::fresh(*ctx, level, pt.scale, pt.magnitude));
  ct.parts = {std::move(c0), std::move(c1)};
  return ct;
}

Plaintext decrypt(const HeContextPtr& ctx, const SecretKey& sk, const Ciphertext& ct) {
  check_lattice(ct);
  (void)ctx;
  RingPoly m = ct.parts[1];
  mul_pointwise_inplace(m, chain_prefix(sk.s, ct.level));
  add_inplace(m, ct.parts[0]);
  Plaintext pt;
  pt.poly = std::move(m);
  pt.scale = ct.scale;
  pt.level = ct.level;
  pt.magnitude = ct.magnitude;
  return pt;
}

Ciphertext he_add(const HeContextPtr& ctx, const Ciphertext& a, const Ciphertext& b) {
  check_binary(*ctx, a, b);
  Ciphertext out = a;
  add_inplace(out.parts[0], b.parts[0]);
  add_inplace(out.parts[1], b.parts[1]);
  set_meta(out, track::add(meta_of(a), meta_of(b)));
  return out;
}

Ciphertext he_sub(const HeContextPtr& ctx, const Ciphertext& a, const Ciphertext& b) {
  check_binary(*ctx, a, b);
  Ciphertext out = a;
  sub_inplace(out.parts[0], b.parts[0]);
  sub_inplace(out.parts[1], b.parts[1]);
  set_meta(out, track::add(meta_of(a), meta_of(b)));
  return out;
}

Ciphertext he_add_plain(const HeContextPtr& ctx, const Ciphertext& a, const Plaintext& p) {
  check_lattice(a);
  require(p.level == a.level, ErrorCode::kStructural, "plaintext level mismatch");
  require(std::abs(a.scale - p.scale) <= 1e-6 * a.scale, ErrorCode::kScaleMismatch,
          "plaintext scale differs; rescale required");
  Ciphertext out = a;
  add_inplace(out.parts[0], p.poly);
  set_meta(out, track::add_plain(*ctx, meta_of(a), p.magnitude));
  return out;
}

Ciphertext he_mul(const HeContextPtr& ctx, const Ciphertext& a, const Ciphertext& b,
                  const EvalKey& evk) {
  check_binary(*ctx, a, b);
  require(a.level >= 1, ErrorCode::kDepthExhausted, "multiplication needs at least one level");
  RingPoly d0 = a.parts[0];
  mul_pointwise_inplace(d0, b.parts[0]);
  RingPoly d1 = a.parts[0];
  mul_pointwise_inplace(d1, b.parts[1]);
  RingPoly t = a.parts[1];
  mul_pointwise_inplace(t, b.parts[0]);
  add_inplace(d1, t);
  RingPoly d2 = a.parts[1];
  mul_pointwise_inplace(d2, b.parts[1]);
  auto [r0, r1] = key_switch(*ctx, d2, evk.relin);
  add_inplace(d0, r0);
  add_inplace(d1, r1);
  ctx->rescale_inplace(d0);
  ctx->rescale_inplace(d1);
  Ciphertext out;
  set_meta(out, track::mul(*ctx, meta_of(a), meta_of(b)));
  out.parts = {std::move(d0), std::move(d1)};
  return out;
}

Ciphertext he_mul_plain(const HeContextPtr& ctx, const Ciphertext& a, const Plaintext& p) {
  check_lattice(a);
  require(p.level == a.level, ErrorCode::kStructural, "plaintext level mismatch");
  require(a.level >= 1, ErrorCode::kDepthExhausted, "multiplication needs at least one level");
  require(std::abs(p.scale - ctx->level_scale(p.level)) <= 1e-6 * p.scale,
          ErrorCode::kScaleMismatch, "plaintext must carry the canonical level scale");
  RingPoly c0 = a.parts[0];
  RingPoly c1 = a.parts[1];
  mul_pointwise_inplace(c0, p.poly);
  mul_pointwise_inplace(c1, p.poly);
  ctx->rescale_inplace(c0);
  ctx->rescale_inplace(c1);
  Ciphertext out;
  set_meta(out, track::mul_plain(*ctx, meta_of(a), p.magnitude));
  out.parts = {std::move(c0), std::move(c1)};
  return out;
}

Ciphertext he_mul_const(const HeContextPtr& ctx, const Ciphertext& a, double c) {
  check_lattice(a);
  require(a.level >= 1, ErrorCode::kDepthExhausted, "multiplication needs at least one level");
  const double d = ctx->level_scale(a.level);
  const double kc = std::round(c * d);
  require(std::abs(kc) < std::ldexp(1.0, 62), ErrorCode::kEncodingOverflow,
          "constant too large to encode");
  const auto k = static_cast<int64_t>(kc);
  RingPoly c0 = ring_mul_scalar(a.parts[0], k);
  RingPoly c1 = ring_mul_scalar(a.parts[1], k);
  ctx->rescale_inplace(c0);
  ctx->rescale_inplace(c1);
  Ciphertext out;
  set_meta(out, track::mul_const(*ctx, meta_of(a), c));
  out.parts = {std::move(c0), std::move(c1)};
  return out;
}

Ciphertext he_rotate(const HeContextPtr& ctx, const Ciphertext& a, int step, const RotKeys& rot) {
  check_lattice(a);
  const int slots = static_cast<int>(ctx->slots());
  const int k = ((step % slots) + slots) % slots;
  if (k == 0) return a;
  if (rot.has(k)) return rotate_once(*ctx, a, k, rot.by_step.at(k));
  // Compose from power-of-two steps, left or right, whichever is shorter and available.
  auto plan = [&](int amount, bool right) {
    std::vector<int> steps;
    for (int b = 1; b < slots; b <<= 1) {
      if (amount & b) {
        const int s = right ? slots - b : b;
        if (!rot.has(s)) return std::vector<int>{};
        steps.push_back(s);
      }
    }
    return steps;
  };
  auto left = plan(k, false);
  auto right = plan(slots - k, true);
  std::vector<int>* best = nullptr;
  if (!left.empty()) best = &left;
  if (!right.empty() && (!best || right.size() < best->size())) best = &right;
  if (best == nullptr) fail(ErrorCode::kKeyMissing, "no rotation key path for step " + std::to_string(step));
  Ciphertext out = a;
  for (int s : *best) out = rotate_once(*ctx, out, s, rot.by_step.at(s));
  return out;
}

Ciphertext he_drop_to(const HeContextPtr& ctx, const Ciphertext& a, int level) {
  check_lattice(a);
  require(level >= 0 && level <= a.level, ErrorCode::kStructural, "cannot drop to a higher level");
  if (level == a.level) return a;
  // Drop to level+1 exactly, then multiply by an integer close to
  // D_level * q_{level+1} / D_a and rescale, landing on the canonical scale.
  const auto [rel, k] = track::drop_factor(*ctx, meta_of(a), level);
  Ciphertext out = a;
  for (auto& p : out.parts) {
    p = drop_to_level(p, level + 1);
    p = ring_mul_scalar(p, k);
    ctx->rescale_inplace(p);
  }
  set_meta(out, track::drop(*ctx, meta_of(a), level, rel));
  return out;
}

Ciphertext trusted_refresh(const HeContextPtr& ctx, const SecretKey& sk, const PublicKey& pk,
                           const Ciphertext& ct, int target_level, Prng& rng) {
  require(target_level >= 0 && target_level <= ctx->max_level(), ErrorCode::kStructural,
          "refresh target level out of range");
  Encoder enc(ctx);
  const auto values = enc.decode(decrypt(ctx, sk, ct));
  return encrypt(ctx, pk, enc.encode(values, target_level), rng);
}

double noise_budget(const Ciphertext& ct) { return ct.noise; }

double noise_budget(const HeContextPtr& ctx, const Ciphertext& ct, const SecretKey& sk,
                    std::span<const double> reference) {
  std::vector<double> got;
  if (ct.kind() == BackendKind::kMock) {
    got = ct.slots;
  } else {
    got = Encoder(ctx).decode(decrypt(ctx, sk, ct));
  }
  double err = 0;
  for (size_t i = 0; i < got.size(); ++i) {
    const double ref = i < reference.size() ? reference[i] : 0.0;
    err = std::max(err, std::abs(got[i] - ref));
  }
  return err;
}

}  // namespace hedist
