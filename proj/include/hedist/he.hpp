// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

// Leveled approximate-arithmetic homomorphic encryption (CKKS-style) over
// the residue ring in ring.hpp.
//
// NOT A HARDENED CRYPTOSYSTEM. Parameters are chosen for functional
// correctness and measurable cost, not for a security level; there is no
// constant-time code and no side-channel hardening.
//
// Scale management: level l carries a canonical scale D_l with D_L = 2^k and
// D_{l-1} = D_l^2 / q_l. Rescale primes are picked nearest to the running
// scale, so every D_l stays within a small relative distance of 2^k, and a
// ciphertext produced by this interface always carries the canonical scale of
// its level.

#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hedist/ring.hpp"

namespace hedist {

struct HeParams {
  std::string profile = "distributed";
  size_t ring_degree = 8192;
  int log_scale = 30;
  int max_level = 6;
  int base_bits = 60;
  int special_bits = 60;
  double sigma = 3.2;
  double value_bound = 64.0;

  size_t slots() const noexcept { return ring_degree / 2; }
  double scale() const noexcept;

  /// Named presets: "distributed" (N=8192, L=6), "centralized" (N=8192,
  /// L=24), "small" (N=1024, L=6) and "toy" (N=16, L=4).
  static HeParams from_profile(std::string_view name);
  void validate() const;
};

/// Immutable per-parameter-set state: primes, NTT tables, encoding FFT
/// tables, canonical scales, key-switching constants and the noise model.
class HeContext {
 public:
  static std::shared_ptr<const HeContext> create(const HeParams& params);
  explicit HeContext(const HeParams& params);

  const HeParams& params() const noexcept { return params_; }
  const RingContextPtr& ring() const noexcept { return ring_; }
  size_t n() const noexcept { return params_.ring_degree; }
  size_t slots() const noexcept { return params_.slots(); }
  int max_level() const noexcept { return params_.max_level; }
  double level_scale(int level) const { return scales_.at(static_cast<size_t>(level)); }
  /// log2 of q_0 * ... * q_level.
  double log_modulus(int level) const;
  double log_special() const noexcept { return log_special_; }

  /// Galois element 5^step mod 2N for a cyclic left rotation by `step`.
  uint64_t galois_for_step(int step) const;
  std::vector<uint32_t> eval_map(uint64_t galois) const;

  // Encoding FFT over the slot group generated by 5 in Z_2N^*.
  void fft_special(std::vector<std::complex<double>>& v) const;
  void fft_special_inv(std::vector<std::complex<double>>& v) const;

  // Key switching: approximate basis extension from Q_level to Q_level*P
  // (coefficient form in and out) and the matching divide-by-P back to
  // Q_level (evaluation form in and out).
  RingPoly mod_up(const RingPoly& coeff_form) const;
  RingPoly mod_down(const RingPoly& extended_eval) const;
  /// Divides by q_level with rounding; evaluation form in and out.
  void rescale_inplace(RingPoly& p) const;

  // Per-operation slot-error bounds (value units) used by the noise tracker.
  double encoding_error(int level) const;
  double fresh_error(int level) const;
  double rescale_error(int level_after) const;
  double keyswitch_error(int level, double current_scale) const;

 private:
  HeParams params_;
  RingContextPtr ring_;
  std::vector<double> scales_;
  double log_special_ = 0;

  std::vector<uint64_t> rot_group_;
  std::vector<std::complex<double>> ksi_pows_;

  // mod-up constants per level: (Q_l/q_j)^-1 mod q_j and (Q_l/q_j) mod p_i.
  std::vector<std::vector<uint64_t>> qhat_inv_;
  std::vector<std::vector<std::vector<uint64_t>>> qhat_mod_p_;
  // mod-down constants: (P/p_i)^-1 mod p_i, (P/p_i) mod q_j, P^-1 mod q_j.
  std::vector<uint64_t> phat_inv_;
  std::vector<std::vector<uint64_t>> phat_mod_q_;
  std::vector<uint64_t> p_inv_mod_q_;
  // q_l^-1 mod q_j for j < l.
  std::vector<std::vector<uint64_t>> q_inv_mod_q_;

  std::map<uint64_t, std::vector<uint32_t>> eval_maps_;  // power-of-two steps
};

using HeContextPtr = std::shared_ptr<const HeContext>;

struct Plaintext {
  RingPoly poly;  // evaluation form
  double scale = 0;
  int level = 0;
  double magnitude = 0;  // max |slot value| encoded
};

enum class BackendKind : uint8_t { kLattice = 0, kMock = 1 };

/// Either a lattice ciphertext (two ring polynomials, evaluation form) or a
/// mock ciphertext (noisy slot values). Both carry identical bookkeeping.
struct Ciphertext {
  int level = 0;
  double scale = 0;
  double noise = 0;      // tracked upper bound on the slot error
  double magnitude = 0;  // upper bound on |true slot value|
  std::vector<RingPoly> parts;
  std::vector<double> slots;

  BackendKind kind() const noexcept {
    return parts.empty() ? BackendKind::kMock : BackendKind::kLattice;
  }
};

/// Level, scale and noise bookkeeping of a ciphertext. Both backends advance
/// it through the same `track` functions, so their accounting is identical.
struct CtMeta {
  int level = 0;
  double scale = 0;
  double noise = 0;
  double magnitude = 0;
  /// Error bound introduced by the operation itself, excluding what was
  /// propagated from the inputs. The mock backend injects noise from it.
  double op_error = 0;
};

inline CtMeta meta_of(const Ciphertext& c) { return {c.level, c.scale, c.noise, c.magnitude, 0}; }
inline void set_meta(Ciphertext& c, const CtMeta& m) {
  c.level = m.level;
  c.scale = m.scale;
  c.noise = m.noise;
  c.magnitude = m.magnitude;
}

namespace track {
CtMeta fresh(const HeContext& ctx, int level, double scale, double magnitude);
CtMeta add(const CtMeta& a, const CtMeta& b);
CtMeta add_plain(const HeContext& ctx, const CtMeta& a, double plain_magnitude);
CtMeta mul(const HeContext& ctx, const CtMeta& a, const CtMeta& b);
CtMeta mul_plain(const HeContext& ctx, const CtMeta& a, double plain_magnitude);
CtMeta mul_const(const HeContext& ctx, const CtMeta& a, double c);
/// One key-switched rotation.
CtMeta rotate(const HeContext& ctx, const CtMeta& a);
/// Drop to `level`; `rel_scale_error` is the relative deviation of the
/// achieved scale from the canonical one.
CtMeta drop(const HeContext& ctx, const CtMeta& a, int level, double rel_scale_error);
/// Relative scale deviation of he_drop_to from `from` to `to`, and the integer used.
std::pair<double, int64_t> drop_factor(const HeContext& ctx, const CtMeta& a, int to);
}  // namespace track

struct SecretKey {
  RingPoly s;  // extended, evaluation form, level L
};

struct PublicKey {
  RingPoly b, a;  // level L, evaluation form; b + a*s = e
};

/// Key-switching key for s' -> s over Q_L * P (evaluation form).
struct SwitchKey {
  RingPoly b, a;
};

struct EvalKey {
  SwitchKey relin;  // s^2 -> s
};

struct RotKeys {
  std::map<int, SwitchKey> by_step;  // left-rotation step in [1, slots)
  bool has(int step) const { return by_step.count(step) != 0; }
};

struct KeySet {
  SecretKey sk;
  PublicKey pk;
  EvalKey evk;
  RotKeys rot;
};

/// Generates every key. Rotation keys cover +2^i and -2^i for all
/// 2^i < slots, plus any extra steps requested.
KeySet keygen(const HeContextPtr& ctx, Prng& rng, std::span<const int> extra_steps = {});
SwitchKey make_switch_key(const HeContextPtr& ctx, const SecretKey& sk, const RingPoly& target,
                          Prng& rng);

class Encoder {
 public:
  explicit Encoder(HeContextPtr ctx) : ctx_(std::move(ctx)) {}
  /// Encodes up to `slots` real values; missing slots are zero.
  Plaintext encode(std::span<const double> values, double scale, int level) const;
  Plaintext encode(std::span<const double> values, int level) const {
    return encode(values, ctx_->level_scale(level), level);
  }
  std::vector<double> decode(const Plaintext& pt) const;
  std::vector<std::complex<double>> decode_complex(const Plaintext& pt) const;

 private:
  HeContextPtr ctx_;
};

Ciphertext encrypt(const HeContextPtr& ctx, const PublicKey& pk, const Plaintext& pt, Prng& rng);
Plaintext decrypt(const HeContextPtr& ctx, const SecretKey& sk, const Ciphertext& ct);

Ciphertext he_add(const HeContextPtr& ctx, const Ciphertext& a, const Ciphertext& b);
Ciphertext he_sub(const HeContextPtr& ctx, const Ciphertext& a, const Ciphertext& b);
Ciphertext he_add_plain(const HeContextPtr& ctx, const Ciphertext& a, const Plaintext& p);
/// Tensor, relinearize, rescale. Output at level - 1.
Ciphertext he_mul(const HeContextPtr& ctx, const Ciphertext& a, const Ciphertext& b,
                  const EvalKey& evk);
/// Plaintext product followed by rescale. The plaintext must sit at the
/// ciphertext's level and canonical scale.
Ciphertext he_mul_plain(const HeContextPtr& ctx, const Ciphertext& a, const Plaintext& p);
/// Multiplies by a real constant (integer-encoded at the level scale) and rescales.
Ciphertext he_mul_const(const HeContextPtr& ctx, const Ciphertext& a, double c);
/// Cyclic left rotation of the slot vector by `step` (negative = right).
Ciphertext he_rotate(const HeContextPtr& ctx, const Ciphertext& a, int step, const RotKeys& rot);
/// Moves a ciphertext down to `level`, keeping the canonical scale.
Ciphertext he_drop_to(const HeContextPtr& ctx, const Ciphertext& a, int level);
/// Decrypts and re-encrypts at target_level; server-side stand-in for bootstrap.
Ciphertext trusted_refresh(const HeContextPtr& ctx, const SecretKey& sk, const PublicKey& pk,
                           const Ciphertext& ct, int target_level, Prng& rng);

/// Tracked bound without a key; with a key, the measured max slot error
/// against `reference`.
double noise_budget(const Ciphertext& ct);
double noise_budget(const HeContextPtr& ctx, const Ciphertext& ct, const SecretKey& sk,
                    std::span<const double> reference);

// Serialization: type tag, level, scale, noise, magnitude, then the payload.
void serialize(const Ciphertext& ct, std::vector<uint8_t>& out);
Ciphertext deserialize_ciphertext(const HeContextPtr& ctx, std::span<const uint8_t> in,
                                  size_t& offset);
void serialize(const HeParams& p, std::vector<uint8_t>& out);
HeParams deserialize_params(std::span<const uint8_t> in, size_t& offset);
void serialize(const PublicKey& pk, const EvalKey& evk, const RotKeys& rot,
               std::vector<uint8_t>& out);
void deserialize_public(const HeContextPtr& ctx, std::span<const uint8_t> in, size_t& offset,
                        PublicKey& pk, EvalKey& evk, RotKeys& rot);

}  // namespace hedist
