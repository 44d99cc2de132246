// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

// Arithmetic in Z_Q[X]/(X^N + 1) in residue (RNS) form. A RingContext owns
// the moduli and NTT tables; RingPoly values reference it through a
// shared_ptr and are plain values otherwise.

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "hedist/modarith.hpp"

namespace hedist {

using Prng = std::mt19937_64;

/// Negacyclic NTT tables for one (N, q) pair. Forward output is in
/// bit-reversed order: slot i holds a(psi^(2*bitrev(i)+1)).
class NttTables {
 public:
  NttTables(size_t n, const Modulus& q);

  void forward(std::span<uint64_t> a) const;
  void inverse(std::span<uint64_t> a) const;

  size_t n() const noexcept { return n_; }
  const Modulus& modulus() const noexcept { return q_; }
  uint64_t psi() const noexcept { return psi_; }

 private:
  size_t n_;
  Modulus q_;
  uint64_t psi_ = 0;
  std::vector<uint64_t> psi_rev_, psi_rev_shoup_;
  std::vector<uint64_t> psi_inv_rev_, psi_inv_rev_shoup_;
  uint64_t n_inv_ = 0, n_inv_shoup_ = 0;
};

/// Ring degree plus the modulus chain q_0..q_L and optional special primes
/// used only transiently during key switching.
class RingContext {
 public:
  static std::shared_ptr<const RingContext> create(size_t n, std::vector<uint64_t> chain,
                                                   std::vector<uint64_t> special = {});

  size_t n() const noexcept { return n_; }
  int log_n() const noexcept { return log_n_; }
  int max_level() const noexcept { return static_cast<int>(chain_size_) - 1; }
  size_t chain_size() const noexcept { return chain_size_; }
  size_t special_size() const noexcept { return moduli_.size() - chain_size_; }

  /// Index space: [0, chain_size) chain primes, then special primes.
  const Modulus& modulus(size_t index) const { return moduli_[index]; }
  const NttTables& ntt(size_t index) const { return *ntt_[index]; }
  const Modulus& chain_modulus(int level) const { return moduli_[static_cast<size_t>(level)]; }
  const Modulus& special_modulus(size_t i) const { return moduli_[chain_size_ + i]; }
  /// Total bit length of the chain primes, the "magnitude" of the fresh modulus.
  double chain_bits() const noexcept;

  RingContext(size_t n, std::vector<uint64_t> chain, std::vector<uint64_t> special);

 private:
  size_t n_;
  int log_n_;
  size_t chain_size_;
  std::vector<Modulus> moduli_;
  std::vector<std::unique_ptr<NttTables>> ntt_;
};

using RingContextPtr = std::shared_ptr<const RingContext>;

enum class PolyForm : uint8_t { kCoefficient = 0, kEvaluation = 1 };

/// An element of R_Q in residue form. Residues are stored limb-major
/// (one contiguous run of N values per prime). Limbs are the chain primes
/// q_0..q_level followed, when `extended`, by every special prime.
class RingPoly {
 public:
  RingPoly() = default;
  RingPoly(RingContextPtr ctx, int level, PolyForm form, bool extended = false);

  /// Coefficient-form polynomial with the given small signed coefficients.
  static RingPoly from_signed(RingContextPtr ctx, std::span<const int64_t> coeffs, int level,
                              bool extended = false);

  size_t n() const noexcept { return ctx_ ? ctx_->n() : 0; }
  int level() const noexcept { return level_; }
  bool extended() const noexcept { return extended_; }
  PolyForm form() const noexcept { return form_; }
  size_t limb_count() const noexcept { return limbs_; }
  bool empty() const noexcept { return !ctx_; }

  const RingContext& context() const { return *ctx_; }
  const RingContextPtr& context_ptr() const noexcept { return ctx_; }
  size_t modulus_index(size_t limb) const noexcept {
    return limb <= static_cast<size_t>(level_) ? limb
                                               : ctx_->chain_size() + (limb - level_ - 1);
  }
  const Modulus& modulus(size_t limb) const { return ctx_->modulus(modulus_index(limb)); }
  const NttTables& ntt(size_t limb) const { return ctx_->ntt(modulus_index(limb)); }

  std::span<uint64_t> limb(size_t i) { return {data_.data() + i * n(), n()}; }
  std::span<const uint64_t> limb(size_t i) const { return {data_.data() + i * n(), n()}; }
  uint64_t residue(size_t coeff, size_t limb_index) const {
    return data_[limb_index * n() + coeff];
  }
  std::span<uint64_t> raw() noexcept { return data_; }
  std::span<const uint64_t> raw() const noexcept { return data_; }

  void set_form(PolyForm f) noexcept { form_ = f; }
  /// Removes the highest chain prime (level decrement). Works in either form.
  void drop_last_prime();
  /// Removes every special limb.
  void drop_special();

  bool same_shape(const RingPoly& o) const noexcept {
    return ctx_ == o.ctx_ && level_ == o.level_ && extended_ == o.extended_ && form_ == o.form_;
  }
  friend bool operator==(const RingPoly& a, const RingPoly& b) noexcept {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  RingContextPtr ctx_;
  int level_ = 0;
  bool extended_ = false;
  PolyForm form_ = PolyForm::kCoefficient;
  size_t limbs_ = 0;
  std::vector<uint64_t> data_;
};

// Pure operations. All throw Error(kStructural) on level/form mismatch.
RingPoly ring_add(const RingPoly& a, const RingPoly& b);
RingPoly ring_sub(const RingPoly& a, const RingPoly& b);
RingPoly ring_neg(const RingPoly& a);
/// Negacyclic product; either form accepted, result has the form of `a`.
RingPoly ring_mul(const RingPoly& a, const RingPoly& b);
RingPoly ntt_forward(const RingPoly& a);
RingPoly ntt_inverse(const RingPoly& a);
RingPoly drop_to_level(const RingPoly& a, int level);
RingPoly ring_mul_scalar(const RingPoly& a, int64_t c);

// In-place helpers for hot paths; same preconditions as the pure forms.
void add_inplace(RingPoly& a, const RingPoly& b);
void sub_inplace(RingPoly& a, const RingPoly& b);
/// Pointwise product; both operands must be in evaluation form.
void mul_pointwise_inplace(RingPoly& a, const RingPoly& b);
void to_evaluation(RingPoly& a);
void to_coefficient(RingPoly& a);

/// X -> X^galois (galois odd, modulo 2N). Coefficient form only.
RingPoly apply_automorphism(const RingPoly& a, uint64_t galois);
/// Index map for the same automorphism in evaluation form:
/// out[i] = in[map[i]].
std::vector<uint32_t> automorphism_eval_map(size_t n, uint64_t galois);
RingPoly apply_automorphism_eval(const RingPoly& a, std::span<const uint32_t> map);

/// O(N^2) reference product on one modulus; the oracle for ring_mul.
std::vector<uint64_t> schoolbook_negacyclic(std::span<const uint64_t> a,
                                            std::span<const uint64_t> b, const Modulus& q);

enum class SampleKind { kUniform, kTernary, kGaussian };

std::vector<int64_t> sample_ternary(size_t n, Prng& rng);
/// Rounded normal with standard deviation sigma, tail-cut at 6 sigma.
std::vector<int64_t> sample_gaussian(size_t n, double sigma, Prng& rng);
RingPoly sample_uniform(RingContextPtr ctx, int level, bool extended, PolyForm form, Prng& rng);
RingPoly sample(RingContextPtr ctx, SampleKind kind, int level, Prng& rng, double sigma = 3.2);

/// Primes p = 1 (mod 2n), scanning downward from 2^bits.
std::vector<uint64_t> ntt_primes_below(int bits, size_t count, size_t n,
                                       std::span<const uint64_t> exclude = {});
/// The prime p = 1 (mod 2n) nearest to target that is not in `exclude`.
uint64_t ntt_prime_nearest(double target, size_t n, std::span<const uint64_t> exclude);

/// Bit-exact wire form: little-endian u64 header (N, level, form, prime
/// count, primes...) followed by residues, coefficient-major then prime-major.
void serialize(const RingPoly& p, std::vector<uint8_t>& out);
RingPoly deserialize_poly(const RingContextPtr& ctx, std::span<const uint8_t> in, size_t& offset);

}  // namespace hedist
