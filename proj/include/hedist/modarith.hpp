// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace hedist {

using u128 = unsigned __int128;

/// A word-sized prime modulus (< 2^61) with a precomputed Barrett ratio
/// floor(2^128 / q).
class Modulus {
 public:
  Modulus() = default;
  explicit Modulus(uint64_t q);

  uint64_t value() const noexcept { return q_; }
  int bits() const noexcept;

  uint64_t reduce(u128 x) const noexcept {
    const uint64_t x0 = static_cast<uint64_t>(x);
    const uint64_t x1 = static_cast<uint64_t>(x >> 64);
    const uint64_t carry = static_cast<uint64_t>((static_cast<u128>(x0) * ratio_lo_) >> 64);
    const u128 a = static_cast<u128>(x0) * ratio_hi_ + carry;
    const u128 b = static_cast<u128>(x1) * ratio_lo_ + static_cast<uint64_t>(a);
    const uint64_t qhat =
        x1 * ratio_hi_ + static_cast<uint64_t>(a >> 64) + static_cast<uint64_t>(b >> 64);
    uint64_t r = x0 - qhat * q_;
    while (r >= q_) r -= q_;
    return r;
  }
  uint64_t reduce(uint64_t x) const noexcept { return reduce(static_cast<u128>(x)); }

  uint64_t add(uint64_t a, uint64_t b) const noexcept {
    const uint64_t s = a + b;
    return s >= q_ ? s - q_ : s;
  }
  uint64_t sub(uint64_t a, uint64_t b) const noexcept { return a >= b ? a - b : a + q_ - b; }
  uint64_t neg(uint64_t a) const noexcept { return a == 0 ? 0 : q_ - a; }
  uint64_t mul(uint64_t a, uint64_t b) const noexcept {
    return reduce(static_cast<u128>(a) * b);
  }
  uint64_t pow(uint64_t base, uint64_t exp) const noexcept;
  /// Inverse by Fermat; the modulus is prime.
  uint64_t inv(uint64_t a) const noexcept { return pow(a, q_ - 2); }

  /// Maps a signed integer into [0, q).
  uint64_t from_signed(int64_t v) const noexcept {
    if (v >= 0) return reduce(static_cast<uint64_t>(v));
    const uint64_t r = reduce(static_cast<uint64_t>(-(v + 1)) + 1);
    return r == 0 ? 0 : q_ - r;
  }
  /// Centered representative in (-q/2, q/2].
  int64_t to_signed(uint64_t r) const noexcept {
    return r > (q_ >> 1) ? -static_cast<int64_t>(q_ - r) : static_cast<int64_t>(r);
  }

  /// Shoup precomputation floor(w * 2^64 / q) for a fixed multiplicand w < q.
  uint64_t shoup(uint64_t w) const noexcept {
    return static_cast<uint64_t>((static_cast<u128>(w) << 64) / q_);
  }
  uint64_t mul_shoup(uint64_t x, uint64_t w, uint64_t w_shoup) const noexcept {
    const uint64_t qhat = static_cast<uint64_t>((static_cast<u128>(x) * w_shoup) >> 64);
    uint64_t r = x * w - qhat * q_;
    return r >= q_ ? r - q_ : r;
  }

  friend bool operator==(const Modulus& a, const Modulus& b) noexcept { return a.q_ == b.q_; }

 private:
  uint64_t q_ = 0;
  uint64_t ratio_hi_ = 0;
  uint64_t ratio_lo_ = 0;
};

bool is_prime(uint64_t n) noexcept;

}  // namespace hedist
