// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include "hedist/modarith.hpp"

#include <bit>

#include "hedist/error.hpp"

namespace hedist {

Modulus::Modulus(uint64_t q) : q_(q) {
  require(q >= 2 && q < (uint64_t{1} << 61), ErrorCode::kInvalidArgument,
          "modulus must lie in [2, 2^61)");
  const u128 ratio = ~static_cast<u128>(0) / q;
  ratio_hi_ = static_cast<uint64_t>(ratio >> 64);
  ratio_lo_ = static_cast<uint64_t>(ratio);
}

int Modulus::bits() const noexcept { return 64 - std::countl_zero(q_); }

uint64_t Modulus::pow(uint64_t base, uint64_t exp) const noexcept {
  uint64_t result = 1 % q_;
  base = reduce(base);
  while (exp) {
    if (exp & 1) result = mul(result, base);
    base = mul(base, base);
    exp >>= 1;
  }
  return result;
}

namespace {

uint64_t mulmod_slow(uint64_t a, uint64_t b, uint64_t m) {
  return static_cast<uint64_t>(static_cast<u128>(a) * b % m);
}

uint64_t powmod_slow(uint64_t a, uint64_t e, uint64_t m) {
  uint64_t r = 1;
  a %= m;
  while (e) {
    if (e & 1) r = mulmod_slow(r, a, m);
    a = mulmod_slow(a, a, m);
    e >>= 1;
  }
  return r;
}

}  // namespace

bool is_prime(uint64_t n) noexcept {
  if (n < 2) return false;
  for (uint64_t p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    if (n % p == 0) return n == p;
  }
  uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  // Deterministic witness set for all 64-bit integers.
  for (uint64_t a : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    uint64_t x = powmod_slow(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = mulmod_slow(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

}  // namespace hedist
