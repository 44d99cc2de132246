// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>

#include "hedist/error.hpp"
#include "hedist/ring.hpp"

namespace hedist {

namespace {

uint32_t bit_reverse(uint32_t x, int bits) {
  uint32_t r = 0;
  for (int i = 0; i < bits; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

// Smallest primitive 2n-th root of unity found by scanning candidate bases.
uint64_t find_psi(size_t n, const Modulus& q) {
  const uint64_t m = 2 * n;
  require((q.value() - 1) % m == 0, ErrorCode::kInvalidArgument, "prime is not 1 mod 2N");
  for (uint64_t g = 2; g < q.value(); ++g) {
    const uint64_t psi = q.pow(g, (q.value() - 1) / m);
    if (q.pow(psi, n) == q.value() - 1) return psi;
  }
  fail(ErrorCode::kInvalidArgument, "no primitive 2N-th root of unity");
}

}  // namespace

NttTables::NttTables(size_t n, const Modulus& q) : n_(n), q_(q) {
  require(n >= 2 && std::has_single_bit(n), ErrorCode::kInvalidArgument,
          "ring degree must be a power of two");
  const int log_n = std::countr_zero(n);
  psi_ = find_psi(n, q);
  const uint64_t psi_inv = q.inv(psi_);
  psi_rev_.resize(n);
  psi_inv_rev_.resize(n);
  psi_rev_shoup_.resize(n);
  psi_inv_rev_shoup_.resize(n);
  uint64_t pw = 1, pw_inv = 1;
  for (size_t i = 0; i < n; ++i) {
    const uint32_t r = bit_reverse(static_cast<uint32_t>(i), log_n);
    psi_rev_[r] = pw;
    psi_inv_rev_[r] = pw_inv;
    pw = q.mul(pw, psi_);
    pw_inv = q.mul(pw_inv, psi_inv);
  }
  for (size_t i = 0; i < n; ++i) {
    psi_rev_shoup_[i] = q.shoup(psi_rev_[i]);
    psi_inv_rev_shoup_[i] = q.shoup(psi_inv_rev_[i]);
  }
  n_inv_ = q.inv(n % q.value());
  n_inv_shoup_ = q.shoup(n_inv_);
}

// Harvey-style lazy butterflies: values stay in [0, 4q) between stages
// (q < 2^61 keeps 4q inside 64 bits) and are reduced once at the end.
void NttTables::forward(std::span<uint64_t> a) const {
  const uint64_t q = q_.value();
  const uint64_t two_q = 2 * q;
  size_t t = n_;
  for (size_t m = 1; m < n_; m <<= 1) {
    t >>= 1;
    for (size_t i = 0; i < m; ++i) {
      const size_t j1 = 2 * i * t;
      const uint64_t w = psi_rev_[m + i];
      const uint64_t ws = psi_rev_shoup_[m + i];
      uint64_t* x = a.data() + j1;
      uint64_t* y = x + t;
      for (size_t j = 0; j < t; ++j) {
        uint64_t u = x[j];
        if (u >= two_q) u -= two_q;
        const uint64_t qhat = static_cast<uint64_t>((static_cast<u128>(y[j]) * ws) >> 64);
        const uint64_t v = y[j] * w - qhat * q;  // in [0, 2q)
        x[j] = u + v;
        y[j] = u + two_q - v;
      }
    }
  }
  for (auto& v : a) {
    if (v >= two_q) v -= two_q;
    if (v >= q) v -= q;
  }
}

void NttTables::inverse(std::span<uint64_t> a) const {
  const uint64_t q = q_.value();
  const uint64_t two_q = 2 * q;
  size_t t = 1;
  for (size_t m = n_; m > 1; m >>= 1) {
    const size_t h = m >> 1;
    size_t j1 = 0;
    for (size_t i = 0; i < h; ++i) {
      const uint64_t w = psi_inv_rev_[h + i];
      const uint64_t ws = psi_inv_rev_shoup_[h + i];
      uint64_t* x = a.data() + j1;
      uint64_t* y = x + t;
      for (size_t j = 0; j < t; ++j) {
        // Inputs in [0, 2q); outputs in [0, 2q).
        const uint64_t u = x[j];
        const uint64_t v = y[j];
        uint64_t s = u + v;
        if (s >= two_q) s -= two_q;
        x[j] = s;
        const uint64_t d = u + two_q - v;
        const uint64_t qhat = static_cast<uint64_t>((static_cast<u128>(d) * ws) >> 64);
        y[j] = d * w - qhat * q;
      }
      j1 += 2 * t;
    }
    t <<= 1;
  }
  for (auto& v : a) {
    v = q_.mul_shoup(v, n_inv_, n_inv_shoup_);
  }
}

std::vector<uint32_t> automorphism_eval_map(size_t n, uint64_t galois) {
  const int log_n = std::countr_zero(n);
  const uint64_t m = 2 * n;
  // Exponent e (odd, < 2n) -> evaluation index holding a(psi^e).
  std::vector<uint32_t> index_of((m + 1) / 2);
  for (size_t i = 0; i < n; ++i) {
    const uint64_t e = 2 * bit_reverse(static_cast<uint32_t>(i), log_n) + 1;
    index_of[e >> 1] = static_cast<uint32_t>(i);
  }
  std::vector<uint32_t> map(n);
  for (size_t i = 0; i < n; ++i) {
    const uint64_t e = 2 * bit_reverse(static_cast<uint32_t>(i), log_n) + 1;
    const uint64_t target = (e * galois) % m;
    map[i] = index_of[target >> 1];
  }
  return map;
}

}  // namespace hedist
