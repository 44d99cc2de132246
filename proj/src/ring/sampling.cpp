// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "hedist/error.hpp"
#include "hedist/ring.hpp"

namespace hedist {

std::vector<int64_t> sample_ternary(size_t n, Prng& rng) {
  std::uniform_int_distribution<int> dist(-1, 1);
  std::vector<int64_t> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

std::vector<int64_t> sample_gaussian(size_t n, double sigma, Prng& rng) {
  require(sigma > 0, ErrorCode::kInvalidArgument, "gaussian sigma must be positive");
  std::normal_distribution<double> dist(0.0, sigma);
  const double cut = 6.0 * sigma;
  std::vector<int64_t> v(n);
  for (auto& x : v) {
    double d;
    do {
      d = std::round(dist(rng));
    } while (std::abs(d) > cut);
    x = static_cast<int64_t>(d);
  }
  return v;
}

RingPoly sample_uniform(RingContextPtr ctx, int level, bool extended, PolyForm form, Prng& rng) {
  RingPoly p(std::move(ctx), level, form, extended);
  for (size_t l = 0; l < p.limb_count(); ++l) {
    std::uniform_int_distribution<uint64_t> dist(0, p.modulus(l).value() - 1);
    for (auto& v : p.limb(l)) v = dist(rng);
  }
  return p;
}

RingPoly sample(RingContextPtr ctx, SampleKind kind, int level, Prng& rng, double sigma) {
  switch (kind) {
    case SampleKind::kUniform:
      return sample_uniform(std::move(ctx), level, false, PolyForm::kCoefficient, rng);
    case SampleKind::kTernary: {
      const auto v = sample_ternary(ctx->n(), rng);
      return RingPoly::from_signed(std::move(ctx), v, level);
    }
    case SampleKind::kGaussian: {
      const auto v = sample_gaussian(ctx->n(), sigma, rng);
      return RingPoly::from_signed(std::move(ctx), v, level);
    }
  }
  fail(ErrorCode::kInvalidArgument, "unknown sample kind");
}

std::vector<uint64_t> ntt_primes_below(int bits, size_t count, size_t n,
                                       std::span<const uint64_t> exclude) {
  require(bits >= 4 && bits <= 61, ErrorCode::kInvalidArgument, "prime size must be 4..61 bits");
  const uint64_t m = 2 * n;
  std::vector<uint64_t> out;
  // Largest candidate 1 (mod 2n) strictly below 2^bits.
  uint64_t c = ((uint64_t{1} << bits) - 1) / m * m + 1;
  if (c >= (uint64_t{1} << bits)) c -= m;
  while (out.size() < count) {
    require(c > m, ErrorCode::kInvalidArgument, "ran out of NTT-friendly primes");
    if (is_prime(c) && std::find(exclude.begin(), exclude.end(), c) == exclude.end()) {
      out.push_back(c);
    }
    c -= m;
  }
  return out;
}

uint64_t ntt_prime_nearest(double target, size_t n, std::span<const uint64_t> exclude) {
  const uint64_t m = 2 * n;
  const auto base = static_cast<uint64_t>(std::llround(target / static_cast<double>(m)));
  auto ok = [&](uint64_t c) {
    return c > m && c < (uint64_t{1} << 61) && is_prime(c) &&
           std::find(exclude.begin(), exclude.end(), c) == exclude.end();
  };
  for (uint64_t d = 0; d < base; ++d) {
    const uint64_t up = (base + d) * m + 1;
    const uint64_t down = (base - d) * m + 1;
    const double du = std::abs(static_cast<double>(up) - target);
    const double dd = std::abs(static_cast<double>(down) - target);
    // Check the closer candidate first so ties resolve deterministically.
    if (dd <= du) {
      if (ok(down)) return down;
      if (ok(up)) return up;
    } else {
      if (ok(up)) return up;
      if (ok(down)) return down;
    }
  }
  fail(ErrorCode::kInvalidArgument, "no NTT-friendly prime near target");
}

}  // namespace hedist
