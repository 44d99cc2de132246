// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "backend_fixture.hpp"
#include "hedist/error.hpp"
#include "hedist/packing.hpp"

namespace hedist {
namespace {

using testing::backend_env;
using testing::make_backend;

std::vector<double> uniform(size_t n, double lo, double hi, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<double> signs(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = (rng() & 1) ? 1.0 : -1.0;
  return v;
}

TEST(Layout, ReferenceShapes) {
  const PackLayout a = plan_layout(128, 196, 4096);
  EXPECT_EQ(a.h, 256u);
  EXPECT_EQ(a.rows, 16u);
  EXPECT_EQ(a.blocks, 8u);
  const PackLayout b = plan_layout(1, 1, 4096);
  EXPECT_EQ(b.blocks, 1u);
  EXPECT_EQ(b.h, 1u);
  const PackLayout c = plan_layout(4096, 1, 4096);
  EXPECT_EQ(c.blocks, 1u);
  EXPECT_EQ(c.rows, 4096u);
  const PackLayout d = plan_layout(100, 3, 64, 12);
  EXPECT_EQ(d.h, 4u);
  EXPECT_EQ(d.rows, 8u);
  EXPECT_EQ(d.blocks, 13u);
  try {
    plan_layout(10, 4097, 4096);
    FAIL() << "expected kLayoutInfeasible";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLayoutInfeasible);
  }
}

TEST(Layout, SlotMapIsInjective) {
  const PackLayout l = plan_layout(37, 5, 64);
  std::set<std::pair<size_t, size_t>> seen;
  for (size_t i = 0; i < l.n_samples; ++i) {
    for (size_t j = 0; j < l.dim; ++j) {
      const auto bs = l.slot_of(i, j);
      EXPECT_LT(bs.first, l.blocks);
      EXPECT_LT(bs.second, l.slots);
      EXPECT_TRUE(seen.insert(bs).second);
    }
  }
}

TEST(Pack, RoundTripAndPadding) {
  const PackLayout l = plan_layout(37, 5, 64);
  const auto x = uniform(37 * 5, -1, 1, 2);
  const auto y = signs(37, 3);
  const auto blocks = pack_matrix(x, l);
  EXPECT_EQ(unpack_matrix(blocks, l), x);
  // Padding columns 5..7 and the unused rows of the last block are zero.
  for (size_t b = 0; b < l.blocks; ++b)
    for (size_t s = 0; s < l.slots; ++s)
      if (s % l.h >= l.dim || b * l.rows + s / l.h >= l.n_samples) EXPECT_EQ(blocks[b][s], 0.0);
  const auto labels = pack_labels(y, l);
  const auto z = pack_signed(x, y, l);
  for (size_t i = 0; i < 37; ++i) {
    for (size_t j = 0; j < 5; ++j) {
      const auto [b, s] = l.slot_of(i, j);
      EXPECT_EQ(labels[b][s], y[i]);
      EXPECT_EQ(z[b][s], y[i] * x[i * 5 + j]);
    }
  }
  const std::vector<double> w{1, 2, 3, 4, 5};
  const auto pw = pack_weights(w, l);
  EXPECT_EQ(unpack_weights(pw, l), w);
  EXPECT_EQ(pw[l.h * 3 + 4], 5.0);
  EXPECT_THROW(pack_matrix(std::vector<double>(10), l), Error);
}

class Kernels : public ::testing::TestWithParam<BackendKind> {};

// dim 10 -> h 16, 32 rows per block on the 512-slot profile.
struct Problem {
  PackLayout layout;
  std::vector<double> x, y, w;
};

Problem problem(size_t n, uint64_t seed) {
  Problem p;
  p.layout = plan_layout(n, 10, 512);
  p.x = uniform(n * 10, 0, 1, seed);
  p.y = signs(n, seed + 1);
  p.w = uniform(10, -0.5, 0.5, seed + 2);
  return p;
}

TEST_P(Kernels, ScoresAtRowHeads) {
  const auto& e = backend_env("small");
  auto be = make_backend(e, GetParam());
  const Problem p = problem(64, 10);
  const auto z = pack_signed(p.x, p.y, p.layout);
  const Ciphertext w = be->encrypt(pack_weights(p.w, p.layout), be->max_level());
  for (size_t b = 0; b < p.layout.blocks; ++b) {
    const Ciphertext s = enc_scores(*be, be->encrypt(z[b], be->max_level()), w, p.layout);
    EXPECT_EQ(s.level, be->max_level() - 1);
    const auto got = be->decrypt(s);
    for (size_t r = 0; r < p.layout.rows; ++r) {
      const size_t i = b * p.layout.rows + r;
      double m = 0;
      for (size_t j = 0; j < 10; ++j) m += p.y[i] * p.x[i * 10 + j] * p.w[j];
      EXPECT_NEAR(got[r * p.layout.h], m, s.noise) << "sample " << i;
    }
  }
}

TEST_P(Kernels, MaskedPolynomialAndBroadcast) {
  const auto& e = backend_env("small");
  auto be = make_backend(e, GetParam());
  const PackLayout l = plan_layout(32, 10, 512);
  const auto s = uniform(512, -6, 6, 44);
  const double c = 1.0 / 32;
  for (LossKind k : {LossKind::kBinomialDeviance, LossKind::kSvmHinge}) {
    const PolyApprox poly = published_coeffs(k);
    const Ciphertext heads = enc_poly_rows(*be, poly, be->encrypt(s, 4), c, l);
    EXPECT_EQ(heads.level, 2);
    // Tracked bounds must stay useful, not just sound.
    EXPECT_LT(heads.noise, 1e-2);
    const auto hv = be->decrypt(heads);
    const Ciphertext bc = broadcast_rows(*be, heads, l);
    const auto bv = be->decrypt(bc);
    for (size_t r = 0; r < l.rows; ++r) {
      const double want = c * eval_poly_plain(poly, s[r * l.h]);
      EXPECT_NEAR(hv[r * l.h], want, heads.noise);
      for (size_t j = 1; j < l.h; ++j) EXPECT_NEAR(hv[r * l.h + j], 0.0, heads.noise);
      for (size_t j = 0; j < l.h; ++j) EXPECT_NEAR(bv[r * l.h + j], want, bc.noise);
    }
  }
}

TEST_P(Kernels, GradientMatchesPlainSum) {
  const auto& e = backend_env("small");
  auto be = make_backend(e, GetParam());
  const Problem p = problem(80, 20);  // three blocks, the last partial
  const auto& l = p.layout;
  ASSERT_EQ(l.blocks, 3u);
  const auto z = pack_signed(p.x, p.y, l);
  const auto coef = uniform(l.blocks * l.rows, -0.1, 0.1, 5);
  std::vector<Ciphertext> blocks, coefs;
  for (size_t b = 0; b < l.blocks; ++b) {
    blocks.push_back(be->encrypt(z[b], be->max_level()));
    std::vector<double> rep(l.slots, 0.0);
    for (size_t r = 0; r < l.rows; ++r)
      for (size_t j = 0; j < l.h; ++j) rep[r * l.h + j] = coef[b * l.rows + r];
    coefs.push_back(be->encrypt(rep, 3));
  }
  const Ciphertext g = enc_grad(*be, blocks, coefs, l);
  EXPECT_EQ(g.level, 2);
  const auto got = be->decrypt(g);
  for (size_t j = 0; j < 10; ++j) {
    double want = 0;
    for (size_t i = 0; i < l.n_samples; ++i) want += coef[i] * p.y[i] * p.x[i * 10 + j];
    for (size_t r = 0; r < l.rows; ++r) EXPECT_NEAR(got[r * l.h + j], want, g.noise) << j;
  }
}

INSTANTIATE_TEST_SUITE_P(Backends, Kernels,
                         ::testing::Values(BackendKind::kLattice, BackendKind::kMock),
                         [](const auto& info) {
                           return info.param == BackendKind::kLattice ? "Lattice" : "Mock";
                         });

// Both backends must agree on levels, scales and tracked noise for the same
// op sequence, since the mock stands in for the lattice one in long runs.
TEST(Backends, MockTracksLikeLattice) {
  const auto& e = backend_env("small");
  auto lat = make_backend(e, BackendKind::kLattice);
  auto mock = make_backend(e, BackendKind::kMock);
  const Problem p = problem(32, 30);
  const auto z = pack_signed(p.x, p.y, p.layout);
  auto run = [&](Backend& be) {
    const Ciphertext w = be.encrypt(pack_weights(p.w, p.layout), be.max_level());
    const Ciphertext blk = be.encrypt(z[0], be.max_level());
    const Ciphertext s = enc_scores(be, blk, w, p.layout);
    const Ciphertext r =
        broadcast_rows(be, enc_poly_rows(be, published_coeffs(LossKind::kHuber), s, 0.03, p.layout),
                       p.layout);
    const std::vector<Ciphertext> bs{blk}, cs{r};
    const Ciphertext g = enc_grad(be, bs, cs, p.layout);
    const Ciphertext upd = be.add(be.mul_const(be.drop_to(w, g.level + 1), 0.99), g);
    return std::make_pair(upd, be.decrypt(upd));
  };
  const auto [a, av] = run(*lat);
  const auto [b, bv] = run(*mock);
  EXPECT_EQ(a.level, b.level);
  EXPECT_NEAR(a.scale / b.scale, 1.0, 1e-12);
  EXPECT_NEAR(a.noise / b.noise, 1.0, 1e-12);
  EXPECT_NEAR(a.magnitude / b.magnitude, 1.0, 1e-12);
  for (size_t j = 0; j < 10; ++j) EXPECT_NEAR(av[j], bv[j], 1e-3);
  const OpCounts& ca = lat->counts();
  const OpCounts& cb = mock->counts();
  EXPECT_EQ(ca.mul, cb.mul);
  EXPECT_EQ(ca.mul_plain, cb.mul_plain);
  EXPECT_EQ(ca.rotate, cb.rotate);
  EXPECT_EQ(ca.add, cb.add);
  EXPECT_EQ(ca.drop, cb.drop);
}

TEST(Backends, WorkerSideCannotDecrypt) {
  const auto& e = backend_env("small");
  auto be = make_mock_backend(e.ctx, false, 1);
  const Ciphertext ct = be->encrypt(std::vector<double>{1.0}, 2);
  try {
    be->decrypt(ct);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kSecretKeyRequired);
  }
  auto lat = make_lattice_backend(e.ctx, e.keys, 1);
  std::vector<uint8_t> buf;
  be->serialize(ct, buf);
  size_t off = 0;
  EXPECT_THROW(lat->deserialize(buf, off), Error);
}

}  // namespace
}  // namespace hedist
