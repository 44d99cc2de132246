// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

// Margin losses of linear classifiers and cubic approximations of their
// descent direction.
//
// Sign convention: a PolyApprox approximates g(m) = -dL/dm, the direction
// that decreases the loss as the margin m = y * w.x grows. With it the
// update reads w' = w + eta * mean(g(m_i) y_i x_i) - eta * lambda * w.

#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>

#include "hedist/backend.hpp"
#include "hedist/ring.hpp"

namespace hedist {

enum class LossKind : uint8_t { kBinomialDeviance = 0, kSvmHinge = 1, kHuber = 2 };

std::string_view loss_name(LossKind k) noexcept;
LossKind parse_loss(std::string_view name);

double loss_value(LossKind k, double m);
/// dL/dm; at kinks the left limit.
double loss_grad_exact(LossKind k, double m);
inline double descent_direction(LossKind k, double m) { return -loss_grad_exact(k, m); }

struct PolyApprox {
  LossKind kind = LossKind::kBinomialDeviance;
  std::array<double, 4> alpha{};  // alpha[i] multiplies m^i
  double lo = -8.0;
  double hi = 8.0;
  double residual = 0;  // max |p - g| on a dense grid over [lo, hi]
};

/// Ordinary least squares for the monomials up to `degree`, with a 1e-9
/// ridge on the normal equations. Rank deficiency raises kFitFailed.
std::array<double, 4> fit_least_squares(std::span<const double> xs, std::span<const double> ys,
                                        int degree);
/// Sample count used when callers do not choose one; two fits with different
/// seeds then agree within 1e-2 on the dense grid for every loss.
inline constexpr size_t kDefaultFitSamples = 100000;

/// Least squares over `n_samples` uniform points in [lo, hi]; a 1e-9 ridge
/// on the normal equations. Rank deficiency raises kFitFailed.
PolyApprox fit_poly_grad(LossKind k, int degree, double lo, double hi, size_t n_samples, Prng& rng);
/// Published reference coefficients.
PolyApprox published_coeffs(LossKind k);
/// Dense-grid sup error of `p` against the exact descent direction.
double dense_grid_residual(const PolyApprox& p, size_t points = 20001);

double eval_poly_plain(const PolyApprox& p, double x);
/// Two-level evaluation: x^2 and alpha3*x in parallel, then
/// x^2*(alpha3 x) + alpha2 x^2 + alpha1 x + alpha0.
Ciphertext eval_poly_enc(Backend& be, const PolyApprox& p, const Ciphertext& x);

}  // namespace hedist
