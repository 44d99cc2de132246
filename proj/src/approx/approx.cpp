// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include "hedist/approx.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "hedist/error.hpp"

namespace hedist {

std::string_view loss_name(LossKind k) noexcept {
  switch (k) {
    case LossKind::kBinomialDeviance:
      return "deviance";
    case LossKind::kSvmHinge:
      return "hinge";
    case LossKind::kHuber:
      return "huber";
  }
  return "?";
}

LossKind parse_loss(std::string_view name) {
  if (name == "deviance" || name == "logistic" || name == "binomial") return LossKind::kBinomialDeviance;
  if (name == "hinge" || name == "svm") return LossKind::kSvmHinge;
  if (name == "huber") return LossKind::kHuber;
  fail(ErrorCode::kConfig, "unknown loss: " + std::string(name));
}

double loss_value(LossKind k, double m) {
  switch (k) {
    case LossKind::kBinomialDeviance:
      // log(1 + exp(-m)) without overflow.
      return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
    case LossKind::kSvmHinge:
      return std::max(0.0, 1.0 - m);
    case LossKind::kHuber:
      if (m < -1) return -4.0 * m;
      return m < 1 ? (1.0 - m) * (1.0 - m) : 0.0;
  }
  return 0;
}

double loss_grad_exact(LossKind k, double m) {
  switch (k) {
    case LossKind::kBinomialDeviance:
      return -1.0 / (1.0 + std::exp(m));
    case LossKind::kSvmHinge:
      return m <= 1 ? -1.0 : 0.0;
    case LossKind::kHuber:
      if (m <= -1) return -4.0;
      return m <= 1 ? -2.0 * (1.0 - m) : 0.0;
  }
  return 0;
}

double eval_poly_plain(const PolyApprox& p, double x) {
  return ((p.alpha[3] * x + p.alpha[2]) * x + p.alpha[1]) * x + p.alpha[0];
}

double dense_grid_residual(const PolyApprox& p, size_t points) {
  double worst = 0;
  for (size_t i = 0; i < points; ++i) {
    const double x = p.lo + (p.hi - p.lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    worst = std::max(worst, std::abs(eval_poly_plain(p, x) - descent_direction(p.kind, x)));
  }
  return worst;
}

std::array<double, 4> fit_least_squares(std::span<const double> xs, std::span<const double> ys,
                                        int degree) {
  require(degree >= 0 && degree <= 3, ErrorCode::kInvalidArgument, "degree must be in [0, 3]");
  require(xs.size() == ys.size(), ErrorCode::kInvalidArgument, "sample and target counts differ");
  const int cols = degree + 1;
  require(xs.size() >= static_cast<size_t>(cols), ErrorCode::kFitFailed,
          "fewer samples than coefficients");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(xs.size()), cols);
  Eigen::VectorXd y(static_cast<Eigen::Index>(xs.size()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double pw = 1;
    for (int c = 0; c < cols; ++c) {
      a(i, c) = pw;
      pw *= xs[static_cast<size_t>(i)];
    }
    y(i) = ys[static_cast<size_t>(i)];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < cols) fail(ErrorCode::kFitFailed, "design matrix is rank deficient");
  Eigen::MatrixXd normal = a.transpose() * a;
  normal.diagonal().array() += 1e-9;
  const Eigen::VectorXd coef = normal.ldlt().solve(a.transpose() * y);
  require(coef.allFinite(), ErrorCode::kFitFailed, "normal equations produced non-finite values");
  std::array<double, 4> out{};
  for (int c = 0; c < cols; ++c) out[static_cast<size_t>(c)] = coef(c);
  return out;
}

PolyApprox fit_poly_grad(LossKind k, int degree, double lo, double hi, size_t n_samples,
                         Prng& rng) {
  require(degree >= 0 && degree <= 3, ErrorCode::kInvalidArgument, "degree must be in [0, 3]");
  require(n_samples >= 10 * static_cast<size_t>(degree + 1), ErrorCode::kInvalidArgument,
          "need at least 10 samples per coefficient");
  require(std::isfinite(lo) && std::isfinite(hi) && lo <= hi, ErrorCode::kInvalidArgument,
          "fit interval must be finite and ordered");
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> xs(n_samples), ys(n_samples);
  for (size_t i = 0; i < n_samples; ++i) {
    xs[i] = lo == hi ? lo : dist(rng);
    ys[i] = descent_direction(k, xs[i]);
  }
  PolyApprox p;
  p.kind = k;
  p.lo = lo;
  p.hi = hi;
  p.alpha = fit_least_squares(xs, ys, degree);
  p.residual = dense_grid_residual(p);
  return p;
}

PolyApprox published_coeffs(LossKind k) {
  PolyApprox p;
  p.kind = k;
  switch (k) {
    case LossKind::kBinomialDeviance:
      p.alpha = {0.5, -0.0843, 0.0, 0.0002};
      break;
    case LossKind::kSvmHinge:
      p.alpha = {0.5875, -0.1005, 0.0008, -0.00039};
      break;
    case LossKind::kHuber:
      p.alpha = {2.0, -0.1311, 0.0, 0.00005};
      break;
  }
  p.residual = dense_grid_residual(p);
  return p;
}

Ciphertext eval_poly_enc(Backend& be, const PolyApprox& p, const Ciphertext& x) {
  require(x.level >= 2, ErrorCode::kDepthExhausted, "polynomial evaluation needs two levels");
  const Ciphertext x2 = be.mul(x, x);
  const Ciphertext a3x = be.mul_const(x, p.alpha[3]);
  Ciphertext acc = be.mul(x2, a3x);
  acc = be.add(acc, be.mul_const(x2, p.alpha[2]));
  acc = be.add(acc, be.drop_to(be.mul_const(x, p.alpha[1]), acc.level));
  const std::vector<double> c0(be.slots(), p.alpha[0]);
  return be.add_plain(acc, c0);
}

}  // namespace hedist
