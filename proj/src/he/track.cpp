// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "hedist/error.hpp"
#include "hedist/he.hpp"

namespace hedist::track {

namespace {

double tensor_error(double ma, double ea, double mb, double eb) {
  return ma * eb + mb * ea + ea * eb;
}

// An overflowed bound times a zero constant stays an (infinite) bound.
double sat(double bound) { return std::isnan(bound) ? HUGE_VAL : bound; }

// Scale carried relative to the canonical one; 1 for every ciphertext made
// through the public interface.
double scale_ratio(const HeContext& ctx, const CtMeta& a) {
  return a.scale / ctx.level_scale(a.level);
}

}  // namespace

CtMeta fresh(const HeContext& ctx, int level, double scale, double magnitude) {
  CtMeta m;
  m.level = level;
  m.scale = scale;
  m.magnitude = magnitude;
  m.op_error = ctx.fresh_error(level) * ctx.level_scale(level) / scale;
  m.noise = m.op_error;
  return m;
}

CtMeta add(const CtMeta& a, const CtMeta& b) {
  CtMeta m = a;
  m.noise = a.noise + b.noise;
  m.magnitude = a.magnitude + b.magnitude;
  m.op_error = 0;
  return m;
}

CtMeta add_plain(const HeContext& ctx, const CtMeta& a, double plain_magnitude) {
  CtMeta m = a;
  m.op_error = ctx.encoding_error(a.level);
  m.noise = a.noise + m.op_error;
  m.magnitude = a.magnitude + plain_magnitude;
  return m;
}

CtMeta mul(const HeContext& ctx, const CtMeta& a, const CtMeta& b) {
  require(a.level >= 1, ErrorCode::kDepthExhausted, "multiplication needs at least one level");
  CtMeta m;
  m.level = a.level - 1;
  m.scale = ctx.level_scale(m.level) * scale_ratio(ctx, a) * scale_ratio(ctx, b);
  m.magnitude = a.magnitude * b.magnitude;
  m.op_error = ctx.keyswitch_error(a.level, a.scale * b.scale) + ctx.rescale_error(m.level);
  m.noise = tensor_error(a.magnitude, a.noise, b.magnitude, b.noise) + m.op_error;
  m.noise = std::max({sat(m.noise), a.noise, b.noise});
  return m;
}

CtMeta mul_plain(const HeContext& ctx, const CtMeta& a, double plain_magnitude) {
  require(a.level >= 1, ErrorCode::kDepthExhausted, "multiplication needs at least one level");
  CtMeta m;
  m.level = a.level - 1;
  m.scale = ctx.level_scale(m.level) * scale_ratio(ctx, a);
  m.magnitude = a.magnitude * plain_magnitude;
  const double enc = ctx.encoding_error(a.level);
  m.op_error = a.magnitude * enc + ctx.rescale_error(m.level);
  m.noise = tensor_error(a.magnitude, a.noise, plain_magnitude, enc) + ctx.rescale_error(m.level);
  m.noise = std::max(sat(m.noise), a.noise);
  return m;
}

CtMeta mul_const(const HeContext& ctx, const CtMeta& a, double c) {
  require(a.level >= 1, ErrorCode::kDepthExhausted, "multiplication needs at least one level");
  const double d = ctx.level_scale(a.level);
  CtMeta m;
  m.level = a.level - 1;
  m.scale = ctx.level_scale(m.level) * scale_ratio(ctx, a);
  m.magnitude = a.magnitude * std::abs(c);
  m.op_error = (a.magnitude + a.noise) * 0.5 / d + ctx.rescale_error(m.level);
  m.noise = std::abs(c) * a.noise + m.op_error;
  m.noise = std::max(sat(m.noise), a.noise);
  return m;
}

CtMeta rotate(const HeContext& ctx, const CtMeta& a) {
  CtMeta m = a;
  m.op_error = ctx.keyswitch_error(a.level, a.scale);
  m.noise = a.noise + m.op_error;
  return m;
}

std::pair<double, int64_t> drop_factor(const HeContext& ctx, const CtMeta& a, int to) {
  const double q =
      static_cast<double>(ctx.ring()->modulus(static_cast<size_t>(to) + 1).value());
  const double target = ctx.level_scale(to) * scale_ratio(ctx, a);
  const double kc = std::round(target * q / a.scale);
  return {std::abs(a.scale * kc / q / target - 1.0), static_cast<int64_t>(kc)};
}

CtMeta drop(const HeContext& ctx, const CtMeta& a, int level, double rel_scale_error) {
  require(level >= 0 && level <= a.level, ErrorCode::kStructural, "cannot drop to a higher level");
  if (level == a.level) return a;
  CtMeta m;
  m.level = level;
  m.scale = ctx.level_scale(level) * scale_ratio(ctx, a);
  m.magnitude = a.magnitude;
  m.op_error = (a.magnitude + a.noise) * rel_scale_error + ctx.rescale_error(level);
  m.noise = a.noise * (1.0 + rel_scale_error) + m.op_error;
  return m;
}

}  // namespace hedist::track
