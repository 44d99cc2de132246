// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include "hedist/packing.hpp"

#include <bit>

#include "hedist/error.hpp"

namespace hedist {

std::pair<size_t, size_t> PackLayout::slot_of(size_t sample, size_t feature) const {
  require(sample < n_samples && feature < dim, ErrorCode::kStructural, "index outside layout");
  return {sample / rows, (sample % rows) * h + feature};
}

size_t PackLayout::log_h() const noexcept { return static_cast<size_t>(std::countr_zero(h)); }
size_t PackLayout::log_rows() const noexcept {
  return static_cast<size_t>(std::countr_zero(rows));
}

PackLayout plan_layout(size_t n_samples, size_t dim, size_t slots, size_t max_rows) {
  require(dim >= 1 && slots >= 1 && std::has_single_bit(slots), ErrorCode::kLayoutInfeasible,
          "dimension and power-of-two slot count required");
  require(dim <= slots, ErrorCode::kLayoutInfeasible, "feature dimension exceeds slot count");
  require(n_samples >= 1, ErrorCode::kLayoutInfeasible, "no samples to pack");
  PackLayout l;
  l.n_samples = n_samples;
  l.dim = dim;
  l.slots = slots;
  l.h = std::bit_ceil(dim);
  l.rows = slots / l.h;
  if (max_rows > 0) l.rows = std::min(l.rows, std::bit_floor(max_rows));
  l.blocks = (n_samples + l.rows - 1) / l.rows;
  return l;
}

namespace {

void check_shape(std::span<const double> x, const PackLayout& layout) {
  require(x.size() == layout.n_samples * layout.dim, ErrorCode::kStructural,
          "matrix shape does not match layout");
}

}  // namespace

SlotVectors pack_matrix(std::span<const double> x, const PackLayout& layout) {
  check_shape(x, layout);
  SlotVectors out(layout.blocks, std::vector<double>(layout.slots, 0.0));
  for (size_t i = 0; i < layout.n_samples; ++i) {
    for (size_t j = 0; j < layout.dim; ++j) {
      const auto [b, s] = layout.slot_of(i, j);
      out[b][s] = x[i * layout.dim + j];
    }
  }
  return out;
}

SlotVectors pack_labels(std::span<const double> y, const PackLayout& layout) {
  require(y.size() == layout.n_samples, ErrorCode::kStructural, "label count does not match layout");
  SlotVectors out(layout.blocks, std::vector<double>(layout.slots, 0.0));
  for (size_t i = 0; i < layout.n_samples; ++i) {
    for (size_t j = 0; j < layout.dim; ++j) {
      const auto [b, s] = layout.slot_of(i, j);
      out[b][s] = y[i];
    }
  }
  return out;
}

SlotVectors pack_signed(std::span<const double> x, std::span<const double> y,
                        const PackLayout& layout) {
  check_shape(x, layout);
  require(y.size() == layout.n_samples, ErrorCode::kStructural, "label count does not match layout");
  SlotVectors out(layout.blocks, std::vector<double>(layout.slots, 0.0));
  for (size_t i = 0; i < layout.n_samples; ++i) {
    for (size_t j = 0; j < layout.dim; ++j) {
      const auto [b, s] = layout.slot_of(i, j);
      out[b][s] = y[i] * x[i * layout.dim + j];
    }
  }
  return out;
}

std::vector<double> unpack_matrix(const SlotVectors& blocks, const PackLayout& layout) {
  require(blocks.size() == layout.blocks, ErrorCode::kStructural, "block count mismatch");
  std::vector<double> x(layout.n_samples * layout.dim);
  for (size_t i = 0; i < layout.n_samples; ++i) {
    for (size_t j = 0; j < layout.dim; ++j) {
      const auto [b, s] = layout.slot_of(i, j);
      x[i * layout.dim + j] = blocks[b].at(s);
    }
  }
  return x;
}

std::vector<double> pack_weights(std::span<const double> w, const PackLayout& layout) {
  require(w.size() == layout.dim, ErrorCode::kStructural, "weight length does not match layout");
  std::vector<double> out(layout.slots, 0.0);
  for (size_t r = 0; r < layout.rows; ++r)
    for (size_t j = 0; j < layout.dim; ++j) out[r * layout.h + j] = w[j];
  return out;
}

std::vector<double> unpack_weights(std::span<const double> slots, const PackLayout& layout) {
  require(slots.size() >= layout.dim, ErrorCode::kStructural, "slot vector too short");
  return {slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(layout.dim)};
}

std::vector<double> row_head_mask(const PackLayout& layout, double value) {
  std::vector<double> m(layout.slots, 0.0);
  for (size_t r = 0; r < layout.rows; ++r) m[r * layout.h] = value;
  return m;
}

Ciphertext enc_scores(Backend& be, const Ciphertext& block, const Ciphertext& w,
                      const PackLayout& layout) {
  require(w.level >= 1, ErrorCode::kDepthExhausted, "scores need one level");
  Ciphertext acc = be.mul(be.drop_to(block, w.level), w);
  for (size_t k = 1; k < layout.h; k <<= 1) acc = be.add(acc, be.rotate(acc, static_cast<int>(k)));
  return acc;
}

Ciphertext enc_poly_rows(Backend& be, const PolyApprox& p, const Ciphertext& s, double c,
                         const PackLayout& layout) {
  require(s.level >= 2, ErrorCode::kDepthExhausted, "polynomial evaluation needs two levels");
  const Ciphertext u3 = be.mul_plain(s, row_head_mask(layout, p.alpha[3] * c));
  const Ciphertext sq = be.mul(s, s);
  Ciphertext acc = be.mul(sq, u3);
  if (p.alpha[2] != 0.0) acc = be.add(acc, be.mul_plain(sq, row_head_mask(layout, p.alpha[2] * c)));
  const Ciphertext s1 = be.drop_to(s, sq.level);
  acc = be.add(acc, be.mul_plain(s1, row_head_mask(layout, p.alpha[1] * c)));
  return be.add_plain(acc, row_head_mask(layout, p.alpha[0] * c));
}

Ciphertext broadcast_rows(Backend& be, const Ciphertext& heads, const PackLayout& layout) {
  Ciphertext acc = heads;
  for (size_t k = 1; k < layout.h; k <<= 1) acc = be.add(acc, be.rotate(acc, -static_cast<int>(k)));
  return acc;
}

Ciphertext enc_grad(Backend& be, std::span<const Ciphertext> blocks,
                    std::span<const Ciphertext> coefs, const PackLayout& layout) {
  require(!blocks.empty() && blocks.size() == coefs.size(), ErrorCode::kStructural,
          "one coefficient ciphertext per block required");
  const int level = coefs[0].level;
  require(level >= 1, ErrorCode::kDepthExhausted, "gradient combine needs one level");
  Ciphertext acc = be.mul(be.drop_to(blocks[0], level), coefs[0]);
  for (size_t b = 1; b < blocks.size(); ++b)
    acc = be.add(acc, be.mul(be.drop_to(blocks[b], level), coefs[b]));
  // Fold across rows; cyclic, so every row ends up with the full sum.
  for (size_t k = layout.h; k < layout.slots; k <<= 1)
    acc = be.add(acc, be.rotate(acc, static_cast<int>(k)));
  return acc;
}

}  // namespace hedist
