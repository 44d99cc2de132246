// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

// Block packing of a sample-by-feature matrix into ciphertext slots, and the
// encrypted kernels of one gradient step.
//
// A block is `rows` samples by `h` feature columns, row-major in the slots:
// sample r of the block, feature j sits at slot r*h + j. The weight vector is
// packed replicated: slot r*h + j holds w_j for every row r.

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "hedist/approx.hpp"
#include "hedist/backend.hpp"

namespace hedist {

struct PackLayout {
  size_t n_samples = 0;
  size_t dim = 0;
  size_t slots = 0;
  size_t h = 0;       // block columns, power of two >= dim
  size_t rows = 0;    // block rows, power of two, rows * h <= slots
  size_t blocks = 0;  // ceil(n_samples / rows)

  /// (block index, slot index) of X[sample][feature].
  std::pair<size_t, size_t> slot_of(size_t sample, size_t feature) const;
  size_t log_h() const noexcept;
  size_t log_rows() const noexcept;
};

/// h = smallest power of two >= dim; rows = largest power of two <= slots/h,
/// optionally capped by `max_rows` (rounded down to a power of two).
PackLayout plan_layout(size_t n_samples, size_t dim, size_t slots, size_t max_rows = 0);

using SlotVectors = std::vector<std::vector<double>>;

/// X row-major n x dim. Padding slots are zero.
SlotVectors pack_matrix(std::span<const double> x, const PackLayout& layout);
/// Labels replicated across the feature axis of their row.
SlotVectors pack_labels(std::span<const double> y, const PackLayout& layout);
/// Label-signed samples z_i = y_i x_i, the form the trainer encrypts.
SlotVectors pack_signed(std::span<const double> x, std::span<const double> y,
                        const PackLayout& layout);
std::vector<double> unpack_matrix(const SlotVectors& blocks, const PackLayout& layout);
/// Weight vector replicated over every block row.
std::vector<double> pack_weights(std::span<const double> w, const PackLayout& layout);
/// Reads w back from row 0 of a replicated packing.
std::vector<double> unpack_weights(std::span<const double> slots, const PackLayout& layout);
/// 1 at the first slot of each of the first `live_rows` rows, 0 elsewhere.
std::vector<double> row_head_mask(const PackLayout& layout, double value);

/// Slot r*h holds <w, x_r> for each block row r (other slots hold partial
/// sums). One multiplicative level.
Ciphertext enc_scores(Backend& be, const Ciphertext& block, const Ciphertext& w,
                      const PackLayout& layout);
/// c * p(s) at each row head and zero elsewhere, two levels. `c` folds the
/// learning rate and batch normalization into the mask plaintexts.
Ciphertext enc_poly_rows(Backend& be, const PolyApprox& p, const Ciphertext& scores, double c,
                         const PackLayout& layout);
/// Copies each row head across its row; no level.
Ciphertext broadcast_rows(Backend& be, const Ciphertext& heads, const PackLayout& layout);
/// sum over blocks and rows of coef_b * block_b, replicated across rows. One
/// level. Coefficients must already be replicated across their rows.
Ciphertext enc_grad(Backend& be, std::span<const Ciphertext> blocks,
                    std::span<const Ciphertext> coefs, const PackLayout& layout);

}  // namespace hedist
