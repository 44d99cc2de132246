// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

// Datasets: the MNIST 3-vs-8 task, synthetic separable blobs, and the
// partitioning of a training set across workers.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace hedist {

struct Dataset {
  size_t dim = 0;
  std::vector<double> x;  // row-major, size() x dim
  std::vector<double> y;  // +1 / -1

  size_t size() const noexcept { return y.size(); }
  std::span<const double> row(size_t i) const { return {x.data() + i * dim, dim}; }
  Dataset subset(std::span<const size_t> idx) const;
  /// Throws kStructural when shapes or labels are off.
  void validate() const;
};

struct IdxImages {
  size_t count = 0, rows = 0, cols = 0;
  std::vector<uint8_t> pixels;
};

/// Big-endian IDX readers; magic 0x00000803 for images, 0x00000801 for labels.
IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<uint8_t> read_idx_labels(const std::filesystem::path& path);

/// Mean of each 2x2 tile of a rows x cols image, scaled from [0,255] to [0,1].
std::vector<double> avg_pool_2x2(std::span<const uint8_t> image, size_t rows, size_t cols);

/// Digits `pos` -> +1 and `neg` -> -1, pooled to 14x14.
Dataset load_idx_binary(const std::filesystem::path& images, const std::filesystem::path& labels,
                        int pos = 3, int neg = 8);

struct MnistSplit {
  Dataset train;       // training part of the seeded re-split
  Dataset test;        // held-out part of the re-split
  Dataset validation;  // the official test files, evaluated by the server
};

/// Reads the four standard files from `dir`. `test_fraction` of the 11982
/// training samples is split off under `seed`; 0 keeps them all for training.
MnistSplit load_mnist_3v8(const std::filesystem::path& dir, double test_fraction, uint64_t seed);

/// Random split; returns (first, second) with round(n * fraction) in second.
std::pair<Dataset, Dataset> random_split(const Dataset& ds, double fraction, uint64_t seed);

/// Two gaussian classes separated along a random unit direction by at least
/// `margin` (in unit-variance coordinates), then min-max scaled to [0,1].
/// The last of the `d` columns is a constant 1 so the classes remain
/// separable by a hyperplane through the origin after scaling.
Dataset synth_dataset(size_t n, size_t d, double margin, uint64_t seed);

/// Index shards of near-equal size (they differ by at most one). skew 0 is a
/// class-stratified random split, so every shard keeps the global label
/// ratio; skew 1 sorts by label first, so shards are as label-homogeneous as
/// the class counts allow.
std::vector<std::vector<size_t>> skewed_partition(const Dataset& ds, size_t workers, double skew,
                                                  uint64_t seed);

}  // namespace hedist
