// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include "hedist/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <tuple>

#include "hedist/error.hpp"

namespace hedist {

namespace {

constexpr uint32_t kImageMagic = 0x00000803;
constexpr uint32_t kLabelMagic = 0x00000801;

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

uint32_t be32(const std::vector<uint8_t>& b, size_t off) {
  return (uint32_t{b[off]} << 24) | (uint32_t{b[off + 1]} << 16) | (uint32_t{b[off + 2]} << 8) |
         uint32_t{b[off + 3]};
}

}  // namespace

Dataset Dataset::subset(std::span<const size_t> idx) const {
  Dataset out;
  out.dim = dim;
  out.x.reserve(idx.size() * dim);
  out.y.reserve(idx.size());
  for (size_t i : idx) {
    require(i < size(), ErrorCode::kStructural, "subset index out of range");
    const auto r = row(i);
    out.x.insert(out.x.end(), r.begin(), r.end());
    out.y.push_back(y[i]);
  }
  return out;
}

void Dataset::validate() const {
  require(dim >= 1, ErrorCode::kStructural, "dataset has no features");
  require(x.size() == y.size() * dim, ErrorCode::kStructural, "feature matrix and labels disagree");
  for (double v : y) require(v == 1.0 || v == -1.0, ErrorCode::kStructural, "labels must be +1 or -1");
  for (double v : x) require(std::isfinite(v), ErrorCode::kStructural, "non-finite feature value");
}

IdxImages read_idx_images(const std::filesystem::path& path) {
  const auto b = read_file(path);
  if (b.size() < 16) fail(ErrorCode::kIo, "truncated IDX header in " + path.string());
  if (be32(b, 0) != kImageMagic) fail(ErrorCode::kIo, "bad IDX image magic in " + path.string());
  IdxImages img;
  img.count = be32(b, 4);
  img.rows = be32(b, 8);
  img.cols = be32(b, 12);
  const size_t need = img.count * img.rows * img.cols;
  if (b.size() != 16 + need) fail(ErrorCode::kIo, "IDX image size mismatch in " + path.string());
  img.pixels.assign(b.begin() + 16, b.end());
  return img;
}

std::vector<uint8_t> read_idx_labels(const std::filesystem::path& path) {
  const auto b = read_file(path);
  if (b.size() < 8) fail(ErrorCode::kIo, "truncated IDX header in " + path.string());
  if (be32(b, 0) != kLabelMagic) fail(ErrorCode::kIo, "bad IDX label magic in " + path.string());
  if (b.size() != 8 + size_t{be32(b, 4)})
    fail(ErrorCode::kIo, "IDX label size mismatch in " + path.string());
  return {b.begin() + 8, b.end()};
}

std::vector<double> avg_pool_2x2(std::span<const uint8_t> image, size_t rows, size_t cols) {
  require(rows % 2 == 0 && cols % 2 == 0 && image.size() == rows * cols, ErrorCode::kStructural,
          "pooling needs an even-sized image");
  std::vector<double> out((rows / 2) * (cols / 2));
  for (size_t r = 0; r < rows / 2; ++r) {
    for (size_t c = 0; c < cols / 2; ++c) {
      const size_t i = 2 * r * cols + 2 * c;
      const unsigned sum = image[i] + image[i + 1] + image[i + cols] + image[i + cols + 1];
      out[r * (cols / 2) + c] = sum / (4.0 * 255.0);
    }
  }
  return out;
}

Dataset load_idx_binary(const std::filesystem::path& images, const std::filesystem::path& labels,
                        int pos, int neg) {
  const IdxImages img = read_idx_images(images);
  const auto lab = read_idx_labels(labels);
  if (lab.size() != img.count) fail(ErrorCode::kIo, "image and label counts differ");
  Dataset ds;
  ds.dim = (img.rows / 2) * (img.cols / 2);
  const size_t px = img.rows * img.cols;
  for (size_t i = 0; i < img.count; ++i) {
    if (lab[i] != pos && lab[i] != neg) continue;
    const auto pooled = avg_pool_2x2({img.pixels.data() + i * px, px}, img.rows, img.cols);
    ds.x.insert(ds.x.end(), pooled.begin(), pooled.end());
    ds.y.push_back(lab[i] == pos ? 1.0 : -1.0);
  }
  return ds;
}

std::pair<Dataset, Dataset> random_split(const Dataset& ds, double fraction, uint64_t seed) {
  require(fraction >= 0 && fraction < 1, ErrorCode::kConfig, "split fraction must be in [0, 1)");
  std::vector<size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto second = static_cast<size_t>(std::llround(fraction * static_cast<double>(ds.size())));
  const std::span<const size_t> all(idx);
  return {ds.subset(all.first(ds.size() - second)), ds.subset(all.last(second))};
}

MnistSplit load_mnist_3v8(const std::filesystem::path& dir, double test_fraction, uint64_t seed) {
  MnistSplit s;
  const Dataset full = load_idx_binary(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  s.validation = load_idx_binary(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  std::tie(s.train, s.test) = random_split(full, test_fraction, seed);
  return s;
}

Dataset synth_dataset(size_t n, size_t d, double margin, uint64_t seed) {
  require(n >= 1 && d >= 2, ErrorCode::kConfig, "synthetic data needs n >= 1 and d >= 2");
  require(margin >= 0, ErrorCode::kConfig, "margin must be non-negative");
  const size_t f = d - 1;  // informative features; the last column is the bias
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> u(f);
  double norm = 0;
  for (auto& v : u) {
    v = g(rng);
    norm += v * v;
  }
  for (auto& v : u) v /= std::sqrt(norm);

  Dataset ds;
  ds.dim = d;
  ds.x.assign(n * d, 1.0);
  ds.y.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const double label = (i % 2 == 0) ? 1.0 : -1.0;
    double* row = ds.x.data() + i * d;
    double along = 0;
    for (size_t j = 0; j < f; ++j) {
      row[j] = g(rng);
      along += row[j] * u[j];
    }
    // Replace the component along u by one on the label's side of the gap.
    const double target = label * (margin / 2 + std::abs(g(rng)));
    for (size_t j = 0; j < f; ++j) row[j] += (target - along) * u[j];
    ds.y[i] = label;
  }
  for (size_t j = 0; j < f; ++j) {
    double lo = ds.x[j], hi = ds.x[j];
    for (size_t i = 1; i < n; ++i) {
      lo = std::min(lo, ds.x[i * d + j]);
      hi = std::max(hi, ds.x[i * d + j]);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    for (size_t i = 0; i < n; ++i) ds.x[i * d + j] = (ds.x[i * d + j] - lo) / span;
  }
  return ds;
}

std::vector<std::vector<size_t>> skewed_partition(const Dataset& ds, size_t workers, double skew,
                                                  uint64_t seed) {
  require(workers >= 1, ErrorCode::kConfig, "at least one worker required");
  require(skew >= 0 && skew <= 1, ErrorCode::kConfig, "skew must be in [0, 1]");
  require(ds.size() >= workers, ErrorCode::kConfig, "fewer samples than workers");
  // Each sample gets its quantile within its class under a random order, so
  // at skew 0 the classes interleave evenly and every chunk keeps the global
  // label ratio; skew 1 sorts by label first.
  std::mt19937_64 rng(seed);
  std::vector<size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_pos = static_cast<size_t>(
      std::count_if(ds.y.begin(), ds.y.end(), [](double v) { return v > 0; }));
  const size_t n_class[2] = {ds.size() - n_pos, n_pos};
  size_t seen[2] = {0, 0};
  std::vector<std::tuple<double, double, size_t>> key(ds.size());
  for (size_t i : perm) {
    const size_t cls = ds.y[i] > 0 ? 1 : 0;
    const double q = (static_cast<double>(seen[cls]++) + 0.5) / static_cast<double>(n_class[cls]);
    key[i] = {skew * static_cast<double>(cls) + (1.0 - skew) * q, q, i};
  }
  std::sort(key.begin(), key.end());
  std::vector<std::vector<size_t>> shards(workers);
  const size_t base = ds.size() / workers, extra = ds.size() % workers;
  size_t at = 0;
  for (size_t w = 0; w < workers; ++w) {
    const size_t len = base + (w < extra ? 1 : 0);
    for (size_t k = 0; k < len; ++k) shards[w].push_back(std::get<2>(key[at++]));
  }
  return shards;
}

}  // namespace hedist
