// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include <unistd.h>

#include "hedist/data.hpp"
#include "hedist/error.hpp"

namespace hedist {
namespace {

namespace fs = std::filesystem;

const fs::path kMnistDir = "/root/data/mnist";

void put32(std::ofstream& out, uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

class IdxFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("hedist_idx_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  static constexpr size_t kSide = 28;

  static uint8_t pixel(size_t i, size_t r, size_t c) {
    return static_cast<uint8_t>((i * 37 + r * 11 + c * 5 + r * c) % 256);
  }

  void write(size_t count, const std::vector<uint8_t>& labels, uint32_t image_magic = 0x803) {
    std::ofstream im(dir_ / "img", std::ios::binary);
    put32(im, image_magic);
    put32(im, static_cast<uint32_t>(count));
    put32(im, kSide);
    put32(im, kSide);
    for (size_t i = 0; i < count; ++i)
      for (size_t r = 0; r < kSide; ++r)
        for (size_t c = 0; c < kSide; ++c) im.put(static_cast<char>(pixel(i, r, c)));
    std::ofstream lb(dir_ / "lab", std::ios::binary);
    put32(lb, 0x801);
    put32(lb, static_cast<uint32_t>(labels.size()));
    for (uint8_t l : labels) lb.put(static_cast<char>(l));
  }

  fs::path dir_;
};

TEST_F(IdxFiles, PoolingMatchesHandComputedTiles) {
  write(4, {3, 5, 8, 3});
  const Dataset ds = load_idx_binary(dir_ / "img", dir_ / "lab");
  ASSERT_EQ(ds.size(), 3u);
  ASSERT_EQ(ds.dim, 196u);
  EXPECT_EQ(ds.y, (std::vector<double>{1.0, -1.0, 1.0}));
  const size_t source[] = {0, 2, 3};
  for (size_t k = 0; k < 3; ++k) {
    for (size_t r = 0; r < 14; ++r) {
      for (size_t c = 0; c < 14; ++c) {
        const size_t i = source[k];
        const double sum = pixel(i, 2 * r, 2 * c) + pixel(i, 2 * r, 2 * c + 1) +
                           pixel(i, 2 * r + 1, 2 * c) + pixel(i, 2 * r + 1, 2 * c + 1);
        ASSERT_DOUBLE_EQ(ds.row(k)[r * 14 + c], sum / 1020.0) << k << " " << r << " " << c;
      }
    }
  }
}

TEST(Pool, ExtremesAndShape) {
  const std::vector<uint8_t> img = {255, 255, 0, 0, 255, 255, 0, 128};
  const auto p = avg_pool_2x2(img, 2, 4);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_DOUBLE_EQ(p[0], 1.0);
  EXPECT_DOUBLE_EQ(p[1], 128.0 / 1020.0);
  EXPECT_THROW(avg_pool_2x2(img, 1, 8), Error);
}

TEST_F(IdxFiles, RejectsBadMagicAndSizes) {
  write(2, {3, 8}, 0x804);
  try {
    read_idx_images(dir_ / "img");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
  write(2, {3, 8, 3});
  EXPECT_THROW(load_idx_binary(dir_ / "img", dir_ / "lab"), Error);
  EXPECT_THROW(read_idx_labels(dir_ / "missing"), Error);
}

TEST(Mnist, ThreeVersusEightCounts) {
  if (!fs::exists(kMnistDir / "train-images-idx3-ubyte")) GTEST_SKIP() << "MNIST not present";
  const MnistSplit s = load_mnist_3v8(kMnistDir, 0.0, 1);
  EXPECT_EQ(s.train.size(), 11982u);  // 6131 threes + 5851 eights
  EXPECT_EQ(s.validation.size(), 1984u);  // 1010 + 974
  EXPECT_EQ(s.train.dim, 196u);
  EXPECT_EQ(s.test.size(), 0u);
  s.train.validate();
  s.validation.validate();
  EXPECT_EQ(std::count(s.train.y.begin(), s.train.y.end(), 1.0), 6131);
  EXPECT_EQ(std::count(s.validation.y.begin(), s.validation.y.end(), 1.0), 1010);

  const MnistSplit r = load_mnist_3v8(kMnistDir, 0.1, 4);
  EXPECT_EQ(r.test.size(), 1198u);
  EXPECT_EQ(r.train.size() + r.test.size(), 11982u);
}

TEST(Split, DisjointAndSeeded) {
  Dataset ds;
  ds.dim = 1;
  for (int i = 0; i < 100; ++i) {
    ds.x.push_back(i);
    ds.y.push_back(i % 2 ? 1.0 : -1.0);
  }
  const auto [a, b] = random_split(ds, 0.25, 9);
  EXPECT_EQ(a.size(), 75u);
  EXPECT_EQ(b.size(), 25u);
  std::set<double> seen(a.x.begin(), a.x.end());
  for (double v : b.x) EXPECT_TRUE(seen.insert(v).second);
  EXPECT_EQ(seen.size(), 100u);
  EXPECT_EQ(random_split(ds, 0.25, 9).second.x, b.x);
  EXPECT_NE(random_split(ds, 0.25, 10).second.x, b.x);
  EXPECT_THROW(random_split(ds, 1.0, 1), Error);
}

TEST(Synth, ShapeScaleAndBias) {
  const Dataset ds = synth_dataset(200, 6, 2.0, 3);
  ds.validate();
  EXPECT_EQ(ds.size(), 200u);
  for (size_t i = 0; i < ds.size(); ++i) {
    EXPECT_DOUBLE_EQ(ds.row(i)[5], 1.0);
    for (double v : ds.row(i)) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  }
  EXPECT_EQ(std::count(ds.y.begin(), ds.y.end(), 1.0), 100);
  EXPECT_EQ(synth_dataset(200, 6, 2.0, 3).x, ds.x);
}

TEST(Synth, MarginGivesLinearSeparability) {
  // Separable iff the perceptron converges; with a positive margin it must.
  const Dataset ds = synth_dataset(400, 8, 2.0, 11);
  std::vector<double> w(ds.dim, 0.0);
  bool clean = false;
  for (int epoch = 0; epoch < 2000 && !clean; ++epoch) {
    clean = true;
    for (size_t i = 0; i < ds.size(); ++i) {
      const auto x = ds.row(i);
      const double m = ds.y[i] * std::inner_product(x.begin(), x.end(), w.begin(), 0.0);
      if (m <= 0) {
        clean = false;
        for (size_t j = 0; j < ds.dim; ++j) w[j] += ds.y[i] * x[j];
      }
    }
  }
  EXPECT_TRUE(clean);
}

double positive_share(const Dataset& ds, const std::vector<size_t>& shard) {
  double pos = 0;
  for (size_t i : shard) pos += ds.y[i] > 0 ? 1 : 0;
  return pos / static_cast<double>(shard.size());
}

TEST(Partition, CoversOnceWithBalancedSizes) {
  const Dataset ds = synth_dataset(103, 3, 1.0, 2);
  for (double skew : {0.0, 0.5, 1.0}) {
    for (size_t w : {1u, 2u, 4u, 7u}) {
      const auto shards = skewed_partition(ds, w, skew, 5);
      ASSERT_EQ(shards.size(), w);
      std::vector<size_t> all;
      size_t lo = ds.size(), hi = 0;
      for (const auto& s : shards) {
        all.insert(all.end(), s.begin(), s.end());
        lo = std::min(lo, s.size());
        hi = std::max(hi, s.size());
      }
      EXPECT_LE(hi - lo, 1u);
      std::sort(all.begin(), all.end());
      std::vector<size_t> want(ds.size());
      std::iota(want.begin(), want.end(), 0);
      EXPECT_EQ(all, want);
    }
  }
}

TEST(Partition, SkewSeparatesLabels) {
  const Dataset ds = synth_dataset(400, 3, 1.0, 2);
  for (size_t w : {2u, 4u}) {
    for (const auto& shard : skewed_partition(ds, w, 0.0, 5))
      EXPECT_NEAR(positive_share(ds, shard), 0.5, 0.05);
  }
  const auto full = skewed_partition(ds, 2, 1.0, 5);
  EXPECT_DOUBLE_EQ(positive_share(ds, full[0]), 0.0);
  EXPECT_DOUBLE_EQ(positive_share(ds, full[1]), 1.0);
  EXPECT_THROW(skewed_partition(ds, 0, 0.0, 1), Error);
  EXPECT_THROW(skewed_partition(ds, 2, 1.5, 1), Error);
}

}  // namespace
}  // namespace hedist
