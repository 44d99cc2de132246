// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "hedist/error.hpp"

namespace hedist {

/// Little-endian append-only encoder.
class ByteWriter {
 public:
  explicit ByteWriter(std::vector<uint8_t>& out) : out_(out) {}

  void u8(uint8_t v) { out_.push_back(v); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
  void bytes(std::span<const uint8_t> b) {
    u64(b.size());
    out_.insert(out_.end(), b.begin(), b.end());
  }
  void str(const std::string& s) {
    u64(s.size());
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void f64s(std::span<const double> v) {
    u64(v.size());
    for (double d : v) f64(d);
  }
  /// Bulk residues, little-endian, no length prefix.
  void u64_run(std::span<const uint64_t> v) {
    const size_t at = out_.size();
    out_.resize(at + v.size() * 8);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out_.data() + at, v.data(), v.size() * 8);
    } else {
      for (size_t i = 0; i < v.size(); ++i)
        for (int b = 0; b < 8; ++b) out_[at + 8 * i + b] = static_cast<uint8_t>(v[i] >> (8 * b));
    }
  }

 private:
  std::vector<uint8_t>& out_;
};

/// Bounds-checked little-endian decoder; throws kStructural on underrun.
class ByteReader {
 public:
  ByteReader(std::span<const uint8_t> in, size_t& offset) : in_(in), off_(offset) {}

  uint8_t u8() {
    need(1);
    return in_[off_++];
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(in_[off_ + i]) << (8 * i);
    off_ += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(in_[off_ + i]) << (8 * i);
    off_ += 8;
    return v;
  }
  int64_t i64() { return static_cast<int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<uint8_t> bytes() {
    const uint64_t n = u64();
    need(n);
    std::vector<uint8_t> b(in_.begin() + off_, in_.begin() + off_ + n);
    off_ += n;
    return b;
  }
  std::string str() {
    const uint64_t n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + off_), n);
    off_ += n;
    return s;
  }
  std::vector<double> f64s() {
    const uint64_t n = u64();
    need(n * 8);
    std::vector<double> v(n);
    for (auto& d : v) d = f64();
    return v;
  }
  void u64_run(std::span<uint64_t> dst) {
    need(dst.size() * 8);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(dst.data(), in_.data() + off_, dst.size() * 8);
      off_ += dst.size() * 8;
    } else {
      for (auto& v : dst) v = u64();
    }
  }
  size_t remaining() const noexcept { return in_.size() - off_; }

 private:
  void need(uint64_t n) const {
    if (n > in_.size() - off_) fail(ErrorCode::kStructural, "serialized object truncated");
  }
  std::span<const uint8_t> in_;
  size_t& off_;
};

}  // namespace hedist
