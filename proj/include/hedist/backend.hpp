// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

// One evaluation interface, two implementations: the lattice scheme of he.hpp
// and a mock that stores plain slot values with injected gaussian noise. The
// mock follows the same level/scale/noise bookkeeping, so the training engine
// runs unchanged on either.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "hedist/he.hpp"

namespace hedist {

struct OpCounts {
  uint64_t add = 0;        // add, sub, add_plain
  uint64_t mul = 0;        // ciphertext x ciphertext
  uint64_t mul_plain = 0;  // plaintext vector or constant
  uint64_t rotate = 0;     // key-switched rotations
  uint64_t drop = 0;
  uint64_t encrypt = 0;
  uint64_t decrypt = 0;
  uint64_t refresh = 0;
  double compute_seconds = 0;  // wall time spent inside backend operations

  OpCounts& operator+=(const OpCounts& o);
  uint64_t total_mul() const noexcept { return mul + mul_plain; }
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual BackendKind kind() const noexcept = 0;
  const HeContextPtr& context() const noexcept { return ctx_; }
  size_t slots() const noexcept { return ctx_->slots(); }
  int max_level() const noexcept { return ctx_->max_level(); }
  virtual bool has_secret() const noexcept = 0;

  virtual Ciphertext encrypt(std::span<const double> values, int level) = 0;
  /// Requires the secret key (server side); kSecretKeyRequired otherwise.
  virtual std::vector<double> decrypt(const Ciphertext& ct) = 0;
  Ciphertext refresh(const Ciphertext& ct, int level);
  /// Counts a refresh assembled from separate decrypt and encrypt calls.
  void note_refresh() noexcept { ++counts_.refresh; }

  virtual Ciphertext add(const Ciphertext& a, const Ciphertext& b) = 0;
  virtual Ciphertext sub(const Ciphertext& a, const Ciphertext& b) = 0;
  virtual Ciphertext add_plain(const Ciphertext& a, std::span<const double> values) = 0;
  virtual Ciphertext mul(const Ciphertext& a, const Ciphertext& b) = 0;
  /// Plaintext vector encoded at the ciphertext's level and canonical scale.
  virtual Ciphertext mul_plain(const Ciphertext& a, std::span<const double> values) = 0;
  virtual Ciphertext mul_const(const Ciphertext& a, double c) = 0;
  virtual Ciphertext rotate(const Ciphertext& a, int step) = 0;
  virtual Ciphertext drop_to(const Ciphertext& a, int level) = 0;

  void serialize(const Ciphertext& ct, std::vector<uint8_t>& out) const;
  Ciphertext deserialize(std::span<const uint8_t> in, size_t& offset) const;

  const OpCounts& counts() const noexcept { return counts_; }
  void reset_counts() noexcept { counts_ = {}; }

 protected:
  explicit Backend(HeContextPtr ctx) : ctx_(std::move(ctx)) {}
  HeContextPtr ctx_;
  OpCounts counts_;
};

/// Key material a lattice backend may hold; workers get everything but `sk`.
struct LatticeKeys {
  std::optional<SecretKey> sk;
  PublicKey pk;
  EvalKey evk;
  RotKeys rot;
};

std::unique_ptr<Backend> make_lattice_backend(HeContextPtr ctx, std::shared_ptr<const LatticeKeys> keys,
                                              uint64_t seed);
/// `holds_secret` only gates decrypt, to mirror which side may see plaintext.
std::unique_ptr<Backend> make_mock_backend(HeContextPtr ctx, bool holds_secret, uint64_t seed);

}  // namespace hedist
