// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

// Cached contexts and key sets for tests that drive the Backend interface.

#pragma once

#include <map>
#include <memory>
#include <string>

#include "hedist/backend.hpp"
#include "hedist/he.hpp"

namespace hedist::testing {

struct BackendEnv {
  HeContextPtr ctx;
  std::shared_ptr<const LatticeKeys> keys;
};

inline const BackendEnv& backend_env(const std::string& profile, int max_level = -1) {
  static std::map<std::pair<std::string, int>, BackendEnv> cache;
  const auto key = std::make_pair(profile, max_level);
  auto it = cache.find(key);
  if (it == cache.end()) {
    HeParams params = HeParams::from_profile(profile);
    if (max_level > 0) params.max_level = max_level;
    BackendEnv e;
    e.ctx = HeContext::create(params);
    Prng rng(7);
    KeySet ks = keygen(e.ctx, rng);
    auto lk = std::make_shared<LatticeKeys>();
    lk->sk = std::move(ks.sk);
    lk->pk = std::move(ks.pk);
    lk->evk = std::move(ks.evk);
    lk->rot = std::move(ks.rot);
    e.keys = std::move(lk);
    it = cache.emplace(key, std::move(e)).first;
  }
  return it->second;
}

inline std::unique_ptr<Backend> make_backend(const BackendEnv& e, BackendKind kind,
                                             uint64_t seed = 1) {
  if (kind == BackendKind::kLattice) return make_lattice_backend(e.ctx, e.keys, seed);
  return make_mock_backend(e.ctx, true, seed);
}

}  // namespace hedist::testing
