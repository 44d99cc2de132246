// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "hedist/error.hpp"
#include "hedist/he.hpp"

namespace hedist {

namespace {

// Slot error bounds are a 7-sigma tail times a safety factor of two.
constexpr double kTail = 7.0;
constexpr double kSafety = 2.0;
// Headroom in bits of P over the largest Q.
constexpr double kSpecialMargin = 8.0;

void bit_reverse_permute(std::vector<std::complex<double>>& v) {
  const size_t n = v.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(v[i], v[j]);
  }
}

}  // namespace

double HeParams::scale() const noexcept { return std::ldexp(1.0, log_scale); }

HeParams HeParams::from_profile(std::string_view name) {
  HeParams p;
  p.profile = std::string(name);
  if (name == "distributed") {
    p.ring_degree = 8192;
    p.max_level = 6;
  } else if (name == "centralized") {
    p.ring_degree = 8192;
    p.max_level = 24;
  } else if (name == "small") {
    p.ring_degree = 1024;
    p.max_level = 6;
  } else if (name == "toy") {
    p.ring_degree = 16;
    p.max_level = 4;
  } else {
    fail(ErrorCode::kConfig, "unknown parameter profile: " + std::string(name));
  }
  return p;
}

void HeParams::validate() const {
  require(ring_degree >= 8 && ring_degree <= (size_t{1} << 16) && std::has_single_bit(ring_degree),
          ErrorCode::kConfig, "ring degree must be a power of two in [8, 65536]");
  require(max_level >= 1 && max_level <= 60, ErrorCode::kConfig, "max level must be in [1, 60]");
  require(log_scale >= 20 && log_scale <= 50, ErrorCode::kConfig, "log scale must be in [20, 50]");
  require(base_bits > log_scale + 8 && base_bits <= 60, ErrorCode::kConfig,
          "base prime must exceed the scale by 8 bits and fit in 60 bits");
  require(special_bits >= 30 && special_bits <= 60, ErrorCode::kConfig,
          "special prime size must be in [30, 60] bits");
  require(sigma > 0 && sigma < 100, ErrorCode::kConfig, "error sigma out of range");
  require(value_bound > 0 && std::ldexp(value_bound, log_scale) < std::ldexp(1.0, base_bits - 2),
          ErrorCode::kConfig, "value bound too large for the base prime");
}

std::shared_ptr<const HeContext> HeContext::create(const HeParams& params) {
  return std::make_shared<const HeContext>(params);
}

HeContext::HeContext(const HeParams& params) : params_(params) {
  params_.validate();
  const size_t n = params_.ring_degree;
  const int L = params_.max_level;

  // Chain: q_0 large, then q_L, q_{L-1}, ... picked nearest the running scale.
  std::vector<uint64_t> chain(static_cast<size_t>(L) + 1);
  chain[0] = ntt_primes_below(params_.base_bits, 1, n)[0];
  scales_.assign(static_cast<size_t>(L) + 1, 0.0);
  scales_[static_cast<size_t>(L)] = params_.scale();
  std::vector<uint64_t> used{chain[0]};
  for (int l = L; l >= 1; --l) {
    const double d = scales_[static_cast<size_t>(l)];
    const uint64_t q = ntt_prime_nearest(d, n, used);
    chain[static_cast<size_t>(l)] = q;
    used.push_back(q);
    scales_[static_cast<size_t>(l) - 1] = d * d / static_cast<double>(q);
  }
  double log_q = 0;
  for (uint64_t q : chain) log_q += std::log2(static_cast<double>(q));
  const auto k = static_cast<size_t>(
      std::ceil((log_q + kSpecialMargin) / static_cast<double>(params_.special_bits - 1)));
  const auto special = ntt_primes_below(params_.special_bits, k, n, used);
  for (uint64_t p : special) log_special_ += std::log2(static_cast<double>(p));
  ring_ = RingContext::create(n, chain, special);

  // Encoding FFT tables.
  const size_t m = 2 * n;
  const size_t slots = n / 2;
  rot_group_.resize(slots);
  uint64_t five = 1;
  for (size_t j = 0; j < slots; ++j) {
    rot_group_[j] = five;
    five = five * 5 % m;
  }
  ksi_pows_.resize(m + 1);
  for (size_t j = 0; j <= m; ++j) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(m);
    ksi_pows_[j] = {std::cos(a), std::sin(a)};
  }

  // Basis conversion constants.
  const size_t chain_n = chain.size();
  qhat_inv_.resize(chain_n);
  qhat_mod_p_.resize(chain_n);
  for (size_t l = 0; l < chain_n; ++l) {
    qhat_inv_[l].resize(l + 1);
    qhat_mod_p_[l].assign(l + 1, std::vector<uint64_t>(k));
    for (size_t j = 0; j <= l; ++j) {
      const Modulus& qj = ring_->modulus(j);
      uint64_t prod = 1;
      for (size_t t = 0; t <= l; ++t)
        if (t != j) prod = qj.mul(prod, qj.reduce(chain[t]));
      qhat_inv_[l][j] = qj.inv(prod);
      for (size_t i = 0; i < k; ++i) {
        const Modulus& pi = ring_->special_modulus(i);
        uint64_t pr = 1;
        for (size_t t = 0; t <= l; ++t)
          if (t != j) pr = pi.mul(pr, pi.reduce(chain[t]));
        qhat_mod_p_[l][j][i] = pr;
      }
    }
  }
  phat_inv_.resize(k);
  phat_mod_q_.assign(k, std::vector<uint64_t>(chain_n));
  for (size_t i = 0; i < k; ++i) {
    const Modulus& pi = ring_->special_modulus(i);
    uint64_t prod = 1;
    for (size_t t = 0; t < k; ++t)
      if (t != i) prod = pi.mul(prod, pi.reduce(special[t]));
    phat_inv_[i] = pi.inv(prod);
    for (size_t j = 0; j < chain_n; ++j) {
      const Modulus& qj = ring_->modulus(j);
      uint64_t pr = 1;
      for (size_t t = 0; t < k; ++t)
        if (t != i) pr = qj.mul(pr, qj.reduce(special[t]));
      phat_mod_q_[i][j] = pr;
    }
  }
  p_inv_mod_q_.resize(chain_n);
  for (size_t j = 0; j < chain_n; ++j) {
    const Modulus& qj = ring_->modulus(j);
    uint64_t prod = 1;
    for (uint64_t p : special) prod = qj.mul(prod, qj.reduce(p));
    p_inv_mod_q_[j] = qj.inv(prod);
  }
  q_inv_mod_q_.resize(chain_n);
  for (size_t l = 1; l < chain_n; ++l) {
    q_inv_mod_q_[l].resize(l);
    for (size_t j = 0; j < l; ++j) {
      const Modulus& qj = ring_->modulus(j);
      q_inv_mod_q_[l][j] = qj.inv(qj.reduce(chain[l]));
    }
  }

  for (size_t s = 1; s < slots; s <<= 1) {
    for (int step : {static_cast<int>(s), static_cast<int>(slots - s)}) {
      const uint64_t g = galois_for_step(step);
      if (!eval_maps_.count(g)) eval_maps_[g] = automorphism_eval_map(n, g);
    }
  }
}

double HeContext::log_modulus(int level) const {
  require(level >= 0 && level <= max_level(), ErrorCode::kStructural, "level out of range");
  double b = 0;
  for (int l = 0; l <= level; ++l) b += std::log2(static_cast<double>(ring_->modulus(static_cast<size_t>(l)).value()));
  return b;
}

uint64_t HeContext::galois_for_step(int step) const {
  const auto slots = static_cast<int64_t>(this->slots());
  const int64_t k = ((static_cast<int64_t>(step) % slots) + slots) % slots;
  return rot_group_[static_cast<size_t>(k)];
}

std::vector<uint32_t> HeContext::eval_map(uint64_t galois) const {
  const auto it = eval_maps_.find(galois);
  if (it != eval_maps_.end()) return it->second;
  return automorphism_eval_map(n(), galois);
}

void HeContext::fft_special(std::vector<std::complex<double>>& v) const {
  const size_t size = v.size();
  const size_t m = 2 * n();
  bit_reverse_permute(v);
  for (size_t len = 2; len <= size; len <<= 1) {
    const size_t lenh = len >> 1;
    const size_t lenq = len << 2;
    for (size_t i = 0; i < size; i += len) {
      for (size_t j = 0; j < lenh; ++j) {
        const size_t idx = (rot_group_[j] % lenq) * (m / lenq);
        const auto u = v[i + j];
        const auto w = v[i + j + lenh] * ksi_pows_[idx];
        v[i + j] = u + w;
        v[i + j + lenh] = u - w;
      }
    }
  }
}

void HeContext::fft_special_inv(std::vector<std::complex<double>>& v) const {
  const size_t size = v.size();
  const size_t m = 2 * n();
  for (size_t len = size; len >= 2; len >>= 1) {
    const size_t lenh = len >> 1;
    const size_t lenq = len << 2;
    for (size_t i = 0; i < size; i += len) {
      for (size_t j = 0; j < lenh; ++j) {
        const size_t idx = (lenq - rot_group_[j] % lenq) * (m / lenq);
        const auto u = v[i + j] + v[i + j + lenh];
        const auto w = (v[i + j] - v[i + j + lenh]) * ksi_pows_[idx];
        v[i + j] = u;
        v[i + j + lenh] = w;
      }
    }
  }
  bit_reverse_permute(v);
  const double inv = 1.0 / static_cast<double>(size);
  for (auto& x : v) x *= inv;
}

RingPoly HeContext::mod_up(const RingPoly& d) const {
  require(d.form() == PolyForm::kCoefficient && !d.extended(), ErrorCode::kStructural,
          "mod-up expects a coefficient-form chain polynomial");
  const auto level = static_cast<size_t>(d.level());
  const size_t nn = n();
  const size_t k = ring_->special_size();
  RingPoly out(ring_, d.level(), PolyForm::kCoefficient, true);
  std::vector<std::vector<uint64_t>> tmp(level + 1, std::vector<uint64_t>(nn));
  for (size_t j = 0; j <= level; ++j) {
    const Modulus& qj = d.modulus(j);
    const uint64_t w = qhat_inv_[level][j];
    const uint64_t ws = qj.shoup(w);
    auto src = d.limb(j);
    std::copy(src.begin(), src.end(), out.limb(j).begin());
    for (size_t x = 0; x < nn; ++x) tmp[j][x] = qj.mul_shoup(src[x], w, ws);
  }
  for (size_t i = 0; i < k; ++i) {
    const Modulus& pi = ring_->special_modulus(i);
    auto dst = out.limb(level + 1 + i);
    for (size_t x = 0; x < nn; ++x) {
      u128 acc = 0;
      for (size_t j = 0; j <= level; ++j) acc += static_cast<u128>(tmp[j][x]) * qhat_mod_p_[level][j][i];
      dst[x] = pi.reduce(acc);
    }
  }
  return out;
}

RingPoly HeContext::mod_down(const RingPoly& r) const {
  require(r.form() == PolyForm::kEvaluation && r.extended(), ErrorCode::kStructural,
          "mod-down expects an extended evaluation-form polynomial");
  const auto level = static_cast<size_t>(r.level());
  const size_t nn = n();
  const size_t k = ring_->special_size();
  std::vector<std::vector<uint64_t>> tmp(k, std::vector<uint64_t>(nn));
  for (size_t i = 0; i < k; ++i) {
    const Modulus& pi = ring_->special_modulus(i);
    auto src = r.limb(level + 1 + i);
    std::copy(src.begin(), src.end(), tmp[i].begin());
    ring_->ntt(ring_->chain_size() + i).inverse(tmp[i]);
    const uint64_t w = phat_inv_[i];
    const uint64_t ws = pi.shoup(w);
    for (auto& v : tmp[i]) v = pi.mul_shoup(v, w, ws);
  }
  RingPoly out(ring_, r.level(), PolyForm::kEvaluation, false);
  std::vector<uint64_t> conv(nn);
  for (size_t j = 0; j <= level; ++j) {
    const Modulus& qj = ring_->modulus(j);
    for (size_t x = 0; x < nn; ++x) {
      u128 acc = 0;
      for (size_t i = 0; i < k; ++i) acc += static_cast<u128>(tmp[i][x]) * phat_mod_q_[i][j];
      conv[x] = qj.reduce(acc);
    }
    ring_->ntt(j).forward(conv);
    const uint64_t w = p_inv_mod_q_[j];
    const uint64_t ws = qj.shoup(w);
    auto src = r.limb(j);
    auto dst = out.limb(j);
    for (size_t x = 0; x < nn; ++x) dst[x] = qj.mul_shoup(qj.sub(src[x], conv[x]), w, ws);
  }
  return out;
}

void HeContext::rescale_inplace(RingPoly& p) const {
  require(p.form() == PolyForm::kEvaluation && !p.extended(), ErrorCode::kStructural,
          "rescale expects an evaluation-form chain polynomial");
  require(p.level() >= 1, ErrorCode::kDepthExhausted, "no prime left to rescale by");
  const auto level = static_cast<size_t>(p.level());
  const size_t nn = n();
  std::vector<uint64_t> last(p.limb(level).begin(), p.limb(level).end());
  ring_->ntt(level).inverse(last);
  const Modulus& ql = ring_->modulus(level);
  std::vector<int64_t> centered(nn);
  for (size_t x = 0; x < nn; ++x) centered[x] = ql.to_signed(last[x]);
  std::vector<uint64_t> t(nn);
  for (size_t j = 0; j < level; ++j) {
    const Modulus& qj = ring_->modulus(j);
    for (size_t x = 0; x < nn; ++x) t[x] = qj.from_signed(centered[x]);
    ring_->ntt(j).forward(t);
    const uint64_t w = q_inv_mod_q_[level][j];
    const uint64_t ws = qj.shoup(w);
    auto dst = p.limb(j);
    for (size_t x = 0; x < nn; ++x) dst[x] = qj.mul_shoup(qj.sub(dst[x], t[x]), w, ws);
  }
  p.drop_last_prime();
}

double HeContext::encoding_error(int level) const {
  const double nn = static_cast<double>(n());
  return kSafety * kTail * std::sqrt(nn / 12.0) / level_scale(level);
}

double HeContext::fresh_error(int level) const {
  const double nn = static_cast<double>(n());
  const double s2 = params_.sigma * params_.sigma;
  return kSafety * kTail * std::sqrt(nn * s2 * (1.0 + 4.0 * nn / 3.0)) / level_scale(level) +
         encoding_error(level);
}

double HeContext::rescale_error(int level_after) const {
  const double nn = static_cast<double>(n());
  return kSafety * kTail * std::sqrt(nn * (1.0 + 2.0 * nn / 3.0) / 12.0) / level_scale(level_after);
}

double HeContext::keyswitch_error(int level, double current_scale) const {
  const double nn = static_cast<double>(n());
  const double k = static_cast<double>(ring_->special_size());
  // (l+2) Q_l / P times the key error, plus the mod-down rounding.
  const double log_ratio = std::log2(level + 2.0) + log_modulus(level) - log_special_;
  const double v1 = nn / 12.0 * params_.sigma * params_.sigma * std::exp2(2.0 * log_ratio);
  const double v2 = (k + 1) * (k + 1) / 12.0 * (1.0 + 2.0 * nn / 3.0);
  return kSafety * kTail * std::sqrt(nn * (v1 + v2)) / current_scale;
}

}  // namespace hedist
