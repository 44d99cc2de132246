// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <bit>
#include <cmath>

#include "hedist/bytes.hpp"
#include "hedist/error.hpp"
#include "hedist/ring.hpp"

namespace hedist {

RingContext::RingContext(size_t n, std::vector<uint64_t> chain, std::vector<uint64_t> special)
    : n_(n), log_n_(std::countr_zero(n)), chain_size_(chain.size()) {
  require(n >= 2 && std::has_single_bit(n), ErrorCode::kInvalidArgument,
          "ring degree must be a power of two");
  require(!chain.empty(), ErrorCode::kInvalidArgument, "modulus chain is empty");
  std::vector<uint64_t> all = chain;
  all.insert(all.end(), special.begin(), special.end());
  std::vector<uint64_t> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
          ErrorCode::kInvalidArgument, "moduli must be distinct");
  for (uint64_t q : all) {
    require(is_prime(q) && (q - 1) % (2 * n) == 0, ErrorCode::kInvalidArgument,
            "every modulus must be a prime congruent to 1 mod 2N");
    moduli_.emplace_back(q);
    ntt_.push_back(std::make_unique<NttTables>(n, moduli_.back()));
  }
}

std::shared_ptr<const RingContext> RingContext::create(size_t n, std::vector<uint64_t> chain,
                                                       std::vector<uint64_t> special) {
  return std::make_shared<const RingContext>(n, std::move(chain), std::move(special));
}

double RingContext::chain_bits() const noexcept {
  double bits = 0;
  for (size_t i = 0; i < chain_size_; ++i) bits += std::log2(static_cast<double>(moduli_[i].value()));
  return bits;
}

RingPoly::RingPoly(RingContextPtr ctx, int level, PolyForm form, bool extended)
    : ctx_(std::move(ctx)), level_(level), extended_(extended), form_(form) {
  require(ctx_ != nullptr, ErrorCode::kInvalidArgument, "null ring context");
  require(level >= 0 && level <= ctx_->max_level(), ErrorCode::kStructural,
          "level exceeds modulus chain");
  limbs_ = static_cast<size_t>(level) + 1 + (extended ? ctx_->special_size() : 0);
  data_.assign(limbs_ * ctx_->n(), 0);
}

RingPoly RingPoly::from_signed(RingContextPtr ctx, std::span<const int64_t> coeffs, int level,
                               bool extended) {
  RingPoly p(std::move(ctx), level, PolyForm::kCoefficient, extended);
  require(coeffs.size() == p.n(), ErrorCode::kStructural, "coefficient count must equal N");
  for (size_t l = 0; l < p.limb_count(); ++l) {
    const Modulus& q = p.modulus(l);
    auto dst = p.limb(l);
    for (size_t i = 0; i < coeffs.size(); ++i) dst[i] = q.from_signed(coeffs[i]);
  }
  return p;
}

void RingPoly::drop_last_prime() {
  require(level_ > 0, ErrorCode::kDepthExhausted, "cannot drop below level 0");
  const size_t n = ctx_->n();
  if (extended_) {
    // Shift the special limbs down over the removed chain limb.
    const size_t removed = static_cast<size_t>(level_);
    std::copy(data_.begin() + (removed + 1) * n, data_.end(), data_.begin() + removed * n);
  }
  data_.resize(data_.size() - n);
  --level_;
  --limbs_;
}

void RingPoly::drop_special() {
  if (!extended_) return;
  limbs_ = static_cast<size_t>(level_) + 1;
  data_.resize(limbs_ * ctx_->n());
  extended_ = false;
}

namespace {

void check_same(const RingPoly& a, const RingPoly& b) {
  require(!a.empty() && !b.empty(), ErrorCode::kStructural, "empty polynomial");
  require(a.context_ptr() == b.context_ptr(), ErrorCode::kStructural, "ring context mismatch");
  require(a.level() == b.level() && a.extended() == b.extended(), ErrorCode::kStructural,
          "polynomial level mismatch");
  require(a.form() == b.form(), ErrorCode::kStructural, "polynomial form mismatch");
}

}  // namespace

void add_inplace(RingPoly& a, const RingPoly& b) {
  check_same(a, b);
  for (size_t l = 0; l < a.limb_count(); ++l) {
    const Modulus& q = a.modulus(l);
    auto x = a.limb(l);
    auto y = b.limb(l);
    for (size_t i = 0; i < x.size(); ++i) x[i] = q.add(x[i], y[i]);
  }
}

void sub_inplace(RingPoly& a, const RingPoly& b) {
  check_same(a, b);
  for (size_t l = 0; l < a.limb_count(); ++l) {
    const Modulus& q = a.modulus(l);
    auto x = a.limb(l);
    auto y = b.limb(l);
    for (size_t i = 0; i < x.size(); ++i) x[i] = q.sub(x[i], y[i]);
  }
}

void mul_pointwise_inplace(RingPoly& a, const RingPoly& b) {
  check_same(a, b);
  require(a.form() == PolyForm::kEvaluation, ErrorCode::kStructural,
          "pointwise product needs evaluation form");
  for (size_t l = 0; l < a.limb_count(); ++l) {
    const Modulus& q = a.modulus(l);
    auto x = a.limb(l);
    auto y = b.limb(l);
    for (size_t i = 0; i < x.size(); ++i) x[i] = q.mul(x[i], y[i]);
  }
}

void to_evaluation(RingPoly& a) {
  if (a.form() == PolyForm::kEvaluation) return;
  for (size_t l = 0; l < a.limb_count(); ++l) a.ntt(l).forward(a.limb(l));
  a.set_form(PolyForm::kEvaluation);
}

void to_coefficient(RingPoly& a) {
  if (a.form() == PolyForm::kCoefficient) return;
  for (size_t l = 0; l < a.limb_count(); ++l) a.ntt(l).inverse(a.limb(l));
  a.set_form(PolyForm::kCoefficient);
}

RingPoly ring_add(const RingPoly& a, const RingPoly& b) {
  RingPoly r = a;
  add_inplace(r, b);
  return r;
}

RingPoly ring_sub(const RingPoly& a, const RingPoly& b) {
  RingPoly r = a;
  sub_inplace(r, b);
  return r;
}

RingPoly ring_neg(const RingPoly& a) {
  RingPoly r = a;
  for (size_t l = 0; l < r.limb_count(); ++l) {
    const Modulus& q = r.modulus(l);
    for (auto& v : r.limb(l)) v = q.neg(v);
  }
  return r;
}

RingPoly ring_mul(const RingPoly& a, const RingPoly& b) {
  require(!a.empty() && !b.empty() && a.context_ptr() == b.context_ptr(), ErrorCode::kStructural,
          "ring context mismatch");
  require(a.level() == b.level() && a.extended() == b.extended(), ErrorCode::kStructural,
          "polynomial level mismatch");
  RingPoly x = a;
  RingPoly y = b;
  to_evaluation(x);
  to_evaluation(y);
  mul_pointwise_inplace(x, y);
  if (a.form() == PolyForm::kCoefficient) to_coefficient(x);
  return x;
}

RingPoly ntt_forward(const RingPoly& a) {
  require(a.form() == PolyForm::kCoefficient, ErrorCode::kStructural,
          "forward NTT expects coefficient form");
  RingPoly r = a;
  to_evaluation(r);
  return r;
}

RingPoly ntt_inverse(const RingPoly& a) {
  require(a.form() == PolyForm::kEvaluation, ErrorCode::kStructural,
          "inverse NTT expects evaluation form");
  RingPoly r = a;
  to_coefficient(r);
  return r;
}

RingPoly drop_to_level(const RingPoly& a, int level) {
  require(level >= 0 && level <= a.level(), ErrorCode::kStructural, "invalid target level");
  RingPoly r = a;
  while (r.level() > level) r.drop_last_prime();
  return r;
}

RingPoly ring_mul_scalar(const RingPoly& a, int64_t c) {
  RingPoly r = a;
  for (size_t l = 0; l < r.limb_count(); ++l) {
    const Modulus& q = r.modulus(l);
    const uint64_t cm = q.from_signed(c);
    const uint64_t cs = q.shoup(cm);
    for (auto& v : r.limb(l)) v = q.mul_shoup(v, cm, cs);
  }
  return r;
}

RingPoly apply_automorphism(const RingPoly& a, uint64_t galois) {
  require(a.form() == PolyForm::kCoefficient, ErrorCode::kStructural,
          "coefficient automorphism expects coefficient form");
  require(galois % 2 == 1, ErrorCode::kInvalidArgument, "galois element must be odd");
  const size_t n = a.n();
  const uint64_t m = 2 * n;
  RingPoly r(a.context_ptr(), a.level(), PolyForm::kCoefficient, a.extended());
  for (size_t l = 0; l < a.limb_count(); ++l) {
    const Modulus& q = a.modulus(l);
    auto src = a.limb(l);
    auto dst = r.limb(l);
    for (size_t i = 0; i < n; ++i) {
      const uint64_t j = (i * galois) % m;
      if (j < n) {
        dst[j] = src[i];
      } else {
        dst[j - n] = q.neg(src[i]);
      }
    }
  }
  return r;
}

RingPoly apply_automorphism_eval(const RingPoly& a, std::span<const uint32_t> map) {
  require(a.form() == PolyForm::kEvaluation, ErrorCode::kStructural,
          "evaluation automorphism expects evaluation form");
  require(map.size() == a.n(), ErrorCode::kStructural, "automorphism map size mismatch");
  RingPoly r(a.context_ptr(), a.level(), PolyForm::kEvaluation, a.extended());
  for (size_t l = 0; l < a.limb_count(); ++l) {
    auto src = a.limb(l);
    auto dst = r.limb(l);
    for (size_t i = 0; i < map.size(); ++i) dst[i] = src[map[i]];
  }
  return r;
}

std::vector<uint64_t> schoolbook_negacyclic(std::span<const uint64_t> a,
                                            std::span<const uint64_t> b, const Modulus& q) {
  const size_t n = a.size();
  require(b.size() == n, ErrorCode::kStructural, "operand length mismatch");
  std::vector<uint64_t> r(n, 0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      const uint64_t p = q.mul(a[i], b[j]);
      const size_t k = i + j;
      if (k < n) {
        r[k] = q.add(r[k], p);
      } else {
        r[k - n] = q.sub(r[k - n], p);
      }
    }
  }
  return r;
}

void serialize(const RingPoly& p, std::vector<uint8_t>& out) {
  require(!p.empty(), ErrorCode::kStructural, "cannot serialize an empty polynomial");
  ByteWriter w(out);
  w.u64(p.n());
  w.u64(static_cast<uint64_t>(p.level()));
  w.u64(static_cast<uint64_t>(p.form()));
  w.u64(p.limb_count());
  for (size_t l = 0; l < p.limb_count(); ++l) w.u64(p.modulus(l).value());
  const size_t n = p.n();
  const size_t limbs = p.limb_count();
  std::vector<uint64_t> row(limbs);
  const size_t at = out.size();
  out.reserve(at + n * limbs * 8);
  for (size_t i = 0; i < n; ++i) {
    for (size_t l = 0; l < limbs; ++l) row[l] = p.residue(i, l);
    w.u64_run(row);
  }
}

RingPoly deserialize_poly(const RingContextPtr& ctx, std::span<const uint8_t> in, size_t& offset) {
  ByteReader r(in, offset);
  const uint64_t n = r.u64();
  const uint64_t level = r.u64();
  const uint64_t form = r.u64();
  const uint64_t limbs = r.u64();
  require(n == ctx->n(), ErrorCode::kStructural, "serialized ring degree mismatch");
  require(level <= static_cast<uint64_t>(ctx->max_level()), ErrorCode::kStructural,
          "serialized level exceeds chain");
  require(form <= 1, ErrorCode::kStructural, "bad polynomial form tag");
  const bool extended = limbs != level + 1;
  require(!extended || limbs == level + 1 + ctx->special_size(), ErrorCode::kStructural,
          "serialized prime count mismatch");
  RingPoly p(ctx, static_cast<int>(level), static_cast<PolyForm>(form), extended);
  for (size_t l = 0; l < limbs; ++l) {
    require(r.u64() == p.modulus(l).value(), ErrorCode::kStructural,
            "serialized prime list does not match context");
  }
  std::vector<uint64_t> row(limbs);
  for (size_t i = 0; i < n; ++i) {
    r.u64_run(row);
    for (size_t l = 0; l < limbs; ++l) {
      require(row[l] < p.modulus(l).value(), ErrorCode::kStructural, "residue out of range");
      p.limb(l)[i] = row[l];
    }
  }
  return p;
}

}  // namespace hedist
