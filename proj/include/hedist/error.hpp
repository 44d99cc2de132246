// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace hedist {

/// Failure categories shared by every module. The numeric values are part of
/// the C API (see hedist.h) and must stay stable.
enum class ErrorCode : int {
  kStructural = 1,        // level/form/shape mismatch between operands
  kDepthExhausted = 2,    // multiply requested at level 0
  kScaleMismatch = 3,     // operands carry different scales; rescale first
  kKeyMissing = 4,        // rotation step without key material
  kEncodingOverflow = 5,  // slot value or coefficient exceeds modulus bound
  kLayoutInfeasible = 6,  // feature dimension does not fit in one ciphertext
  kFitFailed = 7,         // rank-deficient least-squares system
  kTransportClosed = 8,
  kFrameTruncated = 9,
  kBadVersion = 10,
  kOversize = 11,
  kBadKind = 12,
  kConfig = 13,
  kProtocol = 14,
  kIo = 15,
  kSecretKeyRequired = 16,
  kInvalidArgument = 17,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const char* what) {
  if (!cond) throw Error(code, what);
}

}  // namespace hedist
