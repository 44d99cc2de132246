// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include "hedist/error.hpp"

namespace hedist {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kStructural: return "structural";
    case ErrorCode::kDepthExhausted: return "depth-exhausted";
    case ErrorCode::kScaleMismatch: return "rescale-required";
    case ErrorCode::kKeyMissing: return "key-missing";
    case ErrorCode::kEncodingOverflow: return "encoding-overflow";
    case ErrorCode::kLayoutInfeasible: return "layout-infeasible";
    case ErrorCode::kFitFailed: return "fit-failed";
    case ErrorCode::kTransportClosed: return "transport-closed";
    case ErrorCode::kFrameTruncated: return "frame-truncated";
    case ErrorCode::kBadVersion: return "bad-version";
    case ErrorCode::kOversize: return "oversize";
    case ErrorCode::kBadKind: return "bad-kind";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kProtocol: return "protocol-violation";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kSecretKeyRequired: return "secret-key-required";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
  }
  return "unknown";
}

}  // namespace hedist
