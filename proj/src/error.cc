// Copyright 2026 The RareScale Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rarescale/error.h"

namespace rarescale {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "parse-error";
    case ErrorCode::kIntegrity: return "integrity-error";
    case ErrorCode::kRange: return "range-error";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kInfeasible: return "infeasible-parameters";
    case ErrorCode::kMissingVariable: return "missing-variable";
    case ErrorCode::kUnknownPlaceholder: return "unknown-placeholder";
    case ErrorCode::kTransport: return "transport-failure";
    case ErrorCode::kRateLimited: return "rate-limited";
    case ErrorCode::kMockExhausted: return "mock-script-exhausted";
    case ErrorCode::kMalformedResponse: return "malformed-response";
    case ErrorCode::kUnparseable: return "unparseable-response";
    case ErrorCode::kAnnotation: return "annotation-error";
    case ErrorCode::kProfileContradiction: return "profile-contradiction";
    case ErrorCode::kTooFew: return "too-few";
    case ErrorCode::kIo: return "io-error";
    case ErrorCode::kConfig: return "config-error";
    case ErrorCode::kUsage: return "usage-error";
    case ErrorCode::kLeak: return "label-leak";
  }
  return "unknown";
}

}  // namespace rarescale
