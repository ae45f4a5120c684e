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

#ifndef RARESCALE_ERROR_H_
#define RARESCALE_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace rarescale {

enum class ErrorCode {
  kParse,
  kIntegrity,
  kRange,
  kInvalidArgument,
  kNotFound,
  kInfeasible,
  kMissingVariable,
  kUnknownPlaceholder,
  kTransport,
  kRateLimited,
  kMockExhausted,
  kMalformedResponse,
  kUnparseable,
  kAnnotation,
  kProfileContradiction,
  kTooFew,
  kIo,
  kConfig,
  kUsage,
  kLeak,
};

// Stable kebab-case token used in CLI error lines.
std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rarescale

#endif  // RARESCALE_ERROR_H_
