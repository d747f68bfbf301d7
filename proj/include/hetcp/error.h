//
// Copyright 2026 The hetcp Authors
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
//

#ifndef HETCP_ERROR_H_
#define HETCP_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace hetcp {

enum class ErrorCode {
  kEmptyInput,
  kNonFinite,
  kInvalidArgument,
  kInvalidClass,
  kOutOfRange,
  kDegenerateWeights,
  kZeroMass,
  kSingularCovariance,
  kDiverged,
  kParseError,
  kIoError,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures are reported through this exception type; `code()`
// identifies the failure class so callers can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidClass: return "InvalidClass";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kDegenerateWeights: return "DegenerateWeights";
    case ErrorCode::kZeroMass: return "ZeroMass";
    case ErrorCode::kSingularCovariance: return "SingularCovariance";
    case ErrorCode::kDiverged: return "Diverged";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace hetcp

#endif  // HETCP_ERROR_H_
