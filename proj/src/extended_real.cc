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

#include "hetcp/extended_real.h"

#include <cmath>
#include <sstream>

#include "hetcp/error.h"

namespace hetcp {

ExtendedReal::ExtendedReal(double value) : value_(value) {
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::kNonFinite,
                "finite extended real constructed from non-finite double");
  }
}

ExtendedReal ExtendedReal::FromDouble(double value) {
  if (std::isnan(value)) {
    throw Error(ErrorCode::kNonFinite, "NaN is not an extended real");
  }
  if (value == std::numeric_limits<double>::infinity()) return Infinity();
  return ExtendedReal(value);
}

double ExtendedReal::value() const {
  if (infinite_) {
    throw Error(ErrorCode::kOutOfRange, "value() called on +infinity");
  }
  return value_;
}

std::string ExtendedReal::ToString() const {
  if (infinite_) return "inf";
  std::ostringstream os;
  os.precision(6);
  os << value_;
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const ExtendedReal& v) {
  if (v.is_infinite()) return os << "inf";
  return os << v.ToDouble();
}

}  // namespace hetcp
