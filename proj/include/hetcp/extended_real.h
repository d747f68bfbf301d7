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

#ifndef HETCP_EXTENDED_REAL_H_
#define HETCP_EXTENDED_REAL_H_

#include <compare>
#include <limits>
#include <ostream>
#include <string>

namespace hetcp {

// A real number or the distinguished +infinity marker. Infinity is a tag,
// not a floating-point sentinel, so NaN can never compare as infinite and the
// ordering is total.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;

  // Throws Error(kNonFinite) for NaN or +/-inf input.
  explicit ExtendedReal(double value);

  static constexpr ExtendedReal Infinity() {
    ExtendedReal r;
    r.infinite_ = true;
    return r;
  }

  // Maps +inf to Infinity(); rejects NaN and -inf.
  static ExtendedReal FromDouble(double value);

  constexpr bool is_infinite() const { return infinite_; }
  constexpr bool is_finite() const { return !infinite_; }

  // Finite value. Throws Error(kOutOfRange) on the infinity marker.
  double value() const;

  // IEEE view: +inf for the infinity marker.
  constexpr double ToDouble() const {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
  }

  friend constexpr bool operator==(const ExtendedReal& a,
                                   const ExtendedReal& b) {
    if (a.infinite_ || b.infinite_) return a.infinite_ == b.infinite_;
    return a.value_ == b.value_;
  }

  friend constexpr std::strong_ordering operator<=>(const ExtendedReal& a,
                                                    const ExtendedReal& b) {
    if (a.infinite_ || b.infinite_) return a.infinite_ <=> b.infinite_;
    // Values are never NaN, so the partial order is total here.
    if (a.value_ < b.value_) return std::strong_ordering::less;
    if (a.value_ > b.value_) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  std::string ToString() const;

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

std::ostream& operator<<(std::ostream& os, const ExtendedReal& v);

}  // namespace hetcp

#endif  // HETCP_EXTENDED_REAL_H_
