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

#ifndef HETCP_WEIGHTED_MEASURE_H_
#define HETCP_WEIGHTED_MEASURE_H_

#include <span>
#include <vector>

#include "hetcp/extended_real.h"

namespace hetcp {

struct ScoreAtom {
  ExtendedReal value;
  double weight = 0.0;
};

// Cumulative weights within this slack of the requested level count as
// reaching it. Without it, nine additions of 0.1 fall short of 0.9 and the
// split-conformal quantile jumps an atom.
inline constexpr double kLevelSlack = 1e-12;

// Finite probability measure over score atoms, possibly with an atom at
// +infinity. Atoms are sorted by value, equal values merged, and weights
// normalized to sum to one. Immutable after construction.
class WeightedScoreMeasure {
 public:
  // Throws Error(kEmptyInput) on empty input, Error(kInvalidArgument) on a
  // length mismatch and Error(kNonFinite) for NaN/negative weights or a zero
  // weight sum.
  static WeightedScoreMeasure Build(std::span<const ExtendedReal> scores,
                                    std::span<const double> weights);

  std::span<const ScoreAtom> atoms() const { return atoms_; }

  // Weight sum before normalization.
  double total() const { return total_; }

  // inf{v : m((-inf, v]) >= beta} over the atoms. beta must lie in (0, 1].
  ExtendedReal Quantile(double beta) const;

  // m((-inf, v]).
  double CdfAt(const ExtendedReal& v) const;

 private:
  WeightedScoreMeasure() = default;

  std::vector<ScoreAtom> atoms_;
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

}  // namespace hetcp

#endif  // HETCP_WEIGHTED_MEASURE_H_
