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

#include "hetcp/weighted_measure.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hetcp/error.h"

namespace hetcp {

WeightedScoreMeasure WeightedScoreMeasure::Build(
    std::span<const ExtendedReal> scores, std::span<const double> weights) {
  if (scores.empty()) {
    throw Error(ErrorCode::kEmptyInput, "measure needs at least one atom");
  }
  if (scores.size() != weights.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "scores and weights differ in length");
  }
  for (double w : weights) {
    if (std::isnan(w) || w < 0.0 || std::isinf(w)) {
      throw Error(ErrorCode::kNonFinite, "weights must be finite and >= 0");
    }
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  // Ties broken by index keep the merged sum independent of platform sort.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a < b;
  });

  WeightedScoreMeasure m;
  m.atoms_.reserve(scores.size());
  for (std::size_t idx : order) {
    if (!m.atoms_.empty() && m.atoms_.back().value == scores[idx]) {
      m.atoms_.back().weight += weights[idx];
    } else {
      m.atoms_.push_back({scores[idx], weights[idx]});
    }
  }

  // Summing in sorted order makes the total permutation invariant.
  double total = 0.0;
  for (const ScoreAtom& a : m.atoms_) total += a.weight;
  if (!(total > 0.0)) {
    throw Error(ErrorCode::kNonFinite, "weights sum to zero");
  }
  m.total_ = total;

  m.cumulative_.reserve(m.atoms_.size());
  double running = 0.0;
  for (ScoreAtom& a : m.atoms_) {
    a.weight /= total;
    running += a.weight;
    m.cumulative_.push_back(running);
  }
  m.cumulative_.back() = 1.0;
  return m;
}

ExtendedReal WeightedScoreMeasure::Quantile(double beta) const {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw Error(ErrorCode::kOutOfRange, "quantile level must lie in (0, 1]");
  }
  auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(),
                             beta - kLevelSlack);
  if (it == cumulative_.end()) return atoms_.back().value;
  return atoms_[static_cast<std::size_t>(it - cumulative_.begin())].value;
}

double WeightedScoreMeasure::CdfAt(const ExtendedReal& v) const {
  auto it = std::upper_bound(
      atoms_.begin(), atoms_.end(), v,
      [](const ExtendedReal& x, const ScoreAtom& a) { return x < a.value; });
  if (it == atoms_.begin()) return 0.0;
  return cumulative_[static_cast<std::size_t>(it - atoms_.begin()) - 1];
}

}  // namespace hetcp
