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

#include "hetcp/conformal.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hetcp/error.h"

namespace hetcp {
namespace {

void CheckAlpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::kOutOfRange, "alpha must lie in (0, 1)");
  }
}

void CheckRatio(double ratio) {
  if (!std::isfinite(ratio) || ratio < 0.0) {
    throw Error(ErrorCode::kNonFinite, "density ratios must be finite, >= 0");
  }
}

}  // namespace

bool PredictionInterval::Contains(double y) const {
  if (half_width.is_infinite()) return true;
  return std::abs(y - center) <= half_width.value();
}

double PredictionInterval::Width() const {
  return 2.0 * half_width.ToDouble();
}

bool PredictionSetLabels::Contains(std::size_t y) const {
  return std::binary_search(classes.begin(), classes.end(), y);
}

ExtendedReal ScpThreshold(std::span<const CalibrationRecord> records,
                          double alpha) {
  CheckAlpha(alpha);
  if (records.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no calibration records");
  }
  std::vector<ExtendedReal> scores;
  scores.reserve(records.size() + 1);
  for (const auto& r : records) scores.emplace_back(r.score.value());
  scores.push_back(ExtendedReal::Infinity());
  const std::vector<double> weights(scores.size(), 1.0);
  return WeightedScoreMeasure::Build(scores, weights).Quantile(1.0 - alpha);
}

WeightedScoreMeasure WeightedScoreDistribution(
    std::span<const CalibrationRecord> records, double lambda_test) {
  if (records.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no calibration records");
  }
  CheckRatio(lambda_test);
  std::vector<ExtendedReal> scores;
  std::vector<double> weights;
  scores.reserve(records.size() + 1);
  weights.reserve(records.size() + 1);
  double mass = lambda_test;
  for (const auto& r : records) {
    CheckRatio(r.ratio);
    scores.emplace_back(r.score.value());
    weights.push_back(r.ratio);
    mass += r.ratio;
  }
  if (!(mass > 0.0)) {
    throw Error(ErrorCode::kDegenerateWeights,
                "calibration and test ratios are all zero");
  }
  scores.push_back(ExtendedReal::Infinity());
  weights.push_back(lambda_test);
  return WeightedScoreMeasure::Build(scores, weights);
}

ExtendedReal WeightedThreshold(std::span<const CalibrationRecord> records,
                               double lambda_test, double alpha) {
  CheckAlpha(alpha);
  return WeightedScoreDistribution(records, lambda_test).Quantile(1.0 - alpha);
}

PreparedCalibration::PreparedCalibration(
    std::span<const CalibrationRecord> records) {
  if (records.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no calibration records");
  }
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(records.size());
  for (const auto& r : records) {
    CheckRatio(r.ratio);
    pairs.emplace_back(r.score.value(), r.ratio);
  }
  std::sort(pairs.begin(), pairs.end());
  double running = 0.0;
  for (const auto& [v, w] : pairs) {
    running += w;
    if (!scores_.empty() && scores_.back() == v) {
      cumulative_.back() = running;
    } else {
      scores_.push_back(v);
      cumulative_.push_back(running);
    }
  }
  ratio_sum_ = running;
}

ExtendedReal PreparedCalibration::Threshold(double lambda_test,
                                            double alpha) const {
  CheckAlpha(alpha);
  CheckRatio(lambda_test);
  const double total = ratio_sum_ + lambda_test;
  if (!(total > 0.0)) {
    throw Error(ErrorCode::kDegenerateWeights,
                "calibration and test ratios are all zero");
  }
  const double level = 1.0 - alpha - kLevelSlack;
  auto it = std::partition_point(
      cumulative_.begin(), cumulative_.end(),
      [&](double c) { return c / total < level; });
  if (it == cumulative_.end()) return ExtendedReal::Infinity();
  return ExtendedReal(scores_[static_cast<std::size_t>(it - cumulative_.begin())]);
}

PredictionInterval PredictInterval(double prediction,
                                   std::span<const CalibrationRecord> records,
                                   const RatioModel& ratio_model,
                                   const Eigen::VectorXd& x, double alpha) {
  return {prediction,
          WeightedThreshold(records, ratio_model.RatioAt(x), alpha)};
}

PredictionSetLabels LabelSetForThreshold(std::span<const double> probabilities,
                                         const ExtendedReal& threshold) {
  PredictionSetLabels set;
  for (std::size_t y = 0; y < probabilities.size(); ++y) {
    if (ExtendedReal(ApsScore(probabilities, y).value()) <= threshold) {
      set.classes.push_back(y);
    }
  }
  return set;
}

PredictionSetLabels PredictLabelSet(std::span<const double> probabilities,
                                    std::span<const CalibrationRecord> records,
                                    const RatioModel& ratio_model,
                                    const Eigen::VectorXd& x, double alpha) {
  const ExtendedReal threshold =
      WeightedThreshold(records, ratio_model.RatioAt(x), alpha);
  return LabelSetForThreshold(probabilities, threshold);
}

ExtendedReal TibshiraniIidThreshold(std::span<const CalibrationRecord> records,
                                    std::span<const double> calibration_weights,
                                    double test_weight, double alpha) {
  CheckAlpha(alpha);
  if (records.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no calibration records");
  }
  if (records.size() != calibration_weights.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one weight per record required");
  }
  CheckRatio(test_weight);
  std::vector<std::pair<double, double>> pairs;  // (score, weight)
  pairs.reserve(records.size());
  for (std::size_t k = 0; k < records.size(); ++k) {
    CheckRatio(calibration_weights[k]);
    pairs.emplace_back(records[k].score.value(), calibration_weights[k]);
  }
  std::sort(pairs.begin(), pairs.end());
  double total = test_weight;
  for (const auto& p : pairs) total += p.second;
  if (!(total > 0.0)) {
    throw Error(ErrorCode::kDegenerateWeights, "all weights are zero");
  }
  const double level = 1.0 - alpha;
  double cumulative = 0.0;
  std::size_t k = 0;
  while (k < pairs.size()) {
    const double v = pairs[k].first;
    while (k < pairs.size() && pairs[k].first == v) {
      cumulative += pairs[k].second;
      ++k;
    }
    if (cumulative / total >= level - kLevelSlack) return ExtendedReal(v);
  }
  return ExtendedReal::Infinity();
}

ExtendedReal ApproxGlobalThreshold(std::span<const CalibrationRecord> records,
                                   double alpha) {
  CheckAlpha(alpha);
  if (records.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no calibration records");
  }
  std::vector<ExtendedReal> scores;
  std::vector<double> weights;
  double mass = 0.0;
  for (const auto& r : records) {
    CheckRatio(r.ratio);
    scores.emplace_back(r.score.value());
    weights.push_back(r.ratio);
    mass += r.ratio;
  }
  if (!(mass > 0.0)) {
    throw Error(ErrorCode::kDegenerateWeights, "ratios sum to zero");
  }
  return WeightedScoreMeasure::Build(scores, weights).Quantile(1.0 - alpha);
}

double MiscoverageDeviationRadius(std::size_t n, double delta,
                                  std::span<const double> sigmas,
                                  std::span<const double> expected_ratios) {
  if (n == 0) throw Error(ErrorCode::kOutOfRange, "N must be >= 1");
  if (!(delta > 0.0 && delta < 1.0 / 6.0)) {
    throw Error(ErrorCode::kOutOfRange, "delta must lie in (0, 1/6)");
  }
  if (sigmas.size() != n || expected_ratios.size() != n) {
    throw Error(ErrorCode::kInvalidArgument,
                "need one sigma and one E[lambda] per calibration point");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(sigmas[k] >= 0.0) || !(expected_ratios[k] >= 0.0)) {
      throw Error(ErrorCode::kOutOfRange, "sigma and E[lambda] must be >= 0");
    }
    sum += 4.0 * sigmas[k] * sigmas[k] + expected_ratios[k] * expected_ratios[k];
  }
  return std::sqrt(8.0 * std::log(1.0 / (6.0 * delta)) * sum) /
         static_cast<double>(n);
}

double MiscoverageBiasBound(std::size_t n, double sigma,
                            double expected_ratio_sq) {
  if (n == 0) throw Error(ErrorCode::kOutOfRange, "N must be >= 1");
  if (!(sigma >= 0.0)) throw Error(ErrorCode::kOutOfRange, "sigma < 0");
  if (!(expected_ratio_sq >= 1.0)) {
    throw Error(ErrorCode::kOutOfRange, "E[lambda^2] must be >= 1");
  }
  const double nd = static_cast<double>(n);
  return 19.0 * sigma * std::sqrt(std::log(4.0 * nd) / nd) +
         18.0 * expected_ratio_sq / nd;
}

BoundReport ComputeBounds(std::size_t n, double delta,
                          std::span<const double> sigmas,
                          std::span<const double> expected_ratios,
                          double expected_test_ratio,
                          double expected_test_ratio_sq, double bias_sigma,
                          double atom_mass) {
  BoundReport r;
  r.n = n;
  r.delta = delta;
  r.sigmas.assign(sigmas.begin(), sigmas.end());
  r.expected_ratios.assign(expected_ratios.begin(), expected_ratios.end());
  r.expected_test_ratio = expected_test_ratio;
  r.expected_test_ratio_sq = expected_test_ratio_sq;
  r.atom_mass = atom_mass;
  r.tau = MiscoverageDeviationRadius(n, delta, sigmas, expected_ratios);
  r.bias_bound = MiscoverageBiasBound(n, bias_sigma, expected_test_ratio_sq);
  const double e_over_n = expected_test_ratio / static_cast<double>(n);
  r.lower_radius = (r.tau + 3.0 * e_over_n) / (1.0 + e_over_n);
  r.upper_radius = r.tau + atom_mass;
  return r;
}

}  // namespace hetcp
