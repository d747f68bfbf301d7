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

#ifndef HETCP_CONFORMAL_H_
#define HETCP_CONFORMAL_H_

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hetcp/extended_real.h"
#include "hetcp/ratio.h"
#include "hetcp/scoring.h"
#include "hetcp/weighted_measure.h"

namespace hetcp {

// Regression target or class index.
using Label = std::variant<double, std::size_t>;

struct CalibrationRecord {
  Eigen::VectorXd feature;
  Label label;
  Score score;
  double ratio = 1.0;  // density ratio at the record's covariate
};

struct PredictionInterval {
  double center = 0.0;
  ExtendedReal half_width;

  bool Contains(double y) const;
  // +inf for an unbounded interval.
  double Width() const;
};

struct PredictionSetLabels {
  std::vector<std::size_t> classes;  // ascending

  bool Contains(std::size_t y) const;
  std::size_t size() const { return classes.size(); }
  bool empty() const { return classes.empty(); }
};

// Quantile at level 1 - alpha of the uniform measure on the N scores plus an
// atom at +infinity. Throws Error(kEmptyInput) or Error(kOutOfRange).
ExtendedReal ScpThreshold(std::span<const CalibrationRecord> records,
                          double alpha);

// Quantile at level 1 - alpha of sum_k p_k delta_{V_k} + p_{N+1} delta_inf
// with p_k = lambda_k / (lambda_test + sum_l lambda_l) and
// p_{N+1} = lambda_test / (lambda_test + sum_l lambda_l).
// Throws Error(kDegenerateWeights) when every ratio is zero.
ExtendedReal WeightedThreshold(std::span<const CalibrationRecord> records,
                               double lambda_test, double alpha);

// The measure WeightedThreshold takes the quantile of.
WeightedScoreMeasure WeightedScoreDistribution(
    std::span<const CalibrationRecord> records, double lambda_test);

// Calibration scores sorted once, for many queries that differ only in the
// test ratio. Threshold(lambda_test, alpha) equals WeightedThreshold on the
// same records, at O(log N) per query.
class PreparedCalibration {
 public:
  explicit PreparedCalibration(std::span<const CalibrationRecord> records);

  ExtendedReal Threshold(double lambda_test, double alpha) const;
  double ratio_sum() const { return ratio_sum_; }
  std::size_t size() const { return scores_.size(); }

 private:
  std::vector<double> scores_;      // distinct, ascending
  std::vector<double> cumulative_;  // raw ratio mass up to each score
  double ratio_sum_ = 0.0;
};

// [pred - t, pred + t] with t = WeightedThreshold(records, lambda(x), alpha).
PredictionInterval PredictInterval(double prediction,
                                   std::span<const CalibrationRecord> records,
                                   const RatioModel& ratio_model,
                                   const Eigen::VectorXd& x, double alpha);

// Labels whose APS score is at most the weighted threshold. The threshold
// depends on x only, so it is computed once for all labels.
PredictionSetLabels PredictLabelSet(std::span<const double> probabilities,
                                    std::span<const CalibrationRecord> records,
                                    const RatioModel& ratio_model,
                                    const Eigen::VectorXd& x, double alpha);

// Same selection rule for a threshold computed elsewhere.
PredictionSetLabels LabelSetForThreshold(std::span<const double> probabilities,
                                         const ExtendedReal& threshold);

// Weighted quantile for i.i.d. calibration under covariate shift, with
// calibration weights w(X_k) and test weight w(x). Evaluated by its own
// sort-and-scan, independent of WeightedScoreMeasure, so it can serve as a
// cross-check of WeightedThreshold.
ExtendedReal TibshiraniIidThreshold(std::span<const CalibrationRecord> records,
                                    std::span<const double> calibration_weights,
                                    double test_weight, double alpha);

// Query-independent approximation: quantile of sum_k (lambda_k / sum_l
// lambda_l) delta_{V_k}, no infinity atom. Always finite.
ExtendedReal ApproxGlobalThreshold(std::span<const CalibrationRecord> records,
                                   double alpha);

// High-probability deviation radius of the conditional miscoverage:
// N^-1 sqrt(8 log(1/(6 delta)) sum_k (4 sigma_k^2 + E[lambda_k]^2)).
// Requires 0 < delta < 1/6, else Error(kOutOfRange).
double MiscoverageDeviationRadius(std::size_t n, double delta,
                                  std::span<const double> sigmas,
                                  std::span<const double> expected_ratios);

// Bias bound 19 sigma sqrt(log(4N) / N) + 18 E[lambda^2] / N.
// Requires sigma >= 0 and E[lambda^2] >= 1.
double MiscoverageBiasBound(std::size_t n, double sigma,
                            double expected_ratio_sq);

struct BoundReport {
  std::size_t n = 0;
  double delta = 0.0;
  std::vector<double> sigmas;
  std::vector<double> expected_ratios;
  double expected_test_ratio = 1.0;     // E[lambda(X_{N+1})]
  double expected_test_ratio_sq = 1.0;  // E[lambda^2(Z_{N+1})]
  double atom_mass = 0.0;               // sup_v P(V_{N+1} = v)
  double tau = 0.0;
  double bias_bound = 0.0;
  // alpha(D_N) - alpha is expected inside (-lower_radius, upper_radius).
  double lower_radius = 0.0;
  double upper_radius = 0.0;
};

// Assembles the concentration sandwich and the bias bound. `bias_sigma` is
// the sub-Gaussian parameter used by the bias bound.
BoundReport ComputeBounds(std::size_t n, double delta,
                          std::span<const double> sigmas,
                          std::span<const double> expected_ratios,
                          double expected_test_ratio,
                          double expected_test_ratio_sq, double bias_sigma,
                          double atom_mass = 0.0);

}  // namespace hetcp

#endif  // HETCP_CONFORMAL_H_
