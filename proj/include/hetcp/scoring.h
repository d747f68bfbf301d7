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

#ifndef HETCP_SCORING_H_
#define HETCP_SCORING_H_

#include <cstddef>
#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hetcp {

// Nonconformity score: finite and >= 0.
class Score {
 public:
  constexpr Score() = default;
  // Throws Error(kNonFinite) / Error(kOutOfRange).
  explicit Score(double value);

  constexpr double value() const { return value_; }

  friend constexpr auto operator<=>(const Score&, const Score&) = default;

 private:
  double value_ = 0.0;
};

Score AbsResidualScore(double prediction, double y);

// Adaptive prediction sets score: total probability of every class at least
// as probable as `label`, `label` included. Ties count in full.
Score ApsScore(std::span<const double> probabilities, std::size_t label);

// softmax(logits / temperature), max-subtracted.
std::vector<double> TemperatureSoftmax(std::span<const double> logits,
                                       double temperature);

struct TrainingOptions {
  int epochs = 5000;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
};

// Fully connected 1 -> 10 -> 10 -> 1 regressor with tanh hidden units,
// trained by full-batch gradient descent on mean squared error.
class RegressionPredictor {
 public:
  static constexpr int kHiddenWidth = 10;

  // Throws Error(kEmptyInput) for fewer than two points,
  // Error(kInvalidArgument) for mismatched lengths or a non-positive learning
  // rate, Error(kDiverged) if the loss stops being finite.
  static RegressionPredictor Train(std::span<const double> xs,
                                   std::span<const double> ys,
                                   const TrainingOptions& options);

  double Predict(double x) const;
  std::vector<double> Predict(std::span<const double> xs) const;

  double initial_loss() const { return initial_loss_; }
  double final_loss() const { return final_loss_; }

  // Flat parameter vector, for reproducibility checks.
  std::vector<double> Parameters() const;

 private:
  RegressionPredictor() = default;

  Eigen::VectorXd w1_;  // hidden1 <- input
  Eigen::VectorXd b1_;
  Eigen::MatrixXd w2_;  // hidden2 <- hidden1
  Eigen::VectorXd b2_;
  Eigen::RowVectorXd w3_;  // output <- hidden2
  double b3_ = 0.0;
  double initial_loss_ = 0.0;
  double final_loss_ = 0.0;
};

// Externally produced classifier outputs: one logit row per example, turned
// into probabilities with a shared temperature.
class ClassProbabilityModel {
 public:
  struct Row {
    std::string id;
    std::size_t label = 0;
    std::vector<double> logits;
  };

  ClassProbabilityModel(std::vector<Row> rows, double temperature);

  // CSV with a header line and rows `id,label,logit_0,...,logit_{C-1}`.
  // Throws Error(kParseError) on malformed input.
  static ClassProbabilityModel LoadCsv(std::istream& in, double temperature);
  static ClassProbabilityModel LoadCsvFile(const std::string& path,
                                           double temperature);

  std::size_t size() const { return rows_.size(); }
  std::size_t num_classes() const { return num_classes_; }
  double temperature() const { return temperature_; }
  const Row& row(std::size_t i) const { return rows_.at(i); }
  std::vector<double> Probabilities(std::size_t i) const;

 private:
  std::vector<Row> rows_;
  std::size_t num_classes_ = 0;
  double temperature_ = 1.0;
};

}  // namespace hetcp

#endif  // HETCP_SCORING_H_
