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

#include "hetcp/scoring.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "hetcp/error.h"

namespace hetcp {

Score::Score(double value) : value_(value) {
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::kNonFinite, "score must be finite");
  }
  if (value < 0.0) {
    throw Error(ErrorCode::kOutOfRange, "score must be nonnegative");
  }
}

Score AbsResidualScore(double prediction, double y) {
  if (!std::isfinite(prediction) || !std::isfinite(y)) {
    throw Error(ErrorCode::kNonFinite, "residual inputs must be finite");
  }
  return Score(std::abs(prediction - y));
}

Score ApsScore(std::span<const double> probabilities, std::size_t label) {
  if (label >= probabilities.size()) {
    throw Error(ErrorCode::kInvalidClass,
                "label " + std::to_string(label) + " outside " +
                    std::to_string(probabilities.size()) + " classes");
  }
  const double sum =
      std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "probabilities must sum to 1");
  }
  const double p_label = probabilities[label];
  double score = 0.0;
  for (double p : probabilities) {
    if (p >= p_label) score += p;
  }
  // Rounding can push the bottom class a hair above one.
  return Score(std::min(score, 1.0));
}

std::vector<double> TemperatureSoftmax(std::span<const double> logits,
                                       double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be positive");
  }
  if (logits.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no logits");
  }
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double l : logits) {
    if (!std::isfinite(l)) {
      throw Error(ErrorCode::kNonFinite, "logits must be finite");
    }
    max_logit = std::max(max_logit, l);
  }
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - max_logit) / temperature);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

namespace {

double MeanSquaredError(const Eigen::RowVectorXd& out,
                        const Eigen::RowVectorXd& y) {
  return (out - y).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace

RegressionPredictor RegressionPredictor::Train(std::span<const double> xs,
                                               std::span<const double> ys,
                                               const TrainingOptions& options) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorCode::kInvalidArgument, "xs and ys differ in length");
  }
  if (xs.size() < 2) {
    throw Error(ErrorCode::kEmptyInput, "need at least two training points");
  }
  if (!(options.learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive");
  }
  if (options.epochs < 0) {
    throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 0");
  }

  constexpr int h = kHiddenWidth;
  const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  const Eigen::RowVectorXd x =
      Eigen::Map<const Eigen::RowVectorXd>(xs.data(), n);
  const Eigen::RowVectorXd y =
      Eigen::Map<const Eigen::RowVectorXd>(ys.data(), n);
  if (!x.allFinite() || !y.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "training data must be finite");
  }

  RegressionPredictor p;
  std::mt19937_64 rng(options.seed);
  auto init = [&rng](auto& m, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  };
  p.w1_.resize(h);
  p.b1_.resize(h);
  p.w2_.resize(h, h);
  p.b2_.resize(h);
  p.w3_.resize(h);
  init(p.w1_, 1.0);
  init(p.b1_, 1.0);
  init(p.w2_, h);
  init(p.b2_, h);
  init(p.w3_, h);
  {
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(double{h}),
                                             1.0 / std::sqrt(double{h}));
    p.b3_ = u(rng);
  }

  const double lr = options.learning_rate;
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd h1(h, n), h2(h, n), d1(h, n), d2(h, n);
  Eigen::RowVectorXd out(n), d(n);

  auto forward = [&]() {
    h1 = ((p.w1_ * x).colwise() + p.b1_).array().tanh();
    h2 = ((p.w2_ * h1).colwise() + p.b2_).array().tanh();
    out = (p.w3_ * h2).array() + p.b3_;
  };

  forward();
  p.initial_loss_ = MeanSquaredError(out, y);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    if (epoch > 0) forward();
    d = 2.0 * inv_n * (out - y);
    const Eigen::RowVectorXd g_w3 = d * h2.transpose();
    const double g_b3 = d.sum();
    d2 = ((p.w3_.transpose() * d).array() * (1.0 - h2.array().square()))
             .matrix();
    const Eigen::MatrixXd g_w2 = d2 * h1.transpose();
    const Eigen::VectorXd g_b2 = d2.rowwise().sum();
    d1 = ((p.w2_.transpose() * d2).array() * (1.0 - h1.array().square()))
             .matrix();
    const Eigen::VectorXd g_w1 = d1 * x.transpose();
    const Eigen::VectorXd g_b1 = d1.rowwise().sum();

    p.w1_ -= lr * g_w1;
    p.b1_ -= lr * g_b1;
    p.w2_ -= lr * g_w2;
    p.b2_ -= lr * g_b2;
    p.w3_ -= lr * g_w3;
    p.b3_ -= lr * g_b3;
  }
  forward();
  p.final_loss_ = MeanSquaredError(out, y);
  if (!std::isfinite(p.final_loss_)) {
    throw Error(ErrorCode::kDiverged,
                "training loss is not finite; lower the learning rate");
  }
  return p;
}

double RegressionPredictor::Predict(double x) const {
  const Eigen::VectorXd a1 = (w1_ * x + b1_).array().tanh();
  const Eigen::VectorXd a2 = ((w2_ * a1) + b2_).array().tanh();
  return w3_.dot(a2) + b3_;
}

std::vector<double> RegressionPredictor::Predict(
    std::span<const double> xs) const {
  std::vector<double> out(xs.size());
  std::transform(xs.begin(), xs.end(), out.begin(),
                 [this](double x) { return Predict(x); });
  return out;
}

std::vector<double> RegressionPredictor::Parameters() const {
  std::vector<double> params;
  auto append = [&params](const auto& m) {
    params.insert(params.end(), m.data(), m.data() + m.size());
  };
  append(w1_);
  append(b1_);
  append(w2_);
  append(b2_);
  append(w3_);
  params.push_back(b3_);
  return params;
}

ClassProbabilityModel::ClassProbabilityModel(std::vector<Row> rows,
                                             double temperature)
    : rows_(std::move(rows)), temperature_(temperature) {
  if (!(temperature > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be positive");
  }
  if (rows_.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no logit rows");
  }
  num_classes_ = rows_.front().logits.size();
  for (const Row& r : rows_) {
    if (r.logits.size() != num_classes_ || num_classes_ == 0) {
      throw Error(ErrorCode::kInvalidArgument, "ragged logit rows");
    }
    if (r.label >= num_classes_) {
      throw Error(ErrorCode::kInvalidClass, "label out of range in row " + r.id);
    }
  }
}

ClassProbabilityModel ClassProbabilityModel::LoadCsv(std::istream& in,
                                                     double temperature) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kParseError, "missing CSV header");
  }
  const std::size_t columns =
      static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() < 3 || fields.size() != columns) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) +
                      ": need id,label and one logit per header column");
    }
    Row row;
    row.id = fields[0];
    try {
      const long label = std::stol(fields[1]);
      if (label < 0) throw Error(ErrorCode::kInvalidClass, "negative label");
      row.label = static_cast<std::size_t>(label);
      for (std::size_t i = 2; i < fields.size(); ++i) {
        row.logits.push_back(std::stod(fields[i]));
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": bad number");
    }
    rows.push_back(std::move(row));
  }
  return ClassProbabilityModel(std::move(rows), temperature);
}

ClassProbabilityModel ClassProbabilityModel::LoadCsvFile(
    const std::string& path, double temperature) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return LoadCsv(in, temperature);
}

std::vector<double> ClassProbabilityModel::Probabilities(std::size_t i) const {
  return TemperatureSoftmax(rows_.at(i).logits, temperature_);
}

}  // namespace hetcp
