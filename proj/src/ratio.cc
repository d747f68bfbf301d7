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

#include "hetcp/ratio.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "hetcp/error.h"

namespace hetcp {

GaussianSpec GaussianSpec::Scalar(double mean, double variance) {
  GaussianSpec spec;
  spec.mean = Eigen::VectorXd::Constant(1, mean);
  spec.covariance = Eigen::MatrixXd::Constant(1, 1, variance);
  return spec;
}

GaussianComponent::GaussianComponent(const GaussianSpec& spec)
    : mean_(spec.mean) {
  const Eigen::Index d = spec.mean.size();
  if (d == 0 || spec.covariance.rows() != d || spec.covariance.cols() != d) {
    throw Error(ErrorCode::kInvalidArgument, "mean/covariance shape mismatch");
  }
  if (!spec.covariance.isApprox(spec.covariance.transpose(), 1e-12)) {
    throw Error(ErrorCode::kSingularCovariance, "covariance is not symmetric");
  }
  llt_.compute(spec.covariance);
  if (llt_.info() != Eigen::Success) {
    throw Error(ErrorCode::kSingularCovariance,
                "covariance is not positive definite");
  }
  const Eigen::VectorXd diag = llt_.matrixL().toDenseMatrix().diagonal();
  if ((diag.array() <= 0.0).any()) {
    throw Error(ErrorCode::kSingularCovariance, "degenerate Cholesky factor");
  }
  log_normalizer_ = -0.5 * static_cast<double>(d) *
                        std::log(2.0 * std::numbers::pi) -
                    diag.array().log().sum();
}

double GaussianComponent::LogPdf(const Eigen::VectorXd& x) const {
  if (x.size() != mean_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "feature dimension mismatch");
  }
  const Eigen::VectorXd z = llt_.matrixL().solve(x - mean_);
  return log_normalizer_ - 0.5 * z.squaredNorm();
}

GmmClassParams FitGmmParams(std::span<const Eigen::VectorXd> features,
                            std::span<const int> labels, double ridge) {
  if (features.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no features to fit");
  }
  if (features.size() != labels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "features and labels differ");
  }
  const Eigen::Index d = features.front().size();
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != d || d == 0) {
      throw Error(ErrorCode::kInvalidArgument, "ragged feature vectors");
    }
    if (!features[i].allFinite()) {
      throw Error(ErrorCode::kNonFinite, "features must be finite");
    }
    by_class[labels[i]].push_back(i);
  }

  GmmClassParams params;
  params.count = features.size();
  const double total = static_cast<double>(features.size());
  for (const auto& [label, members] : by_class) {
    const double n_y = static_cast<double>(members.size());
    GmmClassParams::ClassComponent c;
    c.label = label;
    c.weight = n_y / total;
    c.mean = Eigen::VectorXd::Zero(d);
    for (std::size_t i : members) c.mean += features[i];
    c.mean /= n_y;
    c.covariance = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i : members) {
      const Eigen::VectorXd centered = features[i] - c.mean;
      c.covariance.noalias() += centered * centered.transpose();
    }
    c.covariance /= n_y;
    const double scale = c.covariance.trace() / static_cast<double>(d) + 1.0;
    c.covariance.diagonal().array() += ridge * scale;
    params.classes.push_back(std::move(c));
  }
  return params;
}

nlohmann::json GmmParamsToJson(const GmmClassParams& params) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : params.classes) {
    std::vector<double> mean(c.mean.data(), c.mean.data() + c.mean.size());
    std::vector<std::vector<double>> cov(
        static_cast<std::size_t>(c.covariance.rows()));
    for (Eigen::Index r = 0; r < c.covariance.rows(); ++r) {
      for (Eigen::Index col = 0; col < c.covariance.cols(); ++col) {
        cov[static_cast<std::size_t>(r)].push_back(c.covariance(r, col));
      }
    }
    classes.push_back(
        {{"y", c.label}, {"pi", c.weight}, {"mean", mean}, {"cov", cov}});
  }
  return {{"agent_id", params.agent_id},
          {"n_i", params.count},
          {"classes", classes}};
}

GmmClassParams GmmParamsFromJson(const nlohmann::json& j) {
  GmmClassParams params;
  try {
    params.agent_id = j.at("agent_id").get<std::string>();
    params.count = j.at("n_i").get<std::size_t>();
    double pi_sum = 0.0;
    for (const auto& jc : j.at("classes")) {
      GmmClassParams::ClassComponent c;
      c.label = jc.at("y").get<int>();
      c.weight = jc.at("pi").get<double>();
      const auto mean = jc.at("mean").get<std::vector<double>>();
      const auto cov = jc.at("cov").get<std::vector<std::vector<double>>>();
      const auto d = static_cast<Eigen::Index>(mean.size());
      if (cov.size() != mean.size()) {
        throw Error(ErrorCode::kParseError, "cov rows do not match mean");
      }
      c.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
      c.covariance.resize(d, d);
      for (Eigen::Index r = 0; r < d; ++r) {
        const auto& row = cov[static_cast<std::size_t>(r)];
        if (static_cast<Eigen::Index>(row.size()) != d) {
          throw Error(ErrorCode::kParseError, "cov is not square");
        }
        for (Eigen::Index col = 0; col < d; ++col) {
          c.covariance(r, col) = row[static_cast<std::size_t>(col)];
        }
      }
      pi_sum += c.weight;
      params.classes.push_back(std::move(c));
    }
    if (!params.classes.empty() && std::abs(pi_sum - 1.0) > 1e-9) {
      throw Error(ErrorCode::kParseError, "class weights do not sum to 1");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  return params;
}

void GaussianMixture::Add(double weight, const GaussianSpec& component) {
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw Error(ErrorCode::kInvalidArgument, "mixture weights must be >= 0");
  }
  if (weight == 0.0) return;
  components_.emplace_back(std::log(weight), GaussianComponent(component));
}

GaussianMixture GaussianMixture::FromAgents(
    std::span<const std::pair<double, GmmClassParams>> agents) {
  GaussianMixture mixture;
  for (const auto& [agent_weight, params] : agents) {
    for (const auto& c : params.classes) {
      mixture.Add(agent_weight * c.weight, GaussianSpec{c.mean, c.covariance});
    }
  }
  return mixture;
}

double GaussianMixture::LogDensity(const Eigen::VectorXd& x) const {
  if (components_.empty()) return -std::numeric_limits<double>::infinity();
  double max_term = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(components_.size());
  for (const auto& [log_w, g] : components_) {
    terms.push_back(log_w + g.LogPdf(x));
    max_term = std::max(max_term, terms.back());
  }
  if (!std::isfinite(max_term)) return max_term;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - max_term);
  return max_term + std::log(acc);
}

double GaussianMixture::Density(const Eigen::VectorXd& x) const {
  return std::exp(LogDensity(x));
}

double MixtureDensity(std::span<const std::pair<double, GmmClassParams>> agents,
                      const Eigen::VectorXd& x) {
  return GaussianMixture::FromAgents(agents).Density(x);
}

RatioModel::RatioModel(GaussianMixture numerator, GaussianMixture denominator,
                       Variant variant)
    : numerator_(std::move(numerator)),
      denominator_(std::move(denominator)),
      variant_(variant),
      floored_(std::make_shared<std::atomic<std::size_t>>(0)) {}

RatioModel RatioModel::FromGmm(
    const GmmClassParams& target,
    std::span<const GmmClassParams> calibration_agents) {
  if (calibration_agents.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no calibration agents");
  }
  double total = 0.0;
  for (const auto& a : calibration_agents) {
    total += static_cast<double>(a.count);
  }
  if (!(total > 0.0)) {
    throw Error(ErrorCode::kZeroMass, "calibration agents hold no data");
  }
  std::vector<std::pair<double, GmmClassParams>> pooled;
  pooled.reserve(calibration_agents.size());
  for (const auto& a : calibration_agents) {
    pooled.emplace_back(static_cast<double>(a.count) / total, a);
  }
  const std::pair<double, GmmClassParams> star[] = {{1.0, target}};
  return RatioModel(GaussianMixture::FromAgents(star),
                    GaussianMixture::FromAgents(pooled),
                    Variant::kGmmEstimated);
}

double RatioModel::RatioAt(const Eigen::VectorXd& x) const {
  static const double kLogFloor = std::log(kDensityFloor);
  const double log_num = numerator_.LogDensity(x);
  double log_den = denominator_.LogDensity(x);
  if (!(log_den >= kLogFloor)) {
    floored_->fetch_add(1, std::memory_order_relaxed);
    log_den = kLogFloor;
  }
  return std::min(std::exp(log_num - log_den),
                  std::numeric_limits<double>::max());
}

double RatioModel::RatioAt(double x) const {
  return RatioAt(Eigen::VectorXd::Constant(1, x));
}

}  // namespace hetcp
