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

#ifndef HETCP_RATIO_H_
#define HETCP_RATIO_H_

#include <atomic>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

namespace hetcp {

// Multivariate normal; the covariance must admit a Cholesky factorization.
struct GaussianSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  static GaussianSpec Scalar(double mean, double variance);
};

// A Gaussian with its Cholesky factor and log normalizer precomputed.
class GaussianComponent {
 public:
  // Throws Error(kSingularCovariance) if the covariance is not SPD.
  explicit GaussianComponent(const GaussianSpec& spec);

  double LogPdf(const Eigen::VectorXd& x) const;
  Eigen::Index dim() const { return mean_.size(); }

 private:
  Eigen::VectorXd mean_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double log_normalizer_ = 0.0;
};

inline constexpr double kCovarianceRidge = 1e-6;

// Per-class moment-matched Gaussians of one agent's feature vectors.
struct GmmClassParams {
  struct ClassComponent {
    int label = 0;
    double weight = 0.0;  // class frequency
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;  // biased, then ridge-regularized
  };

  std::string agent_id;
  std::size_t count = 0;
  std::vector<ClassComponent> classes;  // ascending label, observed only
};

// Class frequencies, class means and biased class covariances (divide by the
// class count), then cov += ridge * (trace/d + 1) * I. Classes with no
// examples are absent. Throws Error(kEmptyInput) / Error(kNonFinite).
GmmClassParams FitGmmParams(std::span<const Eigen::VectorXd> features,
                            std::span<const int> labels,
                            double ridge = kCovarianceRidge);

// Exchange payload:
// {agent_id, n_i, classes: [{y, pi, mean: [...], cov: [[...]]}]}
nlohmann::json GmmParamsToJson(const GmmClassParams& params);
GmmClassParams GmmParamsFromJson(const nlohmann::json& j);

// Weighted sum of Gaussians evaluated in the log domain.
class GaussianMixture {
 public:
  GaussianMixture() = default;

  // Zero-weight components are dropped. Throws on negative weights.
  void Add(double weight, const GaussianSpec& component);

  // Sum over agents of agent_weight * sum over classes of pi_y * N(mean, cov).
  static GaussianMixture FromAgents(
      std::span<const std::pair<double, GmmClassParams>> agents);

  double LogDensity(const Eigen::VectorXd& x) const;
  double Density(const Eigen::VectorXd& x) const;
  std::size_t size() const { return components_.size(); }

 private:
  std::vector<std::pair<double, GaussianComponent>> components_;  // log w
};

double MixtureDensity(std::span<const std::pair<double, GmmClassParams>> agents,
                      const Eigen::VectorXd& x);

// Denominator densities below this are clamped to keep ratios finite.
inline constexpr double kDensityFloor = 1e-300;

// lambda(x) = target covariate density / pooled calibration covariate density.
class RatioModel {
 public:
  enum class Variant { kExact, kGmmEstimated };

  RatioModel(GaussianMixture numerator, GaussianMixture denominator,
             Variant variant);

  // Numerator from the target agent, denominator pools the calibration
  // agents with weights n_i / N.
  static RatioModel FromGmm(const GmmClassParams& target,
                            std::span<const GmmClassParams> calibration_agents);

  double RatioAt(const Eigen::VectorXd& x) const;
  double RatioAt(double x) const;

  Variant variant() const { return variant_; }

  // Evaluations whose denominator hit kDensityFloor.
  std::size_t floored_evaluations() const { return floored_->load(); }

 private:
  GaussianMixture numerator_;
  GaussianMixture denominator_;
  Variant variant_;
  std::shared_ptr<std::atomic<std::size_t>> floored_;
};

}  // namespace hetcp

#endif  // HETCP_RATIO_H_
