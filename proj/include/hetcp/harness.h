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

#ifndef HETCP_HARNESS_H_
#define HETCP_HARNESS_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hetcp/conformal.h"
#include "hetcp/fedsim.h"
#include "hetcp/synthetic.h"

namespace hetcp {

enum class Method {
  kClassic,
  kWeightedExact,
  kWeightedGmm,
  kTibshiraniIid,
  kApproxGlobal,
  kFederated,
};

std::string_view MethodName(Method method);
// "classic", "weighted" / "weighted-exact", "weighted-gmm", "tibshirani-iid",
// "approx-global", "federated". Throws Error(kInvalidArgument).
Method ParseMethod(std::string_view name);

// A calibration source paired with a calibration method.
struct Arm {
  CalibrationSource source = CalibrationSource::kMix;
  Method method = Method::kClassic;

  std::string Label() const;  // e.g. "weighted-exact@mix"
  friend bool operator==(const Arm&, const Arm&) = default;
};

// Knobs for the harness arms that need more than the synthetic spec.
struct HarnessOptions {
  // Algorithm settings for the federated arm. Agents are the calibration
  // sources (one agent per component present).
  FederationConfig federation = [] {
    FederationConfig c;
    c.rounds = 500;
    c.local_steps = 20;
    c.moreau_gamma = 0.01;
    return c;
  }();
  // Test-point ratios forced to this value for every weighted arm when set;
  // calibration ratios likewise. Used to check the uniform-ratio degeneracy.
  std::optional<double> constant_ratio;
};

struct ReplicationResult {
  Arm arm;
  std::size_t replication = 0;
  double coverage = 0.0;
  double miscoverage = 0.0;
  double mean_width = 0.0;    // +inf when any interval is unbounded
  double median_width = 0.0;  // +inf when most are
  std::size_t unbounded = 0;
  std::vector<PredictionInterval> intervals;  // per test point
};

// Calibration records for a synthetic calibration set scored by `predictor`,
// with ratios from `ratio` (or 1 when null).
std::vector<CalibrationRecord> MakeRegressionRecords(
    const Dataset& data, std::span<const double> predictions,
    const RatioModel* ratio);

// Fits per-agent GMMs on fresh fitting samples (spec.gmm_fit_size per agent)
// and returns the estimated ratio for the given calibration source.
RatioModel EstimateGmmRatioModel(const SyntheticSpec& spec,
                                 CalibrationSource source, std::uint64_t seed);

// Trains the regressor once and evaluates every arm on the same training
// and test data; arms sharing a source share the calibration set.
std::vector<ReplicationResult> EvaluateReplication(
    const SyntheticSpec& spec, std::span<const Arm> arms, double alpha,
    std::uint64_t seed, std::size_t replication_index,
    const HarnessOptions& options = {});

ReplicationResult RunReplication(const SyntheticSpec& spec, const Arm& arm,
                                 double alpha, std::uint64_t seed,
                                 const HarnessOptions& options = {});

struct ArmSummary {
  Arm arm;
  std::size_t replications = 0;
  double mean_coverage = 0.0;
  double std_coverage = 0.0;  // sample std across replications
  double mean_width = 0.0;
  double mean_median_width = 0.0;
  double unbounded_fraction = 0.0;
};

struct SourceBounds {
  CalibrationSource source;
  BoundReport bounds;
};

struct ExperimentReport {
  SyntheticSpec spec;
  double alpha = 0.1;
  std::size_t replications = 0;
  std::uint64_t base_seed = 0;
  std::vector<ArmSummary> summaries;       // in arm order
  std::vector<ReplicationResult> rows;     // replication-major, arm order
  std::vector<SourceBounds> bounds;        // exact-ratio bounds per source
};

// Aggregates rows into per-arm summaries; invariant under row order.
std::vector<ArmSummary> Summarize(std::span<const Arm> arms,
                                  std::span<const ReplicationResult> rows);

// Replication i uses seed ReplicationSeed(base_seed, i). Results do not
// depend on `workers`.
ExperimentReport RunExperiment(const SyntheticSpec& spec,
                               std::span<const Arm> arms, double alpha,
                               std::size_t replications,
                               std::uint64_t base_seed, std::size_t workers,
                               const HarnessOptions& options = {});

// E_P[lambda^power] for X ~ component of the spec, by quadrature.
double ExpectedRatioPower(const SyntheticSpec& spec, const RatioModel& ratio,
                          int component, int power);

// Exact-ratio bounds for a calibration set of size n drawn from `source`.
BoundReport ExactRatioBounds(const SyntheticSpec& spec,
                             CalibrationSource source, std::size_t n,
                             double delta);

struct BetaLawOptions {
  std::size_t n = 99;
  double alpha = 0.1;
  std::size_t replications = 2000;
  std::uint64_t seed = 0;
  std::size_t test_pool = 2000;
  // With an oracle predictor the residual is pure noise and the conditional
  // miscoverage has a closed form; otherwise it is estimated on the pool.
  bool analytic = false;
};

struct BetaLawReport {
  double beta_a = 0.0;
  double beta_b = 0.0;
  double empirical_mean = 0.0;
  double empirical_std = 0.0;
  double reference_mean = 0.0;
  double reference_std = 0.0;
  double ks_distance = 0.0;  // sup |F_emp - F_Beta|
  std::vector<double> miscoverage;
};

BetaLawReport BetaLawCheck(const SyntheticSpec& spec,
                           const BetaLawOptions& options);

// Kolmogorov distance between the samples and Beta(a, b).
double KolmogorovDistanceToBeta(std::vector<double> samples, double a,
                                double b);

struct ScpCoverageReport {
  std::size_t n = 0;
  std::size_t draws = 0;
  double coverage = 0.0;
  double standard_error = 0.0;
  double lower = 0.0;  // 1 - alpha
  double upper = 0.0;  // 1 - alpha + 1 / (n + 1)
};

// Exchangeable Monte Carlo: each draw is a fresh calibration set of n points
// and one test point from P2.
ScpCoverageReport ScpCoverageCheck(const SyntheticSpec& spec, std::size_t n,
                                   double alpha, std::size_t draws,
                                   std::uint64_t seed);

struct BoundCheckOptions {
  std::size_t n = 100;
  double alpha = 0.1;
  double delta = 0.05;
  std::size_t replications = 2000;
  std::uint64_t seed = 0;
  std::size_t test_pool = 2000;
  // True: calibration from P2 with lambda = 1. False: Mix with exact ratios.
  bool exchangeable = false;
};

struct BoundCheckReport {
  BoundReport bounds;
  std::vector<double> miscoverage;
  double lower_violation_fraction = 0.0;
  double upper_violation_fraction = 0.0;
  double tolerance = 0.0;  // delta + 3 binomial standard errors
  bool passed = false;
};

// Throws Error(kOutOfRange) unless delta < 1/6.
BoundCheckReport BoundCheck(const SyntheticSpec& spec,
                            const BoundCheckOptions& options);

struct FederatedScenario {
  std::vector<AgentState> agents;
  std::size_t target_agent = 0;
  double score_range = 0.0;  // max - min score over all records
  std::vector<CalibrationRecord> pooled;  // all records, agent order
};

// Agents whose covariate means step from the P1 mean to the P2 mean; the
// target is the last agent. Scores come from one trained regressor and
// ratios from the exact Gaussian densities of the agents.
FederatedScenario MakeFederatedScenario(const SyntheticSpec& spec,
                                        std::size_t num_agents,
                                        std::size_t records_per_agent,
                                        std::uint64_t seed);

struct RatioAgreementReport {
  double max_relative_error = 0.0;
  double lower = 0.0;  // central-mass interval of P^cal
  double upper = 0.0;
  std::size_t grid_points = 0;
};

// Worst relative error of the GMM ratio against the exact ratio on a grid
// over the central `mass` of the calibration distribution.
RatioAgreementReport RatioAgreementCheck(const SyntheticSpec& spec,
                                         CalibrationSource source,
                                         std::uint64_t seed, double mass = 0.9,
                                         std::size_t grid_points = 201);

}  // namespace hetcp

#endif  // HETCP_HARNESS_H_
