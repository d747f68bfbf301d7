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

#include "hetcp/harness.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numbers>
#include <thread>

#include <boost/math/distributions/beta.hpp>

#include "hetcp/error.h"

namespace hetcp {
namespace {

enum Stream : std::uint64_t {
  kGmmFitStream = 5,
  kBetaStream = 6,
  kScpStream = 7,
  kBoundStream = 8,
  kScenarioStream = 9,
};

double NormalCdf(double x, double mean, double variance) {
  return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * variance));
}

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid),
                   v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(
      v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

double MeanOf(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double SampleStd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = MeanOf(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// ceil with tolerance for products like 100 * 0.9 landing a hair above 90.
double CeilTolerant(double x) { return std::ceil(x - 1e-9); }

struct CoverageTally {
  std::size_t covered = 0;
  std::vector<double> widths;
  std::vector<PredictionInterval> intervals;
};

void Tally(CoverageTally& tally, const PredictionInterval& interval,
           double y) {
  if (interval.Contains(y)) ++tally.covered;
  tally.widths.push_back(interval.Width());
  tally.intervals.push_back(interval);
}

ReplicationResult Finish(const Arm& arm, std::size_t index,
                         CoverageTally tally) {
  ReplicationResult r;
  r.arm = arm;
  r.replication = index;
  const double n = static_cast<double>(tally.widths.size());
  r.coverage = static_cast<double>(tally.covered) / n;
  r.miscoverage = 1.0 - r.coverage;
  r.unbounded = static_cast<std::size_t>(
      std::count_if(tally.widths.begin(), tally.widths.end(),
                    [](double w) { return std::isinf(w); }));
  r.mean_width = r.unbounded > 0 ? std::numeric_limits<double>::infinity()
                                 : MeanOf(tally.widths);
  r.median_width = Median(tally.widths);
  r.intervals = std::move(tally.intervals);
  return r;
}

std::vector<AgentState> AgentsByComponent(
    std::span<const CalibrationRecord> records, const Dataset& calibration) {
  std::map<int, std::vector<CalibrationRecord>> groups;
  for (std::size_t k = 0; k < records.size(); ++k) {
    groups[calibration.component[k]].push_back(records[k]);
  }
  std::vector<AgentState> agents;
  for (auto& [component, group] : groups) {
    agents.push_back(AgentState::Make(agents.size(), std::move(group)));
  }
  return agents;
}

// Everything an arm needs about one calibration source.
struct SourceContext {
  Dataset calibration;
  std::vector<double> predictions;
  std::optional<RatioModel> exact;
  std::optional<RatioModel> gmm;
  std::vector<CalibrationRecord> exact_records;
  std::vector<CalibrationRecord> gmm_records;
};

}  // namespace

std::string_view MethodName(Method method) {
  switch (method) {
    case Method::kClassic: return "classic";
    case Method::kWeightedExact: return "weighted-exact";
    case Method::kWeightedGmm: return "weighted-gmm";
    case Method::kTibshiraniIid: return "tibshirani-iid";
    case Method::kApproxGlobal: return "approx-global";
    case Method::kFederated: return "federated";
  }
  return "?";
}

Method ParseMethod(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "classic") return Method::kClassic;
  if (lower == "weighted" || lower == "weighted-exact") {
    return Method::kWeightedExact;
  }
  if (lower == "weighted-gmm") return Method::kWeightedGmm;
  if (lower == "tibshirani-iid") return Method::kTibshiraniIid;
  if (lower == "approx-global") return Method::kApproxGlobal;
  if (lower == "federated") return Method::kFederated;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown method '" + std::string(name) + "'");
}

std::string Arm::Label() const {
  return std::string(MethodName(method)) + "@" + std::string(SourceName(source));
}

std::vector<CalibrationRecord> MakeRegressionRecords(
    const Dataset& data, std::span<const double> predictions,
    const RatioModel* ratio) {
  if (predictions.size() != data.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one prediction per point");
  }
  std::vector<CalibrationRecord> records;
  records.reserve(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) {
    CalibrationRecord r;
    r.feature = Eigen::VectorXd::Constant(1, data.x[k]);
    r.label = data.y[k];
    r.score = AbsResidualScore(predictions[k], data.y[k]);
    r.ratio = ratio ? ratio->RatioAt(data.x[k]) : 1.0;
    records.push_back(std::move(r));
  }
  return records;
}

RatioModel EstimateGmmRatioModel(const SyntheticSpec& spec,
                                 CalibrationSource source, std::uint64_t seed) {
  auto rng = MakeStream(seed, kGmmFitStream + 16 * static_cast<int>(source));
  auto fit = [&](int component, std::size_t count, std::string id) {
    const Dataset d = SampleComponent(spec, component, spec.gmm_fit_size, rng);
    std::vector<Eigen::VectorXd> features;
    features.reserve(d.size());
    for (double x : d.x) features.push_back(Eigen::VectorXd::Constant(1, x));
    // Regression has no classes; every point falls in class 0.
    const std::vector<int> labels(d.size(), 0);
    GmmClassParams p = FitGmmParams(features, labels);
    p.agent_id = std::move(id);
    p.count = count;
    return p;
  };
  const GmmClassParams target = fit(2, spec.gmm_fit_size, "target");
  std::vector<GmmClassParams> agents;
  switch (source) {
    case CalibrationSource::kP1:
      agents.push_back(fit(1, spec.single_source_size, "p1"));
      break;
    case CalibrationSource::kP2:
      agents.push_back(fit(2, spec.single_source_size, "p2"));
      break;
    case CalibrationSource::kMix:
      agents.push_back(fit(1, spec.mix_p1, "p1"));
      agents.push_back(fit(2, spec.mix_p2, "p2"));
      break;
  }
  return RatioModel::FromGmm(target, agents);
}

std::vector<ReplicationResult> EvaluateReplication(
    const SyntheticSpec& spec, std::span<const Arm> arms, double alpha,
    std::uint64_t seed, std::size_t replication_index,
    const HarnessOptions& options) {
  if (arms.empty()) return {};
  const SyntheticSplit base = SampleSynthetic(spec, seed, arms.front().source);
  const RegressionPredictor predictor =
      TrainSyntheticRegressor(spec, base.train, seed);
  const Dataset& test = base.test;
  const std::vector<double> test_pred = predictor.Predict(test.x);

  std::map<CalibrationSource, SourceContext> contexts;
  auto context = [&](CalibrationSource source) -> SourceContext& {
    auto it = contexts.find(source);
    if (it != contexts.end()) return it->second;
    SourceContext ctx;
    ctx.calibration = SampleSynthetic(spec, seed, source).calibration;
    ctx.predictions = predictor.Predict(ctx.calibration.x);
    ctx.exact.emplace(ExactRatioModel(spec, source));
    ctx.exact_records =
        MakeRegressionRecords(ctx.calibration, ctx.predictions, &*ctx.exact);
    if (options.constant_ratio) {
      for (auto& r : ctx.exact_records) r.ratio = *options.constant_ratio;
    }
    return contexts.emplace(source, std::move(ctx)).first->second;
  };
  auto test_ratio = [&](const RatioModel& model, double x) {
    return options.constant_ratio ? *options.constant_ratio
                                  : model.RatioAt(x);
  };

  std::vector<ReplicationResult> results;
  results.reserve(arms.size());
  for (const Arm& arm : arms) {
    SourceContext& ctx = context(arm.source);
    CoverageTally tally;
    switch (arm.method) {
      case Method::kClassic: {
        const ExtendedReal t = ScpThreshold(ctx.exact_records, alpha);
        for (std::size_t j = 0; j < test.size(); ++j) {
          Tally(tally, {test_pred[j], t}, test.y[j]);
        }
        break;
      }
      case Method::kWeightedExact: {
        const PreparedCalibration prepared(ctx.exact_records);
        for (std::size_t j = 0; j < test.size(); ++j) {
          const double lambda = test_ratio(*ctx.exact, test.x[j]);
          Tally(tally, {test_pred[j], prepared.Threshold(lambda, alpha)},
                test.y[j]);
        }
        break;
      }
      case Method::kWeightedGmm: {
        if (!ctx.gmm) {
          ctx.gmm.emplace(EstimateGmmRatioModel(spec, arm.source, seed));
          ctx.gmm_records = MakeRegressionRecords(ctx.calibration,
                                                  ctx.predictions, &*ctx.gmm);
          if (options.constant_ratio) {
            for (auto& r : ctx.gmm_records) r.ratio = *options.constant_ratio;
          }
        }
        const PreparedCalibration prepared(ctx.gmm_records);
        for (std::size_t j = 0; j < test.size(); ++j) {
          const double lambda = test_ratio(*ctx.gmm, test.x[j]);
          Tally(tally, {test_pred[j], prepared.Threshold(lambda, alpha)},
                test.y[j]);
        }
        break;
      }
      case Method::kTibshiraniIid: {
        std::vector<double> weights;
        weights.reserve(ctx.exact_records.size());
        for (const auto& r : ctx.exact_records) weights.push_back(r.ratio);
        for (std::size_t j = 0; j < test.size(); ++j) {
          const double w = test_ratio(*ctx.exact, test.x[j]);
          Tally(tally,
                {test_pred[j],
                 TibshiraniIidThreshold(ctx.exact_records, weights, w, alpha)},
                test.y[j]);
        }
        break;
      }
      case Method::kApproxGlobal: {
        const ExtendedReal t = ApproxGlobalThreshold(ctx.exact_records, alpha);
        for (std::size_t j = 0; j < test.size(); ++j) {
          Tally(tally, {test_pred[j], t}, test.y[j]);
        }
        break;
      }
      case Method::kFederated: {
        const std::vector<AgentState> agents =
            AgentsByComponent(ctx.exact_records, ctx.calibration);
        FederationConfig config = options.federation;
        config.alpha = alpha;
        config.seed = seed;
        const double q = RunFederation(agents, config).quantile;
        const ExtendedReal t(std::max(q, 0.0));
        for (std::size_t j = 0; j < test.size(); ++j) {
          Tally(tally, {test_pred[j], t}, test.y[j]);
        }
        break;
      }
    }
    results.push_back(Finish(arm, replication_index, std::move(tally)));
  }
  return results;
}

ReplicationResult RunReplication(const SyntheticSpec& spec, const Arm& arm,
                                 double alpha, std::uint64_t seed,
                                 const HarnessOptions& options) {
  const Arm arms[] = {arm};
  return EvaluateReplication(spec, arms, alpha, seed, 0, options).front();
}

std::vector<ArmSummary> Summarize(std::span<const Arm> arms,
                                  std::span<const ReplicationResult> rows) {
  std::vector<ArmSummary> out;
  for (const Arm& arm : arms) {
    std::vector<const ReplicationResult*> mine;
    for (const auto& r : rows) {
      if (r.arm == arm) mine.push_back(&r);
    }
    // Aggregate in replication order so the result ignores row order.
    std::sort(mine.begin(), mine.end(),
              [](const ReplicationResult* a, const ReplicationResult* b) {
                return a->replication < b->replication;
              });
    std::vector<double> cov, width, median;
    std::size_t unbounded = 0, points = 0;
    for (const auto* r : mine) {
      cov.push_back(r->coverage);
      width.push_back(r->mean_width);
      median.push_back(r->median_width);
      unbounded += r->unbounded;
      points += r->intervals.size();
    }
    ArmSummary s;
    s.arm = arm;
    s.replications = mine.size();
    s.mean_coverage = MeanOf(cov);
    s.std_coverage = SampleStd(cov);
    s.mean_width = MeanOf(width);
    s.mean_median_width = MeanOf(median);
    s.unbounded_fraction =
        points ? static_cast<double>(unbounded) / static_cast<double>(points)
               : 0.0;
    out.push_back(s);
  }
  return out;
}

ExperimentReport RunExperiment(const SyntheticSpec& spec,
                               std::span<const Arm> arms, double alpha,
                               std::size_t replications,
                               std::uint64_t base_seed, std::size_t workers,
                               const HarnessOptions& options) {
  spec.Validate();
  if (replications < 1) {
    throw Error(ErrorCode::kInvalidArgument, "replications must be >= 1");
  }
  if (arms.empty()) throw Error(ErrorCode::kEmptyInput, "no arms to run");

  std::vector<std::vector<ReplicationResult>> per_rep(replications);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= replications) return;
      try {
        per_rep[i] = EvaluateReplication(
            spec, arms, alpha, ReplicationSeed(base_seed, i), i, options);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = replications;
        return;
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(workers, 1, 256);
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentReport report;
  report.spec = spec;
  report.alpha = alpha;
  report.replications = replications;
  report.base_seed = base_seed;
  for (auto& rows : per_rep) {
    for (auto& r : rows) report.rows.push_back(std::move(r));
  }
  report.summaries = Summarize(arms, report.rows);
  std::vector<CalibrationSource> seen;
  for (const Arm& arm : arms) {
    if (std::find(seen.begin(), seen.end(), arm.source) != seen.end()) continue;
    seen.push_back(arm.source);
    report.bounds.push_back(
        {arm.source, ExactRatioBounds(spec, arm.source,
                                      spec.CalibrationSize(arm.source), 0.05)});
  }
  return report;
}

double ExpectedRatioPower(const SyntheticSpec& spec, const RatioModel& ratio,
                          int component, int power) {
  const double mean = component == 1 ? spec.p1_mean : spec.p2_mean;
  const double var = component == 1 ? spec.p1_variance : spec.p2_variance;
  const double sd = std::sqrt(var);
  // Composite Simpson over +/- 12 sd.
  constexpr int kIntervals = 24000;
  const double lo = mean - 12.0 * sd;
  const double h = 24.0 * sd / kIntervals;
  double acc = 0.0;
  for (int i = 0; i <= kIntervals; ++i) {
    const double x = lo + h * i;
    const double pdf = std::exp(-0.5 * (x - mean) * (x - mean) / var) /
                       std::sqrt(2.0 * std::numbers::pi * var);
    const double f = std::pow(ratio.RatioAt(x), power) * pdf;
    const double c = (i == 0 || i == kIntervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += c * f;
  }
  return acc * h / 3.0;
}

BoundReport ExactRatioBounds(const SyntheticSpec& spec,
                             CalibrationSource source, std::size_t n,
                             double delta) {
  const RatioModel ratio = ExactRatioModel(spec, source);
  const double share = spec.P1Share(source);
  const auto n1 = static_cast<std::size_t>(
      std::llround(share * static_cast<double>(n)));
  double e1 = 0.0, s1 = 0.0;
  if (n1 > 0) {
    e1 = ExpectedRatioPower(spec, ratio, 1, 1);
    s1 = std::sqrt(std::max(0.0, ExpectedRatioPower(spec, ratio, 1, 2) - e1 * e1));
  }
  const double e2 = ExpectedRatioPower(spec, ratio, 2, 1);
  const double e2_sq = ExpectedRatioPower(spec, ratio, 2, 2);
  const double s2 = std::sqrt(std::max(0.0, e2_sq - e2 * e2));
  std::vector<double> sigmas, expectations;
  for (std::size_t k = 0; k < n; ++k) {
    const bool from_p1 = k < n1;
    sigmas.push_back(from_p1 ? s1 : s2);
    expectations.push_back(from_p1 ? e1 : e2);
  }
  // Spread of lambda under the pooled calibration law, used as the
  // sub-Gaussian parameter of the bias bound (heuristic).
  const double cal_mean = share * e1 + (1.0 - share) * e2;
  const double cal_sq =
      (n1 > 0 ? share * ExpectedRatioPower(spec, ratio, 1, 2) : 0.0) +
      (1.0 - share) * e2_sq;
  const double bias_sigma = std::sqrt(std::max(0.0, cal_sq - cal_mean * cal_mean));
  return ComputeBounds(n, delta, sigmas, expectations, e2,
                       std::max(1.0, e2_sq), bias_sigma);
}

double KolmogorovDistanceToBeta(std::vector<double> samples, double a,
                                double b) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  const boost::math::beta_distribution<double> dist(a, b);
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = boost::math::cdf(dist, std::clamp(samples[i], 0.0, 1.0));
    d = std::max(d, static_cast<double>(i + 1) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  return d;
}

BetaLawReport BetaLawCheck(const SyntheticSpec& spec,
                           const BetaLawOptions& options) {
  spec.Validate();
  if (options.n < 1 || options.replications < 1 || options.test_pool < 1) {
    throw Error(ErrorCode::kInvalidArgument, "sizes must be >= 1");
  }
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
    throw Error(ErrorCode::kOutOfRange, "alpha must lie in (0, 1)");
  }
  if (options.analytic && !(spec.noise_std > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "analytic mode needs noise > 0");
  }
  BetaLawReport report;
  const double np1 = static_cast<double>(options.n + 1);
  report.beta_a = CeilTolerant(np1 * options.alpha);
  report.beta_b = CeilTolerant(np1 * (1.0 - options.alpha));
  const double a = report.beta_a, b = report.beta_b;
  report.reference_mean = a / (a + b);
  report.reference_std = std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1.0)));

  auto rng = MakeStream(options.seed, kBetaStream);
  std::optional<RegressionPredictor> predictor;
  if (!options.analytic) {
    auto train_rng = MakeStream(options.seed, kBetaStream + 100);
    const Dataset train = SampleComponent(spec, 1, spec.train_size, train_rng);
    predictor.emplace(TrainSyntheticRegressor(spec, train, options.seed));
  }
  auto residuals = [&](const Dataset& d) {
    std::vector<double> pred =
        predictor ? predictor->Predict(d.x) : std::vector<double>(d.size());
    std::vector<double> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double p = predictor ? pred[i] : SyntheticTarget(d.x[i]);
      out[i] = std::abs(p - d.y[i]);
    }
    return out;
  };

  report.miscoverage.reserve(options.replications);
  for (std::size_t rep = 0; rep < options.replications; ++rep) {
    const Dataset cal = SampleComponent(spec, 2, options.n, rng);
    const std::vector<double> cal_res = residuals(cal);
    std::vector<CalibrationRecord> records(cal.size());
    for (std::size_t k = 0; k < cal.size(); ++k) {
      records[k].score = Score(cal_res[k]);
    }
    const ExtendedReal t = ScpThreshold(records, options.alpha);
    double miss = 0.0;
    if (options.analytic) {
      // |eps| > t with eps ~ N(0, noise_std^2).
      miss = t.is_infinite()
                 ? 0.0
                 : std::erfc(t.value() / (spec.noise_std * std::sqrt(2.0)));
    } else {
      const Dataset pool = SampleComponent(spec, 2, options.test_pool, rng);
      const std::vector<double> pool_res = residuals(pool);
      std::size_t missed = 0;
      for (double r : pool_res) {
        if (ExtendedReal(r) > t) ++missed;
      }
      miss = static_cast<double>(missed) /
             static_cast<double>(options.test_pool);
    }
    report.miscoverage.push_back(miss);
  }
  report.empirical_mean = MeanOf(report.miscoverage);
  report.empirical_std = SampleStd(report.miscoverage);
  report.ks_distance = KolmogorovDistanceToBeta(report.miscoverage, a, b);
  return report;
}

ScpCoverageReport ScpCoverageCheck(const SyntheticSpec& spec, std::size_t n,
                                   double alpha, std::size_t draws,
                                   std::uint64_t seed) {
  spec.Validate();
  if (n < 1 || draws < 1) {
    throw Error(ErrorCode::kInvalidArgument, "n and draws must be >= 1");
  }
  auto train_rng = MakeStream(seed, kScpStream + 100);
  const Dataset train = SampleComponent(spec, 1, spec.train_size, train_rng);
  const RegressionPredictor predictor =
      TrainSyntheticRegressor(spec, train, seed);
  auto rng = MakeStream(seed, kScpStream);
  std::size_t covered = 0;
  std::vector<CalibrationRecord> records(n);
  for (std::size_t d = 0; d < draws; ++d) {
    const Dataset sample = SampleComponent(spec, 2, n + 1, rng);
    const std::vector<double> pred = predictor.Predict(sample.x);
    for (std::size_t k = 0; k < n; ++k) {
      records[k].score = AbsResidualScore(pred[k], sample.y[k]);
    }
    const PredictionInterval interval{pred[n], ScpThreshold(records, alpha)};
    if (interval.Contains(sample.y[n])) ++covered;
  }
  ScpCoverageReport r;
  r.n = n;
  r.draws = draws;
  r.coverage = static_cast<double>(covered) / static_cast<double>(draws);
  r.standard_error =
      std::sqrt(r.coverage * (1.0 - r.coverage) / static_cast<double>(draws));
  r.lower = 1.0 - alpha;
  r.upper = 1.0 - alpha + 1.0 / static_cast<double>(n + 1);
  return r;
}

BoundCheckReport BoundCheck(const SyntheticSpec& spec,
                            const BoundCheckOptions& options) {
  if (!(options.delta > 0.0 && options.delta < 1.0 / 6.0)) {
    throw Error(ErrorCode::kOutOfRange, "delta must lie in (0, 1/6)");
  }
  spec.Validate();
  if (options.n < 1 || options.replications < 1 || options.test_pool < 1) {
    throw Error(ErrorCode::kInvalidArgument, "sizes must be >= 1");
  }
  const CalibrationSource source = options.exchangeable
                                       ? CalibrationSource::kP2
                                       : CalibrationSource::kMix;
  BoundCheckReport report;
  report.bounds = ExactRatioBounds(spec, source, options.n, options.delta);
  const RatioModel ratio = ExactRatioModel(spec, source);
  const auto n1 = static_cast<std::size_t>(std::llround(
      spec.P1Share(source) * static_cast<double>(options.n)));

  auto train_rng = MakeStream(options.seed, kBoundStream + 100);
  const Dataset train = SampleComponent(spec, 1, spec.train_size, train_rng);
  const RegressionPredictor predictor =
      TrainSyntheticRegressor(spec, train, options.seed);

  auto rng = MakeStream(options.seed, kBoundStream);
  std::size_t low = 0, high = 0;
  report.miscoverage.reserve(options.replications);
  for (std::size_t rep = 0; rep < options.replications; ++rep) {
    Dataset cal = SampleComponent(spec, 1, n1, rng);
    const Dataset cal2 = SampleComponent(spec, 2, options.n - n1, rng);
    cal.x.insert(cal.x.end(), cal2.x.begin(), cal2.x.end());
    cal.y.insert(cal.y.end(), cal2.y.begin(), cal2.y.end());
    cal.component.insert(cal.component.end(), cal2.component.begin(),
                         cal2.component.end());
    const std::vector<double> cal_pred = predictor.Predict(cal.x);
    const auto records = MakeRegressionRecords(cal, cal_pred, &ratio);
    const PreparedCalibration prepared(records);

    const Dataset pool = SampleComponent(spec, 2, options.test_pool, rng);
    const std::vector<double> pool_pred = predictor.Predict(pool.x);
    std::size_t missed = 0;
    for (std::size_t j = 0; j < pool.size(); ++j) {
      const PredictionInterval interval{
          pool_pred[j],
          prepared.Threshold(ratio.RatioAt(pool.x[j]), options.alpha)};
      if (!interval.Contains(pool.y[j])) ++missed;
    }
    const double miss =
        static_cast<double>(missed) / static_cast<double>(pool.size());
    report.miscoverage.push_back(miss);
    const double dev = miss - options.alpha;
    if (dev <= -report.bounds.lower_radius) ++low;
    if (dev >= report.bounds.upper_radius) ++high;
  }
  const double reps = static_cast<double>(options.replications);
  report.lower_violation_fraction = static_cast<double>(low) / reps;
  report.upper_violation_fraction = static_cast<double>(high) / reps;
  report.tolerance =
      options.delta +
      3.0 * std::sqrt(options.delta * (1.0 - options.delta) / reps);
  report.passed = report.lower_violation_fraction <= report.tolerance &&
                  report.upper_violation_fraction <= report.tolerance;
  return report;
}

FederatedScenario MakeFederatedScenario(const SyntheticSpec& spec,
                                        std::size_t num_agents,
                                        std::size_t records_per_agent,
                                        std::uint64_t seed) {
  spec.Validate();
  if (num_agents < 1 || records_per_agent < 1) {
    throw Error(ErrorCode::kInvalidArgument, "need agents with records");
  }
  auto rng = MakeStream(seed, kScenarioStream);
  const Dataset train = SampleComponent(spec, 1, spec.train_size, rng);
  const RegressionPredictor predictor =
      TrainSyntheticRegressor(spec, train, seed);

  std::vector<GaussianSpec> laws;
  for (std::size_t i = 0; i < num_agents; ++i) {
    const double s = num_agents == 1 ? 1.0
                                     : static_cast<double>(i) /
                                           static_cast<double>(num_agents - 1);
    laws.push_back(GaussianSpec::Scalar(
        spec.p1_mean + s * (spec.p2_mean - spec.p1_mean),
        spec.p1_variance + s * (spec.p2_variance - spec.p1_variance)));
  }
  GaussianMixture numerator;
  numerator.Add(1.0, laws.back());
  GaussianMixture denominator;
  for (const auto& law : laws) {
    denominator.Add(1.0 / static_cast<double>(num_agents), law);
  }
  const RatioModel ratio(std::move(numerator), std::move(denominator),
                         RatioModel::Variant::kExact);

  FederatedScenario scenario;
  scenario.target_agent = num_agents - 1;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < num_agents; ++i) {
    std::normal_distribution<double> xdist(laws[i].mean(0),
                                           std::sqrt(laws[i].covariance(0, 0)));
    std::normal_distribution<double> noise(0.0, 1.0);
    Dataset d;
    for (std::size_t k = 0; k < records_per_agent; ++k) {
      const double x = xdist(rng);
      d.x.push_back(x);
      d.y.push_back(SyntheticTarget(x) + spec.noise_std * noise(rng));
      d.component.push_back(static_cast<int>(i));
    }
    const std::vector<double> pred = predictor.Predict(d.x);
    auto records = MakeRegressionRecords(d, pred, &ratio);
    for (const auto& r : records) {
      lo = std::min(lo, r.score.value());
      hi = std::max(hi, r.score.value());
      scenario.pooled.push_back(r);
    }
    scenario.agents.push_back(AgentState::Make(i, std::move(records)));
  }
  scenario.score_range = hi - lo;
  return scenario;
}

RatioAgreementReport RatioAgreementCheck(const SyntheticSpec& spec,
                                         CalibrationSource source,
                                         std::uint64_t seed, double mass,
                                         std::size_t grid_points) {
  if (!(mass > 0.0 && mass < 1.0) || grid_points < 2) {
    throw Error(ErrorCode::kInvalidArgument, "bad agreement grid");
  }
  const RatioModel exact = ExactRatioModel(spec, source);
  const RatioModel estimated = EstimateGmmRatioModel(spec, source, seed);
  const double share = spec.P1Share(source);
  auto cdf = [&](double x) {
    return share * NormalCdf(x, spec.p1_mean, spec.p1_variance) +
           (1.0 - share) * NormalCdf(x, spec.p2_mean, spec.p2_variance);
  };
  auto inverse = [&](double p) {
    double lo = std::min(spec.p1_mean, spec.p2_mean) - 50.0;
    double hi = std::max(spec.p1_mean, spec.p2_mean) + 50.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  RatioAgreementReport report;
  report.lower = inverse(0.5 * (1.0 - mass));
  report.upper = inverse(0.5 * (1.0 + mass));
  report.grid_points = grid_points;
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double x = report.lower + (report.upper - report.lower) *
                                        static_cast<double>(i) /
                                        static_cast<double>(grid_points - 1);
    const double truth = exact.RatioAt(x);
    const double rel = std::abs(estimated.RatioAt(x) - truth) / truth;
    report.max_relative_error = std::max(report.max_relative_error, rel);
  }
  return report;
}

}  // namespace hetcp
