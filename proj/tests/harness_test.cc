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
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "hetcp/error.h"
#include "hetcp/report_io.h"
#include "hetcp/synthetic.h"

namespace hetcp {
namespace {

// Small, fast synthetic setup for structural tests.
SyntheticSpec FastSpec() {
  SyntheticSpec s;
  s.epochs = 200;
  s.train_size = 60;
  return s;
}

TEST(SyntheticTest, NoiselessPointsLieOnCurve) {
  SyntheticSpec spec;
  spec.noise_std = 0.0;
  const auto split = SampleSynthetic(spec, 5, CalibrationSource::kMix);
  for (const Dataset* d : {&split.train, &split.calibration, &split.test}) {
    for (std::size_t i = 0; i < d->size(); ++i) {
      EXPECT_EQ(d->y[i], (1.0 + 0.1 * std::abs(d->x[i])) * std::sin(d->x[i]));
    }
  }
}

TEST(SyntheticTest, MixLayout) {
  const SyntheticSpec spec;
  const auto split = SampleSynthetic(spec, 6, CalibrationSource::kMix);
  ASSERT_EQ(split.calibration.size(), 100u);
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(split.calibration.component[i], i < 80 ? 1 : 2);
  }
  EXPECT_EQ(split.train.size(), 150u);
  EXPECT_EQ(split.test.size(), 20u);
  for (int c : split.test.component) EXPECT_EQ(c, 2);
  for (int c : split.train.component) EXPECT_EQ(c, 1);
}

TEST(SyntheticTest, Deterministic) {
  const SyntheticSpec spec;
  const auto a = SampleSynthetic(spec, 7, CalibrationSource::kP1);
  const auto b = SampleSynthetic(spec, 7, CalibrationSource::kP1);
  EXPECT_EQ(a.train.x, b.train.x);
  EXPECT_EQ(a.calibration.y, b.calibration.y);
  EXPECT_EQ(a.test.x, b.test.x);
  const auto c = SampleSynthetic(spec, 8, CalibrationSource::kP1);
  EXPECT_NE(a.train.x, c.train.x);
  // Training and test sets do not depend on the calibration source.
  const auto d = SampleSynthetic(spec, 7, CalibrationSource::kP2);
  EXPECT_EQ(a.train.x, d.train.x);
  EXPECT_EQ(a.test.y, d.test.y);
}

TEST(SyntheticTest, SpecValidation) {
  SyntheticSpec s;
  s.p1_variance = 0.0;
  EXPECT_THROW(s.Validate(), Error);
  s = SyntheticSpec{};
  s.test_size = 0;
  EXPECT_THROW(s.Validate(), Error);
  EXPECT_THROW(ParseSource("p3"), Error);
  EXPECT_EQ(ParseSource("MIX"), CalibrationSource::kMix);
}

TEST(SyntheticTest, ReplicationSeedsDistinct) {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 1000; ++i) seeds.push_back(ReplicationSeed(42, i));
  std::sort(seeds.begin(), seeds.end());
  EXPECT_EQ(std::unique(seeds.begin(), seeds.end()), seeds.end());
  EXPECT_EQ(ReplicationSeed(42, 0), 42u);
}

TEST(ExactRatioTest, MatchesHandAlgebra) {
  const SyntheticSpec spec;
  const auto r = ExactRatioModel(spec, CalibrationSource::kP1);
  // Equal variances 4: lambda = exp(((x-3)^2 - (x-5)^2) / 8) = exp((x - 4) / 2).
  for (double x = -4; x <= 12; x += 0.5) {
    EXPECT_NEAR(r.RatioAt(x), std::exp((x - 4.0) / 2.0), 1e-9 * r.RatioAt(x));
  }
  const auto self = ExactRatioModel(spec, CalibrationSource::kP2);
  for (double x = -10; x <= 10; x += 0.1) EXPECT_NEAR(self.RatioAt(x), 1.0, 1e-12);
}

TEST(MethodTest, ParseAndLabel) {
  EXPECT_EQ(ParseMethod("weighted"), Method::kWeightedExact);
  EXPECT_EQ(ParseMethod("tibshirani-iid"), Method::kTibshiraniIid);
  EXPECT_THROW(ParseMethod("bogus"), Error);
  EXPECT_EQ((Arm{CalibrationSource::kP1, Method::kWeightedGmm}).Label(),
            "weighted-gmm@p1");
}

TEST(ReplicationTest, CoveragePlusMiscoverageIsOne) {
  const auto spec = FastSpec();
  std::vector<Arm> arms;
  for (auto m : {Method::kClassic, Method::kWeightedExact, Method::kWeightedGmm,
                 Method::kTibshiraniIid, Method::kApproxGlobal,
                 Method::kFederated}) {
    arms.push_back({CalibrationSource::kMix, m});
  }
  HarnessOptions opts;
  opts.federation.rounds = 50;
  const auto rows = EvaluateReplication(spec, arms, 0.1, 9, 0, opts);
  ASSERT_EQ(rows.size(), arms.size());
  for (const auto& r : rows) {
    EXPECT_DOUBLE_EQ(r.coverage + r.miscoverage, 1.0) << r.arm.Label();
    EXPECT_GE(r.coverage, 0.0);
    EXPECT_LE(r.coverage, 1.0);
    EXPECT_EQ(r.intervals.size(), spec.test_size);
    for (const auto& iv : r.intervals) EXPECT_GE(iv.half_width, ExtendedReal(0));
  }
}

TEST(ReplicationTest, UnitRatiosReproduceClassic) {
  const auto spec = FastSpec();
  HarnessOptions opts;
  opts.constant_ratio = 1.0;
  for (auto source : {CalibrationSource::kMix, CalibrationSource::kP1}) {
    const auto classic =
        RunReplication(spec, {source, Method::kClassic}, 0.1, 10, opts);
    const auto weighted =
        RunReplication(spec, {source, Method::kWeightedExact}, 0.1, 10, opts);
    EXPECT_EQ(classic.coverage, weighted.coverage);
    ASSERT_EQ(classic.intervals.size(), weighted.intervals.size());
    for (std::size_t j = 0; j < classic.intervals.size(); ++j) {
      EXPECT_EQ(classic.intervals[j].center, weighted.intervals[j].center);
      EXPECT_EQ(classic.intervals[j].half_width,
                weighted.intervals[j].half_width);
    }
  }
}

TEST(ReplicationTest, TibshiraniMatchesWeightedPerTestPoint) {
  const auto spec = FastSpec();
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const std::vector<Arm> arms{{CalibrationSource::kP1, Method::kWeightedExact},
                                {CalibrationSource::kP1, Method::kTibshiraniIid}};
    const auto rows = EvaluateReplication(spec, arms, 0.1, seed, 0);
    ASSERT_EQ(rows[0].intervals.size(), rows[1].intervals.size());
    for (std::size_t j = 0; j < rows[0].intervals.size(); ++j) {
      EXPECT_EQ(rows[0].intervals[j].half_width, rows[1].intervals[j].half_width);
    }
  }
}

TEST(ExperimentTest, ParallelMatchesSerial) {
  const auto spec = FastSpec();
  const std::vector<Arm> arms{{CalibrationSource::kMix, Method::kClassic},
                              {CalibrationSource::kMix, Method::kWeightedExact}};
  const auto serial = RunExperiment(spec, arms, 0.1, 12, 99, 1);
  const auto parallel = RunExperiment(spec, arms, 0.1, 12, 99, 4);
  ASSERT_EQ(serial.rows.size(), parallel.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    EXPECT_EQ(serial.rows[i].arm, parallel.rows[i].arm);
    EXPECT_EQ(serial.rows[i].replication, parallel.rows[i].replication);
    EXPECT_EQ(serial.rows[i].coverage, parallel.rows[i].coverage);
    EXPECT_EQ(serial.rows[i].mean_width, parallel.rows[i].mean_width);
  }
  EXPECT_EQ(ReportToJson(serial).dump(), ReportToJson(parallel).dump());
}

TEST(ExperimentTest, SummaryIgnoresRowOrderAndCountsRows) {
  const auto spec = FastSpec();
  const std::vector<Arm> arms{{CalibrationSource::kP2, Method::kClassic},
                              {CalibrationSource::kP2, Method::kApproxGlobal}};
  const auto report = RunExperiment(spec, arms, 0.1, 10, 5, 1);
  EXPECT_EQ(report.rows.size(), 20u);
  auto shuffled = report.rows;
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto again = Summarize(arms, shuffled);
  ASSERT_EQ(again.size(), report.summaries.size());
  for (std::size_t a = 0; a < again.size(); ++a) {
    EXPECT_EQ(again[a].replications, 10u);
    EXPECT_EQ(again[a].mean_coverage, report.summaries[a].mean_coverage);
    EXPECT_EQ(again[a].std_coverage, report.summaries[a].std_coverage);
    EXPECT_GE(again[a].std_coverage, 0.0);
  }
  ASSERT_EQ(report.bounds.size(), 1u);
  EXPECT_EQ(report.bounds[0].source, CalibrationSource::kP2);
  EXPECT_THROW(RunExperiment(spec, arms, 0.1, 0, 5, 1), Error);
}

TEST(BoundsHarnessTest, ExchangeableCollapse) {
  const SyntheticSpec spec;
  const auto b = ExactRatioBounds(spec, CalibrationSource::kP2, 100, 0.05);
  EXPECT_NEAR(b.tau, std::sqrt(8.0 * std::log(1.0 / 0.3) / 100.0), 1e-6);
  for (double s : b.sigmas) EXPECT_NEAR(s, 0.0, 1e-6);
  EXPECT_NEAR(b.expected_test_ratio, 1.0, 1e-6);
}

TEST(BoundsHarnessTest, MixMomentsByQuadrature) {
  const SyntheticSpec spec;
  const auto r = ExactRatioModel(spec, CalibrationSource::kMix);
  // E_cal[lambda] = 0.8 E_P1[lambda] + 0.2 E_P2[lambda] = 1.
  const double e1 = ExpectedRatioPower(spec, r, 1, 1);
  const double e2 = ExpectedRatioPower(spec, r, 2, 1);
  EXPECT_NEAR(0.8 * e1 + 0.2 * e2, 1.0, 1e-9);
  // P1-only source: lambda = exp((x - 4) / 2), so E_P1[lambda] = 1 and
  // E_P2[lambda] = exp(1/2 + 4/8) = e by the normal MGF.
  const auto r1 = ExactRatioModel(spec, CalibrationSource::kP1);
  EXPECT_NEAR(ExpectedRatioPower(spec, r1, 1, 1), 1.0, 1e-9);
  EXPECT_NEAR(ExpectedRatioPower(spec, r1, 2, 1), std::exp(1.0), 1e-8);
}

TEST(BoundCheckTest, RejectsLargeDelta) {
  BoundCheckOptions o;
  o.delta = 0.2;
  try {
    BoundCheck(SyntheticSpec{}, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfRange);
  }
}

TEST(BoundCheckTest, ExchangeableHasNoViolations) {
  auto spec = FastSpec();
  BoundCheckOptions o;
  o.exchangeable = true;
  o.replications = 100;
  o.test_pool = 500;
  const auto r = BoundCheck(spec, o);
  EXPECT_NEAR(r.bounds.tau, std::sqrt(8.0 * std::log(1.0 / 0.3) / 100.0), 1e-6);
  EXPECT_EQ(r.lower_violation_fraction, 0.0);
  EXPECT_EQ(r.upper_violation_fraction, 0.0);
  EXPECT_TRUE(r.passed);
}

TEST(BetaLawTest, ReferenceMoments) {
  auto spec = FastSpec();
  BetaLawOptions o;
  o.replications = 50;
  o.test_pool = 200;
  const auto r = BetaLawCheck(spec, o);
  EXPECT_EQ(r.beta_a, 10.0);
  EXPECT_EQ(r.beta_b, 90.0);
  EXPECT_DOUBLE_EQ(r.reference_mean, 0.1);
  EXPECT_NEAR(r.reference_std, std::sqrt(10.0 * 90.0 / (1e4 * 101.0)), 1e-12);
  EXPECT_NEAR(r.reference_std, 0.02985, 1e-5);
  o.n = 9;
  o.alpha = 0.5;
  const auto sym = BetaLawCheck(spec, o);
  EXPECT_EQ(sym.beta_a, 5.0);
  EXPECT_EQ(sym.beta_b, 5.0);
  EXPECT_DOUBLE_EQ(sym.reference_mean, 0.5);
}

TEST(BetaLawTest, KolmogorovDistance) {
  EXPECT_NEAR(KolmogorovDistanceToBeta({0.5}, 1.0, 1.0), 0.5, 1e-12);
  // Uniform quantile grid against Beta(1, 1) = U(0, 1).
  std::vector<double> grid;
  for (int i = 1; i <= 1000; ++i) grid.push_back((i - 0.5) / 1000.0);
  EXPECT_NEAR(KolmogorovDistanceToBeta(grid, 1.0, 1.0), 0.0005, 1e-9);
}

TEST(BetaLawTest, AnalyticModeMatchesBetaMean) {
  BetaLawOptions o;
  o.analytic = true;
  o.replications = 2000;
  const auto r = BetaLawCheck(SyntheticSpec{}, o);
  EXPECT_NEAR(r.empirical_mean, 0.1, 3.0 * r.reference_std / std::sqrt(2000.0));
  EXPECT_NEAR(r.empirical_std, r.reference_std, 0.15 * r.reference_std);
  EXPECT_LE(r.ks_distance, 0.05);
}

TEST(ScenarioTest, AgentsAndTarget) {
  const auto s = MakeFederatedScenario(FastSpec(), 5, 20, 3);
  ASSERT_EQ(s.agents.size(), 5u);
  EXPECT_EQ(s.target_agent, 4u);
  EXPECT_EQ(s.pooled.size(), 100u);
  EXPECT_GT(s.score_range, 0.0);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(s.agents[i].agent_id, i);
}

TEST(RatioAgreementTest, CentralMassInterval) {
  const auto r = RatioAgreementCheck(SyntheticSpec{}, CalibrationSource::kMix, 4);
  EXPECT_LT(r.lower, 3.0);
  EXPECT_GT(r.upper, 5.0);
  EXPECT_GE(r.max_relative_error, 0.0);
}

TEST(ReportIoTest, FormatNumber) {
  EXPECT_EQ(FormatNumber(0.123456789), "0.123457");
  EXPECT_EQ(FormatNumber(1234567.0), "1.23457e+06");
  EXPECT_EQ(FormatNumber(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(FormatNumber(2.0), "2");
  EXPECT_TRUE(JsonNumber(std::numeric_limits<double>::infinity()).is_null());
  EXPECT_EQ(JsonNumber(0.123456789).get<double>(), 0.123457);
}

TEST(ReportIoTest, ScoresCsv) {
  std::istringstream in("id,score,ratio\na,1.5,2\nb,0.25,0.5\n\n");
  const auto rows = ReadScoresCsv(in);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].id, "b");
  EXPECT_DOUBLE_EQ(rows[0].score, 1.5);
  EXPECT_DOUBLE_EQ(rows[1].ratio, 0.5);
  std::istringstream no_ratio("score,id\n3,x\n");
  const auto r2 = ReadScoresCsv(no_ratio);
  EXPECT_DOUBLE_EQ(r2[0].ratio, 1.0);
  EXPECT_DOUBLE_EQ(r2[0].score, 3.0);
}

TEST(ReportIoTest, ScoresCsvErrors) {
  std::istringstream headerless("a,1,2\n");
  EXPECT_THROW(ReadScoresCsv(headerless), Error);
  std::istringstream ragged("id,score\na,1,2\n");
  EXPECT_THROW(ReadScoresCsv(ragged), Error);
  std::istringstream text("id,score\na,one\n");
  EXPECT_THROW(ReadScoresCsv(text), Error);
  EXPECT_THROW(ReadScoresCsvFile("/nonexistent/scores.csv"), Error);
}

TEST(ReportIoTest, RatiosOverrideById) {
  std::istringstream scores("id,score\na,1\nb,2\n");
  auto rows = ReadScoresCsv(scores);
  std::istringstream ratios("id,ratio\nb,3\na,0.5\n");
  ApplyRatios(rows, ReadRatiosCsv(ratios));
  EXPECT_DOUBLE_EQ(rows[0].ratio, 0.5);
  EXPECT_DOUBLE_EQ(rows[1].ratio, 3.0);
  std::istringstream partial("id,ratio\na,1\n");
  EXPECT_THROW(ApplyRatios(rows, ReadRatiosCsv(partial)), Error);
  const auto records = ToCalibrationRecords(rows);
  EXPECT_DOUBLE_EQ(records[1].score.value(), 2.0);
}

TEST(ReportIoTest, ReplicationCsvSchema) {
  ReplicationResult r;
  r.arm = {CalibrationSource::kMix, Method::kClassic};
  r.replication = 3;
  r.coverage = 0.85;
  r.miscoverage = 0.15;
  r.mean_width = std::numeric_limits<double>::infinity();
  std::ostringstream out;
  WriteReplicationCsv(out, std::vector<ReplicationResult>{r});
  EXPECT_EQ(out.str(),
            "replication_id,method,coverage,mean_width,miscoverage\n"
            "3,classic@mix,0.85,inf,0.15\n");
}

}  // namespace
}  // namespace hetcp
