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

// Command-line front end for the synthetic experiments, the federated
// quantile simulator and file-driven threshold computation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hetcp/conformal.h"
#include "hetcp/error.h"
#include "hetcp/fedsim.h"
#include "hetcp/harness.h"
#include "hetcp/report_io.h"

namespace {

using hetcp::FormatNumber;

std::vector<std::string> SplitList(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) out.push_back(part);
    }
  }
  return out;
}

struct Table1Args {
  double alpha = 0.1;
  std::size_t reps = 500;
  std::vector<std::string> sources{"mix"};
  std::vector<std::string> methods{"classic", "weighted-exact"};
  std::uint64_t seed = 20240601;
  std::size_t workers = 1;
  std::string out;
  std::string csv;
};

int RunTable1(const Table1Args& args) {
  std::vector<hetcp::Arm> arms;
  for (const auto& s : SplitList(args.sources)) {
    for (const auto& m : SplitList(args.methods)) {
      arms.push_back({hetcp::ParseSource(s), hetcp::ParseMethod(m)});
    }
  }
  const hetcp::SyntheticSpec spec;
  const auto report = hetcp::RunExperiment(spec, arms, args.alpha, args.reps,
                                           args.seed, args.workers);
  std::printf("%-24s %10s %10s %12s\n", "method", "coverage", "std",
              "mean_width");
  for (const auto& s : report.summaries) {
    std::printf("%-24s %10s %10s %12s\n", s.arm.Label().c_str(),
                FormatNumber(s.mean_coverage).c_str(),
                FormatNumber(s.std_coverage).c_str(),
                FormatNumber(s.mean_width).c_str());
  }
  if (!args.out.empty()) {
    std::ofstream out(args.out);
    if (!out) throw hetcp::Error(hetcp::ErrorCode::kIoError, args.out);
    out << hetcp::ReportToJson(report).dump(2) << '\n';
  }
  if (!args.csv.empty()) {
    std::ofstream out(args.csv);
    if (!out) throw hetcp::Error(hetcp::ErrorCode::kIoError, args.csv);
    hetcp::WriteReplicationCsv(out, report.rows);
  }
  return 0;
}

int RunBetaCheck(const hetcp::BetaLawOptions& opts) {
  const auto r = hetcp::BetaLawCheck(hetcp::SyntheticSpec{}, opts);
  std::printf("reference Beta(%s, %s)\n", FormatNumber(r.beta_a).c_str(),
              FormatNumber(r.beta_b).c_str());
  std::printf("mean      empirical %s  reference %s\n",
              FormatNumber(r.empirical_mean).c_str(),
              FormatNumber(r.reference_mean).c_str());
  std::printf("std       empirical %s  reference %s\n",
              FormatNumber(r.empirical_std).c_str(),
              FormatNumber(r.reference_std).c_str());
  std::printf("ks        %s\n", FormatNumber(r.ks_distance).c_str());
  return 0;
}

int RunBoundCheck(const hetcp::BoundCheckOptions& opts) {
  const auto r = hetcp::BoundCheck(hetcp::SyntheticSpec{}, opts);
  std::printf("tau %s  bias_bound %s\n", FormatNumber(r.bounds.tau).c_str(),
              FormatNumber(r.bounds.bias_bound).c_str());
  std::printf("sandwich (-%s, %s)\n",
              FormatNumber(r.bounds.lower_radius).c_str(),
              FormatNumber(r.bounds.upper_radius).c_str());
  std::printf("violations lower %s  upper %s  tolerance %s\n",
              FormatNumber(r.lower_violation_fraction).c_str(),
              FormatNumber(r.upper_violation_fraction).c_str(),
              FormatNumber(r.tolerance).c_str());
  std::printf("%s\n", r.passed ? "PASS" : "FAIL");
  return r.passed ? 0 : 1;
}

struct FedArgs {
  std::size_t agents = 40;
  std::size_t records = 50;
  hetcp::FederationConfig config;
  double eta = -1.0;
  double participation = 1.0;
  std::string out;
};

int RunFedQuantile(FedArgs args) {
  if (args.eta > 0.0) args.config.learning_rate = args.eta;
  args.config.participation = hetcp::Participation::Fraction(args.participation);
  const auto scenario = hetcp::MakeFederatedScenario(
      hetcp::SyntheticSpec{}, args.agents, args.records, args.config.seed);
  const auto result = hetcp::RunFederation(scenario.agents, args.config);
  const auto reference =
      hetcp::ApproxGlobalThreshold(scenario.pooled, args.config.alpha);
  std::printf("q_bar %s\n", FormatNumber(result.quantile).c_str());
  std::printf("centralized %s\n", reference.ToString().c_str());
  std::printf("score_range %s\n", FormatNumber(scenario.score_range).c_str());
  if (!args.out.empty()) {
    std::ofstream out(args.out);
    if (!out) throw hetcp::Error(hetcp::ErrorCode::kIoError, args.out);
    hetcp::WriteTraceJsonl(out, result.trace);
  }
  return 0;
}

struct CalibrateArgs {
  std::string scores;
  std::string ratios;
  double alpha = 0.1;
  double test_ratio = 1.0;
};

int RunCalibrate(const CalibrateArgs& args) {
  auto rows = hetcp::ReadScoresCsvFile(args.scores);
  if (!args.ratios.empty()) {
    hetcp::ApplyRatios(rows, hetcp::ReadRatiosCsvFile(args.ratios));
  }
  const auto records = hetcp::ToCalibrationRecords(rows);
  const auto show = [](const hetcp::ExtendedReal& t) {
    return t.is_infinite() ? std::string("inf") : FormatNumber(t.value());
  };
  std::printf("scp %s\n", show(hetcp::ScpThreshold(records, args.alpha)).c_str());
  std::printf("weighted %s\n",
              show(hetcp::WeightedThreshold(records, args.test_ratio,
                                            args.alpha)).c_str());
  std::printf("approx_global %s\n",
              show(hetcp::ApproxGlobalThreshold(records, args.alpha)).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal prediction under heterogeneous calibration data"};
  app.require_subcommand(1);

  Table1Args t1;
  auto* table1 = app.add_subcommand(
      "synth-table1", "Monte Carlo coverage on the synthetic shift setup");
  table1->add_option("--alpha", t1.alpha);
  table1->add_option("--reps", t1.reps);
  table1->add_option("--cal-source", t1.sources, "mix, p1, p2 (comma list)");
  table1->add_option("--methods", t1.methods,
                     "classic, weighted-exact, weighted-gmm, tibshirani-iid, "
                     "approx-global, federated");
  table1->add_option("--seed", t1.seed);
  table1->add_option("--workers", t1.workers);
  table1->add_option("--out", t1.out, "JSON report path");
  table1->add_option("--csv", t1.csv, "per-replication CSV path");

  hetcp::BetaLawOptions beta;
  auto* beta_cmd = app.add_subcommand("beta-check",
                                      "Distribution of conditional miscoverage");
  beta_cmd->add_option("--n", beta.n);
  beta_cmd->add_option("--alpha", beta.alpha);
  beta_cmd->add_option("--reps", beta.replications);
  beta_cmd->add_option("--seed", beta.seed);
  beta_cmd->add_option("--pool", beta.test_pool);
  beta_cmd->add_flag("--analytic", beta.analytic,
                     "closed-form miscoverage with an oracle predictor");

  hetcp::BoundCheckOptions bound;
  auto* bound_cmd = app.add_subcommand(
      "bound-check", "Empirical check of the miscoverage sandwich");
  bound_cmd->add_option("--delta", bound.delta);
  bound_cmd->add_option("--n", bound.n);
  bound_cmd->add_option("--alpha", bound.alpha);
  bound_cmd->add_option("--reps", bound.replications);
  bound_cmd->add_option("--seed", bound.seed);
  bound_cmd->add_flag("--exchangeable", bound.exchangeable);

  FedArgs fed;
  auto* fed_cmd = app.add_subcommand("fed-quantile",
                                     "Federated smoothed-pinball quantile");
  fed_cmd->add_option("--agents", fed.agents);
  fed_cmd->add_option("--records", fed.records, "records per agent");
  fed_cmd->add_option("--alpha", fed.config.alpha);
  fed_cmd->add_option("--rounds", fed.config.rounds);
  fed_cmd->add_option("--gamma", fed.config.moreau_gamma);
  fed_cmd->add_option("--eta", fed.eta, "defaults to gamma / 2");
  fed_cmd->add_option("--dp-sigma", fed.config.dp_sigma);
  fed_cmd->add_option("--local-steps", fed.config.local_steps);
  fed_cmd->add_option("--participation", fed.participation);
  fed_cmd->add_option("--seed", fed.config.seed);
  fed_cmd->add_option("--out", fed.out, "JSON-lines trace path");

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate",
                                     "Thresholds from a scores file");
  cal_cmd->add_option("--scores", cal.scores)->required();
  cal_cmd->add_option("--ratios", cal.ratios);
  cal_cmd->add_option("--alpha", cal.alpha);
  cal_cmd->add_option("--test-ratio", cal.test_ratio);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*table1) return RunTable1(t1);
    if (*beta_cmd) return RunBetaCheck(beta);
    if (*bound_cmd) return RunBoundCheck(bound);
    if (*fed_cmd) return RunFedQuantile(fed);
    if (*cal_cmd) return RunCalibrate(cal);
  } catch (const hetcp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
