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

#include "hetcp/fedsim.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "hetcp/error.h"
#include "json.hpp"
#include "oracles.h"

namespace hetcp {
namespace {

std::vector<CalibrationRecord> Records(const std::vector<double>& scores,
                                       const std::vector<double>& ratios) {
  std::vector<CalibrationRecord> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    CalibrationRecord r;
    r.score = Score(scores[i]);
    r.ratio = ratios[i];
    out.push_back(r);
  }
  return out;
}

// n agents with m records each; scores uniform in [0, 5], ratios in [0.2, 2].
std::vector<AgentState> RandomAgents(std::size_t n, std::size_t m,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> s(0.0, 5.0), l(0.2, 2.0);
  std::vector<AgentState> agents;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sc, ra;
    for (std::size_t k = 0; k < m; ++k) {
      sc.push_back(s(rng));
      ra.push_back(l(rng));
    }
    agents.push_back(AgentState::Make(i, Records(sc, ra)));
  }
  return agents;
}

TEST(MoreauGradTest, Examples) {
  EXPECT_DOUBLE_EQ(MoreauPinballGrad(2.0, 2.0, 0.1, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(MoreauPinballGrad(-10.0, 2.0, 0.1, 0.5), -0.9);
  EXPECT_DOUBLE_EQ(MoreauPinballGrad(10.0, 2.0, 0.1, 0.5), 0.1);
  EXPECT_NEAR(MoreauPinballGrad(0.05, 0.0, 0.1, 1.0), 0.05, 1e-15);
  EXPECT_THROW(MoreauPinballGrad(0, 0, 0.1, 0.0), Error);
}

TEST(MoreauGradTest, BoundariesUseMiddleBranch) {
  const double v = 1.0, a = 0.25, g = 0.4;
  const double lo = v - g * (1 - a), hi = v + g * a;
  EXPECT_DOUBLE_EQ(MoreauPinballGrad(lo, v, a, g), (lo - v) / g);
  EXPECT_DOUBLE_EQ(MoreauPinballGrad(hi, v, a, g), (hi - v) / g);
  EXPECT_NEAR(MoreauPinballGrad(lo, v, a, g), -(1 - a), 1e-12);
  EXPECT_NEAR(MoreauPinballGrad(hi, v, a, g), a, 1e-12);
}

TEST(MoreauGradTest, FiniteDifferencesOfPrimitive) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> qd(-5, 5), vd(-3, 3), ad(0.01, 0.99),
      gd(0.01, 2.0);
  int checked = 0;
  while (checked < 1000) {
    const double q = qd(rng), v = vd(rng), a = ad(rng), g = gd(rng);
    if (std::abs(q - (v - g * (1 - a))) < 1e-4 ||
        std::abs(q - (v + g * a)) < 1e-4) {
      continue;
    }
    const double h = 1e-6;
    const double fd = (oracle::MoreauPinballLoss(q + h, v, a, g) -
                       oracle::MoreauPinballLoss(q - h, v, a, g)) /
                      (2 * h);
    EXPECT_NEAR(MoreauPinballGrad(q, v, a, g), fd, 1e-6);
    ++checked;
  }
}

TEST(MoreauGradTest, BoundedOnGrid) {
  for (double a = 0.05; a < 1.0; a += 0.05) {
    for (double g : {1e-3, 0.01, 0.1, 1.0, 10.0}) {
      for (double q = -3; q <= 3; q += 0.01) {
        const double grad = MoreauPinballGrad(q, 0.0, a, g);
        EXPECT_GE(grad, -(1 - a) - 1e-15);
        EXPECT_LE(grad, a + 1e-15);
      }
    }
  }
}

TEST(LocalLossGradTest, Examples) {
  // At q = 2 the record at 5 sits on the left branch (-0.9) and the record
  // at 0 on the right branch (0.1); ratios 1 and 3.
  const auto agent = AgentState::Make(0, Records({5.0, 0.0}, {1, 3}));
  EXPECT_NEAR(LocalLossGrad(agent, 2.0, 0.1, 0.01), -0.15, 1e-15);

  const auto equal = AgentState::Make(1, Records({1, 2, 3}, {2, 2, 2}));
  double mean = 0.0;
  for (double v : {1.0, 2.0, 3.0}) mean += MoreauPinballGrad(2.2, v, 0.1, 0.5);
  EXPECT_NEAR(LocalLossGrad(equal, 2.2, 0.1, 0.5), mean / 3.0, 1e-15);
  EXPECT_NEAR(LocalLossGrad(equal, -5.0, 0.1, 0.5), -0.9, 1e-15);
}

TEST(LocalLossGradTest, ZeroMass) {
  const auto agent = AgentState::Make(0, Records({1, 2}, {0, 0}));
  try {
    LocalLossGrad(agent, 0.0, 0.1, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroMass);
  }
}

TEST(AgentStateTest, LambdaIsRatioSum) {
  const auto a = AgentState::Make(3, Records({1, 2, 3}, {0.5, 1.25, 2.0}));
  EXPECT_NEAR(a.lambda_total, 3.75, 1e-12);
  EXPECT_THROW(AgentState::Make(0, Records({1}, {-1})), Error);
}

TEST(ConfigTest, Validation) {
  FederationConfig c;
  EXPECT_NO_THROW(c.Validate());
  EXPECT_DOUBLE_EQ(c.EffectiveLearningRate(), c.moreau_gamma / 2.0);
  auto bad = c;
  bad.rounds = 1;
  bad.local_steps = 0;
  EXPECT_THROW(bad.Validate(), Error);
  bad = c;
  bad.moreau_gamma = 0.0;
  EXPECT_THROW(bad.Validate(), Error);
  bad = c;
  bad.rounds = 0;
  EXPECT_THROW(bad.Validate(), Error);
  bad = c;
  bad.participation = Participation::Fraction(0.0);
  EXPECT_THROW(bad.Validate(), Error);
  bad = c;
  bad.dp_sigma = -1.0;
  EXPECT_THROW(bad.Validate(), Error);
  const auto agents = RandomAgents(2, 3, 1);
  FederationConfig no_steps;
  no_steps.rounds = 1;
  no_steps.local_steps = 0;
  EXPECT_THROW(RunFederation(agents, no_steps), Error);
}

TEST(ParticipationTest, SubsetSize) {
  EXPECT_EQ(Participation::Fraction(0.5).SubsetSize(10), 5u);
  EXPECT_EQ(Participation::Fraction(0.01).SubsetSize(10), 1u);
  EXPECT_EQ(Participation::Fraction(1.0).SubsetSize(7), 7u);
  EXPECT_EQ(Participation::FixedCount(3).SubsetSize(10), 3u);
  EXPECT_EQ(Participation::FixedCount(30).SubsetSize(10), 10u);
}

TEST(RunRoundTest, SingleAgentIsGradientDescent) {
  const auto agents = RandomAgents(1, 20, 2);
  FederationConfig c;
  c.local_steps = 1;
  c.moreau_gamma = 0.3;
  MessageBus bus;
  const ServerState s{4, 1.3, 0.7};
  const auto rec = RunRound(s, agents, c, bus);
  const double eta = c.EffectiveLearningRate();
  EXPECT_DOUBLE_EQ(rec.state.q,
                   1.3 - eta * LocalLossGrad(agents[0], 1.3, c.alpha, 0.3));
  EXPECT_EQ(rec.state.round, 5u);
}

TEST(RunRoundTest, IdenticalAgentsMatchSingleAgent) {
  const auto one = RandomAgents(1, 25, 3);
  std::vector<AgentState> many;
  for (std::size_t i = 0; i < 4; ++i) {
    many.push_back(AgentState::Make(i, one[0].records));
  }
  FederationConfig c;
  c.local_steps = 7;
  c.moreau_gamma = 0.2;
  MessageBus b1, b2;
  const ServerState s{3, 0.4, 0.2};
  const auto r1 = RunRound(s, one, c, b1);
  const auto r4 = RunRound(s, many, c, b2);
  EXPECT_NEAR(r1.state.q, r4.state.q, 1e-12);
  EXPECT_NEAR(r1.state.q_bar, r4.state.q_bar, 1e-12);
}

TEST(RunRoundTest, MessageCountIsTwicePerSampledAgent) {
  const auto agents = RandomAgents(10, 5, 4);
  FederationConfig c;
  c.participation = Participation::FixedCount(4);
  c.rounds = 25;
  const auto result = RunFederation(agents, c);
  for (const auto& rec : result.trace) {
    EXPECT_EQ(rec.sampled_agents.size(), 4u);
    EXPECT_EQ(rec.messages, 2 * rec.sampled_agents.size());
    for (std::size_t i = 1; i < rec.sampled_agents.size(); ++i) {
      EXPECT_LT(rec.sampled_agents[i - 1], rec.sampled_agents[i]);
    }
  }
  // n Lambda uploads, then 2 |S| per round.
  EXPECT_EQ(result.messages.size(), 10u + 25u * 8u);
  EXPECT_EQ(result.messages.front().kind, MessageBus::Kind::kLambdaTotal);
}

TEST(RunRoundTest, AggregationWeightsFormProbabilityVector) {
  const auto agents = RandomAgents(6, 10, 5);
  double total = 0.0;
  for (const auto& a : agents) total += a.lambda_total;
  double s = 0.0;
  for (const auto& a : agents) s += a.lambda_total / total;
  EXPECT_NEAR(s, 1.0, 1e-9);
}

TEST(RunRoundTest, ZeroMassAgentContributesNothing) {
  auto agents = RandomAgents(2, 10, 6);
  agents.push_back(AgentState::Make(2, Records({1, 2}, {0, 0})));
  FederationConfig c;
  c.rounds = 50;
  EXPECT_NO_THROW(RunFederation(agents, c));
}

TEST(RunRoundTest, DivergenceIsReported) {
  const auto agents = RandomAgents(3, 5, 7);
  FederationConfig c;
  c.dp_sigma = 1e15;
  c.learning_rate = 1.0;
  c.rounds = 10;
  try {
    RunFederation(agents, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDiverged);
  }
}

TEST(RunFederationTest, BitReproducible) {
  const auto agents = RandomAgents(8, 20, 8);
  FederationConfig c;
  c.rounds = 200;
  c.dp_sigma = 0.05;
  c.participation = Participation::Fraction(0.5);
  c.seed = 1234;
  const auto a = RunFederation(agents, c);
  const auto b = RunFederation(agents, c);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t t = 0; t < a.trace.size(); ++t) {
    EXPECT_EQ(a.trace[t].state.q, b.trace[t].state.q);
    EXPECT_EQ(a.trace[t].state.q_bar, b.trace[t].state.q_bar);
    EXPECT_EQ(a.trace[t].sampled_agents, b.trace[t].sampled_agents);
  }
  c.seed = 1235;
  EXPECT_NE(RunFederation(agents, c).quantile, a.quantile);
}

TEST(RunFederationTest, OneStepMovesAtMostEtaTimesBound) {
  const auto agents = RandomAgents(5, 10, 9);
  FederationConfig c;
  c.moreau_gamma = 100.0;
  c.learning_rate = 0.3;
  c.local_steps = 1;
  c.rounds = 20;
  const auto r = RunFederation(agents, c);
  double prev = c.initial_quantile;
  for (const auto& rec : r.trace) {
    EXPECT_LE(std::abs(rec.state.q - prev), 0.3 * 0.9 + 1e-12);
    prev = rec.state.q;
  }
}

TEST(RunFederationTest, RecoversCentralizedQuantile) {
  const auto agents = RandomAgents(10, 50, 10);
  std::vector<CalibrationRecord> pooled;
  for (const auto& a : agents) {
    pooled.insert(pooled.end(), a.records.begin(), a.records.end());
  }
  FederationConfig c;
  c.moreau_gamma = 0.01;
  // q-bar averages the climb from q = 0 to the upper tail of [0, 5], so
  // enough rounds are needed to wash that transient out.
  c.rounds = 2000;
  c.local_steps = 20;
  const double target = ApproxGlobalThreshold(pooled, c.alpha).value();
  const double q = RunFederation(agents, c).quantile;
  EXPECT_NEAR(q, target, 0.05 * 5.0);
}

TEST(RunFederationTest, ApproachesApproxGlobalAsGammaShrinks) {
  const auto agents = RandomAgents(10, 50, 11);
  std::vector<double> v, w;
  std::vector<CalibrationRecord> pooled;
  for (const auto& a : agents) {
    for (const auto& r : a.records) {
      v.push_back(r.score.value());
      w.push_back(r.ratio);
      pooled.push_back(r);
    }
  }
  const double alpha = 0.1;
  const double target = ApproxGlobalThreshold(pooled, alpha).value();
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  double max_gap = 0.0;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    max_gap = std::max(max_gap, sorted[i] - sorted[i - 1]);
  }
  double prev_err = oracle::kInf;
  for (double gamma : {1.0, 0.1, 0.01}) {
    const double smoothed = oracle::SmoothedWeightedQuantile(v, w, alpha, gamma);
    const double err = std::abs(smoothed - target);
    EXPECT_LE(err, gamma + max_gap) << "gamma=" << gamma;
    EXPECT_LE(err, prev_err + 1e-12) << "gamma=" << gamma;
    prev_err = err;

    FederationConfig c;
    c.alpha = alpha;
    c.moreau_gamma = gamma;
    c.rounds = 1000;
    c.local_steps = 10;
    c.initial_quantile = smoothed;  // isolate the fixed point from transients
    const double q = RunFederation(agents, c).quantile;
    EXPECT_LE(std::abs(q - smoothed), max_gap + 1e-9) << "gamma=" << gamma;
  }
}

TEST(TraceTest, JsonLines) {
  const auto agents = RandomAgents(4, 5, 12);
  FederationConfig c;
  c.rounds = 3;
  c.participation = Participation::FixedCount(2);
  const auto r = RunFederation(agents, c);
  std::ostringstream out;
  WriteTraceJsonl(out, r.trace);
  std::istringstream in(out.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    ++n;
    EXPECT_EQ(j.at("t"), n);
    EXPECT_EQ(j.at("sampled_agents").size(), 2u);
    EXPECT_EQ(j.at("messages"), 4);
    EXPECT_TRUE(j.contains("q_t"));
    EXPECT_TRUE(j.contains("q_bar_t"));
  }
  EXPECT_EQ(n, 3u);
}

TEST(MessageBusTest, DeliverDrainsOneKind) {
  MessageBus bus;
  bus.Post({MessageBus::Kind::kQuantile, 0, 1, 2.0, 0.0});
  bus.Post({MessageBus::Kind::kUpdate, 0, 1, 0.5, 0.0});
  bus.Post({MessageBus::Kind::kQuantile, 0, 2, 2.0, 0.0});
  const auto q = bus.Deliver(MessageBus::Kind::kQuantile);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q[0].agent_id, 1u);
  EXPECT_EQ(q[1].agent_id, 2u);
  EXPECT_TRUE(bus.Deliver(MessageBus::Kind::kQuantile).empty());
  EXPECT_EQ(bus.Deliver(MessageBus::Kind::kUpdate).size(), 1u);
  EXPECT_EQ(bus.log().size(), 3u);
  EXPECT_EQ(bus.CountInRound(0), 3u);
}

}  // namespace
}  // namespace hetcp
