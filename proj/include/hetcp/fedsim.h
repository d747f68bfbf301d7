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

#ifndef HETCP_FEDSIM_H_
#define HETCP_FEDSIM_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "hetcp/conformal.h"

namespace hetcp {

// Gradient of the Moreau-smoothed pinball loss S_{alpha,v}^{(gamma)} at q:
//   -(1 - alpha)      if q < v - gamma (1 - alpha)
//   alpha             if q > v + gamma alpha
//   (q - v) / gamma   otherwise (closed middle interval, so it is continuous).
double MoreauPinballGrad(double q, double v, double alpha, double gamma);

struct AgentState {
  std::size_t agent_id = 0;
  std::vector<CalibrationRecord> records;
  double lambda_total = 0.0;  // sum of record ratios

  static AgentState Make(std::size_t agent_id,
                         std::vector<CalibrationRecord> records);
};

// (1 / Lambda^i) sum_k lambda_k grad S_{alpha,V_k}(q).
// Throws Error(kZeroMass) when the agent's ratios sum to zero.
double LocalLossGrad(const AgentState& agent, double q, double alpha,
                     double gamma);

struct Participation {
  enum class Kind { kFraction, kFixedCount };
  Kind kind = Kind::kFraction;
  double fraction = 1.0;
  std::size_t count = 0;

  static Participation Fraction(double f) { return {Kind::kFraction, f, 0}; }
  static Participation FixedCount(std::size_t c) {
    return {Kind::kFixedCount, 1.0, c};
  }
  // Number of agents sampled per round out of n.
  std::size_t SubsetSize(std::size_t n) const;
};

struct FederationConfig {
  double alpha = 0.1;
  std::size_t rounds = 1000;
  // Unset means gamma / 2.
  std::optional<double> learning_rate;
  double moreau_gamma = 0.01;
  double dp_sigma = 0.0;
  std::size_t local_steps = 10;
  Participation participation;
  std::uint64_t seed = 0;
  double initial_quantile = 0.0;

  double EffectiveLearningRate() const {
    return learning_rate.value_or(moreau_gamma / 2.0);
  }
  // Throws Error(kInvalidArgument) / Error(kOutOfRange).
  void Validate() const;
};

struct ServerState {
  std::size_t round = 0;
  double q = 0.0;
  double q_bar = 0.0;
};

// In-process transport between the server and the agents. Every posted
// message is kept in the event log; Deliver hands pending messages of one
// kind to their consumer.
class MessageBus {
 public:
  enum class Kind {
    kLambdaTotal,  // agent -> server, once before the first round
    kQuantile,     // server -> agent
    kUpdate,       // agent -> server
  };

  struct Message {
    Kind kind = Kind::kQuantile;
    std::size_t round = 0;
    std::size_t agent_id = 0;
    double value = 0.0;        // q_t, Lambda^i, or delta q
    double value_bar = 0.0;    // delta q-bar for kUpdate
  };

  void Post(const Message& m);
  std::vector<Message> Deliver(Kind kind);

  const std::vector<Message>& log() const { return log_; }
  std::size_t CountInRound(std::size_t round) const;

 private:
  std::vector<Message> pending_;
  std::vector<Message> log_;
};

struct RoundRecord {
  ServerState state;  // after the round
  std::vector<std::size_t> sampled_agents;
  std::size_t messages = 0;
};

// One communication round. Sampled agents run local_steps noisy gradient
// steps from q_t; the server aggregates with weights Lambda^i / sum Lambda^j
// scaled by n / |S|. Randomness depends only on (seed, round, agent_id).
// Throws Error(kDiverged) if |q| exceeds 1e12.
RoundRecord RunRound(const ServerState& server,
                     std::span<const AgentState> agents,
                     const FederationConfig& config, MessageBus& bus);

struct FederationResult {
  double quantile = 0.0;  // running average after the last round
  std::vector<RoundRecord> trace;
  std::vector<MessageBus::Message> messages;
};

FederationResult RunFederation(std::span<const AgentState> agents,
                               const FederationConfig& config);

// One JSON object per line: {t, sampled_agents, q_t, q_bar_t, messages}.
void WriteTraceJsonl(std::ostream& out, std::span<const RoundRecord> trace);

}  // namespace hetcp

#endif  // HETCP_FEDSIM_H_
