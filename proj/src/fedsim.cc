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
#include <numeric>
#include <random>

#include "hetcp/error.h"
#include "json.hpp"

namespace hetcp {
namespace {

constexpr double kDivergenceLimit = 1e12;
constexpr std::uint64_t kSamplingStream = 0x5a4d504c;
constexpr std::uint64_t kNoiseStream = 0x4e4f4953;

std::mt19937_64 StreamRng(std::uint64_t seed, std::uint64_t round,
                          std::uint64_t agent, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(round),
                    static_cast<std::uint32_t>(round >> 32),
                    static_cast<std::uint32_t>(agent),
                    static_cast<std::uint32_t>(agent >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

std::vector<std::size_t> SampleAgents(std::size_t n, std::size_t m,
                                      std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

double MoreauPinballGrad(double q, double v, double alpha, double gamma) {
  if (!(gamma > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "gamma must be positive");
  }
  if (q < v - gamma * (1.0 - alpha)) return -(1.0 - alpha);
  if (q > v + gamma * alpha) return alpha;
  return (q - v) / gamma;
}

AgentState AgentState::Make(std::size_t agent_id,
                            std::vector<CalibrationRecord> records) {
  AgentState a;
  a.agent_id = agent_id;
  for (const auto& r : records) {
    if (!std::isfinite(r.ratio) || r.ratio < 0.0) {
      throw Error(ErrorCode::kNonFinite, "record ratio must be finite, >= 0");
    }
    a.lambda_total += r.ratio;
  }
  a.records = std::move(records);
  return a;
}

double LocalLossGrad(const AgentState& agent, double q, double alpha,
                     double gamma) {
  if (!(agent.lambda_total > 0.0)) {
    throw Error(ErrorCode::kZeroMass,
                "agent " + std::to_string(agent.agent_id) + " has zero mass");
  }
  double acc = 0.0;
  for (const auto& r : agent.records) {
    acc += r.ratio * MoreauPinballGrad(q, r.score.value(), alpha, gamma);
  }
  return acc / agent.lambda_total;
}

std::size_t Participation::SubsetSize(std::size_t n) const {
  if (n == 0) return 0;
  if (kind == Kind::kFixedCount) return std::clamp<std::size_t>(count, 1, n);
  const auto m = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(m, 1, n);
}

void FederationConfig::Validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::kOutOfRange, "alpha must lie in (0, 1)");
  }
  if (rounds < 1) throw Error(ErrorCode::kInvalidArgument, "rounds >= 1");
  if (local_steps < 1) {
    throw Error(ErrorCode::kInvalidArgument, "local_steps >= 1");
  }
  if (!(moreau_gamma > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "gamma must be positive");
  }
  if (!(EffectiveLearningRate() > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive");
  }
  if (!(dp_sigma >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "dp_sigma must be >= 0");
  }
  if (participation.kind == Participation::Kind::kFraction &&
      !(participation.fraction > 0.0 && participation.fraction <= 1.0)) {
    throw Error(ErrorCode::kOutOfRange, "participation fraction in (0, 1]");
  }
  if (participation.kind == Participation::Kind::kFixedCount &&
      participation.count < 1) {
    throw Error(ErrorCode::kInvalidArgument, "participation count >= 1");
  }
}

void MessageBus::Post(const Message& m) {
  pending_.push_back(m);
  log_.push_back(m);
}

std::vector<MessageBus::Message> MessageBus::Deliver(Kind kind) {
  std::vector<Message> out;
  auto keep = std::stable_partition(
      pending_.begin(), pending_.end(),
      [kind](const Message& m) { return m.kind != kind; });
  out.assign(keep, pending_.end());
  pending_.erase(keep, pending_.end());
  return out;
}

std::size_t MessageBus::CountInRound(std::size_t round) const {
  // Rounds are posted in nondecreasing order, so scan back from the end.
  std::size_t count = 0;
  for (auto it = log_.rbegin(); it != log_.rend(); ++it) {
    if (it->kind == Kind::kLambdaTotal) continue;
    if (it->round < round) break;
    if (it->round == round) ++count;
  }
  return count;
}

RoundRecord RunRound(const ServerState& server,
                     std::span<const AgentState> agents,
                     const FederationConfig& config, MessageBus& bus) {
  if (agents.empty()) {
    throw Error(ErrorCode::kEmptyInput, "federation has no agents");
  }
  const std::size_t n = agents.size();
  const std::size_t t = server.round;
  const double eta = config.EffectiveLearningRate();
  const std::size_t steps = config.local_steps;

  double lambda_sum = 0.0;
  for (const auto& a : agents) lambda_sum += a.lambda_total;
  if (!(lambda_sum > 0.0)) {
    throw Error(ErrorCode::kZeroMass, "all agents have zero mass");
  }

  RoundRecord record;
  {
    auto rng = StreamRng(config.seed, t, 0, kSamplingStream);
    record.sampled_agents =
        SampleAgents(n, config.participation.SubsetSize(n), rng);
  }

  // Server broadcasts q_t to the sampled agents.
  for (std::size_t i : record.sampled_agents) {
    bus.Post({MessageBus::Kind::kQuantile, t, i, server.q, 0.0});
  }

  // Local updates; each agent only sees its own download.
  for (const auto& msg : bus.Deliver(MessageBus::Kind::kQuantile)) {
    const AgentState& agent = agents[msg.agent_id];
    const double q0 = msg.value;
    double q = q0;
    double iterate_sum = 0.0;
    if (agent.lambda_total > 0.0) {
      auto rng = StreamRng(config.seed, t, agent.agent_id, kNoiseStream);
      std::normal_distribution<double> noise(0.0, 1.0);
      for (std::size_t k = 0; k < steps; ++k) {
        double g = LocalLossGrad(agent, q, config.alpha, config.moreau_gamma);
        if (config.dp_sigma > 0.0) g += config.dp_sigma * noise(rng);
        q -= eta * g;
        iterate_sum += q;
      }
    } else {
      iterate_sum = q0 * static_cast<double>(steps);
    }
    bus.Post({MessageBus::Kind::kUpdate, t, msg.agent_id, q - q0,
              iterate_sum / static_cast<double>(steps)});
  }

  const double scale = static_cast<double>(n) /
                       static_cast<double>(record.sampled_agents.size());
  double delta_q = 0.0;
  double delta_q_bar = 0.0;
  for (const auto& msg : bus.Deliver(MessageBus::Kind::kUpdate)) {
    const double w = agents[msg.agent_id].lambda_total / lambda_sum;
    delta_q += w * msg.value;
    delta_q_bar += w * msg.value_bar;
  }
  const double td = static_cast<double>(t);
  record.state.round = t + 1;
  record.state.q = server.q + scale * delta_q;
  record.state.q_bar =
      td / (td + 1.0) * server.q_bar + scale * delta_q_bar / (td + 1.0);
  record.messages = bus.CountInRound(t);

  if (!std::isfinite(record.state.q) ||
      std::abs(record.state.q) > kDivergenceLimit ||
      !std::isfinite(record.state.q_bar)) {
    throw Error(ErrorCode::kDiverged,
                "quantile iterate diverged at round " + std::to_string(t));
  }
  return record;
}

FederationResult RunFederation(std::span<const AgentState> agents,
                               const FederationConfig& config) {
  config.Validate();
  if (agents.empty()) {
    throw Error(ErrorCode::kEmptyInput, "federation has no agents");
  }
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (agents[i].agent_id != i) {
      throw Error(ErrorCode::kInvalidArgument,
                  "agent ids must be 0..n-1 in order");
    }
  }
  MessageBus bus;
  for (const auto& a : agents) {
    bus.Post({MessageBus::Kind::kLambdaTotal, 0, a.agent_id, a.lambda_total,
              0.0});
  }
  bus.Deliver(MessageBus::Kind::kLambdaTotal);

  FederationResult result;
  result.trace.reserve(config.rounds);
  ServerState state{0, config.initial_quantile, config.initial_quantile};
  for (std::size_t t = 0; t < config.rounds; ++t) {
    RoundRecord rec = RunRound(state, agents, config, bus);
    state = rec.state;
    result.trace.push_back(std::move(rec));
  }
  result.quantile = state.q_bar;
  result.messages = bus.log();
  return result;
}

void WriteTraceJsonl(std::ostream& out, std::span<const RoundRecord> trace) {
  for (const auto& rec : trace) {
    nlohmann::json j = {{"t", rec.state.round},
                        {"sampled_agents", rec.sampled_agents},
                        {"q_t", rec.state.q},
                        {"q_bar_t", rec.state.q_bar},
                        {"messages", rec.messages}};
    out << j.dump() << '\n';
  }
}

}  // namespace hetcp
