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

#ifndef HETCP_SYNTHETIC_H_
#define HETCP_SYNTHETIC_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "hetcp/ratio.h"
#include "hetcp/scoring.h"

namespace hetcp {

enum class CalibrationSource { kP1, kP2, kMix };

std::string_view SourceName(CalibrationSource source);
// Accepts "p1", "p2", "mix" (case-insensitive). Throws Error(kInvalidArgument).
CalibrationSource ParseSource(std::string_view name);

// 1-D covariate-shift benchmark: X from one of two Gaussians, Y on a
// sinusoid with additive Gaussian noise. The test distribution is P2.
struct SyntheticSpec {
  double p1_mean = 3.0;
  double p1_variance = 4.0;
  double p2_mean = 5.0;
  double p2_variance = 4.0;
  std::size_t mix_p1 = 80;
  std::size_t mix_p2 = 20;
  std::size_t single_source_size = 100;
  double noise_std = 0.5;
  std::size_t train_size = 150;
  std::size_t test_size = 20;
  std::size_t gmm_fit_size = 1000;
  int epochs = 3500;
  double learning_rate = 0.01;

  // Throws Error(kInvalidArgument).
  void Validate() const;
  std::size_t CalibrationSize(CalibrationSource source) const;
  // Fraction of calibration points drawn from P1.
  double P1Share(CalibrationSource source) const;
};

// (1 + 0.1 |x|) sin(x)
double SyntheticTarget(double x);

struct Dataset {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<int> component;  // 1 or 2

  std::size_t size() const { return x.size(); }
};

struct SyntheticSplit {
  Dataset train;        // from P1
  Dataset calibration;  // per source; Mix puts the P1 block first
  Dataset test;         // from P2
};

// Independent RNG stream for (seed, stream).
std::mt19937_64 MakeStream(std::uint64_t seed, std::uint64_t stream);

// Draws n points of one component.
Dataset SampleComponent(const SyntheticSpec& spec, int component,
                        std::size_t n, std::mt19937_64& rng);

// Deterministic in (spec, seed, source). The training and test sets do not
// depend on the source, so arms of one replication share them.
SyntheticSplit SampleSynthetic(const SyntheticSpec& spec, std::uint64_t seed,
                               CalibrationSource source);

RegressionPredictor TrainSyntheticRegressor(const SyntheticSpec& spec,
                                            const Dataset& train,
                                            std::uint64_t seed);

// Exact lambda = P2 / (share * P1 + (1 - share) * P2) for the source's mix.
RatioModel ExactRatioModel(const SyntheticSpec& spec,
                           CalibrationSource source);

// Per-replication seed: base XOR (index * odd constant).
std::uint64_t ReplicationSeed(std::uint64_t base_seed, std::uint64_t index);

}  // namespace hetcp

#endif  // HETCP_SYNTHETIC_H_
