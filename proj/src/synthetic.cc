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

#include "hetcp/synthetic.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "hetcp/error.h"

namespace hetcp {
namespace {

enum Stream : std::uint64_t {
  kTrainStream = 1,
  kCalibrationStream = 2,
  kTestStream = 3,
  kModelStream = 4,
};

}  // namespace

std::string_view SourceName(CalibrationSource source) {
  switch (source) {
    case CalibrationSource::kP1: return "p1";
    case CalibrationSource::kP2: return "p2";
    case CalibrationSource::kMix: return "mix";
  }
  return "?";
}

CalibrationSource ParseSource(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "p1") return CalibrationSource::kP1;
  if (lower == "p2") return CalibrationSource::kP2;
  if (lower == "mix") return CalibrationSource::kMix;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown calibration source '" + std::string(name) + "'");
}

void SyntheticSpec::Validate() const {
  if (!(p1_variance > 0.0) || !(p2_variance > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "variances must be positive");
  }
  if (mix_p1 + mix_p2 < 1 || single_source_size < 1 || train_size < 2 ||
      test_size < 1 || gmm_fit_size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "sample sizes must be >= 1");
  }
  if (!(noise_std >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise_std must be >= 0");
  }
  if (epochs < 0 || !(learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "bad training options");
  }
}

std::size_t SyntheticSpec::CalibrationSize(CalibrationSource source) const {
  return source == CalibrationSource::kMix ? mix_p1 + mix_p2
                                           : single_source_size;
}

double SyntheticSpec::P1Share(CalibrationSource source) const {
  switch (source) {
    case CalibrationSource::kP1: return 1.0;
    case CalibrationSource::kP2: return 0.0;
    case CalibrationSource::kMix:
      return static_cast<double>(mix_p1) /
             static_cast<double>(mix_p1 + mix_p2);
  }
  return 0.0;
}

double SyntheticTarget(double x) {
  return (1.0 + 0.1 * std::abs(x)) * std::sin(x);
}

std::mt19937_64 MakeStream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

Dataset SampleComponent(const SyntheticSpec& spec, int component,
                        std::size_t n, std::mt19937_64& rng) {
  const double mean = component == 1 ? spec.p1_mean : spec.p2_mean;
  const double var = component == 1 ? spec.p1_variance : spec.p2_variance;
  std::normal_distribution<double> xdist(mean, std::sqrt(var));
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset d;
  d.x.reserve(n);
  d.y.reserve(n);
  d.component.assign(n, component);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xdist(rng);
    // Noise is drawn even when noise_std is 0 to keep streams aligned.
    const double eps = spec.noise_std * noise(rng);
    d.x.push_back(x);
    d.y.push_back(SyntheticTarget(x) + eps);
  }
  return d;
}

namespace {

void Append(Dataset& into, const Dataset& from) {
  into.x.insert(into.x.end(), from.x.begin(), from.x.end());
  into.y.insert(into.y.end(), from.y.begin(), from.y.end());
  into.component.insert(into.component.end(), from.component.begin(),
                        from.component.end());
}

}  // namespace

SyntheticSplit SampleSynthetic(const SyntheticSpec& spec, std::uint64_t seed,
                               CalibrationSource source) {
  spec.Validate();
  SyntheticSplit split;
  {
    auto rng = MakeStream(seed, kTrainStream);
    split.train = SampleComponent(spec, 1, spec.train_size, rng);
  }
  {
    auto rng = MakeStream(seed, kCalibrationStream);
    switch (source) {
      case CalibrationSource::kP1:
        split.calibration =
            SampleComponent(spec, 1, spec.single_source_size, rng);
        break;
      case CalibrationSource::kP2:
        split.calibration =
            SampleComponent(spec, 2, spec.single_source_size, rng);
        break;
      case CalibrationSource::kMix:
        split.calibration = SampleComponent(spec, 1, spec.mix_p1, rng);
        Append(split.calibration, SampleComponent(spec, 2, spec.mix_p2, rng));
        break;
    }
  }
  {
    auto rng = MakeStream(seed, kTestStream);
    split.test = SampleComponent(spec, 2, spec.test_size, rng);
  }
  return split;
}

RegressionPredictor TrainSyntheticRegressor(const SyntheticSpec& spec,
                                            const Dataset& train,
                                            std::uint64_t seed) {
  TrainingOptions options;
  options.epochs = spec.epochs;
  options.learning_rate = spec.learning_rate;
  options.seed = MakeStream(seed, kModelStream)();
  return RegressionPredictor::Train(train.x, train.y, options);
}

RatioModel ExactRatioModel(const SyntheticSpec& spec,
                           CalibrationSource source) {
  const GaussianSpec p1 = GaussianSpec::Scalar(spec.p1_mean, spec.p1_variance);
  const GaussianSpec p2 = GaussianSpec::Scalar(spec.p2_mean, spec.p2_variance);
  const double share = spec.P1Share(source);
  GaussianMixture numerator;
  numerator.Add(1.0, p2);
  GaussianMixture denominator;
  denominator.Add(share, p1);
  denominator.Add(1.0 - share, p2);
  return RatioModel(std::move(numerator), std::move(denominator),
                    RatioModel::Variant::kExact);
}

std::uint64_t ReplicationSeed(std::uint64_t base_seed, std::uint64_t index) {
  return base_seed ^ (index * 0x9E3779B97F4A7C15ULL);
}

}  // namespace hetcp
