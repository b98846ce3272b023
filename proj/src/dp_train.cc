//
// Copyright 2026 The dpaudit Authors
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

#include "dpaudit/dp_train.h"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>
#include <utility>

#include <boost/random/normal_distribution.hpp>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace dpaudit {
namespace {

void AddGaussianNoise(double stddev, std::mt19937_64& rng, double* data,
                      Eigen::Index size) {
  // Ziggurat sampler; noise generation dominates a private step.
  boost::random::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index i = 0; i < size; ++i) data[i] += normal(rng);
}

void AddGaussianNoise(double stddev, std::mt19937_64& rng, ModelParams* g) {
  AddGaussianNoise(stddev, rng, g->w1.data(), g->w1.size());
  AddGaussianNoise(stddev, rng, g->b1.data(), g->b1.size());
  AddGaussianNoise(stddev, rng, g->w2.data(), g->w2.size());
  AddGaussianNoise(stddev, rng, g->b2.data(), g->b2.size());
  if (g->tag_head) {
    AddGaussianNoise(stddev, rng, g->tag_head->weight.data(),
                     g->tag_head->weight.size());
    AddGaussianNoise(stddev, rng, g->tag_head->bias.data(),
                     g->tag_head->bias.size());
  }
}

double EffectiveNoiseMultiplier(const DPTrainConfig& cfg) {
  switch (cfg.fault.kind) {
    case FaultMode::Kind::kNoNoise:
      return 0.0;
    case FaultMode::Kind::kUnderNoise:
      return cfg.noise_multiplier * cfg.fault.factor;
    default:
      return cfg.noise_multiplier;
  }
}

}  // namespace

absl::Status FaultMode::Validate() const {
  if (kind == Kind::kUnderNoise && !(factor > 0.0 && factor < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("under_noise factor %g outside (0, 1)", factor));
  }
  return absl::OkStatus();
}

std::string FaultMode::ToString() const {
  switch (kind) {
    case Kind::kNone:
      return "none";
    case Kind::kNoNoise:
      return "no_noise";
    case Kind::kUnderNoise:
      return absl::StrCat("under_noise:", factor);
    case Kind::kNoPerSampleClip:
      return "no_per_sample_clip";
    case Kind::kDeterministicBatches:
      return "deterministic_batches";
  }
  return "none";
}

absl::StatusOr<FaultMode> FaultMode::Parse(absl::string_view text) {
  FaultMode f;
  if (text == "none") return f;
  if (text == "no_noise") return NoNoise();
  if (text == "no_per_sample_clip") return NoPerSampleClip();
  if (text == "deterministic_batches") return DeterministicBatches();
  constexpr absl::string_view kUnder = "under_noise";
  if (text.substr(0, kUnder.size()) == kUnder) {
    double factor = 0.5;
    absl::string_view rest = text.substr(kUnder.size());
    if (!rest.empty()) {
      if (rest.front() != ':' && rest.front() != '=') {
        return absl::InvalidArgumentError(absl::StrCat("bad fault: ", text));
      }
      if (!absl::SimpleAtod(rest.substr(1), &factor)) {
        return absl::InvalidArgumentError(
            absl::StrCat("bad under_noise factor: ", text));
      }
    }
    f = UnderNoise(factor);
    if (absl::Status s = f.Validate(); !s.ok()) return s;
    return f;
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown fault mode: ", text));
}

absl::Status DPTrainConfig::Validate() const {
  if (!(clip_norm > 0.0)) {
    return absl::InvalidArgumentError("clip_norm must be positive");
  }
  if (!(noise_multiplier >= 0.0) || std::isinf(noise_multiplier)) {
    return absl::InvalidArgumentError("noise_multiplier must be >= 0");
  }
  if (!(sampling_rate > 0.0 && sampling_rate <= 1.0)) {
    return absl::InvalidArgumentError("sampling_rate must lie in (0, 1]");
  }
  if (steps < 0) return absl::InvalidArgumentError("steps must be >= 0");
  if (!(learning_rate > 0.0)) {
    return absl::InvalidArgumentError("learning_rate must be positive");
  }
  return fault.Validate();
}

absl::Status PrivacyBudget::Validate() const {
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError("delta must lie in (0, 1)");
  }
  if (!(epsilon >= 0.0)) {
    return absl::InvalidArgumentError("epsilon must be >= 0");
  }
  return absl::OkStatus();
}

std::vector<int> Subsample(int n, const DPTrainConfig& cfg,
                           std::mt19937_64& rng) {
  const int block = static_cast<int>(std::floor(cfg.sampling_rate * n));
  std::vector<int> out;
  if (cfg.fault.kind == FaultMode::Kind::kDeterministicBatches) {
    out.resize(block);
    std::iota(out.begin(), out.end(), 0);
    return out;
  }
  if (cfg.batch_mode == BatchMode::kFixedUniform) {
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    out.reserve(block);
    std::sample(all.begin(), all.end(), std::back_inserter(out), block, rng);
    return out;
  }
  if (cfg.sampling_rate >= 1.0) {
    out.resize(n);
    std::iota(out.begin(), out.end(), 0);
    return out;
  }
  std::bernoulli_distribution include(cfg.sampling_rate);
  for (int i = 0; i < n; ++i) {
    if (include(rng)) out.push_back(i);
  }
  return out;
}

std::vector<ModelParams> ClipPerSample(std::vector<ModelParams> grads,
                                       double clip_norm) {
  for (ModelParams& g : grads) {
    const double norm = FlatNorm(g);
    if (norm > clip_norm) Scale(clip_norm / norm, &g);
  }
  return grads;
}

absl::Status DpSgdStep(const Batch& data, const DPTrainConfig& cfg,
                       const LossSpec& loss, std::mt19937_64& rng,
                       ModelParams* params, StepRecord* record) {
  const std::vector<int> indices = Subsample(data.size(), cfg, rng);
  StepRecord rec;
  rec.batch_size = static_cast<int>(indices.size());
  if (indices.empty()) {
    rec.skipped = true;
    if (record != nullptr) *record = rec;
    return absl::OkStatus();
  }
  const Batch batch = SelectRows(data, indices);
  absl::StatusOr<GradFactors> factors =
      GradFactors::Compute(*params, batch, loss);
  if (!factors.ok()) return factors.status();

  const double inv_b = 1.0 / static_cast<double>(indices.size());
  const Vector norms = factors->SquaredNorms().cwiseSqrt();
  std::vector<double> coeffs(indices.size(), inv_b);
  ModelParams update;
  if (cfg.fault.kind == FaultMode::Kind::kNoPerSampleClip) {
    update = factors->WeightedSum(coeffs);
    const double norm = FlatNorm(update);
    if (norm > cfg.clip_norm) Scale(cfg.clip_norm / norm, &update);
    rec.mean_clipped_norm = norms.mean();
  } else {
    double clipped_sum = 0.0;
    for (size_t i = 0; i < coeffs.size(); ++i) {
      if (norms[i] > cfg.clip_norm) {
        coeffs[i] *= cfg.clip_norm / norms[i];
        clipped_sum += cfg.clip_norm;
      } else {
        clipped_sum += norms[i];
      }
    }
    update = factors->WeightedSum(coeffs);
    rec.mean_clipped_norm = clipped_sum * inv_b;
  }

  const double sigma = EffectiveNoiseMultiplier(cfg);
  if (sigma > 0.0) {
    AddGaussianNoise(sigma * cfg.clip_norm * inv_b, rng, &update);
  }
  AddScaled(update, -cfg.learning_rate, params);
  if (record != nullptr) *record = rec;
  return absl::OkStatus();
}

absl::StatusOr<TrainResult> Train(ModelParams params0, const Batch& data,
                                  const DPTrainConfig& cfg,
                                  const LossSpec& loss, std::mt19937_64& rng) {
  if (absl::Status s = cfg.Validate(); !s.ok()) return s;
  if (absl::Status s = ValidateParams(params0); !s.ok()) return s;
  if (data.size() == 0) {
    return absl::InvalidArgumentError("training set is empty");
  }
  TrainResult result;
  result.params = std::move(params0);
  result.log.reserve(cfg.steps);
  for (int64_t t = 0; t < cfg.steps; ++t) {
    StepRecord rec;
    if (absl::Status s =
            DpSgdStep(data, cfg, loss, rng, &result.params, &rec);
        !s.ok()) {
      return s;
    }
    result.log.push_back(rec);
  }
  return result;
}

int64_t StepsForEpochs(double epochs, double sampling_rate) {
  return static_cast<int64_t>(std::ceil(epochs / sampling_rate - 1e-9));
}

}  // namespace dpaudit
