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

#ifndef DPAUDIT_DP_TRAIN_H_
#define DPAUDIT_DP_TRAIN_H_

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "dpaudit/tensor_nn.h"

namespace dpaudit {

enum class BatchMode {
  kPoisson,       // each row independently with probability q
  kFixedUniform,  // uniformly random subset of floor(q n) rows
};

// Deliberate defects that break the DP guarantee of the trainer. Each one
// changes exactly one stage of a step.
struct FaultMode {
  enum class Kind {
    kNone,
    kNoNoise,               // noise term dropped
    kUnderNoise,            // noise multiplier scaled by `factor`
    kNoPerSampleClip,       // batch mean clipped instead of each example
    kDeterministicBatches,  // the same leading block of rows every step
  };
  Kind kind = Kind::kNone;
  double factor = 1.0;  // only meaningful for kUnderNoise, in (0, 1)

  static FaultMode None() { return {}; }
  static FaultMode NoNoise() { return {Kind::kNoNoise, 1.0}; }
  static FaultMode UnderNoise(double f) { return {Kind::kUnderNoise, f}; }
  static FaultMode NoPerSampleClip() { return {Kind::kNoPerSampleClip, 1.0}; }
  static FaultMode DeterministicBatches() {
    return {Kind::kDeterministicBatches, 1.0};
  }

  absl::Status Validate() const;
  // "none", "no_noise", "under_noise:0.25", "no_per_sample_clip",
  // "deterministic_batches".
  std::string ToString() const;
  static absl::StatusOr<FaultMode> Parse(absl::string_view text);
};

struct DPTrainConfig {
  double clip_norm = 1.0;
  double noise_multiplier = 0.0;
  double sampling_rate = 0.1;
  int64_t steps = 1000;
  double learning_rate = 1e-3;
  BatchMode batch_mode = BatchMode::kPoisson;
  FaultMode fault;
  uint64_t seed = 0;

  absl::Status Validate() const;
};

struct PrivacyBudget {
  double epsilon = std::numeric_limits<double>::infinity();
  double delta = 1e-5;

  bool is_infinite() const { return std::isinf(epsilon); }
  absl::Status Validate() const;
};

// Row indices of one step's batch, ascending.
std::vector<int> Subsample(int n, const DPTrainConfig& cfg,
                           std::mt19937_64& rng);

// Scales each gradient set by min(clip_norm / ||g||, 1).
std::vector<ModelParams> ClipPerSample(std::vector<ModelParams> grads,
                                       double clip_norm);

struct StepRecord {
  int batch_size = 0;
  double mean_clipped_norm = 0.0;
  bool skipped = false;
};

// One DP-SGD update on `params`:
//   G = (1/B) sum_i clip(g_i) + (sigma R / B) z,  params -= lr * G
// with B the realized batch size. An empty batch skips the update.
absl::Status DpSgdStep(const Batch& data, const DPTrainConfig& cfg,
                       const LossSpec& loss, std::mt19937_64& rng,
                       ModelParams* params, StepRecord* record);

struct TrainResult {
  ModelParams params;
  std::vector<StepRecord> log;  // trainer-side diagnostics only
};

// Runs cfg.steps DP-SGD steps. Sampling and noise draw from `rng` alone, so
// (rng state, cfg, data, params0) fix the trajectory.
absl::StatusOr<TrainResult> Train(ModelParams params0, const Batch& data,
                                  const DPTrainConfig& cfg,
                                  const LossSpec& loss, std::mt19937_64& rng);

// Number of steps covering `epochs` passes at sampling rate q.
int64_t StepsForEpochs(double epochs, double sampling_rate);

}  // namespace dpaudit

#endif  // DPAUDIT_DP_TRAIN_H_
