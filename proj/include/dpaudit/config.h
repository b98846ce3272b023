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

// Experiment configuration. Files are flat `key = value` lines with `#`
// comments; the same keys are accepted as `--key value` on the command line,
// applied after the file.

#ifndef DPAUDIT_CONFIG_H_
#define DPAUDIT_CONFIG_H_

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "dpaudit/audit.h"
#include "dpaudit/dp_train.h"

namespace dpaudit {

enum class Flow { kBaselineO1, kSelfComp, kMultitask, kToy };

absl::string_view FlowName(Flow flow);
absl::StatusOr<Flow> ParseFlow(absl::string_view name);

// Where canaries come from. The synthetic modes serve every data-independent
// flow; the toy-backed ones only the include/exclude baseline.
enum class CanarySource {
  kOrthogonal,
  kGaussian,
  kInDistribution,
  kMislabeled,
};

absl::string_view CanarySourceName(CanarySource source);
absl::StatusOr<CanarySource> ParseCanarySource(absl::string_view name);

struct ExperimentConfig {
  Flow flow = Flow::kSelfComp;
  CanarySource canary = CanarySource::kOrthogonal;

  // Data. Desk scale by default; paper_scale switches to 1000/100000/1000.
  int m = 512;
  int n = 5120;        // toy-backed flows: training rows including canaries
  int test_n = 2000;   // toy-backed flows: held-out rows
  int input_dim = 512;
  int hidden_dim = 4096;
  int num_classes = 256;
  int tag_classes = 100;
  int tag_size = 50;
  int trigger_dim = 8;
  double lambda = 1.0;
  double sigma0 = 0.1;
  double toy_a = 1.0;
  double toy_b = 0.0;

  // Training and privacy.
  double epsilon = std::numeric_limits<double>::infinity();
  double sigma = 0.0;  // used only when epsilon is infinite
  double delta = 1e-5;
  double confidence = 0.95;
  double sampling_rate = 0.1;
  double epochs = 100.0;
  int64_t steps = 0;  // > 0 overrides epochs
  double learning_rate = 1e-3;
  double clip_norm = 1.0;
  BatchMode batch_mode = BatchMode::kPoisson;
  FaultMode fault;

  // Auditing.
  int guesses = 0;  // r; 0 means m
  EstimatorChoice estimator = EstimatorChoice::kTheorem1;

  // Sweep.
  std::vector<uint64_t> seeds = {1};
  uint64_t master_seed = 0;
  int workers = 1;
  std::string output;

  // Toy grid for the `toy` subcommand.
  std::vector<double> a_grid = {0.0, 1.0};
  std::vector<double> b_grid = {0.0, 10.0, 50.0};

  int64_t TrainingSteps() const;
  int EffectiveGuesses() const { return guesses > 0 ? guesses : m; }
  absl::Status Validate() const;
};

// Sets one key. Unknown keys and malformed values are InvalidArgument.
absl::Status ApplyKeyValue(absl::string_view key, absl::string_view value,
                           ExperimentConfig* cfg);

// Applies every `key = value` line of `text` in order.
absl::Status ApplyConfigText(absl::string_view text, ExperimentConfig* cfg);

// NotFound when the file cannot be read.
absl::Status ApplyConfigFile(const std::string& path, ExperimentConfig* cfg);

// DPAUDIT_SEED, when set, replaces master_seed.
absl::Status ApplyEnvironment(ExperimentConfig* cfg);

// "1,2,5" or "1-10" or a mix of both.
absl::StatusOr<std::vector<uint64_t>> ParseSeedList(absl::string_view text);

// Every key ApplyKeyValue accepts.
const std::vector<std::string>& ConfigKeys();

}  // namespace dpaudit

#endif  // DPAUDIT_CONFIG_H_
