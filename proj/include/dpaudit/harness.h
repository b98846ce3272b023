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

// Experiment engine: one row per (config, seed), seeded sweeps over a worker
// pool, fault demonstrations and the toy memorization grid.

#ifndef DPAUDIT_HARNESS_H_
#define DPAUDIT_HARNESS_H_

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dpaudit/config.h"

namespace dpaudit {

struct ResultRow {
  int64_t run_id = 0;
  uint64_t seed = 0;
  std::string flow;
  std::string canary_mode;
  int64_t m = 0;
  int64_t n = 0;
  double epsilon_target = 0.0;
  double sigma = 0.0;
  double delta = 0.0;
  int64_t r = 0;
  int64_t W = 0;  // -1 marks a failed run
  double epsilon_lower = 0.0;
  double epsilon_optimal = 0.0;
  double auc = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double wall_seconds = 0.0;

  bool failed() const { return W < 0; }
};

// The PRNG of one run, a pure function of (master seed, run seed).
std::mt19937_64 RunRng(uint64_t master_seed, uint64_t seed);

// Noise multiplier for `cfg`: calibrated when epsilon is finite, cfg.sigma
// otherwise.
absl::StatusOr<double> ResolveSigma(const ExperimentConfig& cfg);

// Generate, train, score, decide, estimate for one seed.
absl::StatusOr<ResultRow> RunOnce(const ExperimentConfig& cfg, int64_t run_id,
                                  uint64_t seed);

// A row for a run that failed: W = -1 and NaN measurements.
ResultRow FailedRow(const ExperimentConfig& cfg, int64_t run_id,
                    uint64_t seed);

// Called once per finished row, serialized across workers.
using RowSink = std::function<void(const ResultRow&)>;

// Runs every seed of cfg over cfg.workers threads. A seed that fails yields
// a failed row instead of aborting the sweep. When cfg.output is set, rows
// are appended to that CSV as they complete. Returned rows are in seed order.
absl::StatusOr<std::vector<ResultRow>> RunExperiment(
    const ExperimentConfig& cfg, const RowSink& sink = nullptr);

struct FaultReport {
  std::string fault;
  double claimed_epsilon = 0.0;
  std::vector<ResultRow> rows;
  std::vector<bool> violations;  // per row: epsilon_lower > claimed
  bool violation = false;        // any row violates

  std::string Verdict() const { return violation ? "VIOLATION" : "PASS"; }
  std::string ToText() const;
};

// Audits the trainer with cfg.fault injected against the finite claimed
// cfg.epsilon. Sigma is calibrated for the claim, then the fault applies.
absl::StatusOr<FaultReport> RunFaultDemo(const ExperimentConfig& cfg);

struct ToyCell {
  double a = 0.0;
  double b = 0.0;
  uint64_t seed = 0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double gap = 0.0;  // train_acc - test_acc
  double auc = 0.0;  // members = training rows, non-members = held-out rows
};

// Non-private training on toy data for every (a, b) in the grid and seed.
absl::StatusOr<std::vector<ToyCell>> RunToyInsight(const ExperimentConfig& cfg);

}  // namespace dpaudit

#endif  // DPAUDIT_HARNESS_H_
