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

// Auditing games. The auditor side only ever talks to a trained model through
// LossOracle, i.e. through loss and prediction queries on the final model.

#ifndef DPAUDIT_AUDIT_H_
#define DPAUDIT_AUDIT_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "dpaudit/canary.h"
#include "dpaudit/tensor_nn.h"

namespace dpaudit {

// S in {-1, +1}^m, i.i.d. uniform.
std::vector<int> SampleMembership(int m, std::mt19937_64& rng);

// Black-box view of a trained model.
class LossOracle {
 public:
  virtual ~LossOracle() = default;
  // Per-row cross-entropy.
  virtual absl::StatusOr<Vector> Losses(const Matrix& features,
                                        std::span<const int> labels) const = 0;
  // Per-row tag-set loss, see TagSetLoss.
  virtual absl::StatusOr<Vector> TagSetLosses(
      const Matrix& features, std::span<const TagSet> tags) const = 0;
  virtual absl::StatusOr<std::vector<int>> Predict(
      const Matrix& features) const = 0;
};

class ModelOracle : public LossOracle {
 public:
  explicit ModelOracle(ModelParams params) : params_(std::move(params)) {}

  absl::StatusOr<Vector> Losses(const Matrix& features,
                                std::span<const int> labels) const override;
  absl::StatusOr<Vector> TagSetLosses(
      const Matrix& features, std::span<const TagSet> tags) const override;
  absl::StatusOr<std::vector<int>> Predict(
      const Matrix& features) const override;

 private:
  ModelParams params_;
};

// Trains a fresh model on `data` under `loss` and hands back query access.
using TrainFn = std::function<absl::StatusOr<std::unique_ptr<LossOracle>>(
    const Batch& data, const LossSpec& loss)>;

// Fraction of rows whose prediction equals the label; NaN for no rows.
absl::StatusOr<double> Accuracy(const LossOracle& oracle,
                                const Matrix& features,
                                std::span<const int> labels);

struct BaselineResult {
  std::vector<double> scores;  // -CE per canary
  int resamples = 0;           // all -1 draws replaced
  std::unique_ptr<LossOracle> model;
};

// Include/exclude game: trains on `always_in` plus the canaries with
// S_i = +1, then scores every canary by its negative loss. An all -1 draw is
// replaced by a fresh one from `rng` and `*membership` is updated.
absl::StatusOr<BaselineResult> RunBaselineO1(const Batch& canaries,
                                             const Batch& always_in,
                                             std::vector<int>* membership,
                                             const TrainFn& train,
                                             std::mt19937_64& rng);

// I_i = L(z~_i) - L(z_i) with z_i = (x_i, comp_i), z~_i = (x_i, member_i) for
// S_i = -1 and the two swapped for S_i = +1.
absl::StatusOr<std::vector<double>> SelfComparisonScores(
    const LossOracle& oracle, const AuditDataset& dataset,
    std::span<const int> membership);

struct SelfComparisonResult {
  std::vector<double> scores;
  std::unique_ptr<LossOracle> model;
};

// Trains on every canary with its member label, then scores.
absl::StatusOr<SelfComparisonResult> RunSelfComparison(
    const AuditDataset& dataset, std::span<const int> membership,
    const TrainFn& train);

struct MultitaskResult {
  std::vector<double> scores;  // one per audit row
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::unique_ptr<LossOracle> model;
};

// Trains on main loss + lambda * tag loss on audit rows, scores audit rows by
// self-comparison of member and comparison tag sets, and measures main-task
// accuracy on `test`. `membership` has one entry per audit row.
absl::StatusOr<MultitaskResult> RunMultitask(const MultiTaskDataset& dataset,
                                             std::span<const int> membership,
                                             const TrainFn& train,
                                             double lambda, const Batch& test);

// r is rounded down to even. The r/2 highest scores get +1, the r/2 lowest
// get -1, the rest 0. Ties go to the lower index first, so with equal scores
// the leading indices are +1 and the trailing ones -1.
absl::StatusOr<std::vector<int>> MiaDecide(std::span<const double> scores,
                                           int r);

enum class EstimatorChoice { kTheorem1, kClopperPearson };

absl::string_view EstimatorName(EstimatorChoice choice);
absl::StatusOr<EstimatorChoice> ParseEstimator(absl::string_view name);

struct AuditOutcome {
  int64_t correct = 0;  // W
  int64_t guesses = 0;  // r
  int64_t canaries = 0; // m
  double epsilon_lower = 0.0;
  double epsilon_optimal = 0.0;
  double auc = 0.0;
};

// Best bound the chosen estimator can certify from m canaries.
double OptimalEpsilon(EstimatorChoice choice, int64_t m, double delta,
                      double confidence);

absl::StatusOr<AuditOutcome> ComputeOutcome(std::span<const int> membership,
                                            std::span<const int> guesses,
                                            std::span<const double> scores,
                                            double delta, double confidence,
                                            EstimatorChoice choice);

}  // namespace dpaudit

#endif  // DPAUDIT_AUDIT_H_
