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

// Audit dataset construction: synthetic uncorrelated canaries, comparison
// labels, trigger/tag datasets for auditing alongside a main task, and the
// label-correlated toy distribution.

#ifndef DPAUDIT_CANARY_H_
#define DPAUDIT_CANARY_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "dpaudit/tensor_nn.h"

namespace dpaudit {

enum class CanaryMode { kGaussian, kOrthogonal };

absl::string_view CanaryModeName(CanaryMode mode);
absl::StatusOr<CanaryMode> ParseCanaryMode(absl::string_view name);

struct AuditDataset {
  Matrix features;                 // m x d_x
  std::vector<int> member_labels;  // trained targets
  std::vector<int> comp_labels;    // independent counterfactual targets
  int num_classes = 0;
  CanaryMode mode = CanaryMode::kOrthogonal;
  double sigma0 = 0.1;
  uint64_t seed = 0;  // provenance only

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  // Rows paired with member labels.
  Batch MemberBatch() const;
};

// Orthogonal mode: rows of U Q^T, with Q from the QR decomposition of a
// d_x x d_x standard normal matrix and U an m x d_x standard normal matrix
// with unit rows. Gaussian mode: N(0, sigma0^2) entries scaled once more by
// sigma0. Member and comparison labels are independent uniform draws.
absl::StatusOr<AuditDataset> GenSynthetic(int m, int dim, int num_classes,
                                          CanaryMode mode, double sigma0,
                                          std::mt19937_64& rng);

// Fresh uniform labels, independent of the member labels; collisions with
// the member label are kept.
std::vector<int> GenCompLabels(const AuditDataset& dataset,
                               std::mt19937_64& rng);

struct ToyDataset {
  Matrix features;  // n x d
  std::vector<int> labels;
  int num_classes = 0;
  double a = 1.0;
  double b = 0.0;
  double sigma0 = 0.1;

  int size() const { return static_cast<int>(features.rows()); }
  Batch AsBatch() const;
};

// Every coordinate is a * (y + sigma0 z1) + b * sigma0 z2.
absl::StatusOr<ToyDataset> GenToy(int n, int dim, int num_classes, double a,
                                  double b, double sigma0,
                                  std::mt19937_64& rng);

// Uniformly random `size`-subset of [0, universe), sorted.
TagSet SampleTagSet(int universe, int size, std::mt19937_64& rng);

struct MultiTaskDataset {
  Matrix features;  // n x d_x, audit rows carry their trigger
  std::vector<int> labels;
  int num_classes = 0;
  int tag_classes = 0;
  int tag_size = 0;
  int trigger_dim = 0;
  std::vector<int> audit_indices;   // sorted row indices of audit rows
  std::vector<TagSet> member_tags;  // per audit row, trained
  std::vector<TagSet> comp_tags;    // per audit row, != member tag
  std::vector<int> flags;           // per row: 1 audit, 0 otherwise

  int size() const { return static_cast<int>(features.rows()); }
  int num_audit() const { return static_cast<int>(audit_indices.size()); }
  // All n rows with member tags on audit rows and flags attached.
  Batch TrainingBatch() const;
};

// Picks m rows of `base` uniformly, overwrites their first `trigger_dim`
// coordinates with a N(0, 1) trigger and attaches a random tag set of size
// `tag_size` plus a distinct comparison tag set. Other rows are copied as is.
absl::StatusOr<MultiTaskDataset> BuildMultitask(const ToyDataset& base, int m,
                                                int tag_classes, int tag_size,
                                                int trigger_dim,
                                                std::mt19937_64& rng);

// Same, drawing the base rows from GenToy(base_n, dim, C, a = 1, b, sigma0).
absl::StatusOr<MultiTaskDataset> BuildMultitask(
    int base_n, int m, int dim, int num_classes, int tag_classes, int tag_size,
    int trigger_dim, double toy_b, double sigma0, std::mt19937_64& rng);

struct TagCollisionStats {
  double log10_space = 0.0;  // log10 of N = C(C_e, H)
  std::string space;         // N in decimal
  double exact_probability = 0.0;   // 1 - prod_{i<m} (1 - i/N)
  double approx_probability = 0.0;  // m^2 / (2N)
  double pair_probability = 0.0;    // m (m - 1) / (2N), expected pair count
  // Smallest N with m <= sqrt(2N), i.e. ceil(m^2 / 2).
  uint64_t min_space_for_m = 0;
  double head_reduction_factor = 0.0;  // 1 / N
};

absl::StatusOr<TagCollisionStats> ComputeTagCollisionStats(int m,
                                                           int tag_classes,
                                                           int tag_size);

// Replaces the label of each row in `rows` with a uniform draw from the other
// C - 1 classes and returns the previous labels.
std::vector<int> MislabelRows(std::span<const int> rows, int num_classes,
                              std::mt19937_64& rng, std::vector<int>* labels);

// Columnar text round trip for AuditDataset. Header lines
//   dpaudit-dataset,1
//   m,d_x,C,mode,sigma0,seed
//   <values>
// then one line per row: d_x features, member label, comparison label.
absl::Status WriteAuditDataset(const AuditDataset& dataset,
                               const std::string& path);
absl::StatusOr<AuditDataset> ReadAuditDataset(const std::string& path);

}  // namespace dpaudit

#endif  // DPAUDIT_CANARY_H_
