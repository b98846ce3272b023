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

#ifndef DPAUDIT_TENSOR_NN_H_
#define DPAUDIT_TENSOR_NN_H_

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace dpaudit {

// Dense row-major matrix of doubles. Rows are samples wherever a matrix holds
// a batch.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// A multi-bit tag: exactly H distinct indices in [0, C_e), sorted ascending.
using TagSet = std::vector<int>;

// Auxiliary linear head mapping the hidden layer to C_e tag logits.
struct TagHead {
  Matrix weight;  // d_h x C_e
  Vector bias;    // C_e
};

// Parameters of the two-layer ReLU network
//   logits = ReLU(x W1 + b1) W2 + b2
// with an optional tag head on the hidden layer. The same struct doubles as a
// gradient container: per-example gradients have exactly this shape.
struct ModelParams {
  Matrix w1;  // d_x x d_h
  Vector b1;  // d_h
  Matrix w2;  // d_h x C
  Vector b2;  // C
  std::optional<TagHead> tag_head;

  int input_dim() const { return static_cast<int>(w1.rows()); }
  int hidden_dim() const { return static_cast<int>(w1.cols()); }
  int num_classes() const { return static_cast<int>(w2.cols()); }
  int tag_classes() const {
    return tag_head ? static_cast<int>(tag_head->weight.cols()) : 0;
  }
  int64_t num_parameters() const;
};

// Checks block shapes agree with each other and every entry is finite.
absl::Status ValidateParams(const ModelParams& params);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases of every
// layer. `tag_classes` == 0 means no tag head.
ModelParams InitParams(int input_dim, int hidden_dim, int num_classes,
                       int tag_classes, std::mt19937_64& rng);

// All-zero parameters with the same shape as `like`.
ModelParams ZerosLike(const ModelParams& like);

// Squared L2 norm of the flattened concatenation of all blocks.
double SquaredNorm(const ModelParams& p);
inline double FlatNorm(const ModelParams& p) {
  return std::sqrt(SquaredNorm(p));
}

void Scale(double factor, ModelParams* p);
// dst += factor * src. Shapes must match.
void AddScaled(const ModelParams& src, double factor, ModelParams* dst);

// A set of training or evaluation rows.
struct Batch {
  Matrix features;          // B x d_x
  std::vector<int> labels;  // B, each in [0, C)
  // Empty, or one tag set per row. A row without a tag carries an empty set.
  std::vector<TagSet> tags;
  // Empty, or one flag per row in {-1, 0, +1}. The tag loss term only applies
  // to rows flagged +1.
  std::vector<int> flags;

  int size() const { return static_cast<int>(features.rows()); }
};

// Checks label ranges, tag-set sizes (exactly `tag_size` when non-empty) and
// feature finiteness. Pass tag_classes = 0 when no tags are expected.
absl::Status ValidateBatch(const Batch& batch, int num_classes,
                           int tag_classes, int tag_size);

// Rows selected by `indices`, in that order.
Batch SelectRows(const Batch& batch, std::span<const int> indices);

struct ForwardResult {
  Matrix logits;  // B x C
  Matrix hidden;  // B x d_h, post-ReLU
};

absl::StatusOr<ForwardResult> Forward(const ModelParams& params,
                                      const Matrix& features);

// hidden * tag_weight + tag_bias.
absl::StatusOr<Matrix> TagForward(const ModelParams& params,
                                  const Matrix& hidden);

// Per-row -log softmax(logits_i)[label_i] using max-subtraction.
absl::StatusOr<Vector> CrossEntropy(const Matrix& logits,
                                    std::span<const int> labels);

// Row-wise softmax of max-subtracted logits.
Matrix Softmax(const Matrix& logits);

// Training loss of the multi-bit tag head: independent binary cross-entropy
// on every one of the C_e coordinates, targets 1 on the H coordinates of the
// row's tag set. Rows with an empty tag set contribute 0.
Vector TagBinaryCrossEntropy(const Matrix& tag_logits,
                             std::span<const TagSet> tags);

// Scoring loss of a tag set: minus the sum of log-sigmoid over its H
// coordinates.
Vector TagSetLoss(const Matrix& tag_logits, std::span<const TagSet> tags);

// Selects which objective a gradient or loss refers to.
struct LossSpec {
  enum class Kind {
    kMain,      // cross-entropy on labels
    kTag,       // tag BCE on every row that carries a tag set
    kCombined,  // main + lambda * tag BCE on rows flagged +1
  };
  Kind kind = Kind::kMain;
  double lambda = 1.0;

  static LossSpec Main() { return {Kind::kMain, 1.0}; }
  static LossSpec Tag() { return {Kind::kTag, 1.0}; }
  static LossSpec Combined(double lambda) { return {Kind::kCombined, lambda}; }
};

// Per-example loss under `spec`.
absl::StatusOr<Vector> PerSampleLoss(const ModelParams& params,
                                     const Batch& batch, const LossSpec& spec);

// One gradient set per row, computed row by row with no aggregation.
absl::StatusOr<std::vector<ModelParams>> PerSampleGrads(
    const ModelParams& params, const Batch& batch, const LossSpec& spec);

// Factored per-example gradients of a whole batch. Every per-example weight
// gradient is an outer product, so norms and weighted sums can be formed
// without materializing B full gradient sets:
//   grad_i W1 = x_i^T dh_i,  grad_i W2 = h_i^T do_i,  grad_i Wt = h_i^T dt_i.
class GradFactors {
 public:
  static absl::StatusOr<GradFactors> Compute(const ModelParams& params,
                                             const Batch& batch,
                                             const LossSpec& spec);

  int size() const { return static_cast<int>(inputs_.rows()); }

  // ||g_i||^2 over the flattened parameter vector, per row.
  Vector SquaredNorms() const;

  // sum_i coeffs[i] * g_i.
  ModelParams WeightedSum(std::span<const double> coeffs) const;

 private:
  GradFactors() = default;

  Matrix inputs_;       // B x d_x
  Matrix hidden_;       // B x d_h
  Matrix d_hidden_;     // B x d_h, gradient w.r.t. pre-activation
  Matrix d_logits_;     // B x C
  Matrix d_tag_;        // B x C_e, empty without a tag head
  bool has_tag_head_ = false;
};

// Index of the largest logit per row; ties go to the lowest class.
std::vector<int> Argmax(const Matrix& logits);

}  // namespace dpaudit

#endif  // DPAUDIT_TENSOR_NN_H_
