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

#include "dpaudit/tensor_nn.h"

#include <algorithm>
#include <cmath>
#include <utility>

#include "absl/strings/str_cat.h"

namespace dpaudit {
namespace {

// log(1 + exp(u)) without overflow.
double Softplus(double u) {
  return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u)));
}

// exp(z) with results below e^-600 flushed to 0. Subnormal intermediates
// make the backward pass orders of magnitude slower once logits spread out.
constexpr double kExpFloor = -600.0;

double FlushedExp(double z) { return z < kExpFloor ? 0.0 : std::exp(z); }

double Sigmoid(double u) {
  if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
  const double e = FlushedExp(u);
  return e / (1.0 + e);
}

bool NeedsTagHead(const LossSpec& spec) {
  return spec.kind != LossSpec::Kind::kMain;
}

// Weight of the main cross-entropy and of the tag BCE for row i.
std::pair<double, double> RowWeights(const Batch& batch, const LossSpec& spec,
                                     int i) {
  const bool has_tag = !batch.tags.empty() && !batch.tags[i].empty();
  switch (spec.kind) {
    case LossSpec::Kind::kMain:
      return {1.0, 0.0};
    case LossSpec::Kind::kTag:
      return {0.0, has_tag ? 1.0 : 0.0};
    case LossSpec::Kind::kCombined: {
      const bool flagged = !batch.flags.empty() && batch.flags[i] == 1;
      return {1.0, (has_tag && flagged) ? spec.lambda : 0.0};
    }
  }
  return {1.0, 0.0};
}

absl::Status CheckLossInputs(const ModelParams& params, const Batch& batch,
                             const LossSpec& spec) {
  if (NeedsTagHead(spec) && !params.tag_head) {
    return absl::InvalidArgumentError("tag loss requested without a tag head");
  }
  if (batch.features.cols() != params.input_dim()) {
    return absl::InvalidArgumentError(
        absl::StrCat("feature dimension ", batch.features.cols(),
                     " does not match model input dimension ",
                     params.input_dim()));
  }
  if (static_cast<int>(batch.labels.size()) != batch.size()) {
    return absl::InvalidArgumentError("labels and features differ in length");
  }
  for (int y : batch.labels) {
    if (y < 0 || y >= params.num_classes()) {
      return absl::InvalidArgumentError(absl::StrCat("label ", y,
                                                     " out of range"));
    }
  }
  if (!batch.tags.empty()) {
    if (static_cast<int>(batch.tags.size()) != batch.size()) {
      return absl::InvalidArgumentError("tags and features differ in length");
    }
    for (const TagSet& t : batch.tags) {
      for (int e : t) {
        if (e < 0 || e >= params.tag_classes()) {
          return absl::InvalidArgumentError(absl::StrCat("tag ", e,
                                                         " out of range"));
        }
      }
    }
  }
  if (!batch.flags.empty() &&
      static_cast<int>(batch.flags.size()) != batch.size()) {
    return absl::InvalidArgumentError("flags and features differ in length");
  }
  return absl::OkStatus();
}

// Pre-activation of the hidden layer.
Matrix PreActivation(const ModelParams& params, const Matrix& features) {
  Matrix pre = features * params.w1;
  pre.rowwise() += params.b1.transpose();
  return pre;
}

}  // namespace

int64_t ModelParams::num_parameters() const {
  int64_t n = w1.size() + b1.size() + w2.size() + b2.size();
  if (tag_head) n += tag_head->weight.size() + tag_head->bias.size();
  return n;
}

absl::Status ValidateParams(const ModelParams& params) {
  if (params.b1.size() != params.w1.cols() ||
      params.w2.rows() != params.w1.cols() ||
      params.b2.size() != params.w2.cols()) {
    return absl::InvalidArgumentError("inconsistent layer dimensions");
  }
  if (params.tag_head && (params.tag_head->weight.rows() != params.w1.cols() ||
                          params.tag_head->bias.size() !=
                              params.tag_head->weight.cols())) {
    return absl::InvalidArgumentError("inconsistent tag head dimensions");
  }
  bool finite = params.w1.allFinite() && params.b1.allFinite() &&
                params.w2.allFinite() && params.b2.allFinite();
  if (params.tag_head) {
    finite = finite && params.tag_head->weight.allFinite() &&
             params.tag_head->bias.allFinite();
  }
  if (!finite) return absl::OutOfRangeError("non-finite parameter entries");
  return absl::OkStatus();
}

ModelParams InitParams(int input_dim, int hidden_dim, int num_classes,
                       int tag_classes, std::mt19937_64& rng) {
  auto uniform_fill = [&rng](Eigen::Index rows, Eigen::Index cols,
                             int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
  };
  ModelParams p;
  p.w1 = uniform_fill(input_dim, hidden_dim, input_dim);
  p.b1 = uniform_fill(hidden_dim, 1, input_dim).col(0);
  p.w2 = uniform_fill(hidden_dim, num_classes, hidden_dim);
  p.b2 = uniform_fill(num_classes, 1, hidden_dim).col(0);
  if (tag_classes > 0) {
    TagHead head;
    head.weight = uniform_fill(hidden_dim, tag_classes, hidden_dim);
    head.bias = uniform_fill(tag_classes, 1, hidden_dim).col(0);
    p.tag_head = std::move(head);
  }
  return p;
}

ModelParams ZerosLike(const ModelParams& like) {
  ModelParams z;
  z.w1 = Matrix::Zero(like.w1.rows(), like.w1.cols());
  z.b1 = Vector::Zero(like.b1.size());
  z.w2 = Matrix::Zero(like.w2.rows(), like.w2.cols());
  z.b2 = Vector::Zero(like.b2.size());
  if (like.tag_head) {
    z.tag_head = TagHead{
        Matrix::Zero(like.tag_head->weight.rows(),
                     like.tag_head->weight.cols()),
        Vector::Zero(like.tag_head->bias.size())};
  }
  return z;
}

double SquaredNorm(const ModelParams& p) {
  double s = p.w1.squaredNorm() + p.b1.squaredNorm() + p.w2.squaredNorm() +
             p.b2.squaredNorm();
  if (p.tag_head) {
    s += p.tag_head->weight.squaredNorm() + p.tag_head->bias.squaredNorm();
  }
  return s;
}

void Scale(double factor, ModelParams* p) {
  p->w1 *= factor;
  p->b1 *= factor;
  p->w2 *= factor;
  p->b2 *= factor;
  if (p->tag_head) {
    p->tag_head->weight *= factor;
    p->tag_head->bias *= factor;
  }
}

void AddScaled(const ModelParams& src, double factor, ModelParams* dst) {
  dst->w1.noalias() += factor * src.w1;
  dst->b1.noalias() += factor * src.b1;
  dst->w2.noalias() += factor * src.w2;
  dst->b2.noalias() += factor * src.b2;
  if (src.tag_head && dst->tag_head) {
    dst->tag_head->weight.noalias() += factor * src.tag_head->weight;
    dst->tag_head->bias.noalias() += factor * src.tag_head->bias;
  }
}

absl::Status ValidateBatch(const Batch& batch, int num_classes,
                           int tag_classes, int tag_size) {
  if (static_cast<int>(batch.labels.size()) != batch.size()) {
    return absl::InvalidArgumentError("labels and features differ in length");
  }
  for (int y : batch.labels) {
    if (y < 0 || y >= num_classes) {
      return absl::InvalidArgumentError(absl::StrCat("label ", y,
                                                     " out of range"));
    }
  }
  if (!batch.features.allFinite()) {
    return absl::InvalidArgumentError("non-finite feature values");
  }
  if (!batch.tags.empty()) {
    if (static_cast<int>(batch.tags.size()) != batch.size()) {
      return absl::InvalidArgumentError("tags and features differ in length");
    }
    for (const TagSet& t : batch.tags) {
      if (t.empty()) continue;
      if (static_cast<int>(t.size()) != tag_size) {
        return absl::InvalidArgumentError(
            absl::StrCat("tag set has ", t.size(), " elements, expected ",
                         tag_size));
      }
      for (size_t k = 0; k < t.size(); ++k) {
        if (t[k] < 0 || t[k] >= tag_classes ||
            (k > 0 && t[k] <= t[k - 1])) {
          return absl::InvalidArgumentError("malformed tag set");
        }
      }
    }
  }
  if (!batch.flags.empty()) {
    if (static_cast<int>(batch.flags.size()) != batch.size()) {
      return absl::InvalidArgumentError("flags and features differ in length");
    }
    for (int f : batch.flags) {
      if (f < -1 || f > 1) {
        return absl::InvalidArgumentError("flag outside {-1, 0, +1}");
      }
    }
  }
  return absl::OkStatus();
}

Batch SelectRows(const Batch& batch, std::span<const int> indices) {
  Batch out;
  out.features.resize(static_cast<Eigen::Index>(indices.size()),
                      batch.features.cols());
  out.labels.reserve(indices.size());
  for (size_t k = 0; k < indices.size(); ++k) {
    out.features.row(static_cast<Eigen::Index>(k)) =
        batch.features.row(indices[k]);
    out.labels.push_back(batch.labels[indices[k]]);
    if (!batch.tags.empty()) out.tags.push_back(batch.tags[indices[k]]);
    if (!batch.flags.empty()) out.flags.push_back(batch.flags[indices[k]]);
  }
  return out;
}

absl::StatusOr<ForwardResult> Forward(const ModelParams& params,
                                      const Matrix& features) {
  if (features.cols() != params.input_dim()) {
    return absl::InvalidArgumentError(
        absl::StrCat("feature dimension ", features.cols(),
                     " does not match model input dimension ",
                     params.input_dim()));
  }
  ForwardResult out;
  out.hidden = PreActivation(params, features).cwiseMax(0.0);
  out.logits = out.hidden * params.w2;
  out.logits.rowwise() += params.b2.transpose();
  return out;
}

absl::StatusOr<Matrix> TagForward(const ModelParams& params,
                                  const Matrix& hidden) {
  if (!params.tag_head) {
    return absl::InvalidArgumentError("model has no tag head");
  }
  if (hidden.cols() != params.hidden_dim()) {
    return absl::InvalidArgumentError("hidden dimension mismatch");
  }
  Matrix out = hidden * params.tag_head->weight;
  out.rowwise() += params.tag_head->bias.transpose();
  return out;
}

absl::StatusOr<Vector> CrossEntropy(const Matrix& logits,
                                    std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
    return absl::InvalidArgumentError("labels and logits differ in length");
  }
  if (!logits.allFinite()) {
    return absl::OutOfRangeError("non-finite logits");
  }
  Vector loss(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= logits.cols()) {
      return absl::InvalidArgumentError(absl::StrCat("label ", y,
                                                     " out of range"));
    }
    const double mx = logits.row(i).maxCoeff();
    const double lse =
        mx + std::log((logits.row(i).array() - mx).exp().sum());
    loss[i] = lse - logits(i, y);
  }
  return loss;
}

Matrix Softmax(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - mx).unaryExpr(&FlushedExp);
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Vector TagBinaryCrossEntropy(const Matrix& tag_logits,
                             std::span<const TagSet> tags) {
  Vector loss = Vector::Zero(tag_logits.rows());
  for (Eigen::Index i = 0; i < tag_logits.rows(); ++i) {
    if (tags[i].empty()) continue;
    double s = 0.0;
    for (Eigen::Index j = 0; j < tag_logits.cols(); ++j) {
      s += Softplus(tag_logits(i, j));
    }
    for (int e : tags[i]) s -= tag_logits(i, e);
    loss[i] = s;
  }
  return loss;
}

Vector TagSetLoss(const Matrix& tag_logits, std::span<const TagSet> tags) {
  Vector loss = Vector::Zero(tag_logits.rows());
  for (Eigen::Index i = 0; i < tag_logits.rows(); ++i) {
    // -log sigmoid(u) = softplus(-u)
    for (int e : tags[i]) loss[i] += Softplus(-tag_logits(i, e));
  }
  return loss;
}

absl::StatusOr<Vector> PerSampleLoss(const ModelParams& params,
                                     const Batch& batch,
                                     const LossSpec& spec) {
  if (absl::Status s = CheckLossInputs(params, batch, spec); !s.ok()) return s;
  absl::StatusOr<ForwardResult> fwd = Forward(params, batch.features);
  if (!fwd.ok()) return fwd.status();
  absl::StatusOr<Vector> ce = CrossEntropy(fwd->logits, batch.labels);
  if (!ce.ok()) return ce.status();
  Vector tag_loss = Vector::Zero(batch.size());
  if (NeedsTagHead(spec) && !batch.tags.empty()) {
    absl::StatusOr<Matrix> tl = TagForward(params, fwd->hidden);
    if (!tl.ok()) return tl.status();
    tag_loss = TagBinaryCrossEntropy(*tl, batch.tags);
  }
  Vector out(batch.size());
  for (int i = 0; i < batch.size(); ++i) {
    const auto [w_main, w_tag] = RowWeights(batch, spec, i);
    out[i] = w_main * (*ce)[i] + w_tag * tag_loss[i];
  }
  return out;
}

absl::StatusOr<std::vector<ModelParams>> PerSampleGrads(
    const ModelParams& params, const Batch& batch, const LossSpec& spec) {
  if (absl::Status s = CheckLossInputs(params, batch, spec); !s.ok()) return s;
  std::vector<ModelParams> grads;
  grads.reserve(batch.size());
  const int d_h = params.hidden_dim();
  for (int i = 0; i < batch.size(); ++i) {
    const auto [w_main, w_tag] = RowWeights(batch, spec, i);
    const Eigen::RowVectorXd x = batch.features.row(i);
    const Eigen::RowVectorXd pre = x * params.w1 + params.b1.transpose();
    const Eigen::RowVectorXd h = pre.cwiseMax(0.0);
    Eigen::RowVectorXd logits = h * params.w2 + params.b2.transpose();
    if (!logits.allFinite()) return absl::OutOfRangeError("non-finite logits");

    const double mx = logits.maxCoeff();
    Eigen::RowVectorXd d_logits = (logits.array() - mx).unaryExpr(&FlushedExp);
    d_logits /= d_logits.sum();
    d_logits[batch.labels[i]] -= 1.0;
    d_logits *= w_main;

    Eigen::RowVectorXd d_h_post = d_logits * params.w2.transpose();
    ModelParams g;
    if (params.tag_head) {
      const TagHead& head = *params.tag_head;
      const Eigen::RowVectorXd u = h * head.weight + head.bias.transpose();
      Eigen::RowVectorXd d_tag(u.size());
      for (Eigen::Index j = 0; j < u.size(); ++j) d_tag[j] = Sigmoid(u[j]);
      if (w_tag != 0.0) {
        for (int e : batch.tags[i]) d_tag[e] -= 1.0;
        d_tag *= w_tag;
      } else {
        d_tag.setZero();
      }
      d_h_post += d_tag * head.weight.transpose();
      g.tag_head = TagHead{h.transpose() * d_tag, d_tag.transpose()};
    }
    Eigen::RowVectorXd d_pre(d_h);
    for (int k = 0; k < d_h; ++k) d_pre[k] = pre[k] > 0.0 ? d_h_post[k] : 0.0;

    g.w1 = x.transpose() * d_pre;
    g.b1 = d_pre.transpose();
    g.w2 = h.transpose() * d_logits;
    g.b2 = d_logits.transpose();
    grads.push_back(std::move(g));
  }
  return grads;
}

absl::StatusOr<GradFactors> GradFactors::Compute(const ModelParams& params,
                                                 const Batch& batch,
                                                 const LossSpec& spec) {
  if (absl::Status s = CheckLossInputs(params, batch, spec); !s.ok()) return s;
  GradFactors f;
  f.has_tag_head_ = params.tag_head.has_value();
  f.inputs_ = batch.features;
  const Matrix pre = PreActivation(params, batch.features);
  f.hidden_ = pre.cwiseMax(0.0);
  Matrix logits = f.hidden_ * params.w2;
  logits.rowwise() += params.b2.transpose();
  if (!logits.allFinite()) return absl::OutOfRangeError("non-finite logits");

  f.d_logits_ = Softmax(logits);
  for (int i = 0; i < batch.size(); ++i) {
    const double w_main = RowWeights(batch, spec, i).first;
    f.d_logits_(i, batch.labels[i]) -= 1.0;
    f.d_logits_.row(i) *= w_main;
  }
  Matrix d_post = f.d_logits_ * params.w2.transpose();

  if (f.has_tag_head_) {
    const TagHead& head = *params.tag_head;
    Matrix u = f.hidden_ * head.weight;
    u.rowwise() += head.bias.transpose();
    f.d_tag_.resize(u.rows(), u.cols());
    for (int i = 0; i < batch.size(); ++i) {
      const double w_tag = RowWeights(batch, spec, i).second;
      if (w_tag == 0.0) {
        f.d_tag_.row(i).setZero();
        continue;
      }
      for (Eigen::Index j = 0; j < u.cols(); ++j) {
        f.d_tag_(i, j) = Sigmoid(u(i, j));
      }
      for (int e : batch.tags[i]) f.d_tag_(i, e) -= 1.0;
      f.d_tag_.row(i) *= w_tag;
    }
    d_post.noalias() += f.d_tag_ * head.weight.transpose();
  }
  f.d_hidden_ = (pre.array() > 0.0).select(d_post, 0.0);
  return f;
}

Vector GradFactors::SquaredNorms() const {
  const Vector x2 = inputs_.rowwise().squaredNorm();
  const Vector h2 = hidden_.rowwise().squaredNorm();
  const Vector dh2 = d_hidden_.rowwise().squaredNorm();
  Vector dout2 = d_logits_.rowwise().squaredNorm();
  if (has_tag_head_) dout2 += d_tag_.rowwise().squaredNorm();
  return (x2.array() * dh2.array() + dh2.array() + h2.array() * dout2.array() +
          dout2.array())
      .matrix();
}

ModelParams GradFactors::WeightedSum(std::span<const double> coeffs) const {
  const Eigen::Map<const Vector> c(coeffs.data(),
                                   static_cast<Eigen::Index>(coeffs.size()));
  const Matrix scaled_dh = c.asDiagonal() * d_hidden_;
  const Matrix scaled_do = c.asDiagonal() * d_logits_;
  ModelParams g;
  g.w1.noalias() = inputs_.transpose() * scaled_dh;
  g.b1 = scaled_dh.colwise().sum().transpose();
  g.w2.noalias() = hidden_.transpose() * scaled_do;
  g.b2 = scaled_do.colwise().sum().transpose();
  if (has_tag_head_) {
    const Matrix scaled_dt = c.asDiagonal() * d_tag_;
    g.tag_head = TagHead{hidden_.transpose() * scaled_dt,
                         scaled_dt.colwise().sum().transpose()};
  }
  return g;
}

std::vector<int> Argmax(const Matrix& logits) {
  std::vector<int> out(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < logits.cols(); ++j) {
      if (logits(i, j) > logits(i, best)) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace dpaudit
