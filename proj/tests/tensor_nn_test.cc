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
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "gradient_check.h"
#include "test_util.h"

namespace dpaudit {
namespace {

using ::dpaudit::testing::Flatten;
using ::dpaudit::testing::Scalars;
using ::dpaudit::testing::FdConfig;
using ::dpaudit::testing::FdConfigs;
using ::dpaudit::testing::RandomBatch;
using ::dpaudit::testing::RelativeError;

// Plain triple loops, no Eigen products.
Matrix NaiveLogits(const ModelParams& p, const Matrix& x) {
  const int b = static_cast<int>(x.rows());
  Matrix out(b, p.num_classes());
  for (int i = 0; i < b; ++i) {
    std::vector<double> h(p.hidden_dim());
    for (int j = 0; j < p.hidden_dim(); ++j) {
      double s = p.b1(j);
      for (int k = 0; k < p.input_dim(); ++k) s += x(i, k) * p.w1(k, j);
      h[j] = s > 0 ? s : 0;
    }
    for (int c = 0; c < p.num_classes(); ++c) {
      double s = p.b2(c);
      for (int j = 0; j < p.hidden_dim(); ++j) s += h[j] * p.w2(j, c);
      out(i, c) = s;
    }
  }
  return out;
}

TEST(ForwardTest, MatchesNaiveLoops) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int dx = 1 + trial % 7, dh = 2 + trial % 5, c = 2 + trial % 4;
    ModelParams p = InitParams(dx, dh, c, 0, rng);
    Batch batch = RandomBatch(1 + trial % 6, dx, c, 0, 0, false, rng);
    absl::StatusOr<ForwardResult> fwd = Forward(p, batch.features);
    ASSERT_TRUE(fwd.ok()) << fwd.status();
    const Matrix naive = NaiveLogits(p, batch.features);
    for (int i = 0; i < naive.rows(); ++i) {
      for (int j = 0; j < naive.cols(); ++j) {
        EXPECT_NEAR(fwd->logits(i, j), naive(i, j), 1e-12)
            << "trial=" << trial;
      }
    }
  }
}

TEST(ForwardTest, RejectsShapeMismatch) {
  std::mt19937_64 rng(1);
  ModelParams p = InitParams(4, 3, 2, 0, rng);
  EXPECT_FALSE(Forward(p, Matrix::Zero(2, 5)).ok());
}

TEST(InitParamsTest, RangeAndShapes) {
  std::mt19937_64 rng(3);
  ModelParams p = InitParams(16, 9, 4, 6, rng);
  EXPECT_EQ(p.num_parameters(), 16 * 9 + 9 + 9 * 4 + 4 + 9 * 6 + 6);
  EXPECT_TRUE(ValidateParams(p).ok());
  EXPECT_LE(p.w1.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(16.0));
  EXPECT_LE(p.w2.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(9.0));
  EXPECT_LE(p.tag_head->weight.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(9.0));
}

TEST(CrossEntropyTest, StableForLargeLogits) {
  Matrix logits(3, 3);
  logits << 1000, 0, -1000,  //
      0, 0, 0,               //
      -5e3, 5e3, 0;
  const std::vector<int> labels = {0, 1, 0};
  absl::StatusOr<Vector> ce = CrossEntropy(logits, labels);
  ASSERT_TRUE(ce.ok());
  EXPECT_NEAR((*ce)(0), 0.0, 1e-12);
  EXPECT_NEAR((*ce)(1), std::log(3.0), 1e-12);
  EXPECT_NEAR((*ce)(2), 1e4, 1e-6);
  EXPECT_TRUE(ce->allFinite());
}

TEST(CrossEntropyTest, HandComputedValue) {
  Matrix logits(1, 3);
  logits << 1.0, 2.0, 3.0;
  const std::vector<int> labels = {2};
  const double want =
      -std::log(std::exp(3.0) /
                (std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
  EXPECT_NEAR((*CrossEntropy(logits, labels))(0), want, 1e-14);
  EXPECT_NEAR(want, 0.40760596, 1e-8);
}

TEST(CrossEntropyTest, RejectsBadLabel) {
  const std::vector<int> labels = {3};
  EXPECT_FALSE(CrossEntropy(Matrix::Zero(1, 3), labels).ok());
}

TEST(SoftmaxTest, RowsSumToOne) {
  Matrix logits(2, 4);
  logits << 1, 2, 3, 4, -800, 0, 800, 1;
  const Matrix s = Softmax(logits);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(s.row(i).sum(), 1.0, 1e-12);
  EXPECT_NEAR(s(1, 2), 1.0, 1e-12);
}

TEST(TagLossTest, TagSetLossIsSumOfNegLogSigmoid) {
  Matrix logits(1, 4);
  logits << 2.0, -1.0, 0.5, -30.0;
  const std::vector<TagSet> tags = {{1, 3}};
  const Vector loss = TagSetLoss(logits, tags);
  auto nls = [](double u) { return std::log1p(std::exp(-u)); };
  EXPECT_NEAR(loss(0), nls(-1.0) + nls(-30.0), 1e-12);
  const Vector bce = TagBinaryCrossEntropy(logits, tags);
  EXPECT_NEAR(bce(0), nls(-1.0) + nls(-30.0) + nls(-2.0) + nls(-0.5), 1e-12);
  const std::vector<TagSet> empty = {{}};
  EXPECT_EQ(TagBinaryCrossEntropy(logits, empty)(0), 0.0);
}

TEST(ValidateBatchTest, TagSizeEnforced) {
  std::mt19937_64 rng(5);
  Batch batch = RandomBatch(3, 4, 3, 6, 2, true, rng);
  EXPECT_TRUE(ValidateBatch(batch, 3, 6, 2).ok());
  EXPECT_FALSE(ValidateBatch(batch, 3, 6, 3).ok());
  batch.labels[0] = 7;
  EXPECT_FALSE(ValidateBatch(batch, 3, 6, 2).ok());
}

TEST(ArgmaxTest, TiesGoLow) {
  Matrix logits(2, 3);
  logits << 1, 1, 0, 0, 2, 2;
  EXPECT_EQ(Argmax(logits), (std::vector<int>{0, 1}));
}

TEST(GradientTest, PerSampleMatchesFiniteDifferences) {
  std::mt19937_64 rng(99);
  const testing::GradientErrors err = testing::CheckGradients(FdConfigs(), rng);
  EXPECT_GT(err.rows, 50);
  EXPECT_LT(err.norm, 1e-4);
  EXPECT_LT(err.coordinate, 1e-4);
}

TEST(GradientTest, FactoredRouteMatchesExplicit) {
  std::mt19937_64 rng(11);
  for (const FdConfig& cfg : FdConfigs()) {
    ModelParams p = InitParams(cfg.dx, cfg.dh, cfg.c, cfg.ce, rng);
    Batch batch = RandomBatch(cfg.b, cfg.dx, cfg.c, cfg.ce, cfg.h, cfg.ce > 0,
                              rng);
    absl::StatusOr<std::vector<ModelParams>> grads =
        PerSampleGrads(p, batch, cfg.spec);
    absl::StatusOr<GradFactors> factors =
        GradFactors::Compute(p, batch, cfg.spec);
    ASSERT_TRUE(grads.ok() && factors.ok());
    const Vector norms = factors->SquaredNorms();
    std::vector<double> coeffs(batch.size());
    ModelParams expected_sum = ZerosLike(p);
    for (int i = 0; i < batch.size(); ++i) {
      EXPECT_NEAR(norms(i), SquaredNorm((*grads)[i]),
                  1e-10 * (1 + norms(i)));
      std::vector<double> onehot(batch.size(), 0.0);
      onehot[i] = 1.0;
      EXPECT_LT(RelativeError(Flatten(factors->WeightedSum(onehot)),
                              Flatten((*grads)[i])),
                1e-12);
      coeffs[i] = 0.3 * (i + 1);
      AddScaled((*grads)[i], coeffs[i], &expected_sum);
    }
    EXPECT_LT(RelativeError(Flatten(factors->WeightedSum(coeffs)),
                            Flatten(expected_sum)),
              1e-12);
  }
}

TEST(GradientTest, TagTermOnlyOnFlaggedRows) {
  std::mt19937_64 rng(4);
  ModelParams p = InitParams(3, 4, 3, 5, rng);
  Batch batch = RandomBatch(2, 3, 3, 5, 2, true, rng);
  batch.tags[0] = {0, 1};
  batch.tags[1] = {2, 4};
  batch.flags = {0, 1};
  absl::StatusOr<Vector> main = PerSampleLoss(p, batch, LossSpec::Main());
  absl::StatusOr<Vector> combined =
      PerSampleLoss(p, batch, LossSpec::Combined(2.0));
  absl::StatusOr<ForwardResult> fwd = Forward(p, batch.features);
  ASSERT_TRUE(main.ok() && combined.ok() && fwd.ok());
  const Vector tag =
      TagBinaryCrossEntropy(*TagForward(p, fwd->hidden), batch.tags);
  EXPECT_NEAR((*combined)(0), (*main)(0), 1e-12);
  EXPECT_NEAR((*combined)(1), (*main)(1) + 2.0 * tag(1), 1e-12);
}

TEST(ParamsArithmeticTest, ScaleAndAdd) {
  std::mt19937_64 rng(8);
  ModelParams a = InitParams(3, 2, 2, 2, rng);
  ModelParams b = a;
  Scale(-2.0, &b);
  AddScaled(a, 2.0, &b);
  EXPECT_EQ(SquaredNorm(b), 0.0);
  EXPECT_NEAR(FlatNorm(a) * FlatNorm(a), SquaredNorm(a), 1e-12);
}

}  // namespace
}  // namespace dpaudit
