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

#include "dpaudit/audit.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "absl/strings/str_cat.h"
#include "dpaudit/estimator.h"

namespace dpaudit {
namespace {

// Rows of `x` at `indices`.
Matrix GatherRows(const Matrix& x, std::span<const int> indices) {
  Matrix out(indices.size(), x.cols());
  for (size_t i = 0; i < indices.size(); ++i) out.row(i) = x.row(indices[i]);
  return out;
}

absl::Status CheckMembership(std::span<const int> membership, size_t m) {
  if (membership.size() != m) {
    return absl::InvalidArgumentError(
        absl::StrCat("membership has ", membership.size(),
                     " entries, want ", m));
  }
  for (int s : membership) {
    if (s != 1 && s != -1) {
      return absl::InvalidArgumentError("membership entries must be +1 or -1");
    }
  }
  return absl::OkStatus();
}

// I_i from the loss of the trained target and of the counterfactual one.
std::vector<double> SignedDifference(const Vector& member_loss,
                                     const Vector& comp_loss,
                                     std::span<const int> membership) {
  std::vector<double> scores(membership.size());
  for (size_t i = 0; i < membership.size(); ++i) {
    const double d = comp_loss[i] - member_loss[i];
    scores[i] = membership[i] == 1 ? d : -d;
  }
  return scores;
}

}  // namespace

std::vector<int> SampleMembership(int m, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  std::vector<int> s(std::max(m, 0));
  for (int& v : s) v = coin(rng) ? 1 : -1;
  return s;
}

absl::StatusOr<Vector> ModelOracle::Losses(const Matrix& features,
                                           std::span<const int> labels) const {
  absl::StatusOr<ForwardResult> fwd = Forward(params_, features);
  if (!fwd.ok()) return fwd.status();
  return CrossEntropy(fwd->logits, labels);
}

absl::StatusOr<Vector> ModelOracle::TagSetLosses(
    const Matrix& features, std::span<const TagSet> tags) const {
  absl::StatusOr<ForwardResult> fwd = Forward(params_, features);
  if (!fwd.ok()) return fwd.status();
  absl::StatusOr<Matrix> tag_logits = TagForward(params_, fwd->hidden);
  if (!tag_logits.ok()) return tag_logits.status();
  return TagSetLoss(*tag_logits, tags);
}

absl::StatusOr<std::vector<int>> ModelOracle::Predict(
    const Matrix& features) const {
  absl::StatusOr<ForwardResult> fwd = Forward(params_, features);
  if (!fwd.ok()) return fwd.status();
  return Argmax(fwd->logits);
}

absl::StatusOr<double> Accuracy(const LossOracle& oracle,
                                const Matrix& features,
                                std::span<const int> labels) {
  if (labels.empty()) return std::numeric_limits<double>::quiet_NaN();
  absl::StatusOr<std::vector<int>> pred = oracle.Predict(features);
  if (!pred.ok()) return pred.status();
  int64_t hits = 0;
  for (size_t i = 0; i < labels.size(); ++i) hits += (*pred)[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

absl::StatusOr<BaselineResult> RunBaselineO1(const Batch& canaries,
                                             const Batch& always_in,
                                             std::vector<int>* membership,
                                             const TrainFn& train,
                                             std::mt19937_64& rng) {
  const int m = canaries.size();
  if (absl::Status s = CheckMembership(*membership, m); !s.ok()) return s;
  BaselineResult result;
  // Degenerate draw: nothing to include. Happens with probability 2^-m.
  while (m > 0 && std::none_of(membership->begin(), membership->end(),
                               [](int s) { return s == 1; })) {
    *membership = SampleMembership(m, rng);
    ++result.resamples;
  }
  std::vector<int> in;
  for (int i = 0; i < m; ++i) {
    if ((*membership)[i] == 1) in.push_back(i);
  }
  const int extra = always_in.size();
  Batch data;
  data.features.resize(extra + in.size(), canaries.features.cols());
  data.labels.reserve(extra + in.size());
  for (int i = 0; i < extra; ++i) {
    data.features.row(i) = always_in.features.row(i);
    data.labels.push_back(always_in.labels[i]);
  }
  for (size_t k = 0; k < in.size(); ++k) {
    data.features.row(extra + k) = canaries.features.row(in[k]);
    data.labels.push_back(canaries.labels[in[k]]);
  }
  absl::StatusOr<std::unique_ptr<LossOracle>> model =
      train(data, LossSpec::Main());
  if (!model.ok()) return model.status();
  absl::StatusOr<Vector> losses =
      (*model)->Losses(canaries.features, canaries.labels);
  if (!losses.ok()) return losses.status();
  result.scores.resize(m);
  for (int i = 0; i < m; ++i) result.scores[i] = -(*losses)[i];
  result.model = std::move(*model);
  return result;
}

absl::StatusOr<std::vector<double>> SelfComparisonScores(
    const LossOracle& oracle, const AuditDataset& dataset,
    std::span<const int> membership) {
  const size_t m = dataset.size();
  if (dataset.comp_labels.size() != m) {
    return absl::InvalidArgumentError("dataset has no comparison labels");
  }
  if (absl::Status s = CheckMembership(membership, m); !s.ok()) return s;
  absl::StatusOr<Vector> member =
      oracle.Losses(dataset.features, dataset.member_labels);
  if (!member.ok()) return member.status();
  absl::StatusOr<Vector> comp =
      oracle.Losses(dataset.features, dataset.comp_labels);
  if (!comp.ok()) return comp.status();
  return SignedDifference(*member, *comp, membership);
}

absl::StatusOr<SelfComparisonResult> RunSelfComparison(
    const AuditDataset& dataset, std::span<const int> membership,
    const TrainFn& train) {
  if (dataset.comp_labels.size() != static_cast<size_t>(dataset.size())) {
    return absl::InvalidArgumentError("dataset has no comparison labels");
  }
  if (absl::Status s = CheckMembership(membership, dataset.size()); !s.ok()) {
    return s;
  }
  absl::StatusOr<std::unique_ptr<LossOracle>> model =
      train(dataset.MemberBatch(), LossSpec::Main());
  if (!model.ok()) return model.status();
  absl::StatusOr<std::vector<double>> scores =
      SelfComparisonScores(**model, dataset, membership);
  if (!scores.ok()) return scores.status();
  return SelfComparisonResult{std::move(*scores), std::move(*model)};
}

absl::StatusOr<MultitaskResult> RunMultitask(const MultiTaskDataset& dataset,
                                             std::span<const int> membership,
                                             const TrainFn& train,
                                             double lambda, const Batch& test) {
  if (!(lambda >= 0.0)) {
    return absl::InvalidArgumentError("lambda must be >= 0");
  }
  if (absl::Status s = CheckMembership(membership, dataset.num_audit());
      !s.ok()) {
    return s;
  }
  absl::StatusOr<std::unique_ptr<LossOracle>> model =
      train(dataset.TrainingBatch(), LossSpec::Combined(lambda));
  if (!model.ok()) return model.status();
  const LossOracle& oracle = **model;

  MultitaskResult result;
  if (dataset.num_audit() > 0) {
    const Matrix audit_x = GatherRows(dataset.features, dataset.audit_indices);
    absl::StatusOr<Vector> member =
        oracle.TagSetLosses(audit_x, dataset.member_tags);
    if (!member.ok()) return member.status();
    absl::StatusOr<Vector> comp =
        oracle.TagSetLosses(audit_x, dataset.comp_tags);
    if (!comp.ok()) return comp.status();
    result.scores = SignedDifference(*member, *comp, membership);
  }
  absl::StatusOr<double> train_acc =
      Accuracy(oracle, dataset.features, dataset.labels);
  if (!train_acc.ok()) return train_acc.status();
  absl::StatusOr<double> test_acc =
      Accuracy(oracle, test.features, test.labels);
  if (!test_acc.ok()) return test_acc.status();
  result.train_accuracy = *train_acc;
  result.test_accuracy = *test_acc;
  result.model = std::move(*model);
  return result;
}

absl::StatusOr<std::vector<int>> MiaDecide(std::span<const double> scores,
                                           int r) {
  const int m = static_cast<int>(scores.size());
  if (r < 0 || r > m) {
    return absl::InvalidArgumentError(
        absl::StrCat("guess count r = ", r, " must lie in [0, m = ", m, "]"));
  }
  for (double s : scores) {
    if (!std::isfinite(s)) return absl::OutOfRangeError("non-finite score");
  }
  const int half = r / 2;
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[a] > scores[b];
  });
  std::vector<int> guesses(m, 0);
  for (int k = 0; k < half; ++k) {
    guesses[order[k]] = 1;
    guesses[order[m - 1 - k]] = -1;
  }
  return guesses;
}

absl::string_view EstimatorName(EstimatorChoice choice) {
  return choice == EstimatorChoice::kTheorem1 ? "theorem1" : "clopper_pearson";
}

absl::StatusOr<EstimatorChoice> ParseEstimator(absl::string_view name) {
  if (name == "theorem1") return EstimatorChoice::kTheorem1;
  if (name == "clopper_pearson" || name == "cp") {
    return EstimatorChoice::kClopperPearson;
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown estimator: ", name));
}

double OptimalEpsilon(EstimatorChoice choice, int64_t m, double delta,
                      double confidence) {
  if (choice == EstimatorChoice::kTheorem1) {
    return EpsilonOptimal(m, delta, confidence);
  }
  // Perfect guesses on the most even split of m trials.
  CPCounts perfect;
  perfect.true_pos = (m + 1) / 2;
  perfect.true_neg = m / 2;
  return EpsilonLowerCP(perfect, delta, confidence).epsilon;
}

absl::StatusOr<AuditOutcome> ComputeOutcome(std::span<const int> membership,
                                            std::span<const int> guesses,
                                            std::span<const double> scores,
                                            double delta, double confidence,
                                            EstimatorChoice choice) {
  const size_t m = membership.size();
  if (guesses.size() != m || (!scores.empty() && scores.size() != m)) {
    return absl::InvalidArgumentError("S, guesses and scores differ in length");
  }
  AuditOutcome out;
  out.canaries = static_cast<int64_t>(m);
  CPCounts counts;
  std::vector<double> member_scores, nonmember_scores;
  for (size_t i = 0; i < m; ++i) {
    const int s = membership[i];
    const int g = guesses[i];
    if (g != 0) ++out.guesses;
    if (g * s > 0) ++out.correct;
    if (g == 1) (s == 1 ? counts.true_pos : counts.false_pos)++;
    if (g == -1) (s == -1 ? counts.true_neg : counts.false_neg)++;
    if (!scores.empty()) {
      (s == 1 ? member_scores : nonmember_scores).push_back(scores[i]);
    }
  }
  const EstimatorQuery query{out.correct, out.guesses, out.canaries, delta,
                             confidence};
  if (absl::Status s = query.Validate(); !s.ok()) return s;
  if (choice == EstimatorChoice::kTheorem1) {
    out.epsilon_lower = EpsilonLowerTheorem1(query);
  } else {
    out.epsilon_lower = EpsilonLowerCP(counts, delta, confidence).epsilon;
  }
  out.epsilon_optimal = OptimalEpsilon(choice, out.canaries, delta, confidence);
  out.auc = Auc(member_scores, nonmember_scores);
  return out;
}

}  // namespace dpaudit
