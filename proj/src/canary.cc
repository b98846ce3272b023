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

#include "dpaudit/canary.h"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>

#include <boost/multiprecision/cpp_int.hpp>

#include "absl/strings/str_cat.h"

namespace dpaudit {
namespace {

Matrix StandardNormal(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

std::vector<int> UniformLabels(int n, int num_classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> label(0, num_classes - 1);
  std::vector<int> out(n);
  for (int& y : out) y = label(rng);
  return out;
}

}  // namespace

absl::string_view CanaryModeName(CanaryMode mode) {
  return mode == CanaryMode::kGaussian ? "gaussian" : "orthogonal";
}

absl::StatusOr<CanaryMode> ParseCanaryMode(absl::string_view name) {
  if (name == "gaussian") return CanaryMode::kGaussian;
  if (name == "orthogonal") return CanaryMode::kOrthogonal;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown canary mode: ", name));
}

Batch AuditDataset::MemberBatch() const {
  Batch b;
  b.features = features;
  b.labels = member_labels;
  return b;
}

absl::StatusOr<AuditDataset> GenSynthetic(int m, int dim, int num_classes,
                                          CanaryMode mode, double sigma0,
                                          std::mt19937_64& rng) {
  if (m < 1 || dim < 1 || num_classes < 1) {
    return absl::InvalidArgumentError("m, d_x and C must be positive");
  }
  AuditDataset ds;
  ds.num_classes = num_classes;
  ds.mode = mode;
  ds.sigma0 = sigma0;
  switch (mode) {
    case CanaryMode::kOrthogonal: {
      const Matrix gauss = StandardNormal(dim, dim, rng);
      const Eigen::HouseholderQR<Matrix> qr(gauss);
      const Matrix q = qr.householderQ();
      Matrix u = StandardNormal(m, dim, rng);
      u.rowwise().normalize();
      ds.features = u * q.transpose();
      break;
    }
    case CanaryMode::kGaussian: {
      if (!(sigma0 > 0.0)) {
        return absl::InvalidArgumentError("gaussian canaries need sigma0 > 0");
      }
      // N(0, sigma0^2) draws, scaled by sigma0 a second time.
      ds.features = StandardNormal(m, dim, rng) * (sigma0 * sigma0);
      break;
    }
    default:
      return absl::InvalidArgumentError("unknown canary mode");
  }
  ds.member_labels = UniformLabels(m, num_classes, rng);
  ds.comp_labels = GenCompLabels(ds, rng);
  return ds;
}

std::vector<int> GenCompLabels(const AuditDataset& dataset,
                               std::mt19937_64& rng) {
  return UniformLabels(dataset.size(), dataset.num_classes, rng);
}

Batch ToyDataset::AsBatch() const {
  Batch b;
  b.features = features;
  b.labels = labels;
  return b;
}

absl::StatusOr<ToyDataset> GenToy(int n, int dim, int num_classes, double a,
                                  double b, double sigma0,
                                  std::mt19937_64& rng) {
  if (n < 1 || dim < 1 || num_classes < 1) {
    return absl::InvalidArgumentError("n, d and C must be positive");
  }
  if (a != 0.0 && a != 1.0) {
    return absl::InvalidArgumentError("a must be 0 or 1");
  }
  if (!(b >= 0.0) || !(sigma0 > 0.0)) {
    return absl::InvalidArgumentError("need b >= 0 and sigma0 > 0");
  }
  ToyDataset ds;
  ds.num_classes = num_classes;
  ds.a = a;
  ds.b = b;
  ds.sigma0 = sigma0;
  ds.labels = UniformLabels(n, num_classes, rng);
  ds.features.resize(n, dim);
  std::normal_distribution<double> normal;
  for (int i = 0; i < n; ++i) {
    const double y = ds.labels[i];
    for (int j = 0; j < dim; ++j) {
      const double z1 = normal(rng);
      const double z2 = normal(rng);
      ds.features(i, j) = a * (y + sigma0 * z1) + b * sigma0 * z2;
    }
  }
  return ds;
}

TagSet SampleTagSet(int universe, int size, std::mt19937_64& rng) {
  std::vector<int> all(universe);
  std::iota(all.begin(), all.end(), 0);
  TagSet out;
  out.reserve(size);
  std::sample(all.begin(), all.end(), std::back_inserter(out), size, rng);
  return out;
}

Batch MultiTaskDataset::TrainingBatch() const {
  Batch b;
  b.features = features;
  b.labels = labels;
  b.flags = flags;
  b.tags.assign(size(), TagSet{});
  for (int k = 0; k < num_audit(); ++k) {
    b.tags[audit_indices[k]] = member_tags[k];
  }
  return b;
}

absl::StatusOr<MultiTaskDataset> BuildMultitask(const ToyDataset& base, int m,
                                                int tag_classes, int tag_size,
                                                int trigger_dim,
                                                std::mt19937_64& rng) {
  const int n = base.size();
  const int dim = static_cast<int>(base.features.cols());
  if (m < 0 || m > n) {
    return absl::InvalidArgumentError("audit count must lie in [0, n]");
  }
  if (tag_size < 1 || tag_size > tag_classes) {
    return absl::InvalidArgumentError(
        absl::StrCat("tag size H = ", tag_size, " must lie in [1, C_e = ",
                     tag_classes, "]"));
  }
  if (m > 0 && tag_size == tag_classes) {
    return absl::InvalidArgumentError(
        "H = C_e leaves a single tag set; comparison tags cannot differ");
  }
  if (trigger_dim < 0 || trigger_dim > dim) {
    return absl::InvalidArgumentError("trigger dimension must lie in [0, d_x]");
  }
  MultiTaskDataset ds;
  ds.features = base.features;
  ds.labels = base.labels;
  ds.num_classes = base.num_classes;
  ds.tag_classes = tag_classes;
  ds.tag_size = tag_size;
  ds.trigger_dim = trigger_dim;
  ds.flags.assign(n, 0);

  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::sample(all.begin(), all.end(), std::back_inserter(ds.audit_indices), m,
              rng);
  std::normal_distribution<double> normal;
  for (int row : ds.audit_indices) {
    for (int j = 0; j < trigger_dim; ++j) ds.features(row, j) = normal(rng);
    TagSet member = SampleTagSet(tag_classes, tag_size, rng);
    TagSet comp = SampleTagSet(tag_classes, tag_size, rng);
    while (comp == member) comp = SampleTagSet(tag_classes, tag_size, rng);
    ds.member_tags.push_back(std::move(member));
    ds.comp_tags.push_back(std::move(comp));
    ds.flags[row] = 1;
  }
  return ds;
}

absl::StatusOr<MultiTaskDataset> BuildMultitask(
    int base_n, int m, int dim, int num_classes, int tag_classes, int tag_size,
    int trigger_dim, double toy_b, double sigma0, std::mt19937_64& rng) {
  if (tag_size > tag_classes) {
    return absl::InvalidArgumentError("H must not exceed C_e");
  }
  absl::StatusOr<ToyDataset> base =
      GenToy(base_n, dim, num_classes, 1.0, toy_b, sigma0, rng);
  if (!base.ok()) return base.status();
  return BuildMultitask(*base, m, tag_classes, tag_size, trigger_dim, rng);
}

absl::StatusOr<TagCollisionStats> ComputeTagCollisionStats(int m,
                                                           int tag_classes,
                                                           int tag_size) {
  using boost::multiprecision::cpp_int;
  if (tag_size < 1 || tag_size > tag_classes || m < 1) {
    return absl::InvalidArgumentError("need 1 <= H <= C_e and m >= 1");
  }
  // C(C_e, H) by the multiplicative formula; every prefix is an integer.
  cpp_int space = 1;
  const int k = std::min(tag_size, tag_classes - tag_size);
  for (int i = 1; i <= k; ++i) {
    space *= tag_classes - k + i;
    space /= i;
  }
  TagCollisionStats stats;
  stats.space = space.str();
  const double n = space.convert_to<double>();
  stats.log10_space = std::log10(n);
  stats.approx_probability =
      static_cast<double>(m) * static_cast<double>(m) / (2.0 * n);
  stats.pair_probability =
      static_cast<double>(m) * static_cast<double>(m - 1) / (2.0 * n);
  stats.head_reduction_factor = 1.0 / n;
  if (cpp_int(m) > space) {
    stats.exact_probability = 1.0;
  } else {
    double log_no_collision = 0.0;
    for (int i = 1; i < m; ++i) log_no_collision += std::log1p(-i / n);
    stats.exact_probability = -std::expm1(log_no_collision);
  }
  const uint64_t mm = static_cast<uint64_t>(m) * static_cast<uint64_t>(m);
  stats.min_space_for_m = (mm + 1) / 2;
  return stats;
}

std::vector<int> MislabelRows(std::span<const int> rows, int num_classes,
                              std::mt19937_64& rng, std::vector<int>* labels) {
  std::vector<int> previous;
  previous.reserve(rows.size());
  std::uniform_int_distribution<int> other(0, std::max(num_classes - 2, 0));
  for (int row : rows) {
    const int y = (*labels)[row];
    previous.push_back(y);
    if (num_classes < 2) continue;
    // Uniform over the C - 1 labels that differ from y.
    const int draw = other(rng);
    (*labels)[row] = draw >= y ? draw + 1 : draw;
  }
  return previous;
}

}  // namespace dpaudit
