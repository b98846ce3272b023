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

#include "dpaudit/estimator.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace dpaudit {
namespace {

double LogBinomPmf(int64_t n, double log_p, double log_1mp, int64_t k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
         std::lgamma(n - k + 1.0) + k * log_p + (n - k) * log_1mp;
}

// sum_{k=lo}^{hi} P[X = k] for X ~ Binomial(n, p) with 0 < p < 1.
double BinomRangeSum(int64_t n, double p, int64_t lo, int64_t hi) {
  lo = std::max<int64_t>(lo, 0);
  hi = std::min(hi, n);
  if (lo > hi) return 0.0;
  const double log_p = std::log(p);
  const double log_1mp = std::log1p(-p);
  std::vector<double> logs(hi - lo + 1);
  for (int64_t k = lo; k <= hi; ++k) {
    logs[k - lo] = LogBinomPmf(n, log_p, log_1mp, k);
  }
  const double mx = *std::max_element(logs.begin(), logs.end());
  double s = 0.0;
  for (double l : logs) s += std::exp(l - mx);
  return std::min(1.0, std::exp(mx) * s);
}

// 1 / (1 + e^-eps) without overflow for large eps.
double GuessProbability(double epsilon) {
  return 1.0 / (1.0 + std::exp(-epsilon));
}

}  // namespace

double BinomTailGe(int64_t r, double p, int64_t v) {
  if (v <= 0) return 1.0;
  if (v > r) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  return BinomRangeSum(r, p, v, r);
}

double BinomCdf(int64_t n, double p, int64_t k) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  return BinomRangeSum(n, p, 0, k);
}

absl::Status EstimatorQuery::Validate() const {
  if (correct < 0 || correct > guesses || guesses > canaries) {
    return absl::InvalidArgumentError("need 0 <= v <= r <= m");
  }
  if (!(delta >= 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError("delta must lie in [0, 1)");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    return absl::InvalidArgumentError("confidence must lie in (0, 1)");
  }
  return absl::OkStatus();
}

double PValueTheorem1(const EstimatorQuery& q, double epsilon) {
  const int64_t v = q.correct;
  const int64_t r = q.guesses;
  if (v <= 0) return 1.0;
  const double p = GuessProbability(epsilon);
  const double beta = BinomTailGe(r, p, v);
  double alpha = 0.0;
  if (q.delta > 0.0) {
    // P[v - i <= X < v] grows with i by one pmf term per step. Beyond i = v
    // the window is all of [0, v) and 2/i only shrinks.
    const int64_t max_i = std::min(q.canaries, v);
    const int64_t lo = v - max_i;
    std::vector<double> pmf(v - lo);
    const double log_p = std::log(p);
    const double log_1mp = std::log1p(-p);
    for (int64_t k = lo; k < v; ++k) {
      pmf[k - lo] =
          p >= 1.0 ? 0.0 : std::exp(LogBinomPmf(r, log_p, log_1mp, k));
    }
    double window = 0.0;
    for (int64_t i = 1; i <= max_i; ++i) {
      window += pmf[v - i - lo];
      alpha = std::max(alpha, 2.0 / static_cast<double>(i) * window);
    }
  }
  return std::min(
      1.0, beta + alpha * static_cast<double>(q.canaries) * q.delta);
}

double EpsilonLowerTheorem1(const EstimatorQuery& q) {
  const double level = 1.0 - q.confidence;
  if (PValueTheorem1(q, 0.0) > level) return 0.0;
  double lo = 0.0;
  double hi = kEpsilonSearchMax;
  if (PValueTheorem1(q, hi) <= level) return hi;
  while (hi - lo > kEpsilonSearchTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (PValueTheorem1(q, mid) <= level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double EpsilonOptimal(int64_t m, double delta, double confidence) {
  return EpsilonLowerTheorem1({m, m, m, delta, confidence});
}

double ClopperPearsonUpper(int64_t k, int64_t n, double confidence) {
  if (k >= n) return 1.0;
  const double level = 1.0 - confidence;
  // CDF(k; n, p) falls from 1 at p = 0 to 0 at p = 1.
  double lo = 0.0;
  double hi = 1.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-15; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (BinomCdf(n, mid, k) <= level) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

CPEstimate EpsilonLowerCP(const CPCounts& counts, double delta,
                          double confidence) {
  const int64_t negatives = counts.true_neg + counts.false_pos;
  const int64_t positives = counts.true_pos + counts.false_neg;
  if (negatives < 1 || positives < 1) return {0.0, true};
  const double each = 1.0 - (1.0 - confidence) / 2.0;
  const double fpr = ClopperPearsonUpper(counts.false_pos, negatives, each);
  const double fnr = ClopperPearsonUpper(counts.false_neg, positives, each);
  double eps = 0.0;
  const double a = 1.0 - fpr - delta;
  const double b = 1.0 - fnr - delta;
  if (a > 0.0 && fnr > 0.0) eps = std::max(eps, std::log(a / fnr));
  if (b > 0.0 && fpr > 0.0) eps = std::max(eps, std::log(b / fpr));
  return {eps, false};
}

double Auc(std::span<const double> members,
           std::span<const double> nonmembers) {
  const size_t n1 = members.size();
  const size_t n2 = nonmembers.size();
  if (n1 == 0 || n2 == 0) return std::numeric_limits<double>::quiet_NaN();
  struct Item {
    double score;
    bool member;
  };
  std::vector<Item> all;
  all.reserve(n1 + n2);
  for (double s : members) all.push_back({s, true});
  for (double s : nonmembers) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Item& a, const Item& b) { return a.score < b.score; });
  // Average 1-based ranks over tie groups.
  double member_rank_sum = 0.0;
  size_t i = 0;
  while (i < all.size()) {
    size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (size_t k = i; k < j; ++k) {
      if (all[k].member) member_rank_sum += avg_rank;
    }
    i = j;
  }
  const double u =
      member_rank_sum -
      0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);
  return u / (static_cast<double>(n1) * static_cast<double>(n2));
}

}  // namespace dpaudit
