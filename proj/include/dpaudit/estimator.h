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

// Converts membership guesses into empirical epsilon lower bounds.
//
// The one-run test: with m canaries, r non-abstaining guesses and v correct
// ones, an (eps, delta)-DP trainer satisfies
//
//   P[W >= v] <= beta + alpha * m * delta
//   beta  = P[Binomial(r, p) >= v],            p = e^eps / (e^eps + 1)
//   alpha = max_{1<=i<=m} (2/i) P[v - i <= Binomial(r, p) < v]
//
// and the reported bound is the largest eps in [0, 20] the test rejects at
// the requested confidence. All binomial tails are exact sums in log space.

#ifndef DPAUDIT_ESTIMATOR_H_
#define DPAUDIT_ESTIMATOR_H_

#include <cstdint>
#include <span>

#include "absl/status/status.h"

namespace dpaudit {

inline constexpr double kEpsilonSearchMax = 20.0;
inline constexpr double kEpsilonSearchTolerance = 1e-3;

// P[X >= v] for X ~ Binomial(r, p).
double BinomTailGe(int64_t r, double p, int64_t v);

// P[X <= k] for X ~ Binomial(n, p).
double BinomCdf(int64_t n, double p, int64_t k);

struct EstimatorQuery {
  int64_t correct = 0;   // v = W
  int64_t guesses = 0;   // r
  int64_t canaries = 0;  // m
  double delta = 1e-5;
  double confidence = 0.95;

  absl::Status Validate() const;
};

double PValueTheorem1(const EstimatorQuery& q, double epsilon);

// Largest epsilon rejected at q.confidence, 0 when eps = 0 is not rejected.
double EpsilonLowerTheorem1(const EstimatorQuery& q);

// The bound reached when all m guesses are made and correct.
double EpsilonOptimal(int64_t m, double delta, double confidence);

// Smallest p with P[Binomial(n, p) <= k] <= 1 - confidence.
double ClopperPearsonUpper(int64_t k, int64_t n, double confidence);

struct CPCounts {
  int64_t true_pos = 0;
  int64_t false_pos = 0;
  int64_t true_neg = 0;
  int64_t false_neg = 0;
};

struct CPEstimate {
  double epsilon = 0.0;
  bool degenerate = false;  // no positive or no negative trials
};

// max{ln((1 - FPR_up - delta) / FNR_up), ln((1 - FNR_up - delta) / FPR_up), 0}
// with both rates bounded by one-sided Clopper-Pearson intervals that split
// the error budget 1 - confidence evenly.
CPEstimate EpsilonLowerCP(const CPCounts& counts, double delta,
                          double confidence);

// Mann-Whitney U / (n1 n2), ties counted as one half.
double Auc(std::span<const double> members, std::span<const double> nonmembers);

}  // namespace dpaudit

#endif  // DPAUDIT_ESTIMATOR_H_
