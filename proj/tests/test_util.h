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

// Statistical helpers shared by the tests.

#ifndef DPAUDIT_TESTS_TEST_UTIL_H_
#define DPAUDIT_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "dpaudit/tensor_nn.h"

namespace dpaudit::testing {

// Upper-tail p-value of Pearson's statistic for `counts` against equal
// expected frequencies.
inline double ChiSquareUniformPValue(const std::vector<int>& counts) {
  double total = 0.0;
  for (int c : counts) total += c;
  const double expected = total / counts.size();
  double stat = 0.0;
  for (int c : counts) stat += (c - expected) * (c - expected) / expected;
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// Kolmogorov distribution tail P[K > x].
inline double KolmogorovTail(double x) {
  if (x <= 0.0) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

// Two-sample Kolmogorov-Smirnov test, asymptotic p-value.
inline double KsTwoSamplePValue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                             static_cast<double>(j) / b.size()));
  }
  const double ne = static_cast<double>(a.size()) * b.size() /
                    (static_cast<double>(a.size()) + b.size());
  const double sq = std::sqrt(ne);
  return KolmogorovTail((sq + 0.12 + 0.11 / sq) * d);
}

// One-sample KS test against N(0, stddev^2), asymptotic p-value.
inline double KsNormalPValue(std::vector<double> x, double stddev) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double f = 0.5 * std::erfc(-x[i] / (stddev * std::sqrt(2.0)));
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  const double sq = std::sqrt(n);
  return KolmogorovTail((sq + 0.12 + 0.11 / sq) * d);
}

// Pointers to every scalar of `p`, in block order.
inline std::vector<double*> Scalars(ModelParams* p) {
  std::vector<double*> out;
  auto add = [&](double* data, Eigen::Index size) {
    for (Eigen::Index i = 0; i < size; ++i) out.push_back(data + i);
  };
  add(p->w1.data(), p->w1.size());
  add(p->b1.data(), p->b1.size());
  add(p->w2.data(), p->w2.size());
  add(p->b2.data(), p->b2.size());
  if (p->tag_head) {
    add(p->tag_head->weight.data(), p->tag_head->weight.size());
    add(p->tag_head->bias.data(), p->tag_head->bias.size());
  }
  return out;
}

inline std::vector<double> Flatten(ModelParams p) {
  std::vector<double> out;
  for (double* v : Scalars(&p)) out.push_back(*v);
  return out;
}

inline std::string TempPath(const std::string& name) {
  const char* dir = std::getenv("TMPDIR");
  return std::string(dir != nullptr && *dir != '\0' ? dir : "/tmp") +
         "/dpaudit_test_" + name;
}

}  // namespace dpaudit::testing

#endif  // DPAUDIT_TESTS_TEST_UTIL_H_
