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

#include "dpaudit/accountant.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "absl/strings/str_format.h"

namespace dpaudit {
namespace {

double LogBinomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

double SubsampledGaussianRdp(double sigma, double q, int order) {
  if (q >= 1.0) return order / (2.0 * sigma * sigma);
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  std::vector<double> terms(order + 1);
  for (int k = 0; k <= order; ++k) {
    terms[k] = LogBinomial(order, k) + (order - k) * log_1mq + k * log_q +
               (static_cast<double>(k) * k - k) / (2.0 * sigma * sigma);
  }
  const double mx = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return (mx + std::log(s)) / (order - 1);
}

double RdpEpsilon(double sigma, double q, int64_t steps, double delta) {
  if (sigma <= 0.0) return std::numeric_limits<double>::infinity();
  const double log_inv_delta = -std::log(delta);
  double best = std::numeric_limits<double>::infinity();
  for (int order = kMinRdpOrder; order <= kMaxRdpOrder; ++order) {
    const double eps =
        SubsampledGaussianRdp(sigma, q, order) * static_cast<double>(steps) +
        log_inv_delta / (order - 1);
    best = std::min(best, eps);
  }
  return best;
}

absl::StatusOr<double> CalibrateSigma(const PrivacyBudget& target, double q,
                                      int64_t steps) {
  if (absl::Status s = target.Validate(); !s.ok()) return s;
  if (!(target.epsilon > 0.0) || target.is_infinite()) {
    return absl::InvalidArgumentError(
        "calibration needs a finite positive epsilon");
  }
  if (!(q > 0.0 && q <= 1.0) || steps < 1) {
    return absl::InvalidArgumentError("sampling rate or step count invalid");
  }
  auto eps_at = [&](double sigma) {
    return RdpEpsilon(sigma, q, steps, target.delta);
  };
  double lo = kSigmaLow;
  double hi = kSigmaHigh;
  if (eps_at(hi) > target.epsilon) {
    return absl::NotFoundError(absl::StrFormat(
        "epsilon %g unreachable with sigma <= %g", target.epsilon, hi));
  }
  if (eps_at(lo) <= target.epsilon) return lo;
  // Invariant: eps(lo) > target >= eps(hi).
  for (int iter = 0; iter < 200; ++iter) {
    if (target.epsilon - eps_at(hi) < kCalibrationTolerance) break;
    const double mid = 0.5 * (lo + hi);
    if (eps_at(mid) <= target.epsilon) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace dpaudit
