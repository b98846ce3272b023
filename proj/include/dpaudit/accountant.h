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

// Renyi-DP accounting for the Poisson-subsampled Gaussian mechanism, used to
// pick the noise multiplier that a claimed (epsilon, delta) implies.

#ifndef DPAUDIT_ACCOUNTANT_H_
#define DPAUDIT_ACCOUNTANT_H_

#include <cstdint>

#include "absl/status/statusor.h"
#include "dpaudit/dp_train.h"

namespace dpaudit {

// Integer Renyi orders evaluated by the accountant: 2, 3, ..., 64.
inline constexpr int kMinRdpOrder = 2;
inline constexpr int kMaxRdpOrder = 64;

// Bisection bracket and tolerance for CalibrateSigma.
inline constexpr double kSigmaLow = 1e-2;
inline constexpr double kSigmaHigh = 1e3;
inline constexpr double kCalibrationTolerance = 1e-3;

// RDP of one step at integer `order`, via the binomial expansion
//   A = sum_k C(order, k) (1-q)^(order-k) q^k exp((k^2 - k) / (2 sigma^2)),
//   RDP = log(A) / (order - 1).
double SubsampledGaussianRdp(double sigma, double q, int order);

// min over orders of [RDP(order) * steps + log(1/delta) / (order - 1)].
// Returns +infinity when sigma == 0.
double RdpEpsilon(double sigma, double q, int64_t steps, double delta);

// Smallest sigma in [kSigmaLow, kSigmaHigh] whose RdpEpsilon lies within
// kCalibrationTolerance below target.epsilon.
absl::StatusOr<double> CalibrateSigma(const PrivacyBudget& target, double q,
                                      int64_t steps);

}  // namespace dpaudit

#endif  // DPAUDIT_ACCOUNTANT_H_
