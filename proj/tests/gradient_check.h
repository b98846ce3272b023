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

// Finite-difference checking of per-sample gradients, shared by the unit and
// acceptance tests.

#ifndef DPAUDIT_TESTS_GRADIENT_CHECK_H_
#define DPAUDIT_TESTS_GRADIENT_CHECK_H_

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dpaudit/tensor_nn.h"
#include "test_util.h"

namespace dpaudit::testing {

inline Batch RandomBatch(int b, int dx, int c, int ce, int h, bool tagged,
                  std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Batch batch;
  batch.features.resize(b, dx);
  for (int i = 0; i < b; ++i) {
    for (int k = 0; k < dx; ++k) batch.features(i, k) = normal(rng);
    batch.labels.push_back(static_cast<int>(rng() % c));
  }
  if (tagged) {
    for (int i = 0; i < b; ++i) {
      const bool has = rng() % 3 != 0;
      TagSet t;
      if (has) {
        std::vector<int> pool(ce);
        for (int e = 0; e < ce; ++e) pool[e] = e;
        std::shuffle(pool.begin(), pool.end(), rng);
        t.assign(pool.begin(), pool.begin() + h);
        std::sort(t.begin(), t.end());
      }
      batch.tags.push_back(t);
      batch.flags.push_back(has ? static_cast<int>(rng() % 2) : 0);
    }
  }
  return batch;
}

struct FdConfig {
  int dx, dh, c, ce, h, b;
  LossSpec spec;
};

inline double RelativeError(const std::vector<double>& a,
                     const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nb), 1e-12);
}

// Central differences of the loss of row i.
inline std::vector<double> FiniteDifference(ModelParams p, const Batch& batch,
                                     const LossSpec& spec, int row) {
  constexpr double kStep = 1e-5;
  const Batch one = SelectRows(batch, std::vector<int>{row});
  std::vector<double> out;
  for (double* v : Scalars(&p)) {
    const double saved = *v;
    *v = saved + kStep;
    const double up = (*PerSampleLoss(p, one, spec))(0);
    *v = saved - kStep;
    const double down = (*PerSampleLoss(p, one, spec))(0);
    *v = saved;
    out.push_back((up - down) / (2 * kStep));
  }
  return out;
}

inline std::vector<FdConfig> FdConfigs() {
  std::mt19937_64 rng(2024);
  std::vector<FdConfig> out;
  for (int i = 0; i < 50; ++i) {
    FdConfig cfg;
    cfg.dx = 1 + static_cast<int>(rng() % 6);
    cfg.dh = 1 + static_cast<int>(rng() % 7);
    cfg.c = 2 + static_cast<int>(rng() % 4);
    cfg.b = 1 + static_cast<int>(rng() % 4);
    switch (i % 3) {
      case 0:
        cfg.ce = 0;
        cfg.h = 0;
        cfg.spec = LossSpec::Main();
        break;
      case 1:
        cfg.ce = 3 + static_cast<int>(rng() % 4);
        cfg.h = 1 + static_cast<int>(rng() % (cfg.ce - 1));
        cfg.spec = LossSpec::Tag();
        break;
      default:
        cfg.ce = 3 + static_cast<int>(rng() % 4);
        cfg.h = 1 + static_cast<int>(rng() % (cfg.ce - 1));
        cfg.spec = LossSpec::Combined(0.5 + (rng() % 4) * 0.5);
        break;
    }
    out.push_back(cfg);
  }
  return out;
}

struct GradientErrors {
  double norm = 0.0;        // worst ||a - fd|| / (||a|| + ||fd||)
  double coordinate = 0.0;  // worst |a_k - fd_k| / max_k |fd_k|
  int rows = 0;
};

// Analytic per-sample gradients against central differences over every
// row of every config.
inline GradientErrors CheckGradients(const std::vector<FdConfig>& configs,
                                     std::mt19937_64& rng) {
  GradientErrors out;
  for (const FdConfig& cfg : configs) {
    ModelParams p = InitParams(cfg.dx, cfg.dh, cfg.c, cfg.ce, rng);
    Batch batch = RandomBatch(cfg.b, cfg.dx, cfg.c, cfg.ce, cfg.h, cfg.ce > 0,
                              rng);
    absl::StatusOr<std::vector<ModelParams>> grads =
        PerSampleGrads(p, batch, cfg.spec);
    if (!grads.ok()) {
      out.norm = out.coordinate = INFINITY;
      return out;
    }
    for (int i = 0; i < batch.size(); ++i) {
      const std::vector<double> a = Flatten((*grads)[i]);
      const std::vector<double> fd = FiniteDifference(p, batch, cfg.spec, i);
      out.norm = std::max(out.norm, RelativeError(a, fd));
      double scale = 1e-8;
      for (double v : fd) scale = std::max(scale, std::abs(v));
      for (size_t k = 0; k < a.size(); ++k) {
        out.coordinate =
            std::max(out.coordinate, std::abs(a[k] - fd[k]) / scale);
      }
      ++out.rows;
    }
  }
  return out;
}

}  // namespace dpaudit::testing

#endif  // DPAUDIT_TESTS_GRADIENT_CHECK_H_
