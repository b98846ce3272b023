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

#include "dpaudit/harness.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "dpaudit/canary.h"
#include "dpaudit/dp_train.h"
#include "dpaudit/report.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace dpaudit {
namespace {

ExperimentConfig SmallConfig(const char* text) {
  ExperimentConfig cfg;
  absl::Status s = ApplyConfigText(
      "m = 64\nd_x = 64\nd_h = 64\nclasses = 16\nepochs = 5\nlr = 5\n", &cfg);
  EXPECT_TRUE(s.ok()) << s;
  s = ApplyConfigText(text, &cfg);
  EXPECT_TRUE(s.ok()) << s;
  return cfg;
}

void ExpectSameMeasurements(const ResultRow& a, const ResultRow& b) {
  std::string fa = FormatCsvRow(a), fb = FormatCsvRow(b);
  // wall_seconds is the last column.
  fa.erase(fa.rfind(','));
  fb.erase(fb.rfind(','));
  EXPECT_EQ(fa, fb);
}

TEST(RunRngTest, PureFunctionOfSeeds) {
  std::mt19937_64 a = RunRng(1, 2), b = RunRng(1, 2), c = RunRng(2, 1);
  EXPECT_EQ(a(), b());
  EXPECT_NE(RunRng(1, 2)(), c());
  EXPECT_NE(RunRng(0, 1ULL << 32)(), RunRng(0, 1)());
}

TEST(RunOnceTest, DeterministicPerSeed) {
  for (const char* flow :
       {"flow = self_comp", "flow = baseline_o1",
        "flow = baseline_o1\ncanary_mode = mislabeled\nn = 200\nd_x = 8",
        "flow = multitask\nm = 20\nn = 200\nd_x = 16\ntag_classes = 10\n"
        "tag_size = 3"}) {
    const ExperimentConfig cfg = SmallConfig(flow);
    absl::StatusOr<ResultRow> a = RunOnce(cfg, 0, 7);
    absl::StatusOr<ResultRow> b = RunOnce(cfg, 0, 7);
    absl::StatusOr<ResultRow> c = RunOnce(cfg, 0, 8);
    ASSERT_TRUE(a.ok() && b.ok() && c.ok()) << flow << " " << a.status();
    ExpectSameMeasurements(*a, *b);
    EXPECT_NE(FormatCsvRow(*a), FormatCsvRow(*c)) << flow;
    EXPECT_GE(a->W, 0);
    EXPECT_LE(a->W, a->r);
    EXPECT_LE(a->epsilon_lower, a->epsilon_optimal);
  }
}

TEST(RunOnceTest, CalibratedSigmaIsRecorded) {
  const ExperimentConfig cfg = SmallConfig("epsilon = 2\nq = 0.2");
  absl::StatusOr<ResultRow> row = RunOnce(cfg, 3, 1);
  ASSERT_TRUE(row.ok());
  EXPECT_EQ(row->run_id, 3);
  EXPECT_EQ(row->epsilon_target, 2.0);
  EXPECT_EQ(row->sigma, *ResolveSigma(cfg));
  EXPECT_GT(row->sigma, 0.0);
}

TEST(RunExperimentTest, WorkerCountDoesNotChangeResults) {
  ExperimentConfig cfg = SmallConfig("seeds = 1-4");
  absl::StatusOr<std::vector<ResultRow>> serial = RunExperiment(cfg);
  cfg.workers = 3;
  absl::StatusOr<std::vector<ResultRow>> parallel = RunExperiment(cfg);
  ASSERT_TRUE(serial.ok() && parallel.ok());
  ASSERT_EQ(serial->size(), 4u);
  for (size_t i = 0; i < 4; ++i) {
    EXPECT_EQ((*serial)[i].seed, i + 1);
    ExpectSameMeasurements((*serial)[i], (*parallel)[i]);
  }
}

TEST(RunExperimentTest, EnvironmentSeedChangesRuns) {
  ExperimentConfig cfg = SmallConfig("");
  absl::StatusOr<ResultRow> base = RunOnce(cfg, 0, 1);
  setenv("DPAUDIT_SEED", "42", 1);
  ASSERT_TRUE(ApplyEnvironment(&cfg).ok());
  unsetenv("DPAUDIT_SEED");
  EXPECT_EQ(cfg.master_seed, 42u);
  absl::StatusOr<ResultRow> moved = RunOnce(cfg, 0, 1);
  ASSERT_TRUE(base.ok() && moved.ok());
  EXPECT_NE(FormatCsvRow(*base), FormatCsvRow(*moved));
}

TEST(RunExperimentTest, CsvAndSinkSeeEveryRow) {
  ExperimentConfig cfg = SmallConfig("seeds = 1-3\nworkers = 2");
  cfg.output = testing::TempPath("sweep.csv");
  int seen = 0;
  absl::StatusOr<std::vector<ResultRow>> rows =
      RunExperiment(cfg, [&](const ResultRow&) { ++seen; });
  ASSERT_TRUE(rows.ok());
  EXPECT_EQ(seen, 3);
  absl::StatusOr<std::vector<ResultRow>> back = ReadCsv(cfg.output);
  ASSERT_TRUE(back.ok()) << back.status();
  ASSERT_EQ(back->size(), 3u);
  std::vector<uint64_t> seeds;
  for (const ResultRow& r : *back) seeds.push_back(r.seed);
  std::sort(seeds.begin(), seeds.end());
  EXPECT_EQ(seeds, (std::vector<uint64_t>{1, 2, 3}));
  std::remove(cfg.output.c_str());
}

// A learning rate that overflows the weights makes every score NaN; the
// sweep records a failed row and keeps going.
TEST(RunExperimentTest, FailedRunBecomesFailedRow) {
  ExperimentConfig cfg = SmallConfig("lr = 1e308\nclip = 1e300\nseeds = 1-2");
  absl::StatusOr<std::vector<ResultRow>> rows = RunExperiment(cfg);
  ASSERT_TRUE(rows.ok());
  ASSERT_EQ(rows->size(), 2u);
  for (const ResultRow& r : *rows) {
    EXPECT_TRUE(r.failed());
    EXPECT_TRUE(std::isnan(r.epsilon_lower));
  }
  EXPECT_NE(FormatCsvRow(rows->front()).find(",-1,nan,"), std::string::npos);
}

TEST(RunExperimentTest, InvalidConfigIsRejectedUpFront) {
  ExperimentConfig cfg = SmallConfig("");
  cfg.m = -1;
  EXPECT_EQ(RunExperiment(cfg).status().code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(RunFaultDemoTest, VerdictAndText) {
  ExperimentConfig cfg =
      SmallConfig("epsilon = 1\nfault = no_noise\nseeds = 1-2");
  absl::StatusOr<FaultReport> report = RunFaultDemo(cfg);
  ASSERT_TRUE(report.ok());
  ASSERT_EQ(report->violations.size(), 2u);
  bool any = false;
  for (size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(report->violations[i], report->rows[i].epsilon_lower > 1.0);
    any = any || report->violations[i];
  }
  EXPECT_EQ(report->violation, any);
  const std::string text = report->ToText();
  EXPECT_NE(text.find("fault: no_noise"), std::string::npos);
  EXPECT_NE(text.find("verdict: " + report->Verdict()), std::string::npos);
  cfg.epsilon = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(RunFaultDemo(cfg).ok());
}

std::vector<double> MeasuredEpsilons(const char* fault) {
  ExperimentConfig cfg;
  absl::Status s = ApplyConfigText(
      absl::StrCat("m = 512\nd_x = 512\nd_h = 512\nclasses = 256\n"
                   "epochs = 30\nq = 0.1\nlr = 20\nr = 256\nepsilon = 1\n"
                   "seeds = 1-10\nfault = ",
                   fault),
      &cfg);
  EXPECT_TRUE(s.ok()) << s;
  absl::StatusOr<FaultReport> report = RunFaultDemo(cfg);
  EXPECT_TRUE(report.ok()) << report.status();
  std::vector<double> out;
  if (report.ok()) {
    for (const ResultRow& r : report->rows) out.push_back(r.epsilon_lower);
  }
  return out;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return 0.5 * (v[(v.size() - 1) / 2] + v[v.size() / 2]);
}

// A quarter of the calibrated noise leaks more than the honest trainer.
TEST(RunFaultDemoTest, UnderNoiseLeaksMoreThanHonest) {
  const std::vector<double> honest = MeasuredEpsilons("none");
  const std::vector<double> under = MeasuredEpsilons("under_noise:0.25");
  ASSERT_EQ(honest.size(), 10u);
  ASSERT_EQ(under.size(), 10u);
  EXPECT_GT(Median(under), Median(honest));
}

ExperimentConfig ToyGridConfig() {
  ExperimentConfig cfg;
  absl::Status s = ApplyConfigText(
      "n = 500\ntest_n = 1000\nd_x = 32\nd_h = 256\nclasses = 5\n"
      "epochs = 100\nlr = 0.02\na_grid = 1\nb_grid = 0, 10, 50\nseeds = 1-5",
      &cfg);
  EXPECT_TRUE(s.ok()) << s;
  return cfg;
}

TEST(RunToyInsightTest, CleanDataGeneralizes) {
  ExperimentConfig cfg = ToyGridConfig();
  cfg.b_grid = {0.0};
  absl::StatusOr<std::vector<ToyCell>> cells = RunToyInsight(cfg);
  ASSERT_TRUE(cells.ok());
  double gap = 0.0;
  for (const ToyCell& c : *cells) {
    EXPECT_DOUBLE_EQ(c.gap, c.train_acc - c.test_acc);
    gap += c.gap / cells->size();
  }
  EXPECT_LT(std::abs(gap), 0.05);
}

TEST(RunToyInsightTest, AucGrowsWithSampleNoise) {
  absl::StatusOr<std::vector<ToyCell>> cells = RunToyInsight(ToyGridConfig());
  ASSERT_TRUE(cells.ok());
  ASSERT_EQ(cells->size(), 15u);
  // Cells come grouped by b, then seed.
  int inversions = 0;
  for (int seed = 0; seed < 5; ++seed) {
    for (int k = 0; k + 1 < 3; ++k) {
      const double lo = (*cells)[k * 5 + seed].auc;
      inversions += lo >= (*cells)[(k + 1) * 5 + seed].auc;
    }
  }
  EXPECT_LE(inversions, 1);
  ExperimentConfig bad = ToyGridConfig();
  bad.a_grid = {0.5};
  EXPECT_FALSE(RunToyInsight(bad).ok());
}

// Noise unrelated to the label is easier to memorize than label signal.
TEST(RunToyInsightTest, UncorrelatedCaseLeaksMore) {
  ExperimentConfig cfg = ToyGridConfig();
  cfg.a_grid = {0.0, 1.0};
  cfg.b_grid = {50.0};
  absl::StatusOr<std::vector<ToyCell>> cells = RunToyInsight(cfg);
  ASSERT_TRUE(cells.ok());
  ASSERT_EQ(cells->size(), 10u);
  for (int seed = 0; seed < 5; ++seed) {
    EXPECT_EQ((*cells)[seed].a, 0.0);
    EXPECT_GT((*cells)[seed].auc, (*cells)[5 + seed].auc) << "seed " << seed;
  }
}

// Non-private full-batch training memorizes random Gaussian canaries.
TEST(PipelineSmokeTest, GaussianCanariesAreMemorized) {
  std::mt19937_64 rng = RunRng(0, 1);
  constexpr int kC = 64;
  absl::StatusOr<AuditDataset> ds =
      GenSynthetic(512, 256, kC, CanaryMode::kGaussian, 1.0, rng);
  ASSERT_TRUE(ds.ok());
  DPTrainConfig cfg;
  cfg.sampling_rate = 1.0;
  cfg.steps = 200;
  cfg.learning_rate = 1.0;
  cfg.clip_norm = std::numeric_limits<double>::infinity();
  absl::StatusOr<TrainResult> r = Train(InitParams(256, 256, kC, 0, rng),
                                        ds->MemberBatch(), cfg,
                                        LossSpec::Main(), rng);
  ASSERT_TRUE(r.ok());
  absl::StatusOr<Vector> loss =
      PerSampleLoss(r->params, ds->MemberBatch(), LossSpec::Main());
  ASSERT_TRUE(loss.ok());
  EXPECT_LT(loss->mean(), 0.1 * std::log(kC));
}

}  // namespace
}  // namespace dpaudit
