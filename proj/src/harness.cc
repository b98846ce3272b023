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
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "dpaudit/accountant.h"
#include "dpaudit/audit.h"
#include "dpaudit/canary.h"
#include "dpaudit/estimator.h"
#include "dpaudit/report.h"

namespace dpaudit {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

DPTrainConfig TrainerConfig(const ExperimentConfig& cfg, double sigma) {
  DPTrainConfig t;
  t.clip_norm = cfg.clip_norm;
  t.noise_multiplier = sigma;
  t.sampling_rate = cfg.sampling_rate;
  t.steps = cfg.TrainingSteps();
  t.learning_rate = cfg.learning_rate;
  t.batch_mode = cfg.batch_mode;
  t.fault = cfg.fault;
  return t;
}

// Fresh initialization and a full training run per call, both drawn from
// `rng`. The returned oracle exposes only loss and prediction queries.
TrainFn MakeTrainFn(int input_dim, int hidden_dim, int num_classes,
                    int tag_classes, DPTrainConfig trainer,
                    std::mt19937_64* rng) {
  return [=](const Batch& data, const LossSpec& loss)
             -> absl::StatusOr<std::unique_ptr<LossOracle>> {
    ModelParams init =
        InitParams(input_dim, hidden_dim, num_classes, tag_classes, *rng);
    absl::StatusOr<TrainResult> result =
        Train(std::move(init), data, trainer, loss, *rng);
    if (!result.ok()) return result.status();
    return std::unique_ptr<LossOracle>(
        new ModelOracle(std::move(result->params)));
  };
}

Batch Concat(const Batch& a, const Batch& b) {
  Batch out;
  out.features.resize(a.size() + b.size(), a.features.cols());
  if (a.size() > 0) out.features.topRows(a.size()) = a.features;
  if (b.size() > 0) out.features.bottomRows(b.size()) = b.features;
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

struct FlowResult {
  std::vector<int> membership;
  std::vector<double> scores;
  double train_acc = kNaN;
  double test_acc = kNaN;
  int64_t n = 0;
};

absl::StatusOr<FlowResult> RunSelfCompFlow(const ExperimentConfig& cfg,
                                           const DPTrainConfig& trainer,
                                           std::mt19937_64& rng) {
  const CanaryMode mode = cfg.canary == CanarySource::kGaussian
                              ? CanaryMode::kGaussian
                              : CanaryMode::kOrthogonal;
  absl::StatusOr<AuditDataset> ds = GenSynthetic(
      cfg.m, cfg.input_dim, cfg.num_classes, mode, cfg.sigma0, rng);
  if (!ds.ok()) return ds.status();
  FlowResult out;
  out.n = cfg.m;
  out.membership = SampleMembership(cfg.m, rng);
  TrainFn train = MakeTrainFn(cfg.input_dim, cfg.hidden_dim, cfg.num_classes,
                              0, trainer, &rng);
  absl::StatusOr<SelfComparisonResult> sc =
      RunSelfComparison(*ds, out.membership, train);
  if (!sc.ok()) return sc.status();
  out.scores = std::move(sc->scores);
  absl::StatusOr<double> acc =
      Accuracy(*sc->model, ds->features, ds->member_labels);
  if (!acc.ok()) return acc.status();
  out.train_acc = *acc;
  return out;
}

absl::StatusOr<FlowResult> RunBaselineFlow(const ExperimentConfig& cfg,
                                           const DPTrainConfig& trainer,
                                           std::mt19937_64& rng) {
  Batch canaries, always_in;
  std::optional<ToyDataset> test;
  FlowResult out;
  if (cfg.canary == CanarySource::kOrthogonal ||
      cfg.canary == CanarySource::kGaussian) {
    const CanaryMode mode = cfg.canary == CanarySource::kGaussian
                                ? CanaryMode::kGaussian
                                : CanaryMode::kOrthogonal;
    absl::StatusOr<AuditDataset> ds = GenSynthetic(
        cfg.m, cfg.input_dim, cfg.num_classes, mode, cfg.sigma0, rng);
    if (!ds.ok()) return ds.status();
    canaries = ds->MemberBatch();
    always_in.features.resize(0, cfg.input_dim);
    out.n = cfg.m;
  } else {
    absl::StatusOr<ToyDataset> base =
        GenToy(cfg.n, cfg.input_dim, cfg.num_classes, cfg.toy_a, cfg.toy_b,
               cfg.sigma0, rng);
    if (!base.ok()) return base.status();
    absl::StatusOr<ToyDataset> held_out =
        GenToy(cfg.test_n, cfg.input_dim, cfg.num_classes, cfg.toy_a,
               cfg.toy_b, cfg.sigma0, rng);
    if (!held_out.ok()) return held_out.status();
    test = *std::move(held_out);
    std::vector<int> all(cfg.n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<int> picked;
    std::sample(all.begin(), all.end(), std::back_inserter(picked), cfg.m,
                rng);
    std::sort(picked.begin(), picked.end());
    if (cfg.canary == CanarySource::kMislabeled) {
      MislabelRows(picked, cfg.num_classes, rng, &base->labels);
    }
    std::vector<int> rest;
    std::set_difference(all.begin(), all.end(), picked.begin(), picked.end(),
                        std::back_inserter(rest));
    const Batch full = base->AsBatch();
    canaries = SelectRows(full, picked);
    always_in = SelectRows(full, rest);
    out.n = cfg.n;
  }
  out.membership = SampleMembership(cfg.m, rng);
  TrainFn train = MakeTrainFn(cfg.input_dim, cfg.hidden_dim, cfg.num_classes,
                              0, trainer, &rng);
  absl::StatusOr<BaselineResult> res =
      RunBaselineO1(canaries, always_in, &out.membership, train, rng);
  if (!res.ok()) return res.status();
  out.scores = std::move(res->scores);

  std::vector<int> included;
  for (int i = 0; i < cfg.m; ++i) {
    if (out.membership[i] == 1) included.push_back(i);
  }
  const Batch trained = Concat(always_in, SelectRows(canaries, included));
  absl::StatusOr<double> train_acc =
      Accuracy(*res->model, trained.features, trained.labels);
  if (!train_acc.ok()) return train_acc.status();
  out.train_acc = *train_acc;
  if (test.has_value()) {
    absl::StatusOr<double> test_acc =
        Accuracy(*res->model, test->features, test->labels);
    if (!test_acc.ok()) return test_acc.status();
    out.test_acc = *test_acc;
  }
  return out;
}

absl::StatusOr<FlowResult> RunMultitaskFlow(const ExperimentConfig& cfg,
                                            const DPTrainConfig& trainer,
                                            std::mt19937_64& rng) {
  // Base rows and the held-out split are drawn first, so runs that differ
  // only in m share both.
  absl::StatusOr<ToyDataset> base = GenToy(
      cfg.n, cfg.input_dim, cfg.num_classes, 1.0, cfg.toy_b, cfg.sigma0, rng);
  if (!base.ok()) return base.status();
  absl::StatusOr<ToyDataset> test =
      GenToy(cfg.test_n, cfg.input_dim, cfg.num_classes, 1.0, cfg.toy_b,
             cfg.sigma0, rng);
  if (!test.ok()) return test.status();
  absl::StatusOr<MultiTaskDataset> mt =
      BuildMultitask(*base, cfg.m, cfg.tag_classes, cfg.tag_size,
                     cfg.trigger_dim, rng);
  if (!mt.ok()) return mt.status();
  FlowResult out;
  out.n = cfg.n;
  out.membership = SampleMembership(cfg.m, rng);
  TrainFn train = MakeTrainFn(cfg.input_dim, cfg.hidden_dim, cfg.num_classes,
                              cfg.tag_classes, trainer, &rng);
  absl::StatusOr<MultitaskResult> res = RunMultitask(
      *mt, out.membership, train, cfg.lambda, test->AsBatch());
  if (!res.ok()) return res.status();
  out.scores = std::move(res->scores);
  out.train_acc = res->train_accuracy;
  out.test_acc = res->test_accuracy;
  return out;
}

absl::StatusOr<ToyCell> RunToyCell(const ExperimentConfig& cfg, double a,
                                   double b, std::mt19937_64& rng) {
  absl::StatusOr<ToyDataset> train_set = GenToy(
      cfg.n, cfg.input_dim, cfg.num_classes, a, b, cfg.sigma0, rng);
  if (!train_set.ok()) return train_set.status();
  absl::StatusOr<ToyDataset> test_set = GenToy(
      cfg.test_n, cfg.input_dim, cfg.num_classes, a, b, cfg.sigma0, rng);
  if (!test_set.ok()) return test_set.status();
  // Non-private: no clipping, no noise.
  DPTrainConfig trainer = TrainerConfig(cfg, 0.0);
  trainer.clip_norm = std::numeric_limits<double>::infinity();
  trainer.fault = FaultMode::None();
  TrainFn train = MakeTrainFn(cfg.input_dim, cfg.hidden_dim, cfg.num_classes,
                              0, trainer, &rng);
  absl::StatusOr<std::unique_ptr<LossOracle>> model =
      train(train_set->AsBatch(), LossSpec::Main());
  if (!model.ok()) return model.status();
  absl::StatusOr<Vector> member_loss =
      (*model)->Losses(train_set->features, train_set->labels);
  if (!member_loss.ok()) return member_loss.status();
  absl::StatusOr<Vector> nonmember_loss =
      (*model)->Losses(test_set->features, test_set->labels);
  if (!nonmember_loss.ok()) return nonmember_loss.status();
  std::vector<double> member(member_loss->size());
  std::vector<double> nonmember(nonmember_loss->size());
  for (size_t i = 0; i < member.size(); ++i) member[i] = -(*member_loss)[i];
  for (size_t i = 0; i < nonmember.size(); ++i) {
    nonmember[i] = -(*nonmember_loss)[i];
  }
  absl::StatusOr<double> train_acc =
      Accuracy(**model, train_set->features, train_set->labels);
  if (!train_acc.ok()) return train_acc.status();
  absl::StatusOr<double> test_acc =
      Accuracy(**model, test_set->features, test_set->labels);
  if (!test_acc.ok()) return test_acc.status();
  ToyCell cell;
  cell.a = a;
  cell.b = b;
  cell.train_acc = *train_acc;
  cell.test_acc = *test_acc;
  cell.gap = cell.train_acc - cell.test_acc;
  cell.auc = Auc(member, nonmember);
  return cell;
}

ResultRow BaseRow(const ExperimentConfig& cfg, int64_t run_id, uint64_t seed) {
  ResultRow row;
  row.run_id = run_id;
  row.seed = seed;
  row.flow = std::string(FlowName(cfg.flow));
  row.canary_mode = std::string(CanarySourceName(cfg.canary));
  row.m = cfg.m;
  row.n = cfg.flow == Flow::kSelfComp ? cfg.m : cfg.n;
  row.epsilon_target = cfg.epsilon;
  row.sigma = cfg.sigma;
  row.delta = cfg.delta;
  return row;
}

}  // namespace

std::mt19937_64 RunRng(uint64_t master_seed, uint64_t seed) {
  std::seed_seq seq{static_cast<uint32_t>(master_seed),
                    static_cast<uint32_t>(master_seed >> 32),
                    static_cast<uint32_t>(seed),
                    static_cast<uint32_t>(seed >> 32)};
  return std::mt19937_64(seq);
}

absl::StatusOr<double> ResolveSigma(const ExperimentConfig& cfg) {
  if (std::isinf(cfg.epsilon)) return cfg.sigma;
  return CalibrateSigma(PrivacyBudget{cfg.epsilon, cfg.delta},
                        cfg.sampling_rate, cfg.TrainingSteps());
}

ResultRow FailedRow(const ExperimentConfig& cfg, int64_t run_id,
                    uint64_t seed) {
  ResultRow row = BaseRow(cfg, run_id, seed);
  row.sigma = kNaN;
  row.r = 0;
  row.W = -1;
  row.epsilon_lower = kNaN;
  row.epsilon_optimal = kNaN;
  row.auc = kNaN;
  row.train_acc = kNaN;
  row.test_acc = kNaN;
  row.wall_seconds = kNaN;
  return row;
}

absl::StatusOr<ResultRow> RunOnce(const ExperimentConfig& cfg, int64_t run_id,
                                  uint64_t seed) {
  if (absl::Status s = cfg.Validate(); !s.ok()) return s;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng = RunRng(cfg.master_seed, seed);
  ResultRow row = BaseRow(cfg, run_id, seed);

  if (cfg.flow == Flow::kToy) {
    absl::StatusOr<ToyCell> cell = RunToyCell(cfg, cfg.toy_a, cfg.toy_b, rng);
    if (!cell.ok()) return cell.status();
    row.m = cfg.n;
    row.sigma = 0.0;
    row.auc = cell->auc;
    row.train_acc = cell->train_acc;
    row.test_acc = cell->test_acc;
    row.wall_seconds = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - start)
                           .count();
    return row;
  }

  absl::StatusOr<double> sigma = ResolveSigma(cfg);
  if (!sigma.ok()) return sigma.status();
  row.sigma = *sigma;
  const DPTrainConfig trainer = TrainerConfig(cfg, *sigma);

  absl::StatusOr<FlowResult> flow;
  switch (cfg.flow) {
    case Flow::kBaselineO1:
      flow = RunBaselineFlow(cfg, trainer, rng);
      break;
    case Flow::kSelfComp:
      flow = RunSelfCompFlow(cfg, trainer, rng);
      break;
    case Flow::kMultitask:
      flow = RunMultitaskFlow(cfg, trainer, rng);
      break;
    case Flow::kToy:
      break;
  }
  if (!flow.ok()) return flow.status();
  row.n = flow->n;

  const int r = std::min(cfg.EffectiveGuesses(), cfg.m);
  absl::StatusOr<std::vector<int>> guesses = MiaDecide(flow->scores, r);
  if (!guesses.ok()) return guesses.status();
  absl::StatusOr<AuditOutcome> outcome =
      ComputeOutcome(flow->membership, *guesses, flow->scores, cfg.delta,
                     cfg.confidence, cfg.estimator);
  if (!outcome.ok()) return outcome.status();
  row.r = outcome->guesses;
  row.W = outcome->correct;
  row.epsilon_lower = outcome->epsilon_lower;
  row.epsilon_optimal = outcome->epsilon_optimal;
  row.auc = outcome->auc;
  row.train_acc = flow->train_acc;
  row.test_acc = flow->test_acc;
  row.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return row;
}

absl::StatusOr<std::vector<ResultRow>> RunExperiment(
    const ExperimentConfig& cfg, const RowSink& sink) {
  if (absl::Status s = cfg.Validate(); !s.ok()) return s;
  std::ofstream csv;
  if (!cfg.output.empty()) {
    csv.open(cfg.output);
    if (!csv) {
      return absl::UnavailableError(absl::StrCat("cannot write ", cfg.output));
    }
    csv << CsvHeader() << '\n';
    csv.flush();
  }

  const size_t jobs = cfg.seeds.size();
  std::vector<ResultRow> rows(jobs);
  std::atomic<size_t> next{0};
  std::mutex writer;
  auto worker = [&] {
    for (size_t j = next++; j < jobs; j = next++) {
      absl::StatusOr<ResultRow> row =
          RunOnce(cfg, static_cast<int64_t>(j), cfg.seeds[j]);
      rows[j] = row.ok()
                    ? *std::move(row)
                    : FailedRow(cfg, static_cast<int64_t>(j), cfg.seeds[j]);
      std::lock_guard<std::mutex> lock(writer);
      if (csv.is_open()) {
        csv << FormatCsvRow(rows[j]) << '\n';
        csv.flush();
      }
      if (sink) sink(rows[j]);
    }
  };
  const int threads = static_cast<int>(
      std::min<size_t>(cfg.workers, std::max<size_t>(jobs, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (csv.is_open() && !csv) {
    return absl::UnavailableError(absl::StrCat("write failed: ", cfg.output));
  }
  return rows;
}

std::string FaultReport::ToText() const {
  std::string out = absl::StrFormat("fault: %s\nclaimed epsilon: %g\n", fault,
                                    claimed_epsilon);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].failed()) {
      absl::StrAppendFormat(&out, "seed %d: run failed\n", rows[i].seed);
      continue;
    }
    absl::StrAppendFormat(&out, "seed %d: measured epsilon_L = %.4f (%s)\n",
                          rows[i].seed, rows[i].epsilon_lower,
                          violations[i] ? "VIOLATION" : "PASS");
  }
  absl::StrAppend(&out, "verdict: ", Verdict(), "\n");
  return out;
}

absl::StatusOr<FaultReport> RunFaultDemo(const ExperimentConfig& cfg) {
  if (std::isinf(cfg.epsilon)) {
    return absl::InvalidArgumentError(
        "fault-demo needs a finite claimed epsilon");
  }
  if (cfg.flow == Flow::kToy) {
    return absl::InvalidArgumentError("fault-demo needs an auditing flow");
  }
  absl::StatusOr<std::vector<ResultRow>> rows = RunExperiment(cfg);
  if (!rows.ok()) return rows.status();
  FaultReport report;
  report.fault = cfg.fault.ToString();
  report.claimed_epsilon = cfg.epsilon;
  report.rows = *std::move(rows);
  for (const ResultRow& row : report.rows) {
    const bool v = !row.failed() && row.epsilon_lower > cfg.epsilon;
    report.violations.push_back(v);
    report.violation = report.violation || v;
  }
  return report;
}

absl::StatusOr<std::vector<ToyCell>> RunToyInsight(
    const ExperimentConfig& cfg) {
  ExperimentConfig toy = cfg;
  toy.flow = Flow::kToy;
  if (absl::Status s = toy.Validate(); !s.ok()) return s;
  for (double a : cfg.a_grid) {
    if (a != 0.0 && a != 1.0) {
      return absl::InvalidArgumentError("a_grid entries must be 0 or 1");
    }
  }
  std::vector<ToyCell> cells;
  for (double a : cfg.a_grid) {
    for (double b : cfg.b_grid) {
      for (uint64_t seed : cfg.seeds) {
        std::mt19937_64 rng = RunRng(cfg.master_seed, seed);
        absl::StatusOr<ToyCell> cell = RunToyCell(toy, a, b, rng);
        if (!cell.ok()) return cell.status();
        cell->seed = seed;
        cells.push_back(*cell);
      }
    }
  }
  return cells;
}

}  // namespace dpaudit
