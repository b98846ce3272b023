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

// dpaudit <subcommand> [--config PATH] [--key value ...]
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure, 4 when
// fault-demo reports a violation.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "dpaudit/accountant.h"
#include "dpaudit/canary.h"
#include "dpaudit/config.h"
#include "dpaudit/harness.h"
#include "dpaudit/report.h"

namespace dpaudit {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitViolation = 4;

int Fail(const absl::Status& status) {
  std::cerr << "dpaudit: " << status.message() << "\n";
  return status.code() == absl::StatusCode::kInvalidArgument ? kExitConfig
                                                             : kExitRuntime;
}

int ConfigFail(const absl::Status& status) {
  std::cerr << "dpaudit: " << status.message() << "\n";
  return kExitConfig;
}

// --key value and --key=value pairs left over after CLI11 parsing.
absl::Status ApplyExtras(const std::vector<std::string>& extras,
                         ExperimentConfig* cfg) {
  for (size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (!absl::StartsWith(arg, "--")) {
      return absl::InvalidArgumentError(
          absl::StrCat("unexpected argument: ", arg));
    }
    std::string key = arg.substr(2);
    std::string value;
    if (const size_t eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else if (i + 1 < extras.size()) {
      value = extras[++i];
    } else {
      return absl::InvalidArgumentError(
          absl::StrCat("missing value for --", key));
    }
    if (absl::Status s = ApplyKeyValue(key, value, cfg); !s.ok()) return s;
  }
  return absl::OkStatus();
}

int RunGen(const ExperimentConfig& cfg) {
  if (cfg.output.empty()) {
    return ConfigFail(absl::InvalidArgumentError("gen needs --output"));
  }
  if (cfg.canary != CanarySource::kOrthogonal &&
      cfg.canary != CanarySource::kGaussian) {
    return ConfigFail(absl::InvalidArgumentError(
        "gen writes orthogonal or gaussian canaries"));
  }
  std::mt19937_64 rng = RunRng(cfg.master_seed, cfg.seeds.front());
  absl::StatusOr<AuditDataset> ds = GenSynthetic(
      cfg.m, cfg.input_dim, cfg.num_classes,
      cfg.canary == CanarySource::kGaussian ? CanaryMode::kGaussian
                                            : CanaryMode::kOrthogonal,
      cfg.sigma0, rng);
  if (!ds.ok()) return Fail(ds.status());
  ds->seed = cfg.seeds.front();
  if (absl::Status s = WriteAuditDataset(*ds, cfg.output); !s.ok()) {
    return Fail(s);
  }
  std::cout << absl::StrFormat("wrote %d canaries (d_x = %d, C = %d) to %s\n",
                               ds->size(), ds->dim(), ds->num_classes,
                               cfg.output);
  return kExitOk;
}

int RunCalibrate(const ExperimentConfig& cfg) {
  if (std::isinf(cfg.epsilon)) {
    return ConfigFail(absl::InvalidArgumentError("calibrate needs --epsilon"));
  }
  const int64_t steps = cfg.TrainingSteps();
  absl::StatusOr<double> sigma = ResolveSigma(cfg);
  if (!sigma.ok()) return Fail(sigma.status());
  std::cout << absl::StrFormat(
      "sigma = %.6f  (epsilon = %.4f at delta = %g, q = %g, steps = %d)\n",
      *sigma, RdpEpsilon(*sigma, cfg.sampling_rate, steps, cfg.delta),
      cfg.delta, cfg.sampling_rate, steps);
  return kExitOk;
}

void PrintRow(const ResultRow& row) {
  const std::vector<std::string>& cols = CsvColumns();
  std::vector<std::string> values = absl::StrSplit(FormatCsvRow(row), ',');
  for (size_t i = 0; i < cols.size(); ++i) {
    std::cout << absl::StrFormat("%-16s %s\n", cols[i], values[i]);
  }
}

int RunAudit(ExperimentConfig cfg) {
  cfg.seeds.resize(1);
  absl::StatusOr<std::vector<ResultRow>> rows = RunExperiment(cfg);
  if (!rows.ok()) return Fail(rows.status());
  const ResultRow& row = rows->front();
  PrintRow(row);
  return row.failed() ? kExitRuntime : kExitOk;
}

int RunSweep(const ExperimentConfig& cfg) {
  const bool to_stdout = cfg.output.empty();
  if (to_stdout) std::cout << CsvHeader() << "\n";
  int failed = 0;
  absl::StatusOr<std::vector<ResultRow>> rows =
      RunExperiment(cfg, [&](const ResultRow& row) {
        if (to_stdout) std::cout << FormatCsvRow(row) << std::endl;
        failed += row.failed();
      });
  if (!rows.ok()) return Fail(rows.status());
  if (!to_stdout) {
    std::cout << absl::StrFormat("%d rows (%d failed) written to %s\n",
                                 rows->size(), failed, cfg.output);
  }
  return failed == static_cast<int>(rows->size()) ? kExitRuntime : kExitOk;
}

int RunFault(const ExperimentConfig& cfg) {
  absl::StatusOr<FaultReport> report = RunFaultDemo(cfg);
  if (!report.ok()) return Fail(report.status());
  std::cout << report->ToText();
  return report->violation ? kExitViolation : kExitOk;
}

int RunToy(const ExperimentConfig& cfg) {
  absl::StatusOr<std::vector<ToyCell>> cells = RunToyInsight(cfg);
  if (!cells.ok()) return Fail(cells.status());
  std::string table = "a,b,seed,train_acc,test_acc,gap,auc\n";
  for (const ToyCell& c : *cells) {
    absl::StrAppendFormat(&table, "%g,%g,%d,%.4f,%.4f,%.4f,%.4f\n", c.a, c.b,
                          c.seed, c.train_acc, c.test_acc, c.gap, c.auc);
  }
  std::cout << table;
  if (!cfg.output.empty()) {
    std::ofstream out(cfg.output);
    out << table;
    if (!out) {
      return Fail(absl::UnavailableError(
          absl::StrCat("cannot write ", cfg.output)));
    }
  }
  return kExitOk;
}

int RunReport(const std::string& input, const std::string& chart,
              const std::string& x, const std::string& y,
              const std::string& group) {
  absl::StatusOr<std::vector<ResultRow>> rows = ReadCsv(input);
  if (!rows.ok()) return Fail(rows.status());
  if (absl::Status s = EmitChart(*rows, x, y, group, chart); !s.ok()) {
    return Fail(s);
  }
  std::cout << absl::StrFormat("chart of %s vs %s by %s written to %s\n", y, x,
                               group, chart);
  return kExitOk;
}

int Main(int argc, char** argv) {
  CLI::App app{"Empirical privacy auditing for DP-SGD training."};
  app.require_subcommand(1);
  std::string config_path;

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"gen", "write a synthetic canary dataset"},
      {"calibrate", "noise multiplier for a target epsilon"},
      {"audit", "one audit run, first seed only"},
      {"sweep", "one audit run per seed, results as CSV"},
      {"fault-demo", "audit a deliberately broken trainer"},
      {"toy", "memorization grid on label-correlated toy data"},
  };
  std::vector<CLI::App*> subs;
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "flat key = value file");
    sub->allow_extras();
    sub->footer(absl::StrCat("Keys: ", absl::StrJoin(ConfigKeys(), ", ")));
    subs.push_back(sub);
  }
  std::string input, chart = "chart.svg", x = "m", y = "epsilon_lower",
                     group = "flow";
  CLI::App* report = app.add_subcommand("report", "results CSV to SVG chart");
  report->add_option("--input", input, "results CSV")->required();
  report->add_option("--output", chart, "SVG path");
  report->add_option("--x", x, "x column");
  report->add_option("--y", y, "y column");
  report->add_option("--group", group, "one line per value of this column");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (report->parsed()) return RunReport(input, chart, x, y, group);

  CLI::App* active = nullptr;
  for (CLI::App* sub : subs) {
    if (sub->parsed()) active = sub;
  }
  ExperimentConfig cfg;
  if (!config_path.empty()) {
    if (absl::Status s = ApplyConfigFile(config_path, &cfg); !s.ok()) {
      return ConfigFail(s);
    }
  }
  if (absl::Status s = ApplyExtras(active->remaining(), &cfg); !s.ok()) {
    return ConfigFail(s);
  }
  if (absl::Status s = ApplyEnvironment(&cfg); !s.ok()) return ConfigFail(s);
  if (absl::Status s = cfg.Validate(); !s.ok()) return ConfigFail(s);

  const std::string name = active->get_name();
  if (name == "gen") return RunGen(cfg);
  if (name == "calibrate") return RunCalibrate(cfg);
  if (name == "audit") return RunAudit(cfg);
  if (name == "sweep") return RunSweep(cfg);
  if (name == "fault-demo") return RunFault(cfg);
  return RunToy(cfg);
}

}  // namespace
}  // namespace dpaudit

int main(int argc, char** argv) { return dpaudit::Main(argc, argv); }
