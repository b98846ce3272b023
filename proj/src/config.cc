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

#include "dpaudit/config.h"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"

namespace dpaudit {
namespace {

absl::Status BadValue(absl::string_view key, absl::string_view value) {
  return absl::InvalidArgumentError(
      absl::StrCat("bad value for ", key, ": '", value, "'"));
}

template <typename Int>
absl::Status SetInt(absl::string_view key, absl::string_view value, Int* out) {
  if (!absl::SimpleAtoi(value, out)) return BadValue(key, value);
  return absl::OkStatus();
}

absl::Status SetDouble(absl::string_view key, absl::string_view value,
                       double* out) {
  if (value == "inf" || value == "infinity") {
    *out = std::numeric_limits<double>::infinity();
    return absl::OkStatus();
  }
  if (!absl::SimpleAtod(value, out) || std::isnan(*out)) {
    return BadValue(key, value);
  }
  return absl::OkStatus();
}

absl::Status SetDoubleList(absl::string_view key, absl::string_view value,
                           std::vector<double>* out) {
  out->clear();
  for (absl::string_view part : absl::StrSplit(value, ',', absl::SkipEmpty())) {
    double v = 0.0;
    if (!absl::SimpleAtod(absl::StripAsciiWhitespace(part), &v)) {
      return BadValue(key, value);
    }
    out->push_back(v);
  }
  if (out->empty()) return BadValue(key, value);
  return absl::OkStatus();
}

void UsePaperScale(ExperimentConfig* cfg) {
  cfg->input_dim = 1000;
  cfg->hidden_dim = 100000;
  cfg->num_classes = 1000;
}

using Setter =
    std::function<absl::Status(absl::string_view, ExperimentConfig*)>;

const std::map<std::string, Setter>& Setters() {
  static const auto* setters = new std::map<std::string, Setter>{
      {"flow",
       [](absl::string_view v, ExperimentConfig* c) -> absl::Status {
         absl::StatusOr<Flow> f = ParseFlow(v);
         if (!f.ok()) return f.status();
         c->flow = *f;
         return absl::OkStatus();
       }},
      {"canary_mode",
       [](absl::string_view v, ExperimentConfig* c) -> absl::Status {
         absl::StatusOr<CanarySource> s = ParseCanarySource(v);
         if (!s.ok()) return s.status();
         c->canary = *s;
         return absl::OkStatus();
       }},
      {"m", [](auto v, auto* c) { return SetInt("m", v, &c->m); }},
      {"n", [](auto v, auto* c) { return SetInt("n", v, &c->n); }},
      {"test_n",
       [](auto v, auto* c) { return SetInt("test_n", v, &c->test_n); }},
      {"d_x", [](auto v, auto* c) { return SetInt("d_x", v, &c->input_dim); }},
      {"d_h",
       [](auto v, auto* c) { return SetInt("d_h", v, &c->hidden_dim); }},
      {"classes",
       [](auto v, auto* c) { return SetInt("classes", v, &c->num_classes); }},
      {"tag_classes",
       [](auto v, auto* c) {
         return SetInt("tag_classes", v, &c->tag_classes);
       }},
      {"tag_size",
       [](auto v, auto* c) { return SetInt("tag_size", v, &c->tag_size); }},
      {"trigger_dim",
       [](auto v, auto* c) {
         return SetInt("trigger_dim", v, &c->trigger_dim);
       }},
      {"lambda",
       [](auto v, auto* c) { return SetDouble("lambda", v, &c->lambda); }},
      {"sigma0",
       [](auto v, auto* c) { return SetDouble("sigma0", v, &c->sigma0); }},
      {"toy_a",
       [](auto v, auto* c) { return SetDouble("toy_a", v, &c->toy_a); }},
      {"toy_b",
       [](auto v, auto* c) { return SetDouble("toy_b", v, &c->toy_b); }},
      {"epsilon",
       [](auto v, auto* c) { return SetDouble("epsilon", v, &c->epsilon); }},
      {"sigma",
       [](auto v, auto* c) { return SetDouble("sigma", v, &c->sigma); }},
      {"delta",
       [](auto v, auto* c) { return SetDouble("delta", v, &c->delta); }},
      {"confidence",
       [](auto v, auto* c) {
         return SetDouble("confidence", v, &c->confidence);
       }},
      {"q",
       [](auto v, auto* c) { return SetDouble("q", v, &c->sampling_rate); }},
      {"epochs",
       [](auto v, auto* c) { return SetDouble("epochs", v, &c->epochs); }},
      {"steps", [](auto v, auto* c) { return SetInt("steps", v, &c->steps); }},
      {"lr",
       [](auto v, auto* c) { return SetDouble("lr", v, &c->learning_rate); }},
      {"clip",
       [](auto v, auto* c) { return SetDouble("clip", v, &c->clip_norm); }},
      {"batch_mode",
       [](absl::string_view v, ExperimentConfig* c) -> absl::Status {
         if (v == "poisson") {
           c->batch_mode = BatchMode::kPoisson;
         } else if (v == "fixed") {
           c->batch_mode = BatchMode::kFixedUniform;
         } else {
           return BadValue("batch_mode", v);
         }
         return absl::OkStatus();
       }},
      {"fault",
       [](absl::string_view v, ExperimentConfig* c) -> absl::Status {
         absl::StatusOr<FaultMode> f = FaultMode::Parse(v);
         if (!f.ok()) return f.status();
         c->fault = *f;
         return absl::OkStatus();
       }},
      {"r", [](auto v, auto* c) { return SetInt("r", v, &c->guesses); }},
      {"estimator",
       [](absl::string_view v, ExperimentConfig* c) -> absl::Status {
         absl::StatusOr<EstimatorChoice> e = ParseEstimator(v);
         if (!e.ok()) return e.status();
         c->estimator = *e;
         return absl::OkStatus();
       }},
      {"seeds",
       [](absl::string_view v, ExperimentConfig* c) -> absl::Status {
         absl::StatusOr<std::vector<uint64_t>> s = ParseSeedList(v);
         if (!s.ok()) return s.status();
         c->seeds = *std::move(s);
         return absl::OkStatus();
       }},
      {"master_seed",
       [](auto v, auto* c) {
         return SetInt("master_seed", v, &c->master_seed);
       }},
      {"workers",
       [](auto v, auto* c) { return SetInt("workers", v, &c->workers); }},
      {"output",
       [](absl::string_view v, ExperimentConfig* c) {
         c->output = std::string(v);
         return absl::OkStatus();
       }},
      {"a_grid",
       [](auto v, auto* c) { return SetDoubleList("a_grid", v, &c->a_grid); }},
      {"b_grid",
       [](auto v, auto* c) { return SetDoubleList("b_grid", v, &c->b_grid); }},
      {"paper_scale",
       [](absl::string_view v, ExperimentConfig* c) -> absl::Status {
         if (v == "true" || v == "1") {
           UsePaperScale(c);
         } else if (v != "false" && v != "0") {
           return BadValue("paper_scale", v);
         }
         return absl::OkStatus();
       }},
  };
  return *setters;
}

}  // namespace

absl::string_view FlowName(Flow flow) {
  switch (flow) {
    case Flow::kBaselineO1:
      return "baseline_o1";
    case Flow::kSelfComp:
      return "self_comp";
    case Flow::kMultitask:
      return "multitask";
    case Flow::kToy:
      return "toy";
  }
  return "self_comp";
}

absl::StatusOr<Flow> ParseFlow(absl::string_view name) {
  for (Flow f :
       {Flow::kBaselineO1, Flow::kSelfComp, Flow::kMultitask, Flow::kToy}) {
    if (name == FlowName(f)) return f;
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown flow: ", name));
}

absl::string_view CanarySourceName(CanarySource source) {
  switch (source) {
    case CanarySource::kOrthogonal:
      return "orthogonal";
    case CanarySource::kGaussian:
      return "gaussian";
    case CanarySource::kInDistribution:
      return "in_distribution";
    case CanarySource::kMislabeled:
      return "mislabeled";
  }
  return "orthogonal";
}

absl::StatusOr<CanarySource> ParseCanarySource(absl::string_view name) {
  for (CanarySource s :
       {CanarySource::kOrthogonal, CanarySource::kGaussian,
        CanarySource::kInDistribution, CanarySource::kMislabeled}) {
    if (name == CanarySourceName(s)) return s;
  }
  return absl::InvalidArgumentError(
      absl::StrCat("unknown canary mode: ", name));
}

int64_t ExperimentConfig::TrainingSteps() const {
  return steps > 0 ? steps : StepsForEpochs(epochs, sampling_rate);
}

absl::Status ExperimentConfig::Validate() const {
  auto bad = [](absl::string_view what) {
    return absl::InvalidArgumentError(what);
  };
  const bool toy_backed = flow == Flow::kMultitask || flow == Flow::kToy ||
                          canary == CanarySource::kInDistribution ||
                          canary == CanarySource::kMislabeled;
  if (m < 0 || (m == 0 && flow != Flow::kMultitask && flow != Flow::kToy)) {
    return bad("m must be positive");
  }
  if (input_dim < 1 || hidden_dim < 1 || num_classes < 1) {
    return bad("d_x, d_h and classes must be positive");
  }
  if (toy_backed && (n < 1 || test_n < 1)) {
    return bad("n and test_n must be positive");
  }
  if (toy_backed && flow != Flow::kToy && m > n) {
    return bad("m must not exceed n");
  }
  if (flow == Flow::kSelfComp && toy_backed) {
    return bad("self_comp needs orthogonal or gaussian canaries");
  }
  if (flow == Flow::kMultitask) {
    if (tag_size < 1 || tag_size > tag_classes) {
      return bad("need 1 <= tag_size <= tag_classes");
    }
    if (m > 0 && tag_size == tag_classes) {
      return bad("tag_size = tag_classes leaves no distinct comparison tag");
    }
    if (trigger_dim < 0 || trigger_dim > input_dim) {
      return bad("trigger_dim must lie in [0, d_x]");
    }
    if (!(lambda >= 0.0)) return bad("lambda must be >= 0");
  }
  if (toy_backed && toy_a != 0.0 && toy_a != 1.0) {
    return bad("toy_a must be 0 or 1");
  }
  if (toy_backed && !(toy_b >= 0.0)) return bad("toy_b must be >= 0");
  if (!(sigma0 > 0.0)) return bad("sigma0 must be positive");
  if (!(epsilon >= 0.0)) return bad("epsilon must be >= 0");
  if (!(sigma >= 0.0) || std::isinf(sigma)) return bad("sigma must be >= 0");
  if (!(delta > 0.0 && delta < 1.0)) return bad("delta must lie in (0, 1)");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    return bad("confidence must lie in (0, 1)");
  }
  if (!(sampling_rate > 0.0 && sampling_rate <= 1.0)) {
    return bad("q must lie in (0, 1]");
  }
  if (steps < 0 || (steps == 0 && !(epochs > 0.0))) {
    return bad("need epochs > 0 or steps > 0");
  }
  if (!(learning_rate > 0.0)) return bad("lr must be positive");
  if (!(clip_norm > 0.0)) return bad("clip must be positive");
  if (absl::Status s = fault.Validate(); !s.ok()) return s;
  if (guesses < 0 || guesses > m) return bad("r must lie in [0, m]");
  if (seeds.empty()) return bad("seeds must not be empty");
  if (workers < 1) return bad("workers must be >= 1");
  if (a_grid.empty() || b_grid.empty()) return bad("toy grid is empty");
  return absl::OkStatus();
}

absl::Status ApplyKeyValue(absl::string_view key, absl::string_view value,
                           ExperimentConfig* cfg) {
  const auto& setters = Setters();
  auto it = setters.find(std::string(key));
  if (it == setters.end()) {
    return absl::InvalidArgumentError(absl::StrCat("unknown key: ", key));
  }
  return it->second(absl::StripAsciiWhitespace(value), cfg);
}

absl::Status ApplyConfigText(absl::string_view text, ExperimentConfig* cfg) {
  int lineno = 0;
  for (absl::string_view line : absl::StrSplit(text, '\n')) {
    ++lineno;
    if (size_t hash = line.find('#'); hash != absl::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = absl::StripAsciiWhitespace(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == absl::string_view::npos) {
      return absl::InvalidArgumentError(
          absl::StrCat("config line ", lineno, ": expected key = value"));
    }
    const absl::string_view key =
        absl::StripAsciiWhitespace(line.substr(0, eq));
    const absl::string_view value = line.substr(eq + 1);
    if (absl::Status s = ApplyKeyValue(key, value, cfg); !s.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat("config line ", lineno, ": ", s.message()));
    }
  }
  return absl::OkStatus();
}

absl::Status ApplyConfigFile(const std::string& path, ExperimentConfig* cfg) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot read ", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return ApplyConfigText(buf.str(), cfg);
}

absl::Status ApplyEnvironment(ExperimentConfig* cfg) {
  const char* env = std::getenv("DPAUDIT_SEED");
  if (env == nullptr || *env == '\0') return absl::OkStatus();
  if (!absl::SimpleAtoi(env, &cfg->master_seed)) {
    return absl::InvalidArgumentError(
        absl::StrCat("DPAUDIT_SEED is not an unsigned integer: ", env));
  }
  return absl::OkStatus();
}

absl::StatusOr<std::vector<uint64_t>> ParseSeedList(absl::string_view text) {
  std::vector<uint64_t> seeds;
  for (absl::string_view part : absl::StrSplit(text, ',', absl::SkipEmpty())) {
    part = absl::StripAsciiWhitespace(part);
    const size_t dash = part.find('-');
    uint64_t lo = 0, hi = 0;
    if (dash == absl::string_view::npos) {
      if (!absl::SimpleAtoi(part, &lo)) return BadValue("seeds", text);
      hi = lo;
    } else if (!absl::SimpleAtoi(part.substr(0, dash), &lo) ||
               !absl::SimpleAtoi(part.substr(dash + 1), &hi) || hi < lo) {
      return BadValue("seeds", text);
    }
    for (uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  if (seeds.empty()) return BadValue("seeds", text);
  return seeds;
}

const std::vector<std::string>& ConfigKeys() {
  static const auto* keys = [] {
    auto* out = new std::vector<std::string>;
    for (const auto& [key, setter] : Setters()) out->push_back(key);
    return out;
  }();
  return *keys;
}

}  // namespace dpaudit
