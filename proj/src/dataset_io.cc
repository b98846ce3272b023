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

#include <fstream>
#include <string>
#include <vector>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "absl/strings/string_view.h"
#include "dpaudit/canary.h"

namespace dpaudit {
namespace {

constexpr absl::string_view kMagic = "dpaudit-dataset";
constexpr int kSchemaVersion = 1;

absl::Status ParseError(int line, absl::string_view what) {
  return absl::InvalidArgumentError(
      absl::StrCat("dataset line ", line, ": ", what));
}

}  // namespace

absl::Status WriteAuditDataset(const AuditDataset& dataset,
                               const std::string& path) {
  std::ofstream out(path);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot open ", path));
  out << kMagic << ',' << kSchemaVersion << '\n';
  out << "m,d_x,C,mode,sigma0,seed\n";
  out << absl::StrFormat("%d,%d,%d,%s,%.17g,%d\n", dataset.size(),
                         dataset.dim(), dataset.num_classes,
                         CanaryModeName(dataset.mode), dataset.sigma0,
                         dataset.seed);
  for (int i = 0; i < dataset.size(); ++i) {
    std::string line;
    for (int j = 0; j < dataset.dim(); ++j) {
      absl::StrAppendFormat(&line, "%.17g,", dataset.features(i, j));
    }
    absl::StrAppend(&line, dataset.member_labels[i], ",",
                    dataset.comp_labels[i], "\n");
    out << line;
  }
  out.flush();
  if (!out) return absl::UnavailableError(absl::StrCat("write failed: ", path));
  return absl::OkStatus();
}

absl::StatusOr<AuditDataset> ReadAuditDataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::string line;
  if (!std::getline(in, line)) return ParseError(1, "missing magic line");
  std::vector<absl::string_view> magic = absl::StrSplit(line, ',');
  int version = 0;
  if (magic.size() != 2 || magic[0] != kMagic ||
      !absl::SimpleAtoi(magic[1], &version) || version != kSchemaVersion) {
    return ParseError(1, "not a dpaudit dataset v1 file");
  }
  if (!std::getline(in, line) || line != "m,d_x,C,mode,sigma0,seed") {
    return ParseError(2, "unexpected header columns");
  }
  if (!std::getline(in, line)) return ParseError(3, "missing header values");
  std::vector<absl::string_view> h = absl::StrSplit(line, ',');
  int m = 0, dim = 0, num_classes = 0;
  AuditDataset ds;
  if (h.size() != 6 || !absl::SimpleAtoi(h[0], &m) ||
      !absl::SimpleAtoi(h[1], &dim) || !absl::SimpleAtoi(h[2], &num_classes) ||
      !absl::SimpleAtod(h[4], &ds.sigma0) ||
      !absl::SimpleAtoi(h[5], &ds.seed) || m < 1 || dim < 1 ||
      num_classes < 1) {
    return ParseError(3, "malformed header values");
  }
  absl::StatusOr<CanaryMode> mode = ParseCanaryMode(h[3]);
  if (!mode.ok()) return ParseError(3, mode.status().message());
  ds.mode = *mode;
  ds.num_classes = num_classes;
  ds.features.resize(m, dim);
  ds.member_labels.resize(m);
  ds.comp_labels.resize(m);
  for (int i = 0; i < m; ++i) {
    const int lineno = 4 + i;
    if (!std::getline(in, line)) return ParseError(lineno, "missing row");
    std::vector<absl::string_view> cells = absl::StrSplit(line, ',');
    if (static_cast<int>(cells.size()) != dim + 2) {
      return ParseError(lineno, "wrong number of columns");
    }
    for (int j = 0; j < dim; ++j) {
      if (!absl::SimpleAtod(cells[j], &ds.features(i, j))) {
        return ParseError(lineno, "bad feature value");
      }
    }
    if (!absl::SimpleAtoi(cells[dim], &ds.member_labels[i]) ||
        !absl::SimpleAtoi(cells[dim + 1], &ds.comp_labels[i]) ||
        ds.member_labels[i] < 0 || ds.member_labels[i] >= num_classes ||
        ds.comp_labels[i] < 0 || ds.comp_labels[i] >= num_classes) {
      return ParseError(lineno, "bad label");
    }
  }
  return ds;
}

}  // namespace dpaudit
