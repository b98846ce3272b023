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

// Results CSV and SVG line charts.

#ifndef DPAUDIT_REPORT_H_
#define DPAUDIT_REPORT_H_

#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "dpaudit/harness.h"

namespace dpaudit {

// Column names in ResultRow field order.
const std::vector<std::string>& CsvColumns();
std::string CsvHeader();
// Doubles are written with 17 significant digits, so rows round-trip.
std::string FormatCsvRow(const ResultRow& row);

absl::Status EmitCsv(const std::vector<ResultRow>& rows,
                     const std::string& path);
absl::StatusOr<std::vector<ResultRow>> ParseCsv(absl::string_view text);
absl::StatusOr<std::vector<ResultRow>> ReadCsv(const std::string& path);

// Numeric value of a column, InvalidArgument for text columns or unknown
// names.
absl::StatusOr<double> NumericField(const ResultRow& row,
                                    absl::string_view field);
// Any column rendered as text.
absl::StatusOr<std::string> TextField(const ResultRow& row,
                                      absl::string_view field);

// One polyline per distinct value of `group_field`, vertices sorted by x.
// Failed rows and non-finite points are skipped.
absl::StatusOr<std::string> RenderChart(const std::vector<ResultRow>& rows,
                                        absl::string_view x_field,
                                        absl::string_view y_field,
                                        absl::string_view group_field);
absl::Status EmitChart(const std::vector<ResultRow>& rows,
                       absl::string_view x_field, absl::string_view y_field,
                       absl::string_view group_field, const std::string& path);

}  // namespace dpaudit

#endif  // DPAUDIT_REPORT_H_
