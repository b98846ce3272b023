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

#include "dpaudit/report.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <utility>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"

namespace dpaudit {
namespace {

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return absl::StrFormat("%.17g", v);
}

bool ParseDouble(absl::string_view s, double* out) {
  if (s == "nan") {
    *out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  if (s == "inf" || s == "-inf") {
    *out = (s == "inf" ? 1.0 : -1.0) * std::numeric_limits<double>::infinity();
    return true;
  }
  return absl::SimpleAtod(s, out);
}

constexpr int kWidth = 720;
constexpr int kHeight = 440;
constexpr int kLeft = 70;
constexpr int kRight = 160;
constexpr int kTop = 40;
constexpr int kBottom = 50;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                    "#ff7f0e", "#9467bd", "#8c564b",
                                    "#e377c2", "#7f7f7f", "#17becf"};

std::string EscapeXml(absl::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

}  // namespace

const std::vector<std::string>& CsvColumns() {
  static const auto* cols = new std::vector<std::string>{
      "run_id",         "seed",         "flow",
      "canary_mode",    "m",            "n",
      "epsilon_target", "sigma",        "delta",
      "r",              "W",            "epsilon_lower",
      "epsilon_optimal", "auc",         "train_acc",
      "test_acc",       "wall_seconds"};
  return *cols;
}

std::string CsvHeader() { return absl::StrJoin(CsvColumns(), ","); }

std::string FormatCsvRow(const ResultRow& row) {
  return absl::StrCat(
      row.run_id, ",", row.seed, ",", row.flow, ",", row.canary_mode, ",",
      row.m, ",", row.n, ",", FormatDouble(row.epsilon_target), ",",
      FormatDouble(row.sigma), ",", FormatDouble(row.delta), ",", row.r, ",",
      row.W, ",", FormatDouble(row.epsilon_lower), ",",
      FormatDouble(row.epsilon_optimal), ",", FormatDouble(row.auc), ",",
      FormatDouble(row.train_acc), ",", FormatDouble(row.test_acc), ",",
      FormatDouble(row.wall_seconds));
}

absl::Status EmitCsv(const std::vector<ResultRow>& rows,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  out << CsvHeader() << '\n';
  for (const ResultRow& row : rows) out << FormatCsvRow(row) << '\n';
  out.flush();
  if (!out) return absl::UnavailableError(absl::StrCat("write failed: ", path));
  return absl::OkStatus();
}

absl::StatusOr<std::vector<ResultRow>> ParseCsv(absl::string_view text) {
  std::vector<absl::string_view> lines =
      absl::StrSplit(text, '\n', absl::SkipEmpty());
  if (lines.empty() || absl::StripTrailingAsciiWhitespace(lines[0]) !=
                           CsvHeader()) {
    return absl::InvalidArgumentError("missing or unexpected CSV header");
  }
  std::vector<ResultRow> rows;
  for (size_t li = 1; li < lines.size(); ++li) {
    std::vector<absl::string_view> c =
        absl::StrSplit(absl::StripTrailingAsciiWhitespace(lines[li]), ',');
    auto bad = [&] {
      return absl::InvalidArgumentError(
          absl::StrCat("CSV line ", li + 1, " is malformed"));
    };
    if (c.size() != CsvColumns().size()) return bad();
    ResultRow r;
    r.flow = std::string(c[2]);
    r.canary_mode = std::string(c[3]);
    if (!absl::SimpleAtoi(c[0], &r.run_id) ||
        !absl::SimpleAtoi(c[1], &r.seed) ||
        !absl::SimpleAtoi(c[4], &r.m) || !absl::SimpleAtoi(c[5], &r.n) ||
        !ParseDouble(c[6], &r.epsilon_target) ||
        !ParseDouble(c[7], &r.sigma) || !ParseDouble(c[8], &r.delta) ||
        !absl::SimpleAtoi(c[9], &r.r) || !absl::SimpleAtoi(c[10], &r.W) ||
        !ParseDouble(c[11], &r.epsilon_lower) ||
        !ParseDouble(c[12], &r.epsilon_optimal) ||
        !ParseDouble(c[13], &r.auc) || !ParseDouble(c[14], &r.train_acc) ||
        !ParseDouble(c[15], &r.test_acc) ||
        !ParseDouble(c[16], &r.wall_seconds)) {
      return bad();
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

absl::StatusOr<std::vector<ResultRow>> ReadCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot read ", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseCsv(buf.str());
}

absl::StatusOr<double> NumericField(const ResultRow& row,
                                    absl::string_view field) {
  static const auto* getters =
      new std::map<std::string, double (*)(const ResultRow&), std::less<>>{
          {"run_id", [](const ResultRow& r) { return double(r.run_id); }},
          {"seed", [](const ResultRow& r) { return double(r.seed); }},
          {"m", [](const ResultRow& r) { return double(r.m); }},
          {"n", [](const ResultRow& r) { return double(r.n); }},
          {"epsilon_target",
           [](const ResultRow& r) { return r.epsilon_target; }},
          {"sigma", [](const ResultRow& r) { return r.sigma; }},
          {"delta", [](const ResultRow& r) { return r.delta; }},
          {"r", [](const ResultRow& r) { return double(r.r); }},
          {"W", [](const ResultRow& r) { return double(r.W); }},
          {"epsilon_lower", [](const ResultRow& r) { return r.epsilon_lower; }},
          {"epsilon_optimal",
           [](const ResultRow& r) { return r.epsilon_optimal; }},
          {"auc", [](const ResultRow& r) { return r.auc; }},
          {"train_acc", [](const ResultRow& r) { return r.train_acc; }},
          {"test_acc", [](const ResultRow& r) { return r.test_acc; }},
          {"wall_seconds", [](const ResultRow& r) { return r.wall_seconds; }},
      };
  auto it = getters->find(field);
  if (it == getters->end()) {
    return absl::InvalidArgumentError(
        absl::StrCat("not a numeric column: ", field));
  }
  return it->second(row);
}

absl::StatusOr<std::string> TextField(const ResultRow& row,
                                      absl::string_view field) {
  if (field == "flow") return row.flow;
  if (field == "canary_mode") return row.canary_mode;
  absl::StatusOr<double> v = NumericField(row, field);
  if (!v.ok()) return v.status();
  return absl::StrFormat("%g", *v);
}

absl::StatusOr<std::string> RenderChart(const std::vector<ResultRow>& rows,
                                        absl::string_view x_field,
                                        absl::string_view y_field,
                                        absl::string_view group_field) {
  std::map<std::string, std::vector<std::pair<double, double>>> groups;
  for (const ResultRow& row : rows) {
    absl::StatusOr<double> x = NumericField(row, x_field);
    if (!x.ok()) return x.status();
    absl::StatusOr<double> y = NumericField(row, y_field);
    if (!y.ok()) return y.status();
    absl::StatusOr<std::string> g = TextField(row, group_field);
    if (!g.ok()) return g.status();
    if (row.failed() || !std::isfinite(*x) || !std::isfinite(*y)) continue;
    groups[*g].emplace_back(*x, *y);
  }
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (auto& [name, pts] : groups) {
    std::sort(pts.begin(), pts.end());
    for (const auto& [x, y] : pts) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  }
  if (groups.empty()) x_lo = y_lo = 0.0, x_hi = y_hi = 1.0;
  if (x_hi == x_lo) x_lo -= 0.5, x_hi += 0.5;
  if (y_hi == y_lo) y_lo -= 0.5, y_hi += 0.5;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) {
    return kLeft + (x - x_lo) / (x_hi - x_lo) * plot_w;
  };
  auto py = [&](double y) {
    return kTop + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;
  };

  std::string svg = absl::StrFormat(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
      "viewBox=\"0 0 %d %d\" font-family=\"sans-serif\" font-size=\"12\">\n",
      kWidth, kHeight, kWidth, kHeight);
  absl::StrAppendFormat(&svg,
                        "<rect width=\"%d\" height=\"%d\" fill=\"white\"/>\n",
                        kWidth, kHeight);
  absl::StrAppendFormat(
      &svg, "<text x=\"%d\" y=\"24\" font-size=\"14\">%s vs %s</text>\n",
      kLeft, EscapeXml(y_field), EscapeXml(x_field));
  // Axes with min and max tick labels.
  absl::StrAppendFormat(
      &svg,
      "<line x1=\"%d\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n"
      "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%g\" stroke=\"black\"/>\n",
      kLeft, kTop + plot_h, kLeft + plot_w, kTop + plot_h, kLeft, kTop, kLeft,
      kTop + plot_h);
  absl::StrAppendFormat(
      &svg,
      "<text x=\"%d\" y=\"%g\" text-anchor=\"middle\">%g</text>\n"
      "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%g</text>\n"
      "<text x=\"%d\" y=\"%g\" text-anchor=\"end\">%g</text>\n"
      "<text x=\"%d\" y=\"%d\" text-anchor=\"end\">%g</text>\n",
      kLeft, kTop + plot_h + 18, x_lo, kLeft + plot_w, kTop + plot_h + 18,
      x_hi, kLeft - 6, kTop + plot_h, y_lo, kLeft - 6, kTop + 4, y_hi);
  absl::StrAppendFormat(
      &svg, "<text x=\"%g\" y=\"%d\" text-anchor=\"middle\">%s</text>\n",
      kLeft + plot_w / 2, kHeight - 12, EscapeXml(x_field));
  absl::StrAppendFormat(&svg,
                        "<text x=\"16\" y=\"%g\" transform=\"rotate(-90 16 "
                        "%g)\" text-anchor=\"middle\">%s</text>\n",
                        kTop + plot_h / 2, kTop + plot_h / 2,
                        EscapeXml(y_field));
  int index = 0;
  for (const auto& [name, pts] : groups) {
    const char* color = kPalette[index % std::size(kPalette)];
    std::vector<std::string> coords;
    for (const auto& [x, y] : pts) {
      coords.push_back(absl::StrFormat("%.2f,%.2f", px(x), py(y)));
    }
    absl::StrAppendFormat(&svg,
                          "<polyline fill=\"none\" stroke=\"%s\" "
                          "stroke-width=\"2\" points=\"%s\"/>\n",
                          color, absl::StrJoin(coords, " "));
    const double ly = kTop + 16.0 * index + 8;
    absl::StrAppendFormat(
        &svg,
        "<rect x=\"%g\" y=\"%g\" width=\"12\" height=\"4\" fill=\"%s\"/>\n"
        "<text x=\"%g\" y=\"%g\">%s = %s</text>\n",
        kLeft + plot_w + 14, ly - 4, color, kLeft + plot_w + 30, ly,
        EscapeXml(group_field), EscapeXml(name));
    ++index;
  }
  svg += "</svg>\n";
  return svg;
}

absl::Status EmitChart(const std::vector<ResultRow>& rows,
                       absl::string_view x_field, absl::string_view y_field,
                       absl::string_view group_field, const std::string& path) {
  absl::StatusOr<std::string> svg =
      RenderChart(rows, x_field, y_field, group_field);
  if (!svg.ok()) return svg.status();
  std::ofstream out(path);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  out << *svg;
  out.flush();
  if (!out) return absl::UnavailableError(absl::StrCat("write failed: ", path));
  return absl::OkStatus();
}

}  // namespace dpaudit
