//
// Copyright 2026 The hetcp Authors
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

#include "hetcp/report_io.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "hetcp/error.h"

namespace hetcp {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(Trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseDouble(const std::string& cell, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) +
                                            ": not a number '" + cell + "'");
  }
}

// Column index by header name, or -1.
int Column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> ReadHeader(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kParseError, "missing CSV header");
  }
  return SplitCsv(Trim(line));
}

std::ifstream OpenOrThrow(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return in;
}

}  // namespace

std::string FormatNumber(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

nlohmann::json JsonNumber(double value) {
  if (!std::isfinite(value)) return nullptr;
  return std::stod(FormatNumber(value));
}

std::vector<ScoreRow> ReadScoresCsv(std::istream& in) {
  const auto header = ReadHeader(in);
  const int id_col = Column(header, "id");
  const int score_col = Column(header, "score");
  const int ratio_col = Column(header, "ratio");
  if (id_col < 0 || score_col < 0) {
    throw Error(ErrorCode::kParseError,
                "scores CSV header must name 'id' and 'score'");
  }
  std::vector<ScoreRow> rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const auto cells = SplitCsv(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields");
    }
    ScoreRow row;
    row.id = cells[static_cast<std::size_t>(id_col)];
    row.score = ParseDouble(cells[static_cast<std::size_t>(score_col)], line_no);
    if (ratio_col >= 0) {
      row.ratio =
          ParseDouble(cells[static_cast<std::size_t>(ratio_col)], line_no);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ScoreRow> ReadScoresCsvFile(const std::string& path) {
  auto in = OpenOrThrow(path);
  return ReadScoresCsv(in);
}

std::map<std::string, double> ReadRatiosCsv(std::istream& in) {
  const auto header = ReadHeader(in);
  const int id_col = Column(header, "id");
  const int ratio_col = Column(header, "ratio");
  if (id_col < 0 || ratio_col < 0) {
    throw Error(ErrorCode::kParseError,
                "ratios CSV header must name 'id' and 'ratio'");
  }
  std::map<std::string, double> out;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const auto cells = SplitCsv(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": wrong field count");
    }
    out[cells[static_cast<std::size_t>(id_col)]] =
        ParseDouble(cells[static_cast<std::size_t>(ratio_col)], line_no);
  }
  return out;
}

std::map<std::string, double> ReadRatiosCsvFile(const std::string& path) {
  auto in = OpenOrThrow(path);
  return ReadRatiosCsv(in);
}

void ApplyRatios(std::vector<ScoreRow>& rows,
                 const std::map<std::string, double>& ratios) {
  for (auto& row : rows) {
    auto it = ratios.find(row.id);
    if (it == ratios.end()) {
      throw Error(ErrorCode::kInvalidArgument, "no ratio for id " + row.id);
    }
    row.ratio = it->second;
  }
}

std::vector<CalibrationRecord> ToCalibrationRecords(
    std::span<const ScoreRow> rows) {
  std::vector<CalibrationRecord> records;
  records.reserve(rows.size());
  for (const auto& row : rows) {
    CalibrationRecord r;
    r.score = Score(row.score);
    r.ratio = row.ratio;
    records.push_back(std::move(r));
  }
  return records;
}

void WriteReplicationCsv(std::ostream& out,
                         std::span<const ReplicationResult> rows) {
  out << "replication_id,method,coverage,mean_width,miscoverage\n";
  for (const auto& r : rows) {
    out << r.replication << ',' << r.arm.Label() << ','
        << FormatNumber(r.coverage) << ',' << FormatNumber(r.mean_width) << ','
        << FormatNumber(r.miscoverage) << '\n';
  }
}

nlohmann::json BoundsToJson(const BoundReport& b) {
  return {
      {"n", b.n},
      {"delta", JsonNumber(b.delta)},
      {"tau", JsonNumber(b.tau)},
      {"bias_bound", JsonNumber(b.bias_bound)},
      {"lower_radius", JsonNumber(b.lower_radius)},
      {"upper_radius", JsonNumber(b.upper_radius)},
      {"expected_test_ratio", JsonNumber(b.expected_test_ratio)},
      {"expected_test_ratio_sq", JsonNumber(b.expected_test_ratio_sq)},
  };
}

nlohmann::json ReportToJson(const ExperimentReport& report) {
  const SyntheticSpec& s = report.spec;
  nlohmann::json j;
  j["config"] = {
      {"alpha", JsonNumber(report.alpha)},
      {"replications", report.replications},
      {"base_seed", report.base_seed},
      {"p1", {{"mean", JsonNumber(s.p1_mean)},
              {"variance", JsonNumber(s.p1_variance)}}},
      {"p2", {{"mean", JsonNumber(s.p2_mean)},
              {"variance", JsonNumber(s.p2_variance)}}},
      {"mix", {s.mix_p1, s.mix_p2}},
      {"single_source_size", s.single_source_size},
      {"noise_std", JsonNumber(s.noise_std)},
      {"train_size", s.train_size},
      {"test_size", s.test_size},
      {"epochs", s.epochs},
      {"learning_rate", JsonNumber(s.learning_rate)},
  };
  j["methods"] = nlohmann::json::array();
  for (const auto& a : report.summaries) {
    j["methods"].push_back({
        {"method", a.arm.Label()},
        {"replications", a.replications},
        {"mean_coverage", JsonNumber(a.mean_coverage)},
        {"std_coverage", JsonNumber(a.std_coverage)},
        {"mean_width", JsonNumber(a.mean_width)},
        {"mean_median_width", JsonNumber(a.mean_median_width)},
        {"unbounded_fraction", JsonNumber(a.unbounded_fraction)},
    });
  }
  j["bounds"] = nlohmann::json::array();
  for (const auto& b : report.bounds) {
    auto entry = BoundsToJson(b.bounds);
    entry["source"] = std::string(SourceName(b.source));
    j["bounds"].push_back(std::move(entry));
  }
  j["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows) {
    j["rows"].push_back({
        {"replication_id", r.replication},
        {"method", r.arm.Label()},
        {"coverage", JsonNumber(r.coverage)},
        {"mean_width", JsonNumber(r.mean_width)},
        {"miscoverage", JsonNumber(r.miscoverage)},
    });
  }
  return j;
}

}  // namespace hetcp
