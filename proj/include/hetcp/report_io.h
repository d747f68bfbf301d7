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

#ifndef HETCP_REPORT_IO_H_
#define HETCP_REPORT_IO_H_

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hetcp/harness.h"

namespace hetcp {

// Six significant digits; "inf" / "-inf" / "nan" for non-finite values.
std::string FormatNumber(double value);

// A finite value rounded to six significant digits, or null.
nlohmann::json JsonNumber(double value);

struct ScoreRow {
  std::string id;
  double score = 0.0;
  double ratio = 1.0;
};

// Reads "id,score[,ratio]" with a header line naming the columns. Rows
// without a ratio column get ratio 1. Throws Error(kParseError).
std::vector<ScoreRow> ReadScoresCsv(std::istream& in);
std::vector<ScoreRow> ReadScoresCsvFile(const std::string& path);

// Reads "id,ratio" with a header line.
std::map<std::string, double> ReadRatiosCsv(std::istream& in);
std::map<std::string, double> ReadRatiosCsvFile(const std::string& path);

// Overrides each row's ratio by id. Throws Error(kInvalidArgument) when an
// id has no ratio.
void ApplyRatios(std::vector<ScoreRow>& rows,
                 const std::map<std::string, double>& ratios);

std::vector<CalibrationRecord> ToCalibrationRecords(
    std::span<const ScoreRow> rows);

// replication_id,method,coverage,mean_width,miscoverage
void WriteReplicationCsv(std::ostream& out,
                         std::span<const ReplicationResult> rows);

nlohmann::json ReportToJson(const ExperimentReport& report);
nlohmann::json BoundsToJson(const BoundReport& bounds);

}  // namespace hetcp

#endif  // HETCP_REPORT_IO_H_
