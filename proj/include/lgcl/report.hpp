// Copyright 2026 The lgcl-lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lgcl/trainer.hpp"

namespace lgcl {

// Report files carry percentages (100x the internal fractions).
nlohmann::json report_to_json(const ExperimentReport& report);
void write_report(const ExperimentReport& report, const std::filesystem::path& path);
// Flat CSV: task,avg_accuracy,forgetting (forgetting empty at t = 0).
void write_metrics_csv(const ExperimentReport& report, const std::filesystem::path& path);

/// What compare and curve need from a report.json, read back as written.
struct ReportSummary {
  std::string source;
  std::string name;
  std::uint64_t seed = 0;
  std::string dataset_signature;
  bool lgcl_enabled = false;
  double lambda_task = 0.0;
  double lambda_class = 0.0;
  std::vector<double> avg_accuracy;                // percent
  std::vector<std::optional<double>> forgetting;  // percent, null at t = 0

  std::size_t num_tasks() const { return avg_accuracy.size(); }
  double final_accuracy() const { return avg_accuracy.back(); }
  std::optional<double> final_forgetting() const { return forgetting.back(); }
};

ReportSummary parse_report(const nlohmann::json& report, const std::string& source);
ReportSummary load_report(const std::filesystem::path& path);

struct Comparison {
  std::string table;  // aligned text for a terminal
  std::string csv;    // report,name,seed,final_avg_accuracy,final_forgetting
};

// Needs at least two reports sharing one dataset signature; rows keep the
// given order.
Comparison compare_reports(const std::vector<ReportSummary>& reports);

// "t,avg_accuracy" rows, one per task.
std::string curve_csv(const ReportSummary& report);
// One block character per task, scaled between the min and max A_t.
std::string sparkline(const ReportSummary& report);

}  // namespace lgcl
