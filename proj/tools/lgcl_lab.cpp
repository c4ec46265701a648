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

// lgcl_lab: run experiments and summarize their reports.
//
//   lgcl_lab run CONFIG [--seed S] [--out DIR]
//   lgcl_lab compare REPORT REPORT... [--csv FILE]
//   lgcl_lab curve REPORT [--csv FILE] [--sparkline]
//
// LGCL_LAB_THREADS caps evaluation parallelism (default 1).

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lgcl/lgcl.h"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

int report_failure(lgcl_status status) {
  std::cerr << "error: " << lgcl_last_error() << "\n";
  return status == LGCL_ERR_INVALID_CONFIG ? kExitConfig : kExitRuntime;
}

std::size_t eval_threads() {
  const char* env = std::getenv("LGCL_LAB_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v == 0) {
    std::cerr << "warning: ignoring LGCL_LAB_THREADS='" << env << "'\n";
    return 1;
  }
  return v;
}

bool write_file(const std::string& path, const char* text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    return false;
  }
  return true;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_dir) {
  lgcl_config* config = nullptr;
  lgcl_status st = lgcl_config_load(config_path.c_str(), &config);
  if (st != LGCL_OK) return report_failure(st);
  if (seed) lgcl_config_set_seed(config, *seed);
  if (!out_dir.empty()) lgcl_config_set_output_dir(config, out_dir.c_str());

  lgcl_report* report = nullptr;
  st = lgcl_run(config, eval_threads(), &report);
  lgcl_config_free(config);
  if (st != LGCL_OK) return report_failure(st);

  const std::size_t tasks = lgcl_report_num_tasks(report);
  for (std::size_t t = 0; t < tasks; ++t) {
    double acc = 0.0;
    double forget = 0.0;
    int is_null = 0;
    lgcl_report_avg_accuracy(report, t, &acc);
    lgcl_report_forgetting(report, t, &forget, &is_null);
    std::printf("task %zu  A_t %6.2f  F_t %s\n", t, acc, is_null ? "     -" : std::to_string(forget).substr(0, 6).c_str());
  }
  std::printf("wall time %.1f s\n", lgcl_report_wall_time_s(report));
  lgcl_report_free(report);
  return 0;
}

int cmd_compare(const std::vector<std::string>& paths, const std::string& csv_path) {
  std::vector<const char*> raw;
  for (const auto& p : paths) raw.push_back(p.c_str());
  char* table = nullptr;
  char* csv = nullptr;
  const lgcl_status st = lgcl_compare(raw.data(), raw.size(), &table, &csv);
  if (st != LGCL_OK) return report_failure(st);
  std::fputs(table, stdout);
  bool ok = true;
  if (!csv_path.empty()) ok = write_file(csv_path, csv);
  lgcl_string_free(table);
  lgcl_string_free(csv);
  return ok ? 0 : kExitRuntime;
}

int cmd_curve(const std::string& path, const std::string& csv_path, bool with_sparkline) {
  char* csv = nullptr;
  char* spark = nullptr;
  const lgcl_status st = lgcl_curve(path.c_str(), &csv, with_sparkline ? &spark : nullptr);
  if (st != LGCL_OK) return report_failure(st);
  bool ok = true;
  if (csv_path.empty()) {
    std::fputs(csv, stdout);
  } else {
    ok = write_file(csv_path, csv);
  }
  if (spark) std::printf("%s\n", spark);
  lgcl_string_free(csv);
  lgcl_string_free(spark);
  return ok ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Language-guided prompt continual learning lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", lgcl_version());

  auto* run = app.add_subcommand("run", "Run one experiment from a config file");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  run->add_option("config", config_path, "Experiment config (.toml)")->required();
  run->add_option("--seed", seed, "Override experiment.seed");
  run->add_option("--out", out_dir, "Override experiment.output_dir");

  auto* compare = app.add_subcommand("compare", "Compare final accuracy and forgetting across reports");
  std::vector<std::string> reports;
  std::string compare_csv;
  compare->add_option("reports", reports, "report.json files")->required();
  compare->add_option("--csv", compare_csv, "Also write the comparison as CSV");

  auto* curve = app.add_subcommand("curve", "Per-task average accuracy of one report");
  std::string curve_report;
  std::string curve_csv;
  bool with_sparkline = false;
  curve->add_option("report", curve_report, "report.json file")->required();
  curve->add_option("--csv", curve_csv, "Write the CSV here instead of stdout");
  curve->add_flag("--sparkline", with_sparkline, "Print a text sparkline of A_t");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*run) return cmd_run(config_path, seed, out_dir);
  if (*compare) return cmd_compare(reports, compare_csv);
  return cmd_curve(curve_report, curve_csv, with_sparkline);
}
