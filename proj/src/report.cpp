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

#include "lgcl/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lgcl/errors.hpp"

namespace lgcl {

using json = nlohmann::json;

namespace {

double pct(double fraction) { return 100.0 * fraction; }

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Shortest text that parses back to the same double.
std::string shortest(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace

json report_to_json(const ExperimentReport& r) {
  json j;
  j["config"] = r.config;
  j["seed"] = r.seed;
  j["dataset_signature"] = r.dataset_signature;
  json matrix = json::array();
  for (const auto& row : r.accuracy.rows()) {
    json out = json::array();
    for (double v : row) out.push_back(pct(v));
    matrix.push_back(out);
  }
  j["accuracy_matrix"] = matrix;
  json avg = json::array();
  for (double v : r.avg_accuracy) avg.push_back(pct(v));
  j["avg_accuracy"] = avg;
  json forget = json::array();
  for (const auto& v : r.forgetting) forget.push_back(v ? json(pct(*v)) : json(nullptr));
  j["forgetting"] = forget;
  // Timing goes to timing.json so that this file stays byte-identical
  // across runs; the field is kept for schema stability.
  j["wall_time_s"] = nullptr;
  j["param_counts"] = {{"backbone", r.param_counts.backbone},
                       {"prompts", r.param_counts.prompts},
                       {"keys", r.param_counts.keys},
                       {"head", r.param_counts.head}};
  json logs = json::array();
  for (const auto& log : r.task_logs) {
    logs.push_back({{"task", log.task_id},
                    {"steps", log.steps},
                    {"epoch_loss", log.epoch_loss},
                    {"epoch_ce", log.epoch_ce},
                    {"key_cosine_start", log.key_cosine_start},
                    {"key_cosine_end", log.key_cosine_end}});
  }
  j["diagnostics"] = {{"bootstrap_val_accuracy", pct(r.bootstrap_val_accuracy)},
                      {"backbone_checksum_start", hex64(r.backbone_checksum_start)},
                      {"backbone_checksum_end", hex64(r.backbone_checksum_end)},
                      {"provider_calls_during_eval", r.provider_calls_during_eval},
                      {"task_logs", logs}};
  return j;
}

void write_report(const ExperimentReport& report, const std::filesystem::path& path) {
  write_text(path, report_to_json(report).dump(2) + "\n");
}

void write_metrics_csv(const ExperimentReport& report, const std::filesystem::path& path) {
  std::string text = "task,avg_accuracy,forgetting\n";
  for (std::size_t t = 0; t < report.avg_accuracy.size(); ++t) {
    text += std::to_string(t) + "," + shortest(pct(report.avg_accuracy[t])) + ",";
    if (report.forgetting[t]) text += shortest(pct(*report.forgetting[t]));
    text += "\n";
  }
  write_text(path, text);
}

ReportSummary parse_report(const json& j, const std::string& source) {
  auto fail = [&](const std::string& what) -> Error { return Error(source + ": malformed report: " + what); };
  if (!j.is_object()) throw fail("not a JSON object");
  ReportSummary s;
  s.source = source;
  try {
    s.seed = j.at("seed").get<std::uint64_t>();
    s.dataset_signature = j.at("dataset_signature").get<std::string>();
    const auto& cfg = j.at("config");
    if (cfg.contains("experiment")) {
      s.name = cfg["experiment"].value("name", std::string());
      s.lgcl_enabled = cfg["experiment"].value("lgcl_enabled", false);
    }
    if (cfg.contains("loss")) {
      s.lambda_task = cfg["loss"].value("lambda_task", 0.0);
      s.lambda_class = cfg["loss"].value("lambda_class", 0.0);
    }
    for (const auto& v : j.at("avg_accuracy")) s.avg_accuracy.push_back(v.get<double>());
    for (const auto& v : j.at("forgetting")) {
      s.forgetting.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
    }
  } catch (const json::exception& e) {
    throw fail(e.what());
  }
  if (s.avg_accuracy.empty()) throw fail("avg_accuracy is empty");
  if (s.forgetting.size() != s.avg_accuracy.size()) throw fail("avg_accuracy and forgetting lengths differ");
  return s;
}

ReportSummary load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open report");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(path.string() + ": malformed report: " + e.what());
  }
  return parse_report(j, path.string());
}

Comparison compare_reports(const std::vector<ReportSummary>& reports) {
  if (reports.size() < 2) throw Error("compare: need ≥ 2 reports, got " + std::to_string(reports.size()));
  for (const auto& r : reports) {
    if (r.dataset_signature != reports.front().dataset_signature) {
      throw Error("compare: dataset signature mismatch: " + reports.front().source + " has '" +
                  reports.front().dataset_signature + "', " + r.source + " has '" + r.dataset_signature + "'");
    }
  }
  std::size_t width = 6;
  for (const auto& r : reports) width = std::max(width, r.source.size());
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  auto lpad = [](const std::string& s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };

  Comparison c;
  c.table = pad("report", width) + "  " + pad("name", 24) + "  " + lpad("seed", 6) + "  " + lpad("L_task", 6) + "  " +
            lpad("L_class", 7) + "  " + lpad("Acc", 7) + "  " + lpad("Forgetting", 10) + "\n";
  c.csv = "report,name,seed,lambda_task,lambda_class,final_avg_accuracy,final_forgetting\n";
  for (const auto& r : reports) {
    const double lt = r.lgcl_enabled ? r.lambda_task : 0.0;
    const double lc = r.lgcl_enabled ? r.lambda_class : 0.0;
    const auto f = r.final_forgetting();
    c.table += pad(r.source, width) + "  " + pad(r.name, 24) + "  " + lpad(std::to_string(r.seed), 6) + "  " +
               lpad(lt > 0 ? "yes" : "no", 6) + "  " + lpad(lc > 0 ? "yes" : "no", 7) + "  " +
               lpad(fixed(r.final_accuracy(), 2), 7) + "  " + lpad(f ? fixed(*f, 2) : "-", 10) + "\n";
    c.csv += r.source + "," + r.name + "," + std::to_string(r.seed) + "," + shortest(lt) + "," + shortest(lc) + "," +
             shortest(r.final_accuracy()) + "," + (f ? shortest(*f) : std::string()) + "\n";
  }
  return c;
}

std::string curve_csv(const ReportSummary& report) {
  std::string out = "t,avg_accuracy\n";
  for (std::size_t t = 0; t < report.avg_accuracy.size(); ++t) {
    out += std::to_string(t) + "," + shortest(report.avg_accuracy[t]) + "\n";
  }
  return out;
}

std::string sparkline(const ReportSummary& report) {
  static const char* const kBars[] = {"▁", "▂", "▃", "▄", "▅", "▆", "▇", "█"};
  const auto [lo, hi] = std::minmax_element(report.avg_accuracy.begin(), report.avg_accuracy.end());
  std::string out;
  for (double v : report.avg_accuracy) {
    std::size_t level = 7;
    if (*hi > *lo) level = static_cast<std::size_t>((v - *lo) / (*hi - *lo) * 7.0 + 0.5);
    out += kBars[level];
  }
  return out;
}

}  // namespace lgcl
