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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "lgcl/errors.hpp"
#include "lgcl/report.hpp"

using namespace lgcl;

namespace {

ExperimentReport fake_report(const std::string& name, std::uint64_t seed, std::vector<std::vector<double>> rows) {
  ExperimentReport r;
  ExperimentConfig c;
  c.name = name;
  c.seed = seed;
  r.config = c.to_json();
  r.seed = seed;
  r.dataset_signature = c.dataset_signature();
  r.accuracy = AccuracyMatrix(std::move(rows));
  for (std::size_t t = 0; t < r.accuracy.num_rows(); ++t) {
    r.avg_accuracy.push_back(average_accuracy(r.accuracy, t));
    r.forgetting.push_back(forgetting(r.accuracy, t));
  }
  r.param_counts = {100, 20, 10, 5};
  return r;
}

std::filesystem::path write_report_file(const ExperimentReport& r, const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / name;
  write_report(r, p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("report") {

TEST_CASE("report json layout") {
  const auto r = fake_report("a", 1, {{0.9}, {0.8, 0.85}});
  const auto j = report_to_json(r);
  CHECK(j["accuracy_matrix"][1][1].get<double>() == doctest::Approx(85.0));
  CHECK(j["accuracy_matrix"][1].size() == 2);
  CHECK(j["avg_accuracy"][1].get<double>() == doctest::Approx(82.5));
  CHECK(j["forgetting"][0].is_null());
  CHECK(j["forgetting"][1].get<double>() == doctest::Approx(10.0));
  CHECK(j["wall_time_s"].is_null());
  CHECK(j["param_counts"]["backbone"] == 100);
  CHECK(j["config"]["experiment"]["name"] == "a");
}

TEST_CASE("report files round trip into summaries") {
  const auto r = fake_report("a", 1, {{0.9}, {0.8, 0.85}, {0.7, 0.8, 0.95}});
  const auto p = write_report_file(r, "lgcl_report_rt.json");
  const auto s = load_report(p);
  const auto j = report_to_json(r);
  CHECK(s.num_tasks() == 3);
  for (std::size_t t = 0; t < 3; ++t) CHECK(s.avg_accuracy[t] == j["avg_accuracy"][t].get<double>());
  CHECK_FALSE(s.forgetting[0].has_value());

  const auto csv = curve_csv(s);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "t,avg_accuracy");
  for (std::size_t t = 0; t < 3; ++t) {
    std::getline(lines, line);
    const auto comma = line.find(',');
    CHECK(std::stoul(line.substr(0, comma)) == t);
    CHECK(std::stod(line.substr(comma + 1)) == s.avg_accuracy[t]);
  }
  CHECK_FALSE(std::getline(lines, line));
  CHECK_FALSE(sparkline(s).empty());
  std::filesystem::remove(p);
}

TEST_CASE("metrics csv") {
  const auto r = fake_report("a", 1, {{0.9}, {0.8, 0.85}});
  const auto p = std::filesystem::temp_directory_path() / "lgcl_metrics.csv";
  write_metrics_csv(r, p);
  CHECK(slurp(p) == "task,avg_accuracy,forgetting\n0,90,\n1,82.5,9.999999999999998\n");
  std::filesystem::remove(p);
}

TEST_CASE("compare") {
  const auto a = parse_report(report_to_json(fake_report("baseline", 1, {{0.9}, {0.6, 0.8}})), "a.json");
  const auto b = parse_report(report_to_json(fake_report("lgcl", 1, {{0.9}, {0.7, 0.8}})), "b.json");
  const auto cmp = compare_reports({a, b});
  CHECK(cmp.table.find("Acc") != std::string::npos);
  CHECK(cmp.table.find("Forgetting") != std::string::npos);
  CHECK(cmp.table.find("baseline") < cmp.table.find("lgcl"));
  std::size_t rows = 0;
  for (char ch : cmp.csv) rows += ch == '\n';
  CHECK(rows == 3);

  CHECK_THROWS_WITH_AS(compare_reports({a}), doctest::Contains("need ≥ 2"), Error);
  auto other = b;
  other.dataset_signature = "different";
  CHECK_THROWS_WITH_AS(compare_reports({a, other}), doctest::Contains("signature"), Error);
}

TEST_CASE("malformed reports") {
  CHECK_THROWS_AS(parse_report(nlohmann::json::array(), "x"), Error);
  CHECK_THROWS_AS(parse_report(nlohmann::json{{"seed", 1}}, "x"), Error);
  const auto p = std::filesystem::temp_directory_path() / "lgcl_bad_report.json";
  std::ofstream(p) << "{not json";
  CHECK_THROWS_WITH_AS(load_report(p), doctest::Contains("lgcl_bad_report.json"), Error);
  std::filesystem::remove(p);
}

}  // TEST_SUITE
