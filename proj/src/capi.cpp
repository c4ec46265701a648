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

#include "lgcl/lgcl.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgcl/config.hpp"
#include "lgcl/errors.hpp"
#include "lgcl/report.hpp"
#include "lgcl/trainer.hpp"

struct lgcl_config {
  lgcl::ExperimentConfig config;
};

struct lgcl_report {
  lgcl::ReportSummary summary;
  double wall_time_s = -1.0;
};

namespace {

thread_local std::string last_error;

lgcl_status fail(lgcl_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

// Maps the exception in flight to a status code.
lgcl_status translate() {
  try {
    throw;
  } catch (const lgcl::ConfigError& e) {
    std::string msg;
    for (const auto& issue : e.issues()) msg += (msg.empty() ? "" : "\n") + issue;
    return fail(LGCL_ERR_INVALID_CONFIG, msg.empty() ? e.what() : msg);
  } catch (const lgcl::IoError& e) {
    return fail(LGCL_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(LGCL_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(LGCL_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(LGCL_ERR_RUNTIME, "unknown error");
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename F>
lgcl_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return LGCL_OK;
  } catch (...) {
    return translate();
  }
}

}  // namespace

extern "C" {

const char* lgcl_version(void) { return "0.1.0"; }

const char* lgcl_last_error(void) { return last_error.c_str(); }

lgcl_status lgcl_config_load(const char* path, lgcl_config** out) {
  if (!path || !out) return fail(LGCL_ERR_INVALID_ARGUMENT, "lgcl_config_load: null argument");
  return guarded([&] { *out = new lgcl_config{lgcl::load_config(path)}; });
}

lgcl_status lgcl_config_parse(const char* text, lgcl_config** out) {
  if (!text || !out) return fail(LGCL_ERR_INVALID_ARGUMENT, "lgcl_config_parse: null argument");
  return guarded([&] { *out = new lgcl_config{lgcl::parse_config(text)}; });
}

lgcl_status lgcl_config_set_seed(lgcl_config* config, uint64_t seed) {
  if (!config) return fail(LGCL_ERR_INVALID_ARGUMENT, "lgcl_config_set_seed: null config");
  config->config.seed = seed;
  return LGCL_OK;
}

lgcl_status lgcl_config_set_output_dir(lgcl_config* config, const char* dir) {
  if (!config || !dir) return fail(LGCL_ERR_INVALID_ARGUMENT, "lgcl_config_set_output_dir: null argument");
  if (!*dir) return fail(LGCL_ERR_INVALID_ARGUMENT, "lgcl_config_set_output_dir: empty path");
  config->config.output_dir = dir;
  return LGCL_OK;
}

lgcl_status lgcl_config_to_json(const lgcl_config* config, char** out) {
  if (!config || !out) return fail(LGCL_ERR_INVALID_ARGUMENT, "lgcl_config_to_json: null argument");
  return guarded([&] { *out = dup(config->config.to_json().dump(2)); });
}

void lgcl_config_free(lgcl_config* config) { delete config; }

lgcl_status lgcl_run(const lgcl_config* config, size_t eval_threads, lgcl_report** out) {
  if (!config || !out) return fail(LGCL_ERR_INVALID_ARGUMENT, "lgcl_run: null argument");
  return guarded([&] {
    lgcl::RunOptions options;
    options.eval_threads = eval_threads == 0 ? 1 : eval_threads;
    const auto report = lgcl::run_experiment(config->config, options);
    auto handle = std::make_unique<lgcl_report>();
    handle->summary = lgcl::parse_report(lgcl::report_to_json(report), config->config.output_dir + "/report.json");
    handle->wall_time_s = report.wall_time_s.value_or(-1.0);
    *out = handle.release();
  });
}

lgcl_status lgcl_report_load(const char* path, lgcl_report** out) {
  if (!path || !out) return fail(LGCL_ERR_INVALID_ARGUMENT, "lgcl_report_load: null argument");
  return guarded([&] { *out = new lgcl_report{lgcl::load_report(path)}; });
}

size_t lgcl_report_num_tasks(const lgcl_report* report) { return report ? report->summary.num_tasks() : 0; }

lgcl_status lgcl_report_avg_accuracy(const lgcl_report* report, size_t t, double* out) {
  if (!report || !out) return fail(LGCL_ERR_INVALID_ARGUMENT, "lgcl_report_avg_accuracy: null argument");
  if (t >= report->summary.num_tasks()) return fail(LGCL_ERR_INVALID_ARGUMENT, "lgcl_report_avg_accuracy: task out of range");
  *out = report->summary.avg_accuracy[t];
  return LGCL_OK;
}

lgcl_status lgcl_report_forgetting(const lgcl_report* report, size_t t, double* out, int* is_null) {
  if (!report || !out || !is_null) return fail(LGCL_ERR_INVALID_ARGUMENT, "lgcl_report_forgetting: null argument");
  if (t >= report->summary.num_tasks()) return fail(LGCL_ERR_INVALID_ARGUMENT, "lgcl_report_forgetting: task out of range");
  const auto& f = report->summary.forgetting[t];
  *is_null = f ? 0 : 1;
  *out = f.value_or(0.0);
  return LGCL_OK;
}

double lgcl_report_wall_time_s(const lgcl_report* report) { return report ? report->wall_time_s : -1.0; }

void lgcl_report_free(lgcl_report* report) { delete report; }

lgcl_status lgcl_compare(const char* const* paths, size_t n, char** table, char** csv) {
  if ((!paths && n > 0) || !table || !csv) return fail(LGCL_ERR_INVALID_ARGUMENT, "lgcl_compare: null argument");
  return guarded([&] {
    std::vector<lgcl::ReportSummary> reports;
    for (size_t i = 0; i < n; ++i) {
      if (!paths[i]) throw std::invalid_argument("lgcl_compare: null path");
      reports.push_back(lgcl::load_report(paths[i]));
    }
    const auto cmp = lgcl::compare_reports(reports);
    char* t = dup(cmp.table);
    try {
      *csv = dup(cmp.csv);
    } catch (...) {
      std::free(t);
      throw;
    }
    *table = t;
  });
}

lgcl_status lgcl_curve(const char* path, char** csv, char** sparkline) {
  if (!path || !csv) return fail(LGCL_ERR_INVALID_ARGUMENT, "lgcl_curve: null argument");
  return guarded([&] {
    const auto report = lgcl::load_report(path);
    char* c = dup(lgcl::curve_csv(report));
    if (sparkline) {
      try {
        *sparkline = dup(lgcl::sparkline(report));
      } catch (...) {
        std::free(c);
        throw;
      }
    }
    *csv = c;
  });
}

void lgcl_string_free(char* s) { std::free(s); }

}  // extern "C"
