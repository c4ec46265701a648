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


/* C interface to lgcl-lab. All handles are opaque; every call that can fail
 * returns an lgcl_status and leaves a message for lgcl_last_error() on the
 * calling thread. Strings returned through char** are owned by the caller
 * and released with lgcl_string_free. */

#ifndef LGCL_LGCL_H_
#define LGCL_LGCL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(LGCL_BUILDING_LIBRARY)
#define LGCL_API __declspec(dllexport)
#else
#define LGCL_API __declspec(dllimport)
#endif
#else
#define LGCL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lgcl_status {
  LGCL_OK = 0,
  LGCL_ERR_INVALID_ARGUMENT = 1,
  LGCL_ERR_INVALID_CONFIG = 2,
  LGCL_ERR_IO = 3,
  LGCL_ERR_RUNTIME = 4
} lgcl_status;

typedef struct lgcl_config lgcl_config;
typedef struct lgcl_report lgcl_report;

LGCL_API const char* lgcl_version(void);
/* Message of the last failed call on this thread; "" if none. For
 * LGCL_ERR_INVALID_CONFIG it holds one "<key.path>: message" per line. */
LGCL_API const char* lgcl_last_error(void);

LGCL_API lgcl_status lgcl_config_load(const char* path, lgcl_config** out);
LGCL_API lgcl_status lgcl_config_parse(const char* text, lgcl_config** out);
LGCL_API lgcl_status lgcl_config_set_seed(lgcl_config* config, uint64_t seed);
LGCL_API lgcl_status lgcl_config_set_output_dir(lgcl_config* config, const char* dir);
/* Canonical JSON echo of the configuration. */
LGCL_API lgcl_status lgcl_config_to_json(const lgcl_config* config, char** out);
LGCL_API void lgcl_config_free(lgcl_config* config);

/* Runs the experiment and writes report.json, metrics.csv, timing.json and
 * checkpoint/ under the output dir. eval_threads of 0 means 1. */
LGCL_API lgcl_status lgcl_run(const lgcl_config* config, size_t eval_threads, lgcl_report** out);

LGCL_API lgcl_status lgcl_report_load(const char* path, lgcl_report** out);
LGCL_API size_t lgcl_report_num_tasks(const lgcl_report* report);
/* Percent values, as stored in report.json. */
LGCL_API lgcl_status lgcl_report_avg_accuracy(const lgcl_report* report, size_t t, double* out);
/* *is_null is set to 1 where forgetting is undefined (t = 0). */
LGCL_API lgcl_status lgcl_report_forgetting(const lgcl_report* report, size_t t, double* out, int* is_null);
/* Wall time of the run that produced the handle; -1 for loaded reports. */
LGCL_API double lgcl_report_wall_time_s(const lgcl_report* report);
LGCL_API void lgcl_report_free(lgcl_report* report);

/* Side-by-side final A_T and F_T of n >= 2 report files. */
LGCL_API lgcl_status lgcl_compare(const char* const* paths, size_t n, char** table, char** csv);
/* Per-task A_t CSV; sparkline may be NULL. */
LGCL_API lgcl_status lgcl_curve(const char* path, char** csv, char** sparkline);

LGCL_API void lgcl_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* LGCL_LGCL_H_ */
