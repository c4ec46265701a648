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

#include "lgcl/metrics.hpp"

#include <algorithm>
#include <string>

#include "lgcl/errors.hpp"

namespace lgcl {

AccuracyMatrix::AccuracyMatrix(std::vector<std::vector<double>> rows) {
  for (auto& r : rows) append_row(std::move(r));
}

void AccuracyMatrix::append_row(std::vector<double> row) {
  const std::size_t t = rows_.size();
  if (row.size() != t + 1) {
    throw Error("accuracy row " + std::to_string(t) + " needs " + std::to_string(t + 1) + " entries, got " +
                std::to_string(row.size()));
  }
  for (double v : row) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error("accuracy " + std::to_string(v) + " outside [0, 1]");
  }
  rows_.push_back(std::move(row));
}

const std::vector<double>& AccuracyMatrix::row(std::size_t t) const {
  if (t >= rows_.size()) throw Error("accuracy row " + std::to_string(t) + " not recorded");
  return rows_[t];
}

double AccuracyMatrix::at(std::size_t t, std::size_t task) const {
  const auto& r = row(t);
  if (task >= r.size()) {
    throw Error("accuracy E[" + std::to_string(t) + "][" + std::to_string(task) + "] is undefined");
  }
  return r[task];
}

double average_accuracy(const AccuracyMatrix& acc, std::size_t t) {
  const auto& r = acc.row(t);
  double total = 0.0;
  for (double v : r) total += v;
  return total / static_cast<double>(t + 1);
}

std::optional<double> forgetting(const AccuracyMatrix& acc, std::size_t t) {
  acc.row(t);
  if (t == 0) return std::nullopt;
  double total = 0.0;
  for (std::size_t task = 0; task < t; ++task) {
    // The max includes row t itself, so a task that only improved contributes 0.
    double peak = acc.at(task, task);
    for (std::size_t prev = task + 1; prev <= t; ++prev) peak = std::max(peak, acc.at(prev, task));
    total += peak - acc.at(t, task);
  }
  return total / static_cast<double>(t);
}

}  // namespace lgcl
