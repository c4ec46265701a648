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
#include <optional>
#include <vector>

namespace lgcl {

/// Lower-triangular accuracy matrix: row t holds the accuracy on tasks
/// 0..t measured right after training task t. Values are fractions in [0, 1].
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  // Throws unless rows are lower-triangular with entries in [0, 1].
  explicit AccuracyMatrix(std::vector<std::vector<double>> rows);

  // Row t must have exactly t + 1 entries.
  void append_row(std::vector<double> row);

  std::size_t num_rows() const { return rows_.size(); }
  const std::vector<double>& row(std::size_t t) const;
  double at(std::size_t t, std::size_t task) const;
  const std::vector<std::vector<double>>& rows() const { return rows_; }

 private:
  std::vector<std::vector<double>> rows_;
};

// Mean of row t.
double average_accuracy(const AccuracyMatrix& acc, std::size_t t);

// For t >= 1: mean over tasks k < t of (max over t' in [k, t-1] of E[t'][k]) - E[t][k].
// Empty at t == 0.
std::optional<double> forgetting(const AccuracyMatrix& acc, std::size_t t);

}  // namespace lgcl
