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

#include <cstdint>
#include <vector>

#include "lgcl/tensor.hpp"

namespace lgcl {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list.
///
/// `step()` reads each parameter's accumulated gradient and updates the data
/// in place. Gradients are left untouched; call `zero_grad()` between steps.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options);

  // Throws naming the first parameter whose gradient was never populated.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_count_; }
  const AdamOptions& options() const { return options_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamOptions options_;
  std::uint64_t step_count_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace lgcl
