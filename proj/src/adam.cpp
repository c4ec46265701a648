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

#include "lgcl/adam.hpp"

#include <cmath>

#include "lgcl/errors.hpp"

namespace lgcl {

Adam::Adam(std::vector<Tensor> params, AdamOptions options) : params_(std::move(params)), options_(options) {
  if (!(options_.learning_rate > 0.0)) throw Error("adam: learning rate must be positive");
  if (!(options_.epsilon > 0.0)) throw Error("adam: epsilon must be positive");
  for (const auto& p : params_) {
    if (!p.defined()) throw Error("adam: undefined parameter");
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) {
      const auto& name = params_[i].name();
      throw Error("adam: parameter '" + (name.empty() ? "#" + std::to_string(i) : name) + "' has no gradient");
    }
  }
  ++step_count_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(b1, t);
  const double bc2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto data = params_[i].mutable_data();
    auto grad = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double g = grad[j];
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      data[j] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace lgcl
