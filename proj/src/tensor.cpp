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

#include "lgcl/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "lgcl/errors.hpp"
#include "node.hpp"

namespace lgcl {

namespace {
thread_local bool t_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor of shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
                     " values, got " + std::to_string(data.size()));
  }
  auto node = detail::make_node(std::move(shape), std::move(data));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_data({}, {value}, requires_grad); }

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const auto n = values.size();
  return from_data({n}, std::move(values), requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = stddev * rng.normal();
  return from_data(std::move(shape), std::move(data), requires_grad);
}

detail::Node& Tensor::checked() const {
  if (!node_) throw Error("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }
std::size_t Tensor::numel() const { return checked().data.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  return s[axis];
}

std::span<const double> Tensor::data() const { return checked().data; }
std::span<double> Tensor::mutable_data() { return checked().data; }

double Tensor::item() const {
  const auto& n = checked();
  if (n.data.size() != 1) throw ShapeError("item() needs a single-element tensor, got " + shape_str(n.shape));
  return n.data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& n = checked();
  if (index.size() != n.shape.size()) throw ShapeError("index rank does not match shape " + shape_str(n.shape));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= n.shape[axis]) throw ShapeError("index out of range for shape " + shape_str(n.shape));
    flat = flat * n.shape[axis] + i;
    ++axis;
  }
  return n.data[flat];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  auto& n = checked();
  if (!n.inputs.empty()) throw Error("requires_grad can only be changed on leaf tensors");
  n.requires_grad = value;
  if (!value) n.grad.clear();
  return *this;
}

bool Tensor::has_grad() const {
  const auto& n = checked();
  return !n.grad.empty();
}

std::span<const double> Tensor::grad() const {
  const auto& n = checked();
  if (n.grad.empty()) throw Error("tensor '" + n.name + "' has no gradient");
  return n.grad;
}

std::span<double> Tensor::mutable_grad() { return checked().ensure_grad(); }

void Tensor::zero_grad() {
  auto& n = checked();
  if (n.requires_grad) n.ensure_grad();
  std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

const std::string& Tensor::name() const { return checked().name; }

Tensor& Tensor::set_name(std::string name) {
  checked().name = std::move(name);
  return *this;
}

Tensor Tensor::detach() const {
  const auto& n = checked();
  return Tensor(detail::make_node(n.shape, n.data));
}

void Tensor::backward() const {
  auto& root = checked();
  if (!root.shape.empty()) throw ShapeError("backward() needs a scalar loss of shape [], got " + shape_str(root.shape));
  if (!root.requires_grad) throw Error("backward() on a tensor that does not require grad");
  if (root.consumed) throw Error("backward() called twice on the same graph");

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{&root, 0}};
  visited.insert(&root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
  // Consume the graph: interior nodes drop their edges and scratch grads.
  for (detail::Node* node : order) {
    if (!node->inputs.empty() || node->backward) {
      node->inputs.clear();
      node->backward = nullptr;
      node->consumed = true;
      if (node != &root) node->grad.clear();
    }
  }
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

}  // namespace lgcl
