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
#include <span>
#include <vector>

#include "lgcl/tensor.hpp"

// Differentiable ops. Binary elementwise ops require equal shapes, except
// that either operand may be a rank-0 scalar. There is no other
// broadcasting; mismatches throw ShapeError naming the op and both shapes.
namespace lgcl {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

// [n,k] x [k,m] -> [n,m]
Tensor matmul(const Tensor& a, const Tensor& b);
// rank-2 only
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);

Tensor softmax(const Tensor& a, std::size_t axis);
// Normalizes over the last axis, then applies gamma/beta of shape [last].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-6);
// Exact (erf) form.
Tensor gelu(const Tensor& a);

Tensor mean(const Tensor& a, std::size_t axis);
Tensor mean_all(const Tensor& a);
Tensor sum_all(const Tensor& a);
// Euclidean norm over every element -> scalar.
Tensor l2_norm(const Tensor& a);
// Inner product of two equal-shape tensors -> scalar.
Tensor dot(const Tensor& a, const Tensor& b);

// x [rows, d] + v [d] added to every row. Explicit, since there is no
// general broadcasting.
Tensor add_row_vector(const Tensor& x, const Tensor& v);

// Softmax cross-entropy of a rank-1 logit vector against `label`. Entries
// with mask[i] == false are excluded from the softmax (treated as -inf) and
// receive zero gradient. An empty mask means all classes participate.
Tensor cross_entropy(const Tensor& logits, std::size_t label, std::span<const bool> mask = {});

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator+(double s, const Tensor& a) { return add_scalar(a, s); }
inline Tensor operator-(double s, const Tensor& a) { return add_scalar(neg(a), s); }

}  // namespace lgcl
