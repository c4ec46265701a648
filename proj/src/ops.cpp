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

#include "lgcl/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lgcl/errors.hpp"
#include "node.hpp"

namespace lgcl {

using detail::Node;
using detail::NodePtr;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;

const NodePtr& node_of(const Tensor& t) {
  if (!t.defined()) throw Error("op applied to an undefined tensor");
  return t.node();
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

// Builds the result node and records a tape edge when any input needs a
// gradient and recording is enabled.
Tensor record(Shape shape, std::vector<double> data, std::vector<NodePtr> inputs,
              std::function<void(Node&)> backward) {
  auto out = detail::make_node(std::move(shape), std::move(data));
  if (grad_enabled() &&
      std::any_of(inputs.begin(), inputs.end(), [](const NodePtr& n) { return n->requires_grad; })) {
    out->requires_grad = true;
    out->inputs = std::move(inputs);
    out->backward = std::move(backward);
  }
  return Tensor(std::move(out));
}

enum class Pairing { kSame, kScalarA, kScalarB };

Pairing pair_shapes(const char* op, const Node& a, const Node& b) {
  if (a.shape == b.shape) return Pairing::kSame;
  if (a.shape.empty()) return Pairing::kScalarA;
  if (b.shape.empty()) return Pairing::kScalarB;
  shape_mismatch(op, a.shape, b.shape);
}

struct Strides {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

Strides split_at(const Shape& shape, std::size_t axis) {
  Strides s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void check_axis(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(shape));
  }
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (i != axis) out.push_back(shape[i]);
  return out;
}

template <typename Fwd, typename BwdA, typename BwdB>
Tensor elementwise(const char* op, const Tensor& ta, const Tensor& tb, Fwd fwd, BwdA da, BwdB db) {
  const NodePtr& a = node_of(ta);
  const NodePtr& b = node_of(tb);
  const Pairing p = pair_shapes(op, *a, *b);
  const std::size_t n = p == Pairing::kScalarA ? b->data.size() : a->data.size();
  const std::size_t sa = p == Pairing::kScalarA ? 0 : 1;
  const std::size_t sb = p == Pairing::kScalarB ? 0 : 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(a->data[i * sa], b->data[i * sb]);
  Shape shape = p == Pairing::kScalarA ? b->shape : a->shape;
  return record(std::move(shape), std::move(out), {a, b}, [n, sa, sb, da, db](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    if (na.requires_grad) {
      auto& g = na.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) g[i * sa] += da(self.grad[i], na.data[i * sa], nb.data[i * sb]);
    }
    if (nb.requires_grad) {
      auto& g = nb.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) g[i * sb] += db(self.grad[i], na.data[i * sa], nb.data[i * sb]);
    }
  });
}

// dfn(x, y) is dy/dx given input x and output y.
template <typename Fwd, typename Bwd>
Tensor unary(const Tensor& ta, Fwd fwd, Bwd dfn) {
  const NodePtr& a = node_of(ta);
  std::vector<double> out(a->data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a->data[i]);
  return record(a->shape, std::move(out), {a}, [dfn](Node& self) {
    Node& na = *self.inputs[0];
    auto& g = na.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfn(na.data[i], self.data[i]);
  });
}

// Result and input share element order.
void pass_through(Node& self) {
  auto& g = self.inputs[0]->ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise(
      "add", a, b, [](double x, double y) { return x + y; }, [](double g, double, double) { return g; },
      [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double g, double, double) { return g; },
      [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return elementwise(
      "div", a, b, [](double x, double y) { return x / y; }, [](double g, double, double y) { return g / y; },
      [](double g, double x, double y) { return -g * x / (y * y); });
}

Tensor neg(const Tensor& a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor matmul(const Tensor& ta, const Tensor& tb) {
  const NodePtr& a = node_of(ta);
  const NodePtr& b = node_of(tb);
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0]) {
    shape_mismatch("matmul", a->shape, b->shape);
  }
  const auto n = static_cast<Eigen::Index>(a->shape[0]);
  const auto k = static_cast<Eigen::Index>(a->shape[1]);
  const auto m = static_cast<Eigen::Index>(b->shape[1]);
  std::vector<double> out(static_cast<std::size_t>(n * m));
  MatMap(out.data(), n, m).noalias() = ConstMatMap(a->data.data(), n, k) * ConstMatMap(b->data.data(), k, m);
  return record({a->shape[0], b->shape[1]}, std::move(out), {a, b}, [n, k, m](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    ConstMatMap g(self.grad.data(), n, m);
    if (na.requires_grad) {
      MatMap(na.ensure_grad().data(), n, k).noalias() += g * ConstMatMap(nb.data.data(), k, m).transpose();
    }
    if (nb.requires_grad) {
      MatMap(nb.ensure_grad().data(), k, m).noalias() += ConstMatMap(na.data.data(), n, k).transpose() * g;
    }
  });
}

Tensor transpose(const Tensor& ta) {
  const NodePtr& a = node_of(ta);
  if (a->shape.size() != 2) throw ShapeError("transpose: needs rank 2, got " + shape_str(a->shape));
  const std::size_t r = a->shape[0];
  const std::size_t c = a->shape[1];
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a->data[i * c + j];
  return record({c, r}, std::move(out), {a}, [r, c](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

Tensor reshape(const Tensor& ta, Shape shape) {
  const NodePtr& a = node_of(ta);
  if (shape_numel(shape) != a->data.size() || std::find(shape.begin(), shape.end(), 0) != shape.end()) {
    shape_mismatch("reshape", a->shape, shape);
  }
  return record(std::move(shape), a->data, {a}, pass_through);
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::vector<NodePtr> nodes;
  nodes.reserve(parts.size());
  for (const auto& p : parts) nodes.push_back(node_of(p));
  const Shape& first = nodes.front()->shape;
  check_axis("concat", first, axis);
  Shape shape = first;
  shape[axis] = 0;
  for (const auto& n : nodes) {
    if (n->shape.size() != first.size()) shape_mismatch("concat", first, n->shape);
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis && n->shape[d] != first[d]) shape_mismatch("concat", first, n->shape);
    }
    shape[axis] += n->shape[axis];
  }
  const Strides os = split_at(shape, axis);
  const std::size_t out_row = os.len * os.inner;
  // Per part: element offset within an output row, and elements per row.
  std::vector<std::pair<std::size_t, std::size_t>> layout;
  std::vector<double> out(shape_numel(shape));
  std::size_t offset = 0;
  for (const auto& n : nodes) {
    const std::size_t chunk = n->shape[axis] * os.inner;
    layout.emplace_back(offset, chunk);
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(n->data.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(o * out_row + offset));
    }
    offset += chunk;
  }
  return record(std::move(shape), std::move(out), std::move(nodes), [os, out_row, layout](Node& self) {
    for (std::size_t p = 0; p < self.inputs.size(); ++p) {
      Node& n = *self.inputs[p];
      if (!n.requires_grad) continue;
      auto& g = n.ensure_grad();
      const auto [off, chunk] = layout[p];
      for (std::size_t o = 0; o < os.outer; ++o)
        for (std::size_t i = 0; i < chunk; ++i) g[o * chunk + i] += self.grad[o * out_row + off + i];
    }
  });
}

Tensor slice(const Tensor& ta, std::size_t axis, std::size_t begin, std::size_t end) {
  const NodePtr& a = node_of(ta);
  check_axis("slice", a->shape, axis);
  if (begin >= end || end > a->shape[axis]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") invalid for axis " +
                     std::to_string(axis) + " of shape " + shape_str(a->shape));
  }
  const Strides s = split_at(a->shape, axis);
  Shape shape = a->shape;
  shape[axis] = end - begin;
  const std::size_t in_row = s.len * s.inner;
  const std::size_t chunk = (end - begin) * s.inner;
  const std::size_t off = begin * s.inner;
  std::vector<double> out(s.outer * chunk);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(a->data.begin() + static_cast<std::ptrdiff_t>(o * in_row + off), chunk,
                out.begin() + static_cast<std::ptrdiff_t>(o * chunk));
  }
  return record(std::move(shape), std::move(out), {a}, [s, in_row, chunk, off](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < chunk; ++i) g[o * in_row + off + i] += self.grad[o * chunk + i];
  });
}

Tensor softmax(const Tensor& ta, std::size_t axis) {
  const NodePtr& a = node_of(ta);
  check_axis("softmax", a->shape, axis);
  const Strides s = split_at(a->shape, axis);
  std::vector<double> out(a->data.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mx = a->data[base];
      for (std::size_t l = 1; l < s.len; ++l) mx = std::max(mx, a->data[base + l * s.inner]);
      double total = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const double e = std::exp(a->data[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= total;
    }
  }
  return record(a->shape, std::move(out), {a}, [s](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.len * s.inner + in;
        double dotp = 0.0;
        for (std::size_t l = 0; l < s.len; ++l) dotp += self.grad[base + l * s.inner] * self.data[base + l * s.inner];
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t i = base + l * s.inner;
          g[i] += self.data[i] * (self.grad[i] - dotp);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& tx, const Tensor& tgamma, const Tensor& tbeta, double eps) {
  const NodePtr& x = node_of(tx);
  const NodePtr& gamma = node_of(tgamma);
  const NodePtr& beta = node_of(tbeta);
  if (x->shape.empty()) throw ShapeError("layer_norm: needs rank >= 1, got " + shape_str(x->shape));
  const std::size_t d = x->shape.back();
  if (gamma->shape != Shape{d}) shape_mismatch("layer_norm", x->shape, gamma->shape);
  if (beta->shape != Shape{d}) shape_mismatch("layer_norm", x->shape, beta->shape);
  const std::size_t rows = x->data.size() / d;
  std::vector<double> xhat(x->data.size());
  std::vector<double> inv_std(rows);
  std::vector<double> out(x->data.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = x->data.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * is;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gamma->data[j] + beta->data[j];
    }
  }
  return record(x->shape, std::move(out), {x, gamma, beta},
                [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                  Node& nx = *self.inputs[0];
                  Node& ng = *self.inputs[1];
                  Node& nb = *self.inputs[2];
                  if (ng.requires_grad) {
                    auto& g = ng.ensure_grad();
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < d; ++j) g[j] += self.grad[r * d + j] * xhat[r * d + j];
                  }
                  if (nb.requires_grad) {
                    auto& g = nb.ensure_grad();
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < d; ++j) g[j] += self.grad[r * d + j];
                  }
                  if (nx.requires_grad) {
                    auto& g = nx.ensure_grad();
                    const double inv_d = 1.0 / static_cast<double>(d);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double mean_gh = 0.0;
                      double mean_ghx = 0.0;
                      for (std::size_t j = 0; j < d; ++j) {
                        const double gh = self.grad[r * d + j] * ng.data[j];
                        mean_gh += gh;
                        mean_ghx += gh * xhat[r * d + j];
                      }
                      mean_gh *= inv_d;
                      mean_ghx *= inv_d;
                      for (std::size_t j = 0; j < d; ++j) {
                        const double gh = self.grad[r * d + j] * ng.data[j];
                        g[r * d + j] += inv_std[r] * (gh - mean_gh - xhat[r * d + j] * mean_ghx);
                      }
                    }
                  }
                });
}

Tensor gelu(const Tensor& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x, double) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x); });
}

Tensor mean(const Tensor& ta, std::size_t axis) {
  const NodePtr& a = node_of(ta);
  check_axis("mean", a->shape, axis);
  const Strides s = split_at(a->shape, axis);
  const double inv = 1.0 / static_cast<double>(s.len);
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t l = 0; l < s.len; ++l)
      for (std::size_t in = 0; in < s.inner; ++in) out[o * s.inner + in] += a->data[(o * s.len + l) * s.inner + in];
  for (auto& v : out) v *= inv;
  return record(drop_axis(a->shape, axis), std::move(out), {a}, [s, inv](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t l = 0; l < s.len; ++l)
        for (std::size_t in = 0; in < s.inner; ++in) g[(o * s.len + l) * s.inner + in] += inv * self.grad[o * s.inner + in];
  });
}

Tensor sum_all(const Tensor& ta) {
  const NodePtr& a = node_of(ta);
  double total = 0.0;
  for (double v : a->data) total += v;
  return record({}, {total}, {a}, [](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.numel())); }

Tensor l2_norm(const Tensor& ta) {
  const NodePtr& a = node_of(ta);
  double ss = 0.0;
  for (double v : a->data) ss += v * v;
  return record({}, {std::sqrt(ss)}, {a}, [](Node& self) {
    const double norm = self.data[0];
    if (norm == 0.0) return;  // subgradient 0 at the origin
    Node& na = *self.inputs[0];
    auto& g = na.ensure_grad();
    const double f = self.grad[0] / norm;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += f * na.data[i];
  });
}

Tensor dot(const Tensor& ta, const Tensor& tb) {
  const NodePtr& a = node_of(ta);
  const NodePtr& b = node_of(tb);
  if (a->shape != b->shape) shape_mismatch("dot", a->shape, b->shape);
  double total = 0.0;
  for (std::size_t i = 0; i < a->data.size(); ++i) total += a->data[i] * b->data[i];
  return record({}, {total}, {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const double g = self.grad[0];
    if (na.requires_grad) {
      auto& ga = na.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * nb.data[i];
    }
    if (nb.requires_grad) {
      auto& gb = nb.ensure_grad();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * na.data[i];
    }
  });
}

Tensor add_row_vector(const Tensor& tx, const Tensor& tv) {
  const NodePtr& x = node_of(tx);
  const NodePtr& v = node_of(tv);
  if (x->shape.size() != 2 || v->shape != Shape{x->shape[1]}) shape_mismatch("add_row_vector", x->shape, v->shape);
  const std::size_t rows = x->shape[0];
  const std::size_t d = x->shape[1];
  std::vector<double> out(x->data);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] += v->data[j];
  return record(x->shape, std::move(out), {x, v}, [rows, d](Node& self) {
    Node& nx = *self.inputs[0];
    Node& nv = *self.inputs[1];
    if (nx.requires_grad) {
      auto& g = nx.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (nv.requires_grad) {
      auto& g = nv.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) g[j] += self.grad[r * d + j];
    }
  });
}

Tensor cross_entropy(const Tensor& tlogits, std::size_t label, std::span<const bool> mask) {
  const NodePtr& logits = node_of(tlogits);
  if (logits->shape.size() != 1) throw ShapeError("cross_entropy: logits must be rank 1, got " + shape_str(logits->shape));
  const std::size_t c = logits->shape[0];
  if (label >= c) throw ShapeError("cross_entropy: label " + std::to_string(label) + " out of range for " + std::to_string(c) + " classes");
  if (!mask.empty() && mask.size() != c) {
    throw ShapeError("cross_entropy: mask length " + std::to_string(mask.size()) + " vs " + std::to_string(c) + " logits");
  }
  std::vector<bool> active(c, true);
  if (!mask.empty()) {
    for (std::size_t i = 0; i < c; ++i) active[i] = mask[i];
    if (!active[label]) throw Error("cross_entropy: label " + std::to_string(label) + " is masked out");
  }
  double mx = -INFINITY;
  for (std::size_t i = 0; i < c; ++i)
    if (active[i]) mx = std::max(mx, logits->data[i]);
  std::vector<double> prob(c, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    if (!active[i]) continue;
    prob[i] = std::exp(logits->data[i] - mx);
    total += prob[i];
  }
  for (auto& p : prob) p /= total;
  const double loss = -(logits->data[label] - mx - std::log(total));
  return record({}, {loss}, {logits}, [label, prob = std::move(prob)](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    const double up = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * (prob[i] - (i == label ? 1.0 : 0.0));
  });
}

}  // namespace lgcl
