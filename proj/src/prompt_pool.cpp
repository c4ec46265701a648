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

#include "lgcl/prompt_pool.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lgcl/errors.hpp"
#include "lgcl/ops.hpp"
#include "lgcl/random.hpp"

namespace lgcl {

std::string to_string(PromptMode mode) {
  return mode == PromptMode::kPromptTuning ? "prompt_tuning" : "prefix_tuning";
}

PromptMode parse_prompt_mode(const std::string& text) {
  if (text == "prompt_tuning") return PromptMode::kPromptTuning;
  if (text == "prefix_tuning") return PromptMode::kPrefixTuning;
  throw Error("unknown prompt mode '" + text + "' (expected prompt_tuning or prefix_tuning)");
}

PromptPool::PromptPool(std::size_t pool_size, std::size_t prompt_length, std::size_t embed_dim, std::size_t top_n,
                       bool keys_frozen, std::uint64_t seed)
    : top_n_(top_n), keys_frozen_(keys_frozen) {
  if (pool_size == 0 || prompt_length == 0 || embed_dim == 0) throw Error("prompt pool sizes must be positive");
  if (top_n == 0 || top_n > pool_size) {
    throw Error("prompt pool: need 1 <= N <= M, got N=" + std::to_string(top_n) + ", M=" + std::to_string(pool_size));
  }
  Rng rng(mix_seed(seed, 0x706f6f6cULL));
  std::vector<double> p(pool_size * prompt_length * embed_dim);
  for (auto& v : p) v = rng.uniform(-1.0, 1.0);
  std::vector<double> k(pool_size * embed_dim);
  for (auto& v : k) v = rng.uniform(-1.0, 1.0);
  prompts_ = Tensor::from_data({pool_size, prompt_length, embed_dim}, std::move(p), true);
  keys_ = Tensor::from_data({pool_size, embed_dim}, std::move(k), !keys_frozen);
  prompts_.set_name("pool.prompts");
  keys_.set_name("pool.keys");
}

Tensor PromptPool::key(std::size_t index) const {
  if (index >= size()) throw Error("pool index " + std::to_string(index) + " out of range");
  return reshape(slice(keys_, 0, index, index + 1), {embed_dim()});
}

void PromptPool::assign_keys_round_robin(const std::vector<LanguageFeature>& features) {
  if (features.empty()) throw Error("no language features to initialize keys from");
  auto k = keys_.mutable_data();
  const std::size_t e = embed_dim();
  for (std::size_t j = 0; j < size(); ++j) {
    const auto& f = features[j % features.size()].vector;
    if (f.numel() != e) throw ShapeError("language feature dimension does not match pool embed_dim");
    std::copy(f.data().begin(), f.data().end(), k.begin() + static_cast<std::ptrdiff_t>(j * e));
  }
}

std::vector<Tensor> PromptPool::trainable() const {
  if (keys_frozen_) return {prompts_};
  return {prompts_, keys_};
}

void PromptPool::load_state(const Tensor& prompts, const Tensor& keys) {
  if (prompts.shape() != prompts_.shape() || keys.shape() != keys_.shape()) {
    throw ShapeError("pool state shapes " + shape_str(prompts.shape()) + ", " + shape_str(keys.shape()) +
                     " do not match pool " + shape_str(prompts_.shape()) + ", " + shape_str(keys_.shape()));
  }
  std::copy(prompts.data().begin(), prompts.data().end(), prompts_.mutable_data().begin());
  std::copy(keys.data().begin(), keys.data().end(), keys_.mutable_data().begin());
}

Selection lookup(std::span<const double> query, const Tensor& keys, std::size_t top_n) {
  if (keys.rank() != 2 || keys.dim(1) != query.size()) {
    throw ShapeError("lookup: query of length " + std::to_string(query.size()) + " vs keys " + shape_str(keys.shape()));
  }
  const std::size_t m = keys.dim(0);
  const std::size_t e = keys.dim(1);
  if (top_n == 0 || top_n > m) throw Error("lookup: need 1 <= N <= M");
  double qn = 0.0;
  for (double v : query) qn += v * v;
  if (qn == 0.0) throw Error("lookup: zero-norm query");
  qn = std::sqrt(qn);
  const auto k = keys.data();
  std::vector<double> sim(m);
  for (std::size_t j = 0; j < m; ++j) {
    double d = 0.0;
    double kn = 0.0;
    for (std::size_t i = 0; i < e; ++i) {
      d += query[i] * k[j * e + i];
      kn += k[j * e + i] * k[j * e + i];
    }
    if (kn == 0.0) throw Error("lookup: zero-norm key " + std::to_string(j));
    sim[j] = d / (qn * std::sqrt(kn));
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
  order.resize(top_n);
  std::sort(order.begin(), order.end());
  Selection s;
  s.indices = order;
  for (auto j : order) s.similarities.push_back(sim[j]);
  return s;
}

Selection lookup(const Tensor& query, const PromptPool& pool) {
  return lookup(query.data(), pool.keys(), pool.top_n());
}

namespace {
void check_selection(const PromptPool& pool, const Selection& sel) {
  if (sel.indices.empty()) throw Error("empty selection");
  for (std::size_t i = 0; i < sel.indices.size(); ++i) {
    if (sel.indices[i] >= pool.size()) throw Error("selection index out of range");
    if (i > 0 && sel.indices[i] <= sel.indices[i - 1]) throw Error("selection indices must be distinct and ascending");
  }
}
}  // namespace

Tensor gather_prompts(const PromptPool& pool, const Selection& selection) {
  check_selection(pool, selection);
  const Shape row{pool.prompt_length(), pool.embed_dim()};
  std::vector<Tensor> parts;
  for (auto j : selection.indices) parts.push_back(reshape(slice(pool.prompts(), 0, j, j + 1), row));
  return parts.size() == 1 ? parts.front() : concat(parts, 0);
}

Tensor key_pull_loss(const Tensor& query, const Selection& selection, const PromptPool& pool) {
  check_selection(pool, selection);
  const Tensor q = query.detach();
  Tensor total;
  for (auto j : selection.indices) {
    Tensor term = add_scalar(neg(cosine_similarity(q, pool.key(j))), 1.0);
    total = total.defined() ? add(total, term) : term;
  }
  return scale(total, 1.0 / static_cast<double>(selection.indices.size()));
}

Tensor pool_feature(PromptMode mode, const Tensor& outputs) {
  if (!outputs.defined()) throw Error("pool_feature: undefined input");
  if (mode == PromptMode::kPromptTuning) {
    if (outputs.rank() != 2) {
      throw ShapeError("pool_feature: prompt_tuning expects prompt outputs [n, E], got " + shape_str(outputs.shape()));
    }
    return mean(outputs, 0);
  }
  if (outputs.rank() != 1) {
    throw ShapeError("pool_feature: prefix_tuning expects the CLS output [E], got " + shape_str(outputs.shape()));
  }
  return outputs;
}

}  // namespace lgcl
