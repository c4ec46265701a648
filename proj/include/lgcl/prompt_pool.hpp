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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lgcl/language.hpp"
#include "lgcl/tensor.hpp"

namespace lgcl {

enum class PromptMode { kPromptTuning, kPrefixTuning };

std::string to_string(PromptMode mode);
// Accepts "prompt_tuning" / "prefix_tuning".
PromptMode parse_prompt_mode(const std::string& text);

/// Result of a key-query lookup: N distinct pool indices in ascending order
/// and the cosine similarity of each chosen key to the query.
struct Selection {
  std::vector<std::size_t> indices;
  std::vector<double> similarities;
};

/// M prompts of shape [L, E], each attached to a key of dimension E.
class PromptPool {
 public:
  PromptPool(std::size_t pool_size, std::size_t prompt_length, std::size_t embed_dim, std::size_t top_n,
             bool keys_frozen, std::uint64_t seed);

  std::size_t size() const { return prompts_.dim(0); }
  std::size_t prompt_length() const { return prompts_.dim(1); }
  std::size_t embed_dim() const { return prompts_.dim(2); }
  std::size_t top_n() const { return top_n_; }
  bool keys_frozen() const { return keys_frozen_; }

  const Tensor& prompts() const { return prompts_; }  // [M, L, E]
  const Tensor& keys() const { return keys_; }        // [M, E]
  Tensor key(std::size_t index) const;                // [E], tracked

  // Frozen-keys mode: key j := features[j % features.size()].
  void assign_keys_round_robin(const std::vector<LanguageFeature>& features);

  // Prompts, plus keys unless frozen.
  std::vector<Tensor> trainable() const;

  // Overwrites prompts and keys (checkpoint restore); shapes must match.
  void load_state(const Tensor& prompts, const Tensor& keys);

 private:
  Tensor prompts_;
  Tensor keys_;
  std::size_t top_n_;
  bool keys_frozen_;
};

// Top-N keys by cosine similarity to `query`, ties to the lower index.
Selection lookup(std::span<const double> query, const Tensor& keys, std::size_t top_n);
Selection lookup(const Tensor& query, const PromptPool& pool);

// Selected prompts concatenated in ascending index order -> [N * L, E].
Tensor gather_prompts(const PromptPool& pool, const Selection& selection);

// Mean over selected keys of 1 - cos(query, key). The query is detached.
Tensor key_pull_loss(const Tensor& query, const Selection& selection, const PromptPool& pool);

// Classification feature x_o: mean of prompt-position outputs [n, E] in
// prompt-tuning mode; the CLS output [E] unchanged in prefix-tuning mode.
Tensor pool_feature(PromptMode mode, const Tensor& outputs);

}  // namespace lgcl
