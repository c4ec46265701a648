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
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lgcl/data.hpp"
#include "lgcl/serialize.hpp"
#include "lgcl/tensor.hpp"

namespace lgcl {

struct ViTConfig {
  std::size_t image_size = 32;
  std::size_t patch_size = 8;
  std::size_t embed_dim = 64;
  std::size_t num_layers = 4;
  std::size_t num_heads = 4;
  std::size_t mlp_ratio = 2;
  std::size_t num_channels = 3;

  std::size_t num_patches() const { return (image_size / patch_size) * (image_size / patch_size); }
  std::size_t patch_dim() const { return num_channels * patch_size * patch_size; }
  // Empty when valid; otherwise one message per violated constraint.
  std::vector<std::string> problems() const;
};

// Rows prepended to the projected keys and values of one attention layer.
struct PrefixPair {
  Tensor key;    // [rows, E]
  Tensor value;  // [rows, E]
};

using LayerPrefixes = std::map<std::size_t, PrefixPair>;

// Splits a prefix prompt [L, E] into L/2 key rows followed by L/2 value rows.
// Throws on odd L.
PrefixPair split_prefix(const Tensor& prompt);

struct PromptTuningOutput {
  Tensor tokens;          // [1 + n + num_patches, E]
  Tensor prompt_outputs;  // [n, E]; undefined when n == 0
};

// Optional sink for per-layer, per-head attention weights.
struct AttentionTrace {
  std::vector<Tensor> weights;  // layer-major, head-minor; each [S, S_keys]
};

/// Pre-norm vision transformer: patch embedding, learned CLS token and
/// position embeddings, `num_layers` attention + MLP blocks, final norm.
/// CLS sits at position 0.
class VisionTransformer {
 public:
  VisionTransformer(const ViTConfig& config, std::uint64_t seed);

  const ViTConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  // [C, H, W] -> [num_patches, patch_dim]
  Tensor patchify(const Tensor& image) const;

  // CLS output of the plain pass; never records gradient. Requires frozen().
  Tensor query_feature(const Tensor& image) const;
  // CLS output of the plain pass, recording gradient for trainable weights.
  Tensor forward_cls(const Tensor& image, AttentionTrace* trace = nullptr) const;

  // Token sequence [CLS; prompts; patches]. `prompts` may be undefined for an
  // empty prompt block.
  PromptTuningOutput forward_prompt_tuning(const Tensor& image, const Tensor& prompts,
                                           AttentionTrace* trace = nullptr) const;

  // `prefixes` must cover exactly `layers`. Returns the CLS output.
  Tensor forward_prefix_tuning(const Tensor& image, const LayerPrefixes& prefixes, const std::set<std::size_t>& layers,
                               AttentionTrace* trace = nullptr) const;

  // Rounds weights to f32 and stops gradient tracking for good.
  void freeze();
  bool frozen() const { return frozen_; }

  NamedTensors named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;
  // Hash over the raw bytes of every parameter.
  std::uint64_t checksum() const;

  // Writes `<dir>/backbone.tnsr` and `<dir>/backbone.json`.
  void save(const std::filesystem::path& dir) const;
  // Loads a frozen backbone from a directory written by save().
  static VisionTransformer load(const std::filesystem::path& dir);

 private:
  struct Block {
    Tensor ln1_gamma, ln1_beta;
    Tensor qkv_weight, qkv_bias;  // [E, 3E], [3E]
    Tensor out_weight, out_bias;  // [E, E], [E]
    Tensor ln2_gamma, ln2_beta;
    Tensor fc1_weight, fc1_bias;  // [E, rE], [rE]
    Tensor fc2_weight, fc2_bias;  // [rE, E], [E]
  };

  void check_image(const Tensor& image) const;
  Tensor embed_patches(const Tensor& image) const;  // [num_patches, E] incl. position
  Tensor cls_token() const;                         // [1, E] incl. position
  Tensor encode(Tensor tokens, const LayerPrefixes* prefixes, AttentionTrace* trace) const;
  Tensor attention(const Block& block, const Tensor& x, const PrefixPair* prefix, AttentionTrace* trace) const;

  ViTConfig config_;
  std::uint64_t seed_;
  bool frozen_ = false;
  Tensor patch_weight_, patch_bias_;  // [patch_dim, E], [E]
  Tensor cls_, pos_;                  // [1, E], [1 + num_patches, E]
  std::vector<Block> blocks_;
  Tensor ln_gamma_, ln_beta_;
};

struct BootstrapOptions {
  std::size_t epochs = 4;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct BootstrapResult {
  VisionTransformer backbone;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

// Trains the backbone plus a throwaway linear head with cross-entropy on a
// pretext dataset, then freezes it. Throws if any pretext class id is also a
// continual-task class id.
BootstrapResult bootstrap_pretrain(const ViTConfig& config, const Dataset& pretext,
                                   const std::vector<std::size_t>& task_class_ids, const BootstrapOptions& options);

}  // namespace lgcl
