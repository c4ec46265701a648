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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "lgcl/random.hpp"
#include "lgcl/tensor.hpp"

namespace lgcl {

enum class FeatureKind { kTask, kClass };

/// Unit-norm text embedding in the image embedding space. The backing tensor
/// never requires grad.
struct LanguageFeature {
  Tensor vector;  // [E]
  FeatureKind kind = FeatureKind::kClass;
  std::size_t id = 0;  // task id or global class id
  std::string source_text;
};

// "A photo of <a> or <b> or ..."
std::string task_prompt_text(const std::vector<std::string>& class_names);
// "A photo of <name>"
std::string class_prompt_text(const std::string& class_name);
// Lowercase, underscores to spaces.
std::string normalize_text(std::string text);

/// Text -> unit vector of dimension `dim()`. Results are cached per text and
/// every encode() call is counted, cache hit or not.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  EmbeddingProvider(const EmbeddingProvider&) = delete;
  EmbeddingProvider& operator=(const EmbeddingProvider&) = delete;

  LanguageFeature encode(const std::string& text, FeatureKind kind, std::size_t id = 0);
  std::size_t dim() const { return dim_; }
  std::size_t call_count() const { return calls_.load(); }
  virtual std::string describe() const = 0;

 protected:
  explicit EmbeddingProvider(std::size_t dim) : dim_(dim) {}
  // Unnormalized vector of length dim().
  virtual std::vector<double> embed(const std::string& text) const = 0;

 private:
  std::size_t dim_;
  std::atomic<std::size_t> calls_{0};
  std::mutex mutex_;
  std::unordered_map<std::string, std::vector<double>> cache_;
};

// Seeded pseudo-random unit vector derived from a hash of the text.
class SyntheticProvider final : public EmbeddingProvider {
 public:
  SyntheticProvider(std::size_t dim, std::uint64_t seed) : EmbeddingProvider(dim), seed_(seed) {}
  std::string describe() const override;

 protected:
  std::vector<double> embed(const std::string& text) const override;

 private:
  std::uint64_t seed_;
};

// Embedding file: {"dim": D, "embeddings": {"<prompt text>": [D floats], ...}}.
// Texts are matched after normalize_text(). When D differs from `dim`, rows
// go through a fixed seeded orthonormal map.
class FileProvider final : public EmbeddingProvider {
 public:
  FileProvider(const std::filesystem::path& path, std::size_t dim, std::uint64_t projection_seed);
  std::string describe() const override;
  std::size_t raw_dim() const { return raw_dim_; }
  std::size_t size() const { return table_.size(); }

 protected:
  std::vector<double> embed(const std::string& text) const override;

 private:
  std::filesystem::path path_;
  std::size_t raw_dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> table_;
  std::vector<double> projection_;  // [dim, raw_dim] row-major; empty means identity
};

// [rows, cols] with orthonormal rows (rows <= cols) or columns (rows > cols).
std::vector<double> orthonormal_projection(std::size_t rows, std::size_t cols, std::uint64_t seed);

// a.b / (|a||b|); throws on a zero vector.
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

// Mean over keys of 1 - S(k, positive) + S(k, negative).
Tensor task_triplet_loss(const std::vector<Tensor>& keys, const LanguageFeature& positive,
                         const LanguageFeature& negative);
// 1 - S(x_o, positive) + S(x_o, negative).
Tensor class_triplet_loss(const Tensor& feature, const LanguageFeature& positive, const LanguageFeature& negative);

// Uniform over the features of tasks 0 .. current_task - 1.
const LanguageFeature& sample_negative_task(std::size_t current_task, const std::vector<LanguageFeature>& task_features,
                                            Rng& rng);

using ClassFeatures = std::map<std::size_t, LanguageFeature>;

// Uniform over `previous_class_ids`; `label` must not be among them.
const LanguageFeature& sample_negative_class(std::size_t label, const std::vector<std::size_t>& previous_class_ids,
                                             const ClassFeatures& features, Rng& rng);

}  // namespace lgcl
