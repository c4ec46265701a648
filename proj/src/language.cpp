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

#include "lgcl/language.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "lgcl/errors.hpp"
#include "lgcl/ops.hpp"

namespace lgcl {

using json = nlohmann::json;

namespace {
constexpr const char* kTemplatePrefix = "A photo of ";

void normalize_in_place(std::vector<double>& v, const std::string& text) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  if (ss == 0.0) throw Error("embedding for \"" + text + "\" is the zero vector");
  const double inv = 1.0 / std::sqrt(ss);
  for (auto& x : v) x *= inv;
}
}  // namespace

std::string task_prompt_text(const std::vector<std::string>& class_names) {
  if (class_names.empty()) throw Error("task prompt needs at least one class name");
  std::string out = kTemplatePrefix;
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    if (i) out += " or ";
    out += class_names[i];
  }
  return out;
}

std::string class_prompt_text(const std::string& class_name) {
  if (class_name.empty()) throw Error("class prompt needs a non-empty class name");
  return kTemplatePrefix + class_name;
}

std::string normalize_text(std::string text) {
  for (auto& c : text) {
    c = c == '_' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return text;
}

LanguageFeature EmbeddingProvider::encode(const std::string& text, FeatureKind kind, std::size_t id) {
  ++calls_;
  std::vector<double> v;
  {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(text);
    if (it == cache_.end()) {
      auto raw = embed(text);
      if (raw.size() != dim_) throw Error("provider returned wrong dimension for \"" + text + "\"");
      normalize_in_place(raw, text);
      it = cache_.emplace(text, std::move(raw)).first;
    }
    v = it->second;
  }
  return {Tensor::vector(std::move(v)), kind, id, text};
}

std::string SyntheticProvider::describe() const { return "synthetic(seed=" + std::to_string(seed_) + ")"; }

std::vector<double> SyntheticProvider::embed(const std::string& text) const {
  Rng rng(mix_seed(seed_, fnv1a(normalize_text(text))));
  std::vector<double> v(dim());
  for (auto& x : v) x = rng.normal();
  return v;
}

std::vector<double> orthonormal_projection(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  const std::size_t big = std::max(rows, cols);
  const std::size_t small = std::min(rows, cols);
  Rng rng(mix_seed(seed, 0x70726f6aULL));
  Eigen::MatrixXd g(static_cast<Eigen::Index>(big), static_cast<Eigen::Index>(small));
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      // q is big x small with orthonormal columns.
      out[r * cols + c] = rows <= cols ? q(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r))
                                       : q(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  }
  return out;
}

FileProvider::FileProvider(const std::filesystem::path& path, std::size_t dim, std::uint64_t projection_seed)
    : EmbeddingProvider(dim), path_(path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open embedding file");
  json doc;
  try {
    doc = json::parse(in);
    raw_dim_ = doc.at("dim").get<std::size_t>();
    if (raw_dim_ == 0) throw IoError(path.string() + ": dim must be positive");
    for (const auto& [text, values] : doc.at("embeddings").items()) {
      auto v = values.get<std::vector<double>>();
      if (v.size() != raw_dim_) {
        throw IoError(path.string() + ": embedding for \"" + text + "\" has length " + std::to_string(v.size()) +
                      ", expected " + std::to_string(raw_dim_));
      }
      if (!table_.emplace(normalize_text(text), std::move(v)).second) {
        throw IoError(path.string() + ": duplicate text \"" + text + "\" after normalization");
      }
    }
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (raw_dim_ != dim) projection_ = orthonormal_projection(dim, raw_dim_, projection_seed);
}

std::string FileProvider::describe() const { return "file(" + path_.string() + ")"; }

std::vector<double> FileProvider::embed(const std::string& text) const {
  auto it = table_.find(normalize_text(text));
  if (it == table_.end()) throw Error(path_.string() + ": no embedding for text \"" + text + "\"");
  const auto& raw = it->second;
  if (projection_.empty()) return raw;
  std::vector<double> out(dim(), 0.0);
  for (std::size_t r = 0; r < dim(); ++r)
    for (std::size_t c = 0; c < raw_dim_; ++c) out[r] += projection_[r * raw_dim_ + c] * raw[c];
  return out;
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  for (const Tensor* t : {&a, &b}) {
    double ss = 0.0;
    for (double x : t->data()) ss += x * x;
    if (ss == 0.0) throw Error("cosine similarity of a zero vector is undefined");
  }
  return div(dot(a, b), mul(l2_norm(a), l2_norm(b)));
}

namespace {
void check_distinct(const LanguageFeature& positive, const LanguageFeature& negative) {
  const auto p = positive.vector.data();
  const auto n = negative.vector.data();
  if (std::equal(p.begin(), p.end(), n.begin(), n.end())) {
    throw Error("triplet loss: positive and negative language features are identical");
  }
}
}  // namespace

Tensor task_triplet_loss(const std::vector<Tensor>& keys, const LanguageFeature& positive,
                         const LanguageFeature& negative) {
  if (keys.empty()) throw Error("task triplet loss: no keys");
  check_distinct(positive, negative);
  Tensor total;
  for (const auto& k : keys) {
    Tensor term = add_scalar(sub(cosine_similarity(k, negative.vector), cosine_similarity(k, positive.vector)), 1.0);
    total = total.defined() ? add(total, term) : term;
  }
  return scale(total, 1.0 / static_cast<double>(keys.size()));
}

Tensor class_triplet_loss(const Tensor& feature, const LanguageFeature& positive, const LanguageFeature& negative) {
  check_distinct(positive, negative);
  return add_scalar(sub(cosine_similarity(feature, negative.vector), cosine_similarity(feature, positive.vector)), 1.0);
}

const LanguageFeature& sample_negative_task(std::size_t current_task, const std::vector<LanguageFeature>& task_features,
                                            Rng& rng) {
  if (current_task == 0) throw Error("no previous task to sample a negative from at task 0");
  if (task_features.size() < current_task) throw Error("missing language features for previous tasks");
  return task_features[rng.below(current_task)];
}

const LanguageFeature& sample_negative_class(std::size_t label, const std::vector<std::size_t>& previous_class_ids,
                                             const ClassFeatures& features, Rng& rng) {
  if (previous_class_ids.empty()) throw Error("no previous classes to sample a negative from");
  if (std::find(previous_class_ids.begin(), previous_class_ids.end(), label) != previous_class_ids.end()) {
    throw Error("class " + std::to_string(label) + " cannot be its own negative");
  }
  const std::size_t id = previous_class_ids[rng.below(previous_class_ids.size())];
  auto it = features.find(id);
  if (it == features.end()) throw Error("no language feature for class " + std::to_string(id));
  return it->second;
}

}  // namespace lgcl
