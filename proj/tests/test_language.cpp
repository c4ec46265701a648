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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "lgcl/errors.hpp"
#include "lgcl/language.hpp"
#include "lgcl/ops.hpp"

using namespace lgcl;

namespace {

LanguageFeature feature(std::vector<double> v, std::size_t id = 0) {
  return {Tensor::vector(std::move(v)), FeatureKind::kClass, id, ""};
}

std::vector<double> unit(std::size_t dim, std::size_t axis, double sign = 1.0) {
  std::vector<double> v(dim, 0.0);
  v[axis] = sign;
  return v;
}

// Pearson chi-square statistic of observed counts against a uniform split.
double chi_square(const std::map<std::size_t, int>& counts, std::size_t categories, int draws) {
  const double expect = static_cast<double>(draws) / static_cast<double>(categories);
  double stat = 0.0;
  for (const auto& [k, c] : counts) stat += (c - expect) * (c - expect) / expect;
  return stat;
}

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_SUITE("language") {

TEST_CASE("prompt templates") {
  CHECK(task_prompt_text({"cat"}) == "A photo of cat");
  CHECK(task_prompt_text({"cat", "dog"}) == "A photo of cat or dog");
  CHECK(task_prompt_text({"a", "b", "c"}) == "A photo of a or b or c");
  CHECK(class_prompt_text("dog") == "A photo of dog");
  CHECK(class_prompt_text("fire truck") == "A photo of fire truck");
  CHECK(class_prompt_text("fire truck") == class_prompt_text("fire truck"));
  CHECK_THROWS_AS(task_prompt_text({}), Error);
  CHECK_THROWS_AS(class_prompt_text(""), Error);
  CHECK(normalize_text("Fire_Truck") == "fire truck");
}

TEST_CASE("synthetic provider") {
  SyntheticProvider p(32, 5);
  const auto a = p.encode("A photo of cat", FeatureKind::kClass);
  const auto b = p.encode("A photo of cat", FeatureKind::kClass);
  CHECK(std::equal(a.vector.data().begin(), a.vector.data().end(), b.vector.data().begin()));
  CHECK(l2_norm(a.vector).item() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_FALSE(a.vector.requires_grad());
  CHECK(p.call_count() == 2);

  std::vector<LanguageFeature> many;
  for (int i = 0; i < 40; ++i) many.push_back(p.encode(class_prompt_text("class_" + std::to_string(i)), FeatureKind::kClass));
  for (std::size_t i = 0; i < many.size(); ++i)
    for (std::size_t j = i + 1; j < many.size(); ++j)
      CHECK(std::abs(cosine_similarity(many[i].vector, many[j].vector).item()) < 0.99);

  SyntheticProvider other(32, 6);
  const auto c = other.encode("A photo of cat", FeatureKind::kClass);
  CHECK_FALSE(std::equal(a.vector.data().begin(), a.vector.data().end(), c.vector.data().begin()));
}

TEST_CASE("file provider with matching dim returns rows verbatim") {
  const auto path = write_temp("lgcl_emb_same.json",
                               R"({"dim": 3, "embeddings": {"A photo of cat": [0, 1, 0], "A photo of dog": [0.6, 0.8, 0]}})");
  FileProvider p(path, 3, 1);
  CHECK(p.size() == 2);
  const auto f = p.encode("A photo of dog", FeatureKind::kClass);
  CHECK(f.vector.data()[0] == 0.6);
  CHECK(f.vector.data()[1] == 0.8);
  CHECK(f.vector.data()[2] == 0.0);
  CHECK_THROWS_WITH_AS(p.encode("A photo of bird", FeatureKind::kClass), doctest::Contains("A photo of bird"), Error);
  std::filesystem::remove(path);
}

TEST_CASE("file provider projects other dims with a fixed orthonormal map") {
  const auto path = write_temp("lgcl_emb_big.json",
                               R"({"dim": 5, "embeddings": {"A photo of cat": [1, 2, 3, 4, 5], "A photo of dog": [5, 4, 3, 2, 1]}})");
  FileProvider a(path, 3, 9);
  FileProvider b(path, 3, 9);
  const auto fa = a.encode("A photo of cat", FeatureKind::kClass);
  const auto fb = b.encode("A photo of cat", FeatureKind::kClass);
  CHECK(fa.vector.shape() == Shape{3});
  CHECK(std::equal(fa.vector.data().begin(), fa.vector.data().end(), fb.vector.data().begin()));
  CHECK(l2_norm(fa.vector).item() == doctest::Approx(1.0).epsilon(1e-9));
  std::filesystem::remove(path);

  // Rows of a wide projection are orthonormal.
  const auto q = orthonormal_projection(3, 7, 4);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < 7; ++k) d += q[i * 7 + k] * q[j * 7 + k];
      CHECK(d == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("file provider rejects bad files") {
  const auto wrong_len = write_temp("lgcl_emb_len.json", R"({"dim": 3, "embeddings": {"A photo of cat": [1, 2]}})");
  CHECK_THROWS_WITH_AS(FileProvider(wrong_len, 3, 0), doctest::Contains("A photo of cat"), IoError);
  const auto garbage = write_temp("lgcl_emb_bad.json", "{nope");
  CHECK_THROWS_AS(FileProvider(garbage, 3, 0), IoError);
  CHECK_THROWS_AS(FileProvider("/nonexistent/emb.json", 3, 0), IoError);
  std::filesystem::remove(wrong_len);
  std::filesystem::remove(garbage);
}

TEST_CASE("cosine similarity") {
  const Tensor v = Tensor::vector({0.3, -2.0});
  CHECK(cosine_similarity(v, v).item() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(Tensor::vector({1, 0}), Tensor::vector({0, 1})).item() == 0.0);
  CHECK(cosine_similarity(Tensor::vector({1, 1}), Tensor::vector({1, 0})).item() == doctest::Approx(0.7071).epsilon(1e-4));
  CHECK_THROWS_AS(cosine_similarity(Tensor::vector({0, 0}), v), Error);
}

TEST_CASE("closed-form triplet values") {
  const auto p = feature(unit(4, 0));
  const auto n = feature(unit(4, 1));
  CHECK(std::abs(task_triplet_loss({Tensor::vector(unit(4, 0))}, p, n).item() - 0.0) <= 1e-9);
  CHECK(std::abs(task_triplet_loss({Tensor::vector(unit(4, 1))}, p, n).item() - 2.0) <= 1e-9);
  CHECK(std::abs(task_triplet_loss({Tensor::vector(unit(4, 2))}, p, n).item() - 1.0) <= 1e-9);
  CHECK(std::abs(class_triplet_loss(Tensor::vector(unit(4, 0)), p, n).item() - 0.0) <= 1e-9);
  CHECK(std::abs(class_triplet_loss(Tensor::vector(unit(4, 1)), p, n).item() - 2.0) <= 1e-9);
  CHECK(std::abs(class_triplet_loss(Tensor::vector(unit(4, 3)), p, n).item() - 1.0) <= 1e-9);
  CHECK_THROWS_AS(class_triplet_loss(Tensor::vector(unit(4, 0)), p, p), Error);
}

TEST_CASE("triplet loss range and monotonicity") {
  Rng rng(31);
  SyntheticProvider prov(6, 1);
  const auto p = prov.encode("A photo of a", FeatureKind::kTask);
  const auto n = prov.encode("A photo of b", FeatureKind::kTask);
  // loss - 1 = khat . (n - p), so |loss - 1| <= |p - n| <= 2. The loss can
  // leave [0, 2] whenever p and n are not antipodal.
  double gap = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    const double d = p.vector.data()[i] - n.vector.data()[i];
    gap += d * d;
  }
  gap = std::sqrt(gap);
  bool outside = false;
  for (int i = 0; i < 200; ++i) {
    const Tensor k = Tensor::randn({6}, rng, 1.0);
    const double l = task_triplet_loss({k}, p, n).item();
    CHECK(std::abs(l - 1.0) <= gap + 1e-12);
    outside |= l < 0.0 || l > 2.0;
  }
  CHECK(gap <= 2.0);
  CHECK(outside);
  // Moving the key away from the positive along a direction orthogonal to the
  // negative lowers S(k, L_tp) and strictly raises the loss.
  const auto pos = feature({1, 0, 0});
  const auto neg = feature({0, 0, 1});
  double prev = -1.0;
  for (double angle = 0.0; angle < 3.0; angle += 0.25) {
    const double l = task_triplet_loss({Tensor::vector({std::cos(angle), std::sin(angle), 0.0})}, pos, neg).item();
    CHECK(l > prev);
    prev = l;
  }
}

TEST_CASE("language features never receive gradient") {
  Tensor k = Tensor::vector({0.2, 0.4, -0.1}, true);
  const auto p = feature({1, 0, 0});
  const auto n = feature({0, 1, 0});
  task_triplet_loss({k}, p, n).backward();
  CHECK(k.has_grad());
  CHECK_FALSE(p.vector.requires_grad());
  CHECK_FALSE(p.vector.has_grad());
}

TEST_CASE("negative task sampling") {
  std::vector<LanguageFeature> tasks;
  for (std::size_t t = 0; t < 4; ++t) tasks.push_back(feature(unit(4, t), t));
  Rng rng(1);
  CHECK_THROWS_AS(sample_negative_task(0, tasks, rng), Error);
  for (int i = 0; i < 100; ++i) CHECK(sample_negative_task(1, tasks, rng).id == 0);

  const int draws = 10000;
  std::map<std::size_t, int> counts;
  Rng r2(2);
  for (int i = 0; i < draws; ++i) ++counts[sample_negative_task(3, tasks, r2).id];
  CHECK(counts.size() == 3);
  for (const auto& [id, c] : counts) CHECK(std::abs(c / double(draws) - 1.0 / 3.0) <= 0.02);
  // 2 degrees of freedom, p = 0.001.
  CHECK(chi_square(counts, 3, draws) < 13.82);

  Rng a(9), b(9);
  for (int i = 0; i < 50; ++i) CHECK(sample_negative_task(3, tasks, a).id == sample_negative_task(3, tasks, b).id);
}

TEST_CASE("negative class sampling") {
  ClassFeatures feats;
  for (std::size_t c = 0; c < 12; ++c) feats.emplace(c, feature(unit(12, c), c));
  Rng rng(3);
  for (int i = 0; i < 50; ++i) CHECK(sample_negative_class(5, {2}, feats, rng).id == 2);

  const std::vector<std::size_t> previous{0, 1, 2, 3, 4, 5, 6, 7};
  const int draws = 10000;
  std::map<std::size_t, int> counts;
  for (int i = 0; i < draws; ++i) {
    const auto& f = sample_negative_class(9, previous, feats, rng);
    CHECK(f.id < 8);
    ++counts[f.id];
  }
  CHECK(counts.size() == 8);
  for (const auto& [id, c] : counts) CHECK(std::abs(c / double(draws) - 1.0 / 8.0) <= 0.02);
  // 7 degrees of freedom, p = 0.001.
  CHECK(chi_square(counts, 8, draws) < 24.32);

  CHECK_THROWS_AS(sample_negative_class(3, {}, feats, rng), Error);
  CHECK_THROWS_AS(sample_negative_class(3, {3}, feats, rng), Error);
}

}  // TEST_SUITE
