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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "lgcl/errors.hpp"
#include "lgcl/ops.hpp"
#include "lgcl/report.hpp"
#include "lgcl/trainer.hpp"
#include "support/oracles.hpp"

using namespace lgcl;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Setup {
  ExperimentConfig config;
  Dataset dataset;
  std::vector<TaskSpec> tasks;
  std::shared_ptr<SyntheticProvider> provider;
  std::unique_ptr<ContinualLearner> learner;

  explicit Setup(ExperimentConfig c) : config(std::move(c)) {
    dataset = generate_synthetic(config.synthetic_spec());
    tasks = split_tasks(dataset, config.tasks);
    SyntheticSpec pre = config.synthetic_spec();
    pre.num_classes = config.bootstrap.classes;
    pre.first_class_id = 1000;
    pre.train_per_class = config.bootstrap.train_per_class;
    pre.test_per_class = config.bootstrap.test_per_class;
    BootstrapOptions bo;
    bo.epochs = config.bootstrap.epochs;
    bo.batch_size = config.bootstrap.batch_size;
    bo.seed = 1;
    auto vit = bootstrap_pretrain(config.backbone, generate_synthetic(pre), dataset.class_ids(), bo).backbone;
    provider = std::make_shared<SyntheticProvider>(config.backbone.embed_dim, config.provider.seed);
    learner = std::make_unique<ContinualLearner>(config, vit, provider, dataset.num_classes());
  }

  TaskLoader train(std::size_t t) const { return TaskLoader(dataset, tasks[t], Split::kTrain, 17); }
  std::vector<TaskLoader> tests(std::size_t upto) const {
    std::vector<TaskLoader> out;
    for (std::size_t t = 0; t <= upto; ++t) out.emplace_back(dataset, tasks[t], Split::kTest, 17);
    return out;
  }
};

ExperimentConfig tiny(bool lgcl = true) {
  auto c = testing::tiny_experiment("unused");
  c.lgcl_enabled = lgcl;
  return c;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("language losses are inactive at t = 0") {
  Setup on(tiny(true));
  Setup off(tiny(false));
  const auto a = on.learner->train_task(on.train(0));
  const auto b = off.learner->train_task(off.train(0));
  CHECK(a.epoch_loss == b.epoch_loss);
  CHECK(values(on.learner->head().weight) == values(off.learner->head().weight));
  // From t = 1 on they do contribute.
  const auto a1 = on.learner->train_task(on.train(1));
  const auto b1 = off.learner->train_task(off.train(1));
  CHECK(a1.epoch_loss != b1.epoch_loss);
}

TEST_CASE("zero language weights reproduce the pure baseline") {
  auto zero = tiny(true);
  zero.loss.lambda_task = 0.0;
  zero.loss.lambda_class = 0.0;
  const auto a = run_experiment(zero, {.eval_threads = 1, .write_outputs = false});
  const auto b = run_experiment(tiny(false), {.eval_threads = 1, .write_outputs = false});
  CHECK(a.accuracy.rows() == b.accuracy.rows());
}

TEST_CASE("backbone stays frozen and head rows of future classes stay put") {
  Setup s(tiny());
  const auto before = s.learner->backbone().checksum();
  const auto head0 = values(s.learner->head().weight);
  s.learner->train_task(s.train(0));
  CHECK(s.learner->backbone().checksum() == before);
  const auto head1 = values(s.learner->head().weight);
  const std::size_t e = s.config.backbone.embed_dim;
  for (std::size_t c = 0; c < s.dataset.num_classes(); ++c) {
    const bool current = s.tasks[0].contains(c);
    bool moved = false;
    for (std::size_t i = 0; i < e; ++i) moved |= head1[c * e + i] != head0[c * e + i];
    CHECK(moved == current);
  }
}

TEST_CASE("masked cross-entropy leaves other head rows without gradient") {
  Setup s(tiny());
  const auto& head = s.learner->head();
  Tensor weight = head.weight;
  weight.zero_grad();
  const bool mask[] = {false, false, false, false, true, true, true, true};
  const Tensor x = Tensor::vector(std::vector<double>(s.config.backbone.embed_dim, 0.5));
  cross_entropy(head.logits(x), 5, mask).backward();
  const std::size_t e = s.config.backbone.embed_dim;
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < e; ++i) CHECK(head.weight.grad()[c * e + i] == 0.0);
}

TEST_CASE("evaluation is pure, provider-free and needs test data") {
  Setup s(tiny());
  s.learner->train_task(s.train(0));
  const auto calls = s.provider->call_count();
  const auto first = s.learner->evaluate(s.tests(0));
  CHECK(s.learner->evaluate(s.tests(0)) == first);
  CHECK(s.learner->evaluate(s.tests(0), 3) == first);
  CHECK(s.provider->call_count() == calls);

  s.learner->release_provider();
  CHECK(s.learner->evaluate(s.tests(0)) == first);

  Dataset empty = s.dataset;
  empty.test.clear();
  std::vector<TaskLoader> none;
  none.emplace_back(empty, s.tasks[0], Split::kTest, 1);
  CHECK_THROWS_AS(s.learner->evaluate(none), Error);
}

TEST_CASE("task order and disjointness are enforced") {
  Setup s(tiny());
  CHECK_THROWS_AS(s.learner->predict(s.dataset.test[0].image), Error);
  CHECK_THROWS_AS(s.learner->train_task(s.train(1)), Error);
  s.learner->train_task(s.train(0));
  TaskSpec again = s.tasks[0];
  again.task_id = 1;
  CHECK_THROWS_AS(s.learner->train_task(TaskLoader(s.dataset, again, Split::kTrain, 1)), Error);
}

TEST_CASE("parameter counts do not depend on language guidance") {
  Setup on(tiny(true));
  Setup off(tiny(false));
  CHECK(on.learner->parameter_counts() == off.learner->parameter_counts());
  const auto c = on.learner->parameter_counts();
  CHECK(c.keys == on.config.pool.M * on.config.backbone.embed_dim);
  CHECK(c.head == on.dataset.num_classes() * (on.config.backbone.embed_dim + 1));
}

TEST_CASE("prompt-tuning mode trains end to end") {
  auto c = tiny();
  c.mode = PromptMode::kPromptTuning;
  c.pool.L_p = 2;
  c.pool.N = 2;
  const auto r = run_experiment(c, {.eval_threads = 2, .write_outputs = false});
  CHECK(r.accuracy.num_rows() == 2);
  CHECK(r.backbone_checksum_start == r.backbone_checksum_end);
  CHECK(r.provider_calls_during_eval == 0);
}

TEST_CASE("frozen keys come from task language features") {
  auto c = tiny();
  c.pool.keys_frozen = true;
  Setup s(c);
  s.learner->init_frozen_keys(s.tasks);
  const auto keys_before = values(s.learner->pool().keys());
  s.learner->train_task(s.train(0));
  CHECK(values(s.learner->pool().keys()) == keys_before);
  const auto f0 = s.provider->encode(task_prompt_text(s.tasks[0].class_names), FeatureKind::kTask, 0);
  for (std::size_t i = 0; i < c.backbone.embed_dim; ++i) CHECK(keys_before[i] == f0.vector.data()[i]);
}

TEST_CASE("single separable task is learned") {
  auto c = tiny(false);
  c.tasks = 1;
  c.data.num_classes = 4;
  c.data.train_per_class = 24;
  c.data.test_per_class = 12;
  c.data.noise_std = 0.02;
  c.epochs_per_task = 15;
  c.bootstrap.epochs = 20;
  c.bootstrap.train_per_class = 16;
  const auto r = run_experiment(c, {.eval_threads = 1, .write_outputs = false});
  CHECK(r.accuracy.at(0, 0) >= 0.95);
  CHECK_FALSE(r.forgetting[0].has_value());
  CHECK(r.avg_accuracy[0] == r.accuracy.at(0, 0));
}

TEST_CASE("runs are deterministic and write their outputs") {
  const auto dir = std::filesystem::temp_directory_path() / "lgcl_trainer_run";
  std::filesystem::remove_all(dir);
  auto c = tiny();
  // output_dir is echoed in the report, so both runs share one directory.
  c.output_dir = (dir / "a").string();
  run_experiment(c);
  const std::string first = slurp(dir / "a" / "report.json");
  const auto a = run_experiment(c);
  CHECK(slurp(dir / "a" / "report.json") == first);
  for (const char* f : {"report.json", "metrics.csv", "timing.json", "checkpoint/backbone.json",
                        "checkpoint/backbone.tnsr", "checkpoint/learner.json", "checkpoint/learner.tnsr"}) {
    INFO(f);
    CHECK(std::filesystem::exists(dir / "a" / f));
  }
  const auto loaded = VisionTransformer::load(dir / "a" / "checkpoint");
  CHECK(loaded.checksum() == a.backbone_checksum_end);
  std::filesystem::remove_all(dir);
}

TEST_CASE("invalid configs are rejected before any work") {
  auto c = tiny();
  c.pool.N = c.pool.M + 1;
  CHECK_THROWS_AS(run_experiment(c), ConfigError);
}

}  // TEST_SUITE
