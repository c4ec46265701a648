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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lgcl/backbone.hpp"
#include "lgcl/config.hpp"
#include "lgcl/data.hpp"
#include "lgcl/language.hpp"
#include "lgcl/metrics.hpp"
#include "lgcl/prompt_pool.hpp"

namespace lgcl {

/// Linear layer over x_o with rows for every class of the whole run.
/// Rows of classes whose task has not started are never updated.
struct ClassifierHead {
  Tensor weight;  // [num_classes, E]
  Tensor bias;    // [num_classes]

  ClassifierHead(std::size_t num_classes, std::size_t embed_dim, std::uint64_t seed);
  Tensor logits(const Tensor& feature) const;  // [E] -> [num_classes]
};

struct ParamCounts {
  std::size_t backbone = 0;
  std::size_t prompts = 0;  // pool prompts plus shared general prompts
  std::size_t keys = 0;
  std::size_t head = 0;

  bool operator==(const ParamCounts&) const = default;
};

struct TaskLog {
  std::size_t task_id = 0;
  std::vector<double> epoch_loss;  // mean total loss per epoch
  std::vector<double> epoch_ce;    // mean cross-entropy per epoch
  std::size_t steps = 0;
  // Mean over the task's training samples of the mean cosine between the
  // selected keys and this task's language feature.
  double key_cosine_start = 0.0;
  double key_cosine_end = 0.0;
};

/// All learnable state of a prompt-based continual learner around a frozen
/// backbone, plus the per-task training and evaluation protocol.
class ContinualLearner {
 public:
  ContinualLearner(const ExperimentConfig& config, VisionTransformer backbone,
                   std::shared_ptr<EmbeddingProvider> provider, std::size_t num_classes, std::size_t first_class_id = 0);

  // Frozen-keys ablation: keys are set from all task features up front.
  void init_frozen_keys(const std::vector<TaskSpec>& tasks);

  // Trains on one task. Tasks must arrive in order 0, 1, 2, ...; the loader
  // is the only data access.
  TaskLog train_task(const TaskLoader& loader);

  // Accuracy on each given test loader, predicting over every class seen so
  // far with no task identity. Side-effect free.
  std::vector<double> evaluate(const std::vector<TaskLoader>& test_loaders, std::size_t threads = 1) const;
  // Predicted global class id.
  std::size_t predict(const Tensor& image) const;

  Tensor query(const Tensor& image) const { return backbone_.query_feature(image); }
  // x_o for an image under a given selection.
  Tensor feature(const Tensor& image, const Selection& selection) const;

  ParamCounts parameter_counts() const;
  std::vector<Tensor> trainable() const;
  const VisionTransformer& backbone() const { return backbone_; }
  const PromptPool& pool() const { return pool_; }
  const ClassifierHead& head() const { return head_; }
  const Tensor& general_prompt() const { return general_prompt_; }
  std::size_t tasks_trained() const { return seen_tasks_.size(); }
  const std::vector<LanguageFeature>& task_features() const { return task_features_; }

  // Drops the text side; inference must not need it.
  void release_provider() { provider_.reset(); }

  // `<dir>/learner.tnsr` + `<dir>/learner.json`.
  void save_checkpoint(const std::filesystem::path& dir) const;

 private:
  double mean_key_cosine(const std::vector<Tensor>& queries, const LanguageFeature& task_feature) const;
  std::size_t class_index(std::size_t class_id) const;

  ExperimentConfig config_;
  VisionTransformer backbone_;
  std::shared_ptr<EmbeddingProvider> provider_;
  std::size_t num_classes_;
  std::size_t first_class_id_;
  PromptMode mode_;
  PromptPool pool_;
  Tensor general_prompt_;  // [|general layers| * L_g, E]; undefined if unused
  std::vector<std::size_t> general_layers_;
  std::vector<std::size_t> expert_layers_;
  ClassifierHead head_;
  Rng rng_;

  std::vector<TaskSpec> seen_tasks_;
  std::vector<LanguageFeature> task_features_;
  ClassFeatures class_features_;
};

struct RunOptions {
  std::size_t eval_threads = 1;
  // Write report.json, metrics.csv, timing.json and checkpoints.
  bool write_outputs = true;
};

struct ExperimentReport {
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string dataset_signature;
  AccuracyMatrix accuracy;
  std::vector<double> avg_accuracy;
  std::vector<std::optional<double>> forgetting;
  std::optional<double> wall_time_s;
  ParamCounts param_counts;
  std::vector<TaskLog> task_logs;
  double bootstrap_val_accuracy = 0.0;
  std::uint64_t backbone_checksum_start = 0;
  std::uint64_t backbone_checksum_end = 0;
  std::size_t provider_calls_during_eval = 0;
};

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

}  // namespace lgcl
