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
#include <functional>
#include <string>
#include <vector>

#include "lgcl/tensor.hpp"

namespace lgcl {

struct Sample {
  Tensor image;  // [C, H, W], values in [0, 1]
  std::size_t label = 0;  // global class id
};

/// Labelled images for a contiguous block of global class ids
/// [first_class_id, first_class_id + class_names.size()).
struct Dataset {
  Shape image_shape;  // [C, H, W]
  std::size_t first_class_id = 0;
  std::vector<std::string> class_names;
  std::vector<Sample> train;
  std::vector<Sample> test;

  std::size_t num_classes() const { return class_names.size(); }
  std::vector<std::size_t> class_ids() const;
  const std::string& class_name(std::size_t class_id) const;
};

struct SyntheticSpec {
  std::size_t num_classes = 20;
  std::size_t first_class_id = 0;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 50;
  std::size_t channels = 3;
  std::size_t image_size = 32;
  double noise_std = 0.15;
  std::uint64_t seed = 0;
};

// Noise-free grating pattern of one class; the class mean of generated data
// before clamping.
Tensor class_template(const SyntheticSpec& spec, std::size_t class_id);

// One grating per class plus Gaussian pixel noise, clamped to [0, 1] and
// rounded to f32 precision so that TNSR round-trips are exact. Class names
// are "class_<id>".
Dataset generate_synthetic(const SyntheticSpec& spec);

/// One continual-learning task: an ordered block of class ids.
struct TaskSpec {
  std::size_t task_id = 0;
  std::vector<std::size_t> class_ids;
  std::vector<std::string> class_names;

  bool contains(std::size_t class_id) const;
};

// Contiguous, disjoint blocks of equal size.
std::vector<TaskSpec> split_tasks(const Dataset& dataset, std::size_t num_tasks);

// Throws if any class id appears in two tasks.
void check_disjoint(const std::vector<TaskSpec>& tasks);

enum class Split { kTrain, kTest };

/// View of one task's samples from one split. Only that task's samples are
/// reachable through it.
class TaskLoader {
 public:
  TaskLoader(const Dataset& dataset, TaskSpec task, Split split, std::uint64_t seed);

  const TaskSpec& task() const { return task_; }
  std::size_t size() const { return samples_.size(); }
  const Sample& operator[](std::size_t i) const { return *samples_[i]; }

  // Sample positions in shuffled order for `epoch`; the order depends only on
  // (seed, epoch).
  std::vector<std::size_t> epoch_order(std::size_t epoch) const;
  std::vector<std::vector<std::size_t>> batches(std::size_t epoch, std::size_t batch_size) const;

 private:
  TaskSpec task_;
  std::vector<const Sample*> samples_;
  std::uint64_t seed_;
};

using WarningSink = std::function<void(const std::string&)>;
void default_warning_sink(const std::string& message);

// Layout: manifest.json plus one TNSR file per sample.
void save_dataset_dir(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset_dir(const std::filesystem::path& dir, const WarningSink& warn = default_warning_sink);

}  // namespace lgcl
