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
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lgcl/backbone.hpp"
#include "lgcl/data.hpp"
#include "lgcl/prompt_pool.hpp"

namespace lgcl {

struct PoolConfig {
  std::size_t M = 10;
  std::size_t N = 5;
  std::size_t L_p = 5;   // prompt-tuning prompt length
  std::size_t L_e = 20;  // prefix-tuning expert prompt length per layer
  std::size_t L_g = 6;   // prefix-tuning general prompt length per layer (even)
  bool keys_frozen = false;
  // Prefix-tuning injection layers; defaults are clipped to the backbone depth.
  std::vector<std::size_t> general_layers{0, 1};
  std::vector<std::size_t> expert_layers{2, 3, 4};
};

struct BootstrapConfig {
  std::size_t classes = 10;
  std::size_t train_per_class = 60;
  std::size_t test_per_class = 20;
  std::size_t epochs = 4;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  // When set, a frozen backbone is loaded from this directory instead.
  std::string checkpoint;
};

struct LossConfig {
  double lambda_task = 0.3;
  double lambda_class = 0.7;
  double lambda_key = 0.5;
};

struct ProviderConfig {
  std::string kind = "synthetic";  // synthetic | file
  std::uint64_t seed = 0;
  std::string path;
  std::uint64_t projection_seed = 0;
};

struct DataConfig {
  std::string kind = "synthetic";  // synthetic | dir
  std::string path;
  std::size_t num_classes = 20;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 50;
  double noise_std = 0.15;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  PromptMode mode = PromptMode::kPrefixTuning;
  std::uint64_t seed = 0;
  std::size_t tasks = 5;
  std::size_t epochs_per_task = 5;
  std::optional<std::size_t> batch_size;  // default 24 prefix / 16 prompt
  double learning_rate = 0.005;
  bool lgcl_enabled = true;
  std::string output_dir = "out";

  PoolConfig pool;
  ViTConfig backbone;
  BootstrapConfig bootstrap;
  LossConfig loss;
  ProviderConfig provider;
  DataConfig data;

  std::size_t effective_batch_size() const;
  // Zero when LGCL is disabled.
  double effective_lambda_task() const;
  double effective_lambda_class() const;
  std::vector<std::size_t> effective_general_layers() const;
  std::vector<std::size_t> effective_expert_layers() const;

  // One "<key.path>: message" entry per violated constraint.
  std::vector<std::string> problems() const;
  // Throws ConfigError when problems() is non-empty.
  void validate() const;

  SyntheticSpec synthetic_spec() const;
  // Identifies the benchmark (data + task split) independent of run seed.
  std::string dataset_signature() const;
  nlohmann::json to_json() const;
};

// Parses the TOML subset used by experiment files: [section] headers and
// `key = value` lines with strings, booleans, integers, reals and integer
// arrays. Unknown keys and type errors are reported as ConfigError issues
// with their key paths. Does not call validate().
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace lgcl
