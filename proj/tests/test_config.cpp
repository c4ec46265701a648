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

#include "doctest.h"
#include "lgcl/config.hpp"
#include "lgcl/errors.hpp"

using namespace lgcl;

namespace {

std::vector<std::string> issues_of(const std::string& text) {
  try {
    parse_config(text).validate();
  } catch (const ConfigError& e) {
    return e.issues();
  }
  return {};
}

bool mentions(const std::vector<std::string>& issues, const std::string& key) {
  for (const auto& i : issues)
    if (i.rfind(key + ":", 0) == 0) return true;
  return false;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults are valid") { CHECK_NOTHROW(ExperimentConfig().validate()); }

TEST_CASE("sections bind to fields") {
  const auto c = parse_config(R"(
# comment
[experiment]
name = "x"   # trailing comment
mode = "prompt_tuning"
seed = 12
lgcl_enabled = false

[pool]
M = 12
N = 3
L_p = 4
keys_frozen = true
expert_layers = [1, 2]

[loss]
lambda_task = 0.4
lambda_class = 0.6
)");
  CHECK(c.name == "x");
  CHECK(c.mode == PromptMode::kPromptTuning);
  CHECK(c.seed == 12);
  CHECK(c.pool.M == 12);
  CHECK(c.pool.N == 3);
  CHECK(c.pool.keys_frozen);
  CHECK(c.pool.expert_layers == std::vector<std::size_t>{1, 2});
  CHECK(c.loss.lambda_task == 0.4);
  CHECK(c.effective_batch_size() == 16);
  // lgcl_enabled = false forces both language weights to zero.
  CHECK(c.effective_lambda_task() == 0.0);
  CHECK(c.effective_lambda_class() == 0.0);
}

TEST_CASE("batch size defaults per mode") {
  ExperimentConfig c;
  c.mode = PromptMode::kPrefixTuning;
  CHECK(c.effective_batch_size() == 24);
  c.mode = PromptMode::kPromptTuning;
  CHECK(c.effective_batch_size() == 16);
  c.batch_size = 5;
  CHECK(c.effective_batch_size() == 5);
}

TEST_CASE("frozen keys disable the task loss") {
  ExperimentConfig c;
  c.pool.keys_frozen = true;
  CHECK(c.effective_lambda_task() == 0.0);
  CHECK(c.effective_lambda_class() == c.loss.lambda_class);
}

TEST_CASE("validation names the key path") {
  const auto issues = issues_of("[pool]\nM = 4\nN = 5\n");
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].rfind("pool.N:", 0) == 0);

  CHECK(mentions(issues_of("[pool]\nL_e = 3\n"), "pool.L_e"));
  CHECK(mentions(issues_of("[loss]\nlambda_task = 1.5\n"), "loss.lambda_task"));
  CHECK(mentions(issues_of("[experiment]\ntasks = 3\n"), "experiment.tasks"));
  CHECK(mentions(issues_of("[provider]\nkind = \"file\"\n"), "provider.path"));
  CHECK(mentions(issues_of("[backbone]\npatch_size = 5\n"), "backbone"));
}

TEST_CASE("every problem is reported at once") {
  const auto issues = issues_of("[pool]\nM = 4\nN = 5\n[loss]\nlambda_class = -1\n[experiment]\nlearning_rate = 0\n");
  CHECK(issues.size() == 3);
  CHECK(mentions(issues, "pool.N"));
  CHECK(mentions(issues, "loss.lambda_class"));
  CHECK(mentions(issues, "experiment.learning_rate"));
}

TEST_CASE("parse errors") {
  CHECK(mentions(issues_of("[pool]\nQ = 1\n"), "pool.Q"));
  CHECK(mentions(issues_of("[pool]\nM = \"ten\"\n"), "pool.M"));
  CHECK(mentions(issues_of("[pool]\nM = -3\n"), "pool.M"));
  CHECK(mentions(issues_of("[experiment]\nmode = \"adapter\"\n"), "experiment.mode"));
  CHECK(mentions(issues_of("[pool]\nM = 3\nM = 4\n"), "pool.M"));
  CHECK_FALSE(issues_of("[pool\nM = 3\n").empty());
  CHECK_THROWS_AS(load_config("/nonexistent/config.toml"), IoError);
}

TEST_CASE("bundled configs parse and validate") {
  const std::filesystem::path dir = LGCL_CONFIG_DIR;
  std::size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".toml") continue;
    INFO(entry.path());
    CHECK_NOTHROW(load_config(entry.path()).validate());
    ++count;
  }
  CHECK(count >= 4);
}

TEST_CASE("dataset signature ignores the run seed") {
  ExperimentConfig a;
  ExperimentConfig b;
  b.seed = 99;
  b.lgcl_enabled = false;
  CHECK(a.dataset_signature() == b.dataset_signature());
  b.data.noise_std = 0.3;
  CHECK(a.dataset_signature() != b.dataset_signature());
}

}  // TEST_SUITE
