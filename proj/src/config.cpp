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

#include "lgcl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <variant>

#include "lgcl/errors.hpp"

namespace lgcl {

namespace {

using IntList = std::vector<std::int64_t>;
using Value = std::variant<bool, std::int64_t, double, std::string, IntList>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && in_string) {
      ++i;
    } else if (line[i] == '"') {
      in_string = !in_string;
    } else if (line[i] == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

std::optional<std::int64_t> parse_int(const std::string& s) {
  std::int64_t v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (!s.empty() && s[0] == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || b == e) return std::nullopt;
  return v;
}

std::optional<Value> parse_value(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) return std::nullopt;
  if (s.front() == '"') {
    std::string out;
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (s[i] == '\\' && i + 1 < s.size()) {
        const char c = s[++i];
        out += c == 'n' ? '\n' : c == 't' ? '\t' : c;
      } else if (s[i] == '"') {
        if (i + 1 != s.size()) return std::nullopt;
        return out;
      } else {
        out += s[i];
      }
    }
    return std::nullopt;
  }
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '[') {
    if (s.back() != ']') return std::nullopt;
    IntList list;
    std::stringstream items(s.substr(1, s.size() - 2));
    std::string item;
    while (std::getline(items, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      auto v = parse_int(item);
      if (!v) return std::nullopt;
      list.push_back(*v);
    }
    return list;
  }
  if (auto v = parse_int(s)) return *v;
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(d)) return std::nullopt;
  return d;
}

using Setter = std::function<void(const Value&, const std::string&, std::vector<std::string>&)>;

Setter size_field(std::size_t& out) {
  return [&out](const Value& v, const std::string& path, std::vector<std::string>& issues) {
    if (auto p = std::get_if<std::int64_t>(&v); p && *p >= 0) {
      out = static_cast<std::size_t>(*p);
    } else {
      issues.push_back(path + ": expected a non-negative integer");
    }
  };
}

Setter optional_size_field(std::optional<std::size_t>& out) {
  return [&out](const Value& v, const std::string& path, std::vector<std::string>& issues) {
    if (auto p = std::get_if<std::int64_t>(&v); p && *p >= 0) {
      out = static_cast<std::size_t>(*p);
    } else {
      issues.push_back(path + ": expected a non-negative integer");
    }
  };
}

Setter u64_field(std::uint64_t& out) {
  return [&out](const Value& v, const std::string& path, std::vector<std::string>& issues) {
    if (auto p = std::get_if<std::int64_t>(&v); p && *p >= 0) {
      out = static_cast<std::uint64_t>(*p);
    } else {
      issues.push_back(path + ": expected a non-negative integer");
    }
  };
}

Setter real_field(double& out) {
  return [&out](const Value& v, const std::string& path, std::vector<std::string>& issues) {
    if (auto p = std::get_if<double>(&v)) {
      out = *p;
    } else if (auto q = std::get_if<std::int64_t>(&v)) {
      out = static_cast<double>(*q);
    } else {
      issues.push_back(path + ": expected a number");
    }
  };
}

Setter bool_field(bool& out) {
  return [&out](const Value& v, const std::string& path, std::vector<std::string>& issues) {
    if (auto p = std::get_if<bool>(&v)) {
      out = *p;
    } else {
      issues.push_back(path + ": expected true or false");
    }
  };
}

Setter string_field(std::string& out) {
  return [&out](const Value& v, const std::string& path, std::vector<std::string>& issues) {
    if (auto p = std::get_if<std::string>(&v)) {
      out = *p;
    } else {
      issues.push_back(path + ": expected a string");
    }
  };
}

Setter size_list_field(std::vector<std::size_t>& out) {
  return [&out](const Value& v, const std::string& path, std::vector<std::string>& issues) {
    auto p = std::get_if<IntList>(&v);
    if (!p || std::any_of(p->begin(), p->end(), [](std::int64_t x) { return x < 0; })) {
      issues.push_back(path + ": expected an array of non-negative integers");
      return;
    }
    out.assign(p->begin(), p->end());
  };
}

Setter mode_field(PromptMode& out) {
  return [&out](const Value& v, const std::string& path, std::vector<std::string>& issues) {
    auto p = std::get_if<std::string>(&v);
    if (p && (*p == "prompt_tuning" || *p == "prefix_tuning")) {
      out = parse_prompt_mode(*p);
    } else {
      issues.push_back(path + ": expected \"prompt_tuning\" or \"prefix_tuning\"");
    }
  };
}

std::map<std::string, Setter> bindings(ExperimentConfig& c) {
  return {
      {"experiment.name", string_field(c.name)},
      {"experiment.mode", mode_field(c.mode)},
      {"experiment.seed", u64_field(c.seed)},
      {"experiment.tasks", size_field(c.tasks)},
      {"experiment.epochs_per_task", size_field(c.epochs_per_task)},
      {"experiment.batch_size", optional_size_field(c.batch_size)},
      {"experiment.learning_rate", real_field(c.learning_rate)},
      {"experiment.lgcl_enabled", bool_field(c.lgcl_enabled)},
      {"experiment.output_dir", string_field(c.output_dir)},
      {"pool.M", size_field(c.pool.M)},
      {"pool.N", size_field(c.pool.N)},
      {"pool.L_p", size_field(c.pool.L_p)},
      {"pool.L_e", size_field(c.pool.L_e)},
      {"pool.L_g", size_field(c.pool.L_g)},
      {"pool.keys_frozen", bool_field(c.pool.keys_frozen)},
      {"pool.general_layers", size_list_field(c.pool.general_layers)},
      {"pool.expert_layers", size_list_field(c.pool.expert_layers)},
      {"backbone.image_size", size_field(c.backbone.image_size)},
      {"backbone.patch_size", size_field(c.backbone.patch_size)},
      {"backbone.embed_dim", size_field(c.backbone.embed_dim)},
      {"backbone.num_layers", size_field(c.backbone.num_layers)},
      {"backbone.num_heads", size_field(c.backbone.num_heads)},
      {"backbone.mlp_ratio", size_field(c.backbone.mlp_ratio)},
      {"backbone.num_channels", size_field(c.backbone.num_channels)},
      {"bootstrap.classes", size_field(c.bootstrap.classes)},
      {"bootstrap.train_per_class", size_field(c.bootstrap.train_per_class)},
      {"bootstrap.test_per_class", size_field(c.bootstrap.test_per_class)},
      {"bootstrap.epochs", size_field(c.bootstrap.epochs)},
      {"bootstrap.batch_size", size_field(c.bootstrap.batch_size)},
      {"bootstrap.learning_rate", real_field(c.bootstrap.learning_rate)},
      {"bootstrap.checkpoint", string_field(c.bootstrap.checkpoint)},
      {"loss.lambda_task", real_field(c.loss.lambda_task)},
      {"loss.lambda_class", real_field(c.loss.lambda_class)},
      {"loss.lambda_key", real_field(c.loss.lambda_key)},
      {"provider.kind", string_field(c.provider.kind)},
      {"provider.seed", u64_field(c.provider.seed)},
      {"provider.path", string_field(c.provider.path)},
      {"provider.projection_seed", u64_field(c.provider.projection_seed)},
      {"data.kind", string_field(c.data.kind)},
      {"data.path", string_field(c.data.path)},
      {"data.num_classes", size_field(c.data.num_classes)},
      {"data.train_per_class", size_field(c.data.train_per_class)},
      {"data.test_per_class", size_field(c.data.test_per_class)},
      {"data.noise_std", real_field(c.data.noise_std)},
      {"data.seed", u64_field(c.data.seed)},
  };
}

}  // namespace

std::size_t ExperimentConfig::effective_batch_size() const {
  if (batch_size) return *batch_size;
  return mode == PromptMode::kPrefixTuning ? 24 : 16;
}

double ExperimentConfig::effective_lambda_task() const {
  return lgcl_enabled && !pool.keys_frozen ? loss.lambda_task : 0.0;
}

double ExperimentConfig::effective_lambda_class() const { return lgcl_enabled ? loss.lambda_class : 0.0; }

namespace {
std::vector<std::size_t> clipped(const std::vector<std::size_t>& layers, std::size_t depth) {
  std::vector<std::size_t> out;
  for (auto l : layers)
    if (l < depth) out.push_back(l);
  return out;
}
}  // namespace

std::vector<std::size_t> ExperimentConfig::effective_general_layers() const {
  return clipped(pool.general_layers, backbone.num_layers);
}

std::vector<std::size_t> ExperimentConfig::effective_expert_layers() const {
  return clipped(pool.expert_layers, backbone.num_layers);
}

std::vector<std::string> ExperimentConfig::problems() const {
  std::vector<std::string> out;
  auto need = [&out](bool ok, const std::string& msg) {
    if (!ok) out.push_back(msg);
  };
  need(tasks >= 1, "experiment.tasks: must be >= 1");
  need(epochs_per_task >= 1, "experiment.epochs_per_task: must be >= 1");
  need(effective_batch_size() >= 1, "experiment.batch_size: must be >= 1");
  need(learning_rate > 0.0, "experiment.learning_rate: must be > 0");
  need(!output_dir.empty(), "experiment.output_dir: must not be empty");

  need(pool.M >= 1, "pool.M: must be >= 1");
  need(pool.N >= 1 && pool.N <= pool.M,
       "pool.N: must satisfy 1 <= N <= M (N=" + std::to_string(pool.N) + ", M=" + std::to_string(pool.M) + ")");
  if (mode == PromptMode::kPromptTuning) {
    need(pool.L_p >= 1, "pool.L_p: must be >= 1");
  } else {
    need(pool.L_e >= 2 && pool.L_e % 2 == 0, "pool.L_e: must be a positive even number");
    need(pool.L_g % 2 == 0, "pool.L_g: must be even");
    for (auto l : pool.general_layers) {
      need(std::find(pool.expert_layers.begin(), pool.expert_layers.end(), l) == pool.expert_layers.end(),
           "pool.general_layers: layer " + std::to_string(l) + " is also an expert layer");
    }
    need(!effective_expert_layers().empty(), "pool.expert_layers: no layer within backbone.num_layers");
  }

  for (const auto& p : backbone.problems()) out.push_back("backbone: " + p);

  need(loss.lambda_task >= 0.0 && loss.lambda_task <= 1.0, "loss.lambda_task: must be in [0, 1]");
  need(loss.lambda_class >= 0.0 && loss.lambda_class <= 1.0, "loss.lambda_class: must be in [0, 1]");
  need(loss.lambda_key >= 0.0, "loss.lambda_key: must be >= 0");

  if (provider.kind == "file") {
    need(!provider.path.empty(), "provider.path: required when provider.kind = \"file\"");
  } else {
    need(provider.kind == "synthetic", "provider.kind: expected \"synthetic\" or \"file\"");
  }

  if (data.kind == "synthetic") {
    need(data.num_classes >= 1, "data.num_classes: must be >= 1");
    need(data.train_per_class >= 1, "data.train_per_class: must be >= 1");
    need(data.test_per_class >= 1, "data.test_per_class: must be >= 1");
    need(data.noise_std >= 0.0, "data.noise_std: must be >= 0");
    need(tasks == 0 || data.num_classes % tasks == 0,
         "experiment.tasks: " + std::to_string(data.num_classes) + " classes do not split into " +
             std::to_string(tasks) + " tasks");
  } else if (data.kind == "dir") {
    need(!data.path.empty(), "data.path: required when data.kind = \"dir\"");
  } else {
    out.push_back("data.kind: expected \"synthetic\" or \"dir\"");
  }

  if (bootstrap.checkpoint.empty()) {
    need(bootstrap.classes >= 2, "bootstrap.classes: must be >= 2");
    need(bootstrap.train_per_class >= 1, "bootstrap.train_per_class: must be >= 1");
    need(bootstrap.batch_size >= 1, "bootstrap.batch_size: must be >= 1");
    need(bootstrap.learning_rate > 0.0, "bootstrap.learning_rate: must be > 0");
  }
  return out;
}

void ExperimentConfig::validate() const {
  auto p = problems();
  if (!p.empty()) throw ConfigError(std::move(p));
}

SyntheticSpec ExperimentConfig::synthetic_spec() const {
  SyntheticSpec s;
  s.num_classes = data.num_classes;
  s.train_per_class = data.train_per_class;
  s.test_per_class = data.test_per_class;
  s.channels = backbone.num_channels;
  s.image_size = backbone.image_size;
  s.noise_std = data.noise_std;
  s.seed = data.seed;
  return s;
}

std::string ExperimentConfig::dataset_signature() const {
  std::ostringstream os;
  if (data.kind == "dir") {
    os << "dir:" << data.path;
  } else {
    os << "synthetic:classes=" << data.num_classes << ",train=" << data.train_per_class
       << ",test=" << data.test_per_class << ",noise=" << data.noise_std << ",seed=" << data.seed
       << ",shape=" << backbone.num_channels << "x" << backbone.image_size << "x" << backbone.image_size;
  }
  os << ",tasks=" << tasks;
  return os.str();
}

nlohmann::json ExperimentConfig::to_json() const {
  using nlohmann::json;
  json j;
  j["experiment"] = {{"name", name},
                     {"mode", to_string(mode)},
                     {"seed", seed},
                     {"tasks", tasks},
                     {"epochs_per_task", epochs_per_task},
                     {"batch_size", effective_batch_size()},
                     {"learning_rate", learning_rate},
                     {"lgcl_enabled", lgcl_enabled},
                     {"output_dir", output_dir}};
  j["pool"] = {{"M", pool.M},
               {"N", pool.N},
               {"L_p", pool.L_p},
               {"L_e", pool.L_e},
               {"L_g", pool.L_g},
               {"keys_frozen", pool.keys_frozen},
               {"general_layers", effective_general_layers()},
               {"expert_layers", effective_expert_layers()}};
  j["backbone"] = {{"image_size", backbone.image_size}, {"patch_size", backbone.patch_size},
                   {"embed_dim", backbone.embed_dim},   {"num_layers", backbone.num_layers},
                   {"num_heads", backbone.num_heads},   {"mlp_ratio", backbone.mlp_ratio},
                   {"num_channels", backbone.num_channels}};
  j["bootstrap"] = {{"classes", bootstrap.classes},
                    {"train_per_class", bootstrap.train_per_class},
                    {"test_per_class", bootstrap.test_per_class},
                    {"epochs", bootstrap.epochs},
                    {"batch_size", bootstrap.batch_size},
                    {"learning_rate", bootstrap.learning_rate},
                    {"checkpoint", bootstrap.checkpoint}};
  j["loss"] = {{"lambda_task", effective_lambda_task()},
               {"lambda_class", effective_lambda_class()},
               {"lambda_key", loss.lambda_key}};
  j["provider"] = {{"kind", provider.kind},
                   {"seed", provider.seed},
                   {"path", provider.path},
                   {"projection_seed", provider.projection_seed}};
  j["data"] = {{"kind", data.kind},
               {"path", data.path},
               {"num_classes", data.num_classes},
               {"train_per_class", data.train_per_class},
               {"test_per_class", data.test_per_class},
               {"noise_std", data.noise_std},
               {"seed", data.seed}};
  return j;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig cfg;
  std::vector<std::string> issues;
  std::map<std::string, std::pair<Value, int>> values;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) {
        issues.push_back(where + ": malformed section header");
        continue;
      }
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      issues.push_back(where + ": expected key = value");
      continue;
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string path = section.empty() ? key : section + "." + key;
    auto value = parse_value(s.substr(eq + 1));
    if (key.empty() || !value) {
      issues.push_back(path + ": unparseable value (" + where + ")");
      continue;
    }
    if (!values.emplace(path, std::make_pair(*value, lineno)).second) {
      issues.push_back(path + ": duplicate key (" + where + ")");
    }
  }
  auto binds = bindings(cfg);
  for (const auto& [path, entry] : values) {
    auto it = binds.find(path);
    if (it == binds.end()) {
      issues.push_back(path + ": unknown key (" + source + ":" + std::to_string(entry.second) + ")");
      continue;
    }
    it->second(entry.first, path, issues);
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open config");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

}  // namespace lgcl
