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

#include "lgcl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>

#include "json.hpp"
#include "lgcl/errors.hpp"
#include "lgcl/random.hpp"
#include "lgcl/serialize.hpp"

namespace lgcl {

using json = nlohmann::json;

std::vector<std::size_t> Dataset::class_ids() const {
  std::vector<std::size_t> ids(class_names.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = first_class_id + i;
  return ids;
}

const std::string& Dataset::class_name(std::size_t class_id) const {
  if (class_id < first_class_id || class_id >= first_class_id + class_names.size()) {
    throw Error("class id " + std::to_string(class_id) + " not in dataset");
  }
  return class_names[class_id - first_class_id];
}

namespace {

struct Grating {
  double fx, fy, phase, weight;
  std::vector<double> color;
};

std::vector<Grating> class_gratings(const SyntheticSpec& spec, std::size_t class_id) {
  Rng rng(mix_seed(spec.seed, 0x6772617469ULL + class_id));
  // Orientation is spread by a golden-ratio sequence over class ids so that
  // neighbouring ids never share an orientation.
  const double golden = 0.6180339887498949;
  std::vector<Grating> out;
  for (int g = 0; g < 2; ++g) {
    const double turn = std::fmod(0.5 * g + static_cast<double>(class_id) * golden, 1.0);
    const double theta = std::numbers::pi * turn + 0.2 * (rng.uniform() - 0.5);
    const double freq = 1.0 + 3.0 * rng.uniform();  // cycles per image
    Grating gr;
    gr.fx = freq * std::cos(theta);
    gr.fy = freq * std::sin(theta);
    gr.phase = 2.0 * std::numbers::pi * rng.uniform();
    gr.weight = g == 0 ? 0.3 : 0.15;
    for (std::size_t c = 0; c < spec.channels; ++c) gr.color.push_back(rng.uniform(-1.0, 1.0));
    out.push_back(std::move(gr));
  }
  return out;
}

void validate(const SyntheticSpec& spec) {
  if (spec.num_classes == 0 || spec.train_per_class == 0 || spec.test_per_class == 0 || spec.channels == 0 ||
      spec.image_size == 0) {
    throw Error("synthetic dataset: sizes must be positive");
  }
  if (!(spec.noise_std >= 0.0)) throw Error("synthetic dataset: noise_std must be >= 0");
}

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

Tensor class_template(const SyntheticSpec& spec, std::size_t class_id) {
  validate(spec);
  const auto gratings = class_gratings(spec, class_id);
  const std::size_t s = spec.image_size;
  std::vector<double> px(spec.channels * s * s);
  for (std::size_t c = 0; c < spec.channels; ++c) {
    for (std::size_t y = 0; y < s; ++y) {
      for (std::size_t x = 0; x < s; ++x) {
        double v = 0.5;
        for (const auto& g : gratings) {
          const double arg = 2.0 * std::numbers::pi * (g.fx * static_cast<double>(x) + g.fy * static_cast<double>(y)) /
                                 static_cast<double>(s) +
                             g.phase;
          v += g.weight * g.color[c] * std::sin(arg);
        }
        px[(c * s + y) * s + x] = v;
      }
    }
  }
  return Tensor::from_data({spec.channels, s, s}, std::move(px));
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  Dataset ds;
  ds.image_shape = {spec.channels, spec.image_size, spec.image_size};
  ds.first_class_id = spec.first_class_id;
  Rng noise(mix_seed(spec.seed, 0x6e6f697365ULL + spec.first_class_id));
  auto make = [&](const Tensor& tmpl, std::size_t label) {
    std::vector<double> px(tmpl.data().begin(), tmpl.data().end());
    for (auto& v : px) v = to_f32(std::clamp(v + spec.noise_std * noise.normal(), 0.0, 1.0));
    return Sample{Tensor::from_data(ds.image_shape, std::move(px)), label};
  };
  for (std::size_t i = 0; i < spec.num_classes; ++i) {
    const std::size_t id = spec.first_class_id + i;
    ds.class_names.push_back("class_" + std::to_string(id));
    const Tensor tmpl = class_template(spec, id);
    for (std::size_t k = 0; k < spec.train_per_class; ++k) ds.train.push_back(make(tmpl, id));
    for (std::size_t k = 0; k < spec.test_per_class; ++k) ds.test.push_back(make(tmpl, id));
  }
  return ds;
}

bool TaskSpec::contains(std::size_t class_id) const {
  return std::find(class_ids.begin(), class_ids.end(), class_id) != class_ids.end();
}

std::vector<TaskSpec> split_tasks(const Dataset& dataset, std::size_t num_tasks) {
  if (num_tasks == 0) throw Error("split_tasks: need at least one task");
  if (dataset.num_classes() % num_tasks != 0) {
    throw Error("split_tasks: " + std::to_string(dataset.num_classes()) + " classes do not divide into " +
                std::to_string(num_tasks) + " tasks");
  }
  const std::size_t per = dataset.num_classes() / num_tasks;
  std::vector<TaskSpec> tasks;
  for (std::size_t t = 0; t < num_tasks; ++t) {
    TaskSpec spec;
    spec.task_id = t;
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t id = dataset.first_class_id + t * per + i;
      spec.class_ids.push_back(id);
      spec.class_names.push_back(dataset.class_name(id));
    }
    tasks.push_back(std::move(spec));
  }
  check_disjoint(tasks);
  return tasks;
}

void check_disjoint(const std::vector<TaskSpec>& tasks) {
  std::set<std::size_t> seen;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (tasks[t].task_id != t) throw Error("task id " + std::to_string(tasks[t].task_id) + " at position " + std::to_string(t));
    for (auto id : tasks[t].class_ids) {
      if (!seen.insert(id).second) throw Error("class " + std::to_string(id) + " appears in more than one task");
    }
  }
}

TaskLoader::TaskLoader(const Dataset& dataset, TaskSpec task, Split split, std::uint64_t seed)
    : task_(std::move(task)), seed_(seed) {
  const auto& pool = split == Split::kTrain ? dataset.train : dataset.test;
  for (const auto& s : pool) {
    if (task_.contains(s.label)) samples_.push_back(&s);
  }
}

std::vector<std::size_t> TaskLoader::epoch_order(std::size_t epoch) const {
  std::vector<std::size_t> order(samples_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix_seed(seed_, 0x1000 * (task_.task_id + 1) + epoch));
  rng.shuffle(order.begin(), order.end());
  return order;
}

std::vector<std::vector<std::size_t>> TaskLoader::batches(std::size_t epoch, std::size_t batch_size) const {
  if (batch_size == 0) throw Error("batch size must be positive");
  const auto order = epoch_order(epoch);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  }
  return out;
}

void default_warning_sink(const std::string& message) { std::clog << "warning: " << message << '\n'; }

namespace {

json sample_entries(const std::vector<Sample>& samples, const std::string& split, const std::filesystem::path& dir,
                    std::size_t first_class_id) {
  json entries = json::array();
  std::filesystem::create_directories(dir / split);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.tnsr", i);
    const std::string rel = split + "/" + name;
    save_tnsr_file(dir / rel, samples[i].image);
    entries.push_back({{"file", rel}, {"label", samples[i].label - first_class_id}});
  }
  return entries;
}

std::vector<Sample> load_entries(const json& entries, const std::string& split, const std::filesystem::path& dir,
                                 const Shape& shape, std::size_t num_classes, const WarningSink& warn) {
  if (!entries.is_array()) throw IoError((dir / "manifest.json").string() + ": '" + split + "' must be an array");
  std::vector<Sample> out;
  bool warned = false;
  for (const auto& e : entries) {
    if (!e.is_object() || !e.contains("file") || !e.contains("label")) {
      throw IoError((dir / "manifest.json").string() + ": '" + split + "' entries need 'file' and 'label'");
    }
    for (const auto& [k, v] : e.items()) {
      if (k != "file" && k != "label" && !warned) {
        warn("manifest " + split + " entry field '" + k + "' ignored");
        warned = true;
      }
    }
    const auto path = dir / e["file"].get<std::string>();
    Tensor img = load_tnsr_file(path);
    if (img.shape() != shape) {
      throw IoError(path.string() + ": shape " + shape_str(img.shape()) + " does not match manifest image_shape " +
                    shape_str(shape));
    }
    const auto label = e["label"].get<std::size_t>();
    if (label >= num_classes) throw IoError(path.string() + ": label " + std::to_string(label) + " out of range");
    out.push_back({img, label});
  }
  return out;
}

}  // namespace

void save_dataset_dir(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["classes"] = dataset.class_names;
  manifest["image_shape"] = dataset.image_shape;
  manifest["train"] = sample_entries(dataset.train, "train", dir, dataset.first_class_id);
  manifest["test"] = sample_entries(dataset.test, "test", dir, dataset.first_class_id);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError((dir / "manifest.json").string() + ": cannot open for writing");
  out << manifest.dump(2) << '\n';
}

Dataset load_dataset_dir(const std::filesystem::path& dir, const WarningSink& warn) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw IoError(manifest_path.string() + ": missing manifest");
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  }
  for (const char* key : {"classes", "image_shape", "train", "test"}) {
    if (!manifest.contains(key)) throw IoError(manifest_path.string() + ": missing field '" + key + "'");
  }
  for (const auto& [k, v] : manifest.items()) {
    if (k != "classes" && k != "image_shape" && k != "train" && k != "test") warn("manifest field '" + k + "' ignored");
  }
  Dataset ds;
  try {
    ds.class_names = manifest["classes"].get<std::vector<std::string>>();
    ds.image_shape = manifest["image_shape"].get<Shape>();
  } catch (const json::exception& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  }
  if (ds.image_shape.size() != 3) throw IoError(manifest_path.string() + ": image_shape must be [C, H, W]");
  ds.train = load_entries(manifest["train"], "train", dir, ds.image_shape, ds.num_classes(), warn);
  ds.test = load_entries(manifest["test"], "test", dir, ds.image_shape, ds.num_classes(), warn);

  // 8-bit payloads are rescaled; anything else is clamped into [0, 1].
  double max_value = 0.0;
  for (const auto* split : {&ds.train, &ds.test})
    for (const auto& s : *split)
      for (double v : s.image.data()) max_value = std::max(max_value, v);
  const double factor = max_value > 1.0 ? 1.0 / 255.0 : 1.0;
  for (auto* split : {&ds.train, &ds.test}) {
    for (auto& s : *split) {
      for (auto& v : s.image.mutable_data()) v = std::clamp(v * factor, 0.0, 1.0);
    }
  }
  return ds;
}

}  // namespace lgcl
