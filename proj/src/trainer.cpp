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

#include "lgcl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <thread>

#include "lgcl/adam.hpp"
#include "lgcl/errors.hpp"
#include "lgcl/ops.hpp"
#include "lgcl/report.hpp"
#include "lgcl/serialize.hpp"

namespace lgcl {

using json = nlohmann::json;

namespace {

// Sub-seed salts, one per random stream of a run.
enum Stream : std::uint64_t {
  kPoolStream = 1,
  kHeadStream,
  kGeneralStream,
  kNegativeStream,
  kLoaderStream,
  kBootstrapStream,
  kPretextStream,
};

std::size_t pool_prompt_length(const ExperimentConfig& c) {
  if (c.mode == PromptMode::kPromptTuning) return c.pool.L_p;
  return c.effective_expert_layers().size() * c.pool.L_e;
}

std::vector<std::string> normalized(const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (const auto& n : names) out.push_back(normalize_text(n));
  return out;
}

std::size_t argmax_over(std::span<const double> values, const std::vector<bool>& allowed) {
  std::size_t best = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (allowed[i] && (best == values.size() || values[i] > values[best])) best = i;
  }
  return best;
}

}  // namespace

ClassifierHead::ClassifierHead(std::size_t num_classes, std::size_t embed_dim, std::uint64_t seed) {
  Rng rng(seed);
  weight = Tensor::randn({num_classes, embed_dim}, rng, 0.01, true);
  bias = Tensor::zeros({num_classes}, true);
  weight.set_name("head.weight");
  bias.set_name("head.bias");
}

Tensor ClassifierHead::logits(const Tensor& feature) const {
  const std::size_t e = weight.dim(1);
  return add(reshape(matmul(weight, reshape(feature, {e, 1})), {weight.dim(0)}), bias);
}

ContinualLearner::ContinualLearner(const ExperimentConfig& config, VisionTransformer backbone,
                                   std::shared_ptr<EmbeddingProvider> provider, std::size_t num_classes,
                                   std::size_t first_class_id)
    : config_(config),
      backbone_(std::move(backbone)),
      provider_(std::move(provider)),
      num_classes_(num_classes),
      first_class_id_(first_class_id),
      mode_(config.mode),
      pool_(config.pool.M, pool_prompt_length(config), config.backbone.embed_dim, config.pool.N, config.pool.keys_frozen,
            mix_seed(config.seed, kPoolStream)),
      head_(num_classes, config.backbone.embed_dim, mix_seed(config.seed, kHeadStream)),
      rng_(mix_seed(config.seed, kNegativeStream)) {
  config_.validate();
  if (!backbone_.frozen()) throw Error("learner needs a frozen backbone");
  if (backbone_.config().embed_dim != config.backbone.embed_dim) throw Error("backbone embed_dim does not match config");
  if (provider_ && provider_->dim() != config.backbone.embed_dim) {
    throw Error("embedding provider dimension does not match backbone embed_dim");
  }
  if (mode_ == PromptMode::kPrefixTuning) {
    general_layers_ = config.effective_general_layers();
    expert_layers_ = config.effective_expert_layers();
    if (!general_layers_.empty() && config.pool.L_g > 0) {
      Rng rng(mix_seed(config.seed, kGeneralStream));
      std::vector<double> g(general_layers_.size() * config.pool.L_g * config.backbone.embed_dim);
      for (auto& v : g) v = rng.uniform(-1.0, 1.0);
      general_prompt_ = Tensor::from_data({general_layers_.size() * config.pool.L_g, config.backbone.embed_dim},
                                          std::move(g), true);
      general_prompt_.set_name("general.prompt");
    } else {
      general_layers_.clear();
    }
  }
}

void ContinualLearner::init_frozen_keys(const std::vector<TaskSpec>& tasks) {
  if (!pool_.keys_frozen()) throw Error("init_frozen_keys called without keys_frozen");
  if (!provider_) throw Error("frozen keys need an embedding provider");
  std::vector<LanguageFeature> features;
  for (const auto& t : tasks) {
    features.push_back(provider_->encode(task_prompt_text(normalized(t.class_names)), FeatureKind::kTask, t.task_id));
  }
  pool_.assign_keys_round_robin(features);
}

std::size_t ContinualLearner::class_index(std::size_t class_id) const {
  if (class_id < first_class_id_ || class_id >= first_class_id_ + num_classes_) {
    throw Error("class id " + std::to_string(class_id) + " outside the classifier range");
  }
  return class_id - first_class_id_;
}

std::vector<Tensor> ContinualLearner::trainable() const {
  std::vector<Tensor> out = pool_.trainable();
  if (general_prompt_.defined()) out.push_back(general_prompt_);
  out.push_back(head_.weight);
  out.push_back(head_.bias);
  return out;
}

ParamCounts ContinualLearner::parameter_counts() const {
  ParamCounts c;
  c.backbone = backbone_.parameter_count();
  c.prompts = pool_.prompts().numel() + (general_prompt_.defined() ? general_prompt_.numel() : 0);
  c.keys = pool_.keys().numel();
  c.head = head_.weight.numel() + head_.bias.numel();
  return c;
}

Tensor ContinualLearner::feature(const Tensor& image, const Selection& selection) const {
  if (mode_ == PromptMode::kPromptTuning) {
    const auto out = backbone_.forward_prompt_tuning(image, gather_prompts(pool_, selection));
    return pool_feature(mode_, out.prompt_outputs);
  }
  LayerPrefixes prefixes;
  std::set<std::size_t> layers;
  const std::size_t lg = config_.pool.L_g;
  const std::size_t le = config_.pool.L_e;
  for (std::size_t i = 0; i < general_layers_.size(); ++i) {
    prefixes[general_layers_[i]] = split_prefix(slice(general_prompt_, 0, i * lg, (i + 1) * lg));
    layers.insert(general_layers_[i]);
  }
  const Tensor selected = gather_prompts(pool_, selection);
  const std::size_t per_prompt = expert_layers_.size() * le;
  for (std::size_t i = 0; i < expert_layers_.size(); ++i) {
    std::vector<Tensor> keys;
    std::vector<Tensor> values;
    for (std::size_t n = 0; n < selection.indices.size(); ++n) {
      const std::size_t base = n * per_prompt + i * le;
      auto pair = split_prefix(slice(selected, 0, base, base + le));
      keys.push_back(pair.key);
      values.push_back(pair.value);
    }
    PrefixPair pair;
    pair.key = keys.size() == 1 ? keys.front() : concat(keys, 0);
    pair.value = values.size() == 1 ? values.front() : concat(values, 0);
    prefixes[expert_layers_[i]] = std::move(pair);
    layers.insert(expert_layers_[i]);
  }
  return pool_feature(mode_, backbone_.forward_prefix_tuning(image, prefixes, layers));
}

double ContinualLearner::mean_key_cosine(const std::vector<Tensor>& queries, const LanguageFeature& task_feature) const {
  if (queries.empty()) return 0.0;
  NoGradGuard no_grad;
  double total = 0.0;
  for (const auto& q : queries) {
    const Selection sel = lookup(q, pool_);
    double s = 0.0;
    for (auto j : sel.indices) s += cosine_similarity(pool_.key(j), task_feature.vector).item();
    total += s / static_cast<double>(sel.indices.size());
  }
  return total / static_cast<double>(queries.size());
}

TaskLog ContinualLearner::train_task(const TaskLoader& loader) {
  const TaskSpec& task = loader.task();
  const std::size_t t = seen_tasks_.size();
  if (task.task_id != t) {
    throw Error("expected task " + std::to_string(t) + ", got task " + std::to_string(task.task_id));
  }
  for (const auto& prev : seen_tasks_) {
    for (auto id : task.class_ids) {
      if (prev.contains(id)) throw Error("class " + std::to_string(id) + " already belongs to task " + std::to_string(prev.task_id));
    }
  }
  for (auto id : task.class_ids) class_index(id);
  for (std::size_t i = 0; i < loader.size(); ++i) {
    if (!task.contains(loader[i].label)) {
      throw Error("task " + std::to_string(t) + " data contains class " + std::to_string(loader[i].label) +
                  " outside the task");
    }
  }

  const double lambda_task = config_.effective_lambda_task();
  const double lambda_class = config_.effective_lambda_class();
  const double lambda_key = pool_.keys_frozen() ? 0.0 : config_.loss.lambda_key;
  const bool language_active = t >= 1 && (lambda_task > 0.0 || lambda_class > 0.0);

  if (provider_) {
    task_features_.push_back(
        provider_->encode(task_prompt_text(normalized(task.class_names)), FeatureKind::kTask, t));
    for (std::size_t i = 0; i < task.class_ids.size(); ++i) {
      class_features_.emplace(task.class_ids[i], provider_->encode(class_prompt_text(normalize_text(task.class_names[i])),
                                                                   FeatureKind::kClass, task.class_ids[i]));
    }
  } else if (language_active) {
    throw Error("language guidance is enabled but no embedding provider is attached");
  }

  std::vector<std::size_t> previous_classes;
  for (const auto& prev : seen_tasks_) previous_classes.insert(previous_classes.end(), prev.class_ids.begin(), prev.class_ids.end());

  // std::vector<bool> is not contiguous, hence the array.
  std::unique_ptr<bool[]> mask_storage(new bool[num_classes_]());
  for (auto id : task.class_ids) mask_storage[class_index(id)] = true;
  const std::span<const bool> mask(mask_storage.get(), num_classes_);

  std::vector<Tensor> queries;
  queries.reserve(loader.size());
  for (std::size_t i = 0; i < loader.size(); ++i) queries.push_back(backbone_.query_feature(loader[i].image));

  TaskLog log;
  log.task_id = t;
  if (provider_) log.key_cosine_start = mean_key_cosine(queries, task_features_[t]);

  Adam adam(trainable(), {.learning_rate = config_.learning_rate});
  const std::size_t batch_size = config_.effective_batch_size();
  for (std::size_t epoch = 0; epoch < config_.epochs_per_task; ++epoch) {
    double loss_sum = 0.0;
    double ce_sum = 0.0;
    for (const auto& batch : loader.batches(epoch, batch_size)) {
      adam.zero_grad();
      const double inv_b = 1.0 / static_cast<double>(batch.size());
      // One task-level negative per optimization step, shared by the batch.
      const LanguageFeature* task_negative =
          t >= 1 && lambda_task > 0.0 ? &sample_negative_task(t, task_features_, rng_) : nullptr;
      for (auto i : batch) {
        const Sample& sample = loader[i];
        const Selection sel = lookup(queries[i], pool_);
        const Tensor x_o = feature(sample.image, sel);
        const Tensor ce = cross_entropy(head_.logits(x_o), class_index(sample.label), mask);
        Tensor loss = ce;
        if (lambda_key > 0.0) loss = add(loss, scale(key_pull_loss(queries[i], sel, pool_), lambda_key));
        if (task_negative) {
          std::vector<Tensor> keys;
          for (auto j : sel.indices) keys.push_back(pool_.key(j));
          loss = add(loss, scale(task_triplet_loss(keys, task_features_[t], *task_negative), lambda_task));
        }
        if (t >= 1 && lambda_class > 0.0) {
          const auto& negative = sample_negative_class(sample.label, previous_classes, class_features_, rng_);
          loss = add(loss, scale(class_triplet_loss(x_o, class_features_.at(sample.label), negative), lambda_class));
        }
        loss_sum += loss.item();
        ce_sum += ce.item();
        scale(loss, inv_b).backward();
      }
      adam.step();
      ++log.steps;
    }
    log.epoch_loss.push_back(loss_sum / static_cast<double>(loader.size()));
    log.epoch_ce.push_back(ce_sum / static_cast<double>(loader.size()));
  }
  if (provider_) log.key_cosine_end = mean_key_cosine(queries, task_features_[t]);
  seen_tasks_.push_back(task);
  return log;
}

std::size_t ContinualLearner::predict(const Tensor& image) const {
  if (seen_tasks_.empty()) throw Error("predict before any task was trained");
  NoGradGuard no_grad;
  std::vector<bool> seen(num_classes_, false);
  for (const auto& task : seen_tasks_)
    for (auto id : task.class_ids) seen[class_index(id)] = true;
  const Tensor q = backbone_.query_feature(image);
  const Tensor logits = head_.logits(feature(image, lookup(q, pool_)));
  return first_class_id_ + argmax_over(logits.data(), seen);
}

std::vector<double> ContinualLearner::evaluate(const std::vector<TaskLoader>& test_loaders, std::size_t threads) const {
  std::vector<std::pair<std::size_t, std::size_t>> items;
  for (std::size_t l = 0; l < test_loaders.size(); ++l) {
    if (test_loaders[l].size() == 0) {
      throw Error("missing test split for task " + std::to_string(test_loaders[l].task().task_id));
    }
    for (std::size_t i = 0; i < test_loaders[l].size(); ++i) items.emplace_back(l, i);
  }
  std::vector<char> correct(items.size(), 0);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const Sample& s = test_loaders[items[k].first][items[k].second];
      correct[k] = predict(s.image) == s.label;
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, items.size()));
  if (threads == 1) {
    work(0, items.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (items.size() + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      const std::size_t b = w * chunk;
      const std::size_t e = std::min(items.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  std::vector<double> hits(test_loaders.size(), 0.0);
  for (std::size_t k = 0; k < items.size(); ++k) hits[items[k].first] += correct[k];
  for (std::size_t l = 0; l < test_loaders.size(); ++l) hits[l] /= static_cast<double>(test_loaders[l].size());
  return hits;
}

void ContinualLearner::save_checkpoint(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  NamedTensors tensors{{"pool.prompts", pool_.prompts()},
                       {"pool.keys", pool_.keys()},
                       {"head.weight", head_.weight},
                       {"head.bias", head_.bias}};
  if (general_prompt_.defined()) tensors.emplace_back("general.prompt", general_prompt_);
  const auto index = write_tensor_archive(dir / "learner.tnsr", tensors);
  json manifest;
  manifest["archive"] = "learner.tnsr";
  manifest["mode"] = to_string(mode_);
  manifest["M"] = pool_.size();
  manifest["L_p"] = pool_.prompt_length();
  manifest["N"] = pool_.top_n();
  manifest["keys_frozen"] = pool_.keys_frozen();
  manifest["general_layers"] = general_layers_;
  manifest["expert_layers"] = expert_layers_;
  manifest["tasks_trained"] = seen_tasks_.size();
  json offsets = json::object();
  for (const auto& e : index) offsets[e.name] = e.offset;
  manifest["tensors"] = offsets;
  std::ofstream out(dir / "learner.json");
  if (!out) throw IoError((dir / "learner.json").string() + ": cannot open for writing");
  out << manifest.dump(2) << '\n';
}

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();

  Dataset dataset = config.data.kind == "dir" ? load_dataset_dir(config.data.path) : generate_synthetic(config.synthetic_spec());
  if (dataset.image_shape != Shape{config.backbone.num_channels, config.backbone.image_size, config.backbone.image_size}) {
    throw ConfigError({"backbone: image shape does not match dataset image_shape " + shape_str(dataset.image_shape)});
  }
  const auto tasks = split_tasks(dataset, config.tasks);
  const auto task_classes = dataset.class_ids();

  ExperimentReport report;
  std::optional<VisionTransformer> backbone;
  if (!config.bootstrap.checkpoint.empty()) {
    backbone = VisionTransformer::load(config.bootstrap.checkpoint);
    const auto& c = backbone->config();
    if (c.embed_dim != config.backbone.embed_dim || c.image_size != config.backbone.image_size ||
        c.patch_size != config.backbone.patch_size || c.num_channels != config.backbone.num_channels) {
      throw ConfigError({"bootstrap.checkpoint: backbone config does not match [backbone] section"});
    }
  } else {
    SyntheticSpec pretext_spec;
    pretext_spec.num_classes = config.bootstrap.classes;
    // Pretext ids sit above every continual class id.
    pretext_spec.first_class_id = 1000 + dataset.first_class_id + dataset.num_classes();
    pretext_spec.train_per_class = config.bootstrap.train_per_class;
    pretext_spec.test_per_class = std::max<std::size_t>(1, config.bootstrap.test_per_class);
    pretext_spec.channels = config.backbone.num_channels;
    pretext_spec.image_size = config.backbone.image_size;
    pretext_spec.noise_std = config.data.noise_std;
    pretext_spec.seed = mix_seed(config.data.seed, kPretextStream);
    const Dataset pretext = generate_synthetic(pretext_spec);
    BootstrapOptions bo;
    bo.epochs = config.bootstrap.epochs;
    bo.batch_size = config.bootstrap.batch_size;
    bo.learning_rate = config.bootstrap.learning_rate;
    bo.seed = mix_seed(config.seed, kBootstrapStream);
    auto result = bootstrap_pretrain(config.backbone, pretext, task_classes, bo);
    report.bootstrap_val_accuracy = result.val_accuracy;
    backbone = std::move(result.backbone);
  }
  report.backbone_checksum_start = backbone->checksum();

  std::shared_ptr<EmbeddingProvider> provider;
  if (config.provider.kind == "file") {
    provider = std::make_shared<FileProvider>(config.provider.path, config.backbone.embed_dim, config.provider.projection_seed);
  } else {
    provider = std::make_shared<SyntheticProvider>(config.backbone.embed_dim, config.provider.seed);
  }

  ContinualLearner learner(config, *backbone, provider, dataset.num_classes(), dataset.first_class_id);
  if (config.pool.keys_frozen) learner.init_frozen_keys(tasks);

  const std::uint64_t loader_seed = mix_seed(config.seed, kLoaderStream);
  std::vector<TaskLoader> test_loaders;
  for (const auto& task : tasks) {
    const TaskLoader train(dataset, task, Split::kTrain, loader_seed);
    report.task_logs.push_back(learner.train_task(train));
    test_loaders.emplace_back(dataset, task, Split::kTest, loader_seed);
    const std::size_t calls_before = provider->call_count();
    report.accuracy.append_row(learner.evaluate(test_loaders, options.eval_threads));
    report.provider_calls_during_eval += provider->call_count() - calls_before;
  }

  for (std::size_t t = 0; t < report.accuracy.num_rows(); ++t) {
    report.avg_accuracy.push_back(average_accuracy(report.accuracy, t));
    report.forgetting.push_back(forgetting(report.accuracy, t));
  }
  report.config = config.to_json();
  report.seed = config.seed;
  report.dataset_signature = config.dataset_signature();
  report.param_counts = learner.parameter_counts();
  report.backbone_checksum_end = learner.backbone().checksum();

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (options.write_outputs) {
    const std::filesystem::path out = config.output_dir;
    std::filesystem::create_directories(out);
    learner.backbone().save(out / "checkpoint");
    learner.save_checkpoint(out / "checkpoint");
    write_report(report, out / "report.json");
    write_metrics_csv(report, out / "metrics.csv");
    std::ofstream timing(out / "timing.json");
    timing << json{{"wall_time_s", wall}}.dump(2) << '\n';
  }
  report.wall_time_s = wall;
  return report;
}

}  // namespace lgcl
