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

#include "lgcl/backbone.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "lgcl/adam.hpp"
#include "lgcl/errors.hpp"
#include "lgcl/ops.hpp"
#include "lgcl/random.hpp"

namespace lgcl {

using json = nlohmann::json;

std::vector<std::string> ViTConfig::problems() const {
  std::vector<std::string> out;
  if (image_size == 0 || patch_size == 0 || embed_dim == 0 || num_layers == 0 || num_heads == 0 || mlp_ratio == 0 ||
      num_channels == 0) {
    out.emplace_back("all sizes must be positive");
    return out;
  }
  if (image_size % patch_size != 0) out.emplace_back("image_size must be divisible by patch_size");
  if (embed_dim % num_heads != 0) out.emplace_back("embed_dim must be divisible by num_heads");
  return out;
}

PrefixPair split_prefix(const Tensor& prompt) {
  if (prompt.rank() != 2) throw ShapeError("prefix prompt must be [L, E], got " + shape_str(prompt.shape()));
  const std::size_t len = prompt.dim(0);
  if (len % 2 != 0) throw ShapeError("prefix prompt length must be even, got " + std::to_string(len));
  return {slice(prompt, 0, 0, len / 2), slice(prompt, 0, len / 2, len)};
}

namespace {

Tensor init_weight(Rng& rng, std::size_t in, std::size_t out) {
  return Tensor::randn({in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in)), true);
}

Tensor row(const Tensor& t) { return reshape(t, {1, t.numel()}); }

}  // namespace

VisionTransformer::VisionTransformer(const ViTConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
  if (auto p = config_.problems(); !p.empty()) throw Error("invalid ViT config: " + p.front());
  Rng rng(mix_seed(seed, 0x766974ULL));
  const std::size_t e = config_.embed_dim;
  const std::size_t hidden = e * config_.mlp_ratio;
  patch_weight_ = init_weight(rng, config_.patch_dim(), e);
  patch_bias_ = Tensor::zeros({e}, true);
  cls_ = Tensor::randn({1, e}, rng, 0.02, true);
  pos_ = Tensor::randn({1 + config_.num_patches(), e}, rng, 0.02, true);
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    Block b;
    b.ln1_gamma = Tensor::full({e}, 1.0, true);
    b.ln1_beta = Tensor::zeros({e}, true);
    b.qkv_weight = init_weight(rng, e, 3 * e);
    b.qkv_bias = Tensor::zeros({3 * e}, true);
    b.out_weight = init_weight(rng, e, e);
    b.out_bias = Tensor::zeros({e}, true);
    b.ln2_gamma = Tensor::full({e}, 1.0, true);
    b.ln2_beta = Tensor::zeros({e}, true);
    b.fc1_weight = init_weight(rng, e, hidden);
    b.fc1_bias = Tensor::zeros({hidden}, true);
    b.fc2_weight = init_weight(rng, hidden, e);
    b.fc2_bias = Tensor::zeros({e}, true);
    blocks_.push_back(std::move(b));
  }
  ln_gamma_ = Tensor::full({e}, 1.0, true);
  ln_beta_ = Tensor::zeros({e}, true);
  for (auto& [name, t] : named_parameters()) t.set_name("backbone." + name);
}

NamedTensors VisionTransformer::named_parameters() const {
  NamedTensors out{{"patch.weight", patch_weight_}, {"patch.bias", patch_bias_}, {"cls", cls_}, {"pos", pos_}};
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const auto& b = blocks_[l];
    const std::string p = "blocks." + std::to_string(l) + ".";
    out.emplace_back(p + "ln1.gamma", b.ln1_gamma);
    out.emplace_back(p + "ln1.beta", b.ln1_beta);
    out.emplace_back(p + "attn.qkv.weight", b.qkv_weight);
    out.emplace_back(p + "attn.qkv.bias", b.qkv_bias);
    out.emplace_back(p + "attn.out.weight", b.out_weight);
    out.emplace_back(p + "attn.out.bias", b.out_bias);
    out.emplace_back(p + "ln2.gamma", b.ln2_gamma);
    out.emplace_back(p + "ln2.beta", b.ln2_beta);
    out.emplace_back(p + "mlp.fc1.weight", b.fc1_weight);
    out.emplace_back(p + "mlp.fc1.bias", b.fc1_bias);
    out.emplace_back(p + "mlp.fc2.weight", b.fc2_weight);
    out.emplace_back(p + "mlp.fc2.bias", b.fc2_bias);
  }
  out.emplace_back("ln.gamma", ln_gamma_);
  out.emplace_back("ln.beta", ln_beta_);
  return out;
}

std::vector<Tensor> VisionTransformer::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t VisionTransformer::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += t.numel();
  return n;
}

std::uint64_t VisionTransformer::checksum() const {
  std::uint64_t h = fnv1a("");
  for (const auto& t : parameters()) {
    const auto d = t.data();
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double)), h);
  }
  return h;
}

void VisionTransformer::freeze() {
  for (auto t : parameters()) {
    round_to_f32(t);
    t.set_requires_grad(false);
  }
  frozen_ = true;
}

void VisionTransformer::check_image(const Tensor& image) const {
  const Shape want{config_.num_channels, config_.image_size, config_.image_size};
  if (!image.defined() || image.shape() != want) {
    throw ShapeError("backbone: image shape " + (image.defined() ? shape_str(image.shape()) : std::string("<undefined>")) +
                     " does not match config " + shape_str(want));
  }
}

Tensor VisionTransformer::patchify(const Tensor& image) const {
  check_image(image);
  const std::size_t c = config_.num_channels;
  const std::size_t s = config_.image_size;
  const std::size_t p = config_.patch_size;
  const std::size_t grid = s / p;
  const auto px = image.data();
  std::vector<double> out(config_.num_patches() * config_.patch_dim());
  std::size_t k = 0;
  for (std::size_t gy = 0; gy < grid; ++gy)
    for (std::size_t gx = 0; gx < grid; ++gx)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < p; ++y)
          for (std::size_t x = 0; x < p; ++x) out[k++] = px[(ch * s + gy * p + y) * s + gx * p + x];
  return Tensor::from_data({config_.num_patches(), config_.patch_dim()}, std::move(out));
}

Tensor VisionTransformer::embed_patches(const Tensor& image) const {
  const Tensor emb = add_row_vector(matmul(patchify(image), patch_weight_), patch_bias_);
  return add(emb, slice(pos_, 0, 1, 1 + config_.num_patches()));
}

Tensor VisionTransformer::cls_token() const { return add(cls_, slice(pos_, 0, 0, 1)); }

Tensor VisionTransformer::attention(const Block& b, const Tensor& x, const PrefixPair* prefix,
                                    AttentionTrace* trace) const {
  const std::size_t e = config_.embed_dim;
  const std::size_t heads = config_.num_heads;
  const std::size_t dh = e / heads;
  const Tensor qkv = add_row_vector(matmul(x, b.qkv_weight), b.qkv_bias);
  const Tensor q = slice(qkv, 1, 0, e);
  Tensor k = slice(qkv, 1, e, 2 * e);
  Tensor v = slice(qkv, 1, 2 * e, 3 * e);
  if (prefix) {
    k = concat({prefix->key, k}, 0);
    v = concat({prefix->value, v}, 0);
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> head_out;
  head_out.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = slice(q, 1, h * dh, (h + 1) * dh);
    const Tensor kh = slice(k, 1, h * dh, (h + 1) * dh);
    const Tensor vh = slice(v, 1, h * dh, (h + 1) * dh);
    const Tensor weights = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt), 1);
    if (trace) trace->weights.push_back(weights);
    head_out.push_back(matmul(weights, vh));
  }
  const Tensor merged = heads == 1 ? head_out.front() : concat(head_out, 1);
  return add_row_vector(matmul(merged, b.out_weight), b.out_bias);
}

Tensor VisionTransformer::encode(Tensor x, const LayerPrefixes* prefixes, AttentionTrace* trace) const {
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Block& b = blocks_[l];
    const PrefixPair* prefix = nullptr;
    if (prefixes) {
      if (auto it = prefixes->find(l); it != prefixes->end()) prefix = &it->second;
    }
    x = add(x, attention(b, layer_norm(x, b.ln1_gamma, b.ln1_beta), prefix, trace));
    Tensor h = layer_norm(x, b.ln2_gamma, b.ln2_beta);
    h = gelu(add_row_vector(matmul(h, b.fc1_weight), b.fc1_bias));
    h = add_row_vector(matmul(h, b.fc2_weight), b.fc2_bias);
    x = add(x, h);
  }
  return layer_norm(x, ln_gamma_, ln_beta_);
}

Tensor VisionTransformer::forward_cls(const Tensor& image, AttentionTrace* trace) const {
  const Tensor tokens = concat({cls_token(), embed_patches(image)}, 0);
  return reshape(slice(encode(tokens, nullptr, trace), 0, 0, 1), {config_.embed_dim});
}

Tensor VisionTransformer::query_feature(const Tensor& image) const {
  if (!frozen_) throw Error("query_feature requires a frozen backbone");
  NoGradGuard no_grad;
  return forward_cls(image);
}

PromptTuningOutput VisionTransformer::forward_prompt_tuning(const Tensor& image, const Tensor& prompts,
                                                            AttentionTrace* trace) const {
  check_image(image);
  std::size_t n = 0;
  std::vector<Tensor> parts{cls_token()};
  if (prompts.defined()) {
    if (prompts.rank() != 2 || prompts.dim(1) != config_.embed_dim) {
      throw ShapeError("forward_prompt_tuning: prompts must be [n, " + std::to_string(config_.embed_dim) + "], got " +
                       shape_str(prompts.shape()));
    }
    n = prompts.dim(0);
    parts.push_back(prompts);
  }
  parts.push_back(embed_patches(image));
  PromptTuningOutput out;
  out.tokens = encode(concat(parts, 0), nullptr, trace);
  if (n > 0) out.prompt_outputs = slice(out.tokens, 0, 1, 1 + n);
  return out;
}

Tensor VisionTransformer::forward_prefix_tuning(const Tensor& image, const LayerPrefixes& prefixes,
                                                const std::set<std::size_t>& layers, AttentionTrace* trace) const {
  check_image(image);
  for (auto l : layers) {
    if (l >= config_.num_layers) {
      throw Error("forward_prefix_tuning: layer " + std::to_string(l) + " does not exist (num_layers " +
                  std::to_string(config_.num_layers) + ")");
    }
    if (!prefixes.contains(l)) throw Error("forward_prefix_tuning: no prefix for configured layer " + std::to_string(l));
  }
  for (const auto& [l, pair] : prefixes) {
    if (!layers.contains(l)) throw Error("forward_prefix_tuning: prefix given for unconfigured layer " + std::to_string(l));
    if (!pair.key.defined() || !pair.value.defined() || pair.key.rank() != 2 || pair.value.rank() != 2 ||
        pair.key.dim(1) != config_.embed_dim || pair.value.dim(1) != config_.embed_dim ||
        pair.key.dim(0) != pair.value.dim(0)) {
      throw ShapeError("forward_prefix_tuning: layer " + std::to_string(l) + " prefix must be two [rows, " +
                       std::to_string(config_.embed_dim) + "] tensors of equal rows");
    }
  }
  const Tensor tokens = concat({cls_token(), embed_patches(image)}, 0);
  return reshape(slice(encode(tokens, &prefixes, trace), 0, 0, 1), {config_.embed_dim});
}

void VisionTransformer::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  const auto index = write_tensor_archive(dir / "backbone.tnsr", named_parameters());
  json manifest;
  manifest["config"] = {{"image_size", config_.image_size}, {"patch_size", config_.patch_size},
                        {"embed_dim", config_.embed_dim},   {"num_layers", config_.num_layers},
                        {"num_heads", config_.num_heads},   {"mlp_ratio", config_.mlp_ratio},
                        {"num_channels", config_.num_channels}};
  manifest["seed"] = seed_;
  manifest["frozen"] = frozen_;
  manifest["archive"] = "backbone.tnsr";
  json tensors = json::object();
  for (const auto& e : index) tensors[e.name] = e.offset;
  manifest["tensors"] = tensors;
  std::ofstream out(dir / "backbone.json");
  if (!out) throw IoError((dir / "backbone.json").string() + ": cannot open for writing");
  out << manifest.dump(2) << '\n';
}

VisionTransformer VisionTransformer::load(const std::filesystem::path& dir) {
  const auto path = dir / "backbone.json";
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open");
  try {
    const json m = json::parse(in);
    const json& c = m.at("config");
    ViTConfig cfg;
    cfg.image_size = c.at("image_size");
    cfg.patch_size = c.at("patch_size");
    cfg.embed_dim = c.at("embed_dim");
    cfg.num_layers = c.at("num_layers");
    cfg.num_heads = c.at("num_heads");
    cfg.mlp_ratio = c.at("mlp_ratio");
    cfg.num_channels = c.at("num_channels");
    VisionTransformer vit(cfg, m.at("seed").get<std::uint64_t>());
    std::vector<ArchiveEntry> index;
    for (auto& [name, t] : vit.named_parameters()) index.push_back({name, m.at("tensors").at(name).get<std::uint64_t>()});
    const auto loaded = read_tensor_archive(dir / m.at("archive").get<std::string>(), index);
    auto params = vit.named_parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& dst = params[i].second;
      const auto& src = loaded[i].second;
      if (src.shape() != dst.shape()) {
        throw IoError(path.string() + ": tensor '" + params[i].first + "' has shape " + shape_str(src.shape()) +
                      ", expected " + shape_str(dst.shape()));
      }
      std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
    }
    vit.freeze();
    return vit;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

BootstrapResult bootstrap_pretrain(const ViTConfig& config, const Dataset& pretext,
                                   const std::vector<std::size_t>& task_class_ids, const BootstrapOptions& options) {
  for (auto id : pretext.class_ids()) {
    if (std::find(task_class_ids.begin(), task_class_ids.end(), id) != task_class_ids.end()) {
      throw Error("bootstrap: pretext class " + std::to_string(id) + " is also a continual-task class");
    }
  }
  if (pretext.train.empty()) throw Error("bootstrap: empty pretext training set");
  VisionTransformer vit(config, options.seed);
  Rng rng(mix_seed(options.seed, 0x626f6f74ULL));
  const std::size_t k = pretext.num_classes();
  Tensor head_w = Tensor::randn({config.embed_dim, k}, rng, 1.0 / std::sqrt(static_cast<double>(config.embed_dim)), true);
  Tensor head_b = Tensor::zeros({k}, true);
  head_w.set_name("bootstrap.head.weight");
  head_b.set_name("bootstrap.head.bias");
  auto params = vit.parameters();
  params.push_back(head_w);
  params.push_back(head_b);
  Adam adam(params, {.learning_rate = options.learning_rate});

  auto logits_of = [&](const Sample& s) {
    const Tensor cls = vit.forward_cls(s.image);
    return reshape(add_row_vector(matmul(row(cls), head_w), head_b), {k});
  };
  auto argmax = [](const Tensor& t) {
    const auto d = t.data();
    return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
  };

  std::vector<std::size_t> order(pretext.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      adam.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const Sample& s = pretext.train[order[i]];
        scale(cross_entropy(logits_of(s), s.label - pretext.first_class_id), 1.0 / static_cast<double>(end - start))
            .backward();
      }
      adam.step();
    }
  }

  auto accuracy = [&](const std::vector<Sample>& samples) {
    if (samples.empty()) return 0.0;
    NoGradGuard no_grad;
    std::size_t hit = 0;
    for (const auto& s : samples) hit += argmax(logits_of(s)) == s.label - pretext.first_class_id;
    return static_cast<double>(hit) / static_cast<double>(samples.size());
  };
  vit.freeze();
  const double train_acc = accuracy(pretext.train);
  const double val_acc = accuracy(pretext.test);
  return BootstrapResult{std::move(vit), train_acc, val_acc};
}

}  // namespace lgcl
