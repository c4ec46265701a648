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

#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "lgcl/backbone.hpp"
#include "lgcl/language.hpp"
#include "lgcl/ops.hpp"

namespace lgcl::testing {

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double stddev = 1.0) {
  return Tensor::randn(shape, rng, stddev, true);
}

// Entries bounded away from zero, for denominators.
Tensor random_nonzero(const Shape& shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = (rng.below(2) ? 1.0 : -1.0) * rng.uniform(0.5, 2.0);
  return Tensor::from_data(shape, std::move(v), true);
}

Tensor fixed_weights(const Shape& shape, Rng& rng) { return Tensor::randn(shape, rng, 1.0, false); }

// Scalar readout with random fixed weights so every output entry matters.
Tensor readout(const Tensor& out, Rng& rng) {
  if (out.rank() == 0) return scale(out, rng.uniform(0.5, 1.5));
  return dot(out, fixed_weights(out.shape(), rng));
}

std::size_t small(Rng& rng, std::size_t lo = 1, std::size_t hi = 4) { return lo + rng.below(hi - lo + 1); }

LanguageFeature random_feature(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double n = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    n += x * x;
  }
  for (auto& x : v) x /= std::sqrt(n);
  return {Tensor::vector(std::move(v)), FeatureKind::kClass, 0, ""};
}

// Builds one gradcheck case: fills `inputs` and returns the loss closure.
using CaseBuilder = std::function<std::function<Tensor()>(Rng& rng, std::vector<Tensor>& inputs)>;

SuiteEntry run_case(const std::string& name, std::size_t cases, std::uint64_t seed, const CaseBuilder& build) {
  SuiteEntry entry{name, cases, 0.0, ""};
  for (std::size_t c = 0; c < cases; ++c) {
    Rng rng(mix_seed(seed, fnv1a(name) + c));
    std::vector<Tensor> inputs;
    auto loss = build(rng, inputs);
    const GradCheck g = check_gradients(loss, inputs);
    if (g.max_rel_err >= entry.max_rel_err) {
      entry.max_rel_err = g.max_rel_err;
      entry.worst = "case " + std::to_string(c) + " " + g.worst;
    }
  }
  return entry;
}

}  // namespace

GradCheck check_gradients(const std::function<Tensor()>& loss, const std::vector<Tensor>& inputs, double h,
                          double floor) {
  for (auto t : inputs) t.zero_grad();
  loss().backward();
  GradCheck result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor x = inputs[k];
    const std::vector<double> analytic(x.grad().begin(), x.grad().end());
    auto data = x.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      double plus = 0.0;
      double minus = 0.0;
      {
        NoGradGuard no_grad;
        data[i] = saved + h;
        plus = loss().item();
        data[i] = saved - h;
        minus = loss().item();
      }
      data[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (rel >= result.max_rel_err) {
        result.max_rel_err = rel;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "input %zu[%zu]: analytic %.10g numeric %.10g", k, i, analytic[i], numeric);
        result.worst = buf;
      }
    }
  }
  return result;
}

std::vector<SuiteEntry> numcore_gradient_suite(std::size_t cases, std::uint64_t seed) {
  std::vector<std::pair<std::string, CaseBuilder>> builders;
  auto binary = [&](const std::string& name, Tensor (*op)(const Tensor&, const Tensor&), bool nonzero_rhs) {
    builders.emplace_back(name, [op, nonzero_rhs](Rng& rng, std::vector<Tensor>& in) {
      const Shape s{small(rng), small(rng)};
      Tensor a = random_tensor(s, rng);
      Tensor b = nonzero_rhs ? random_nonzero(s, rng) : random_tensor(s, rng);
      in = {a, b};
      Tensor w = fixed_weights(s, rng);
      return std::function<Tensor()>([=] { return dot(op(a, b), w); });
    });
  };
  binary("add", &add, false);
  binary("sub", &sub, false);
  binary("mul", &mul, false);
  binary("div", &div, true);
  builders.emplace_back("add(scalar)", [](Rng& rng, std::vector<Tensor>& in) {
    const Shape s{small(rng), small(rng)};
    Tensor a = random_tensor(s, rng);
    Tensor b = random_tensor({}, rng);
    in = {a, b};
    Tensor w = fixed_weights(s, rng);
    return std::function<Tensor()>([=] { return dot(add(b, a), w); });
  });
  builders.emplace_back("mul(scalar)", [](Rng& rng, std::vector<Tensor>& in) {
    const Shape s{small(rng), small(rng)};
    Tensor a = random_tensor(s, rng);
    Tensor b = random_tensor({}, rng);
    in = {a, b};
    Tensor w = fixed_weights(s, rng);
    return std::function<Tensor()>([=] { return dot(mul(a, b), w); });
  });
  builders.emplace_back("div(scalar)", [](Rng& rng, std::vector<Tensor>& in) {
    const Shape s{small(rng), small(rng)};
    Tensor a = random_tensor(s, rng);
    Tensor b = random_nonzero({}, rng);
    in = {a, b};
    Tensor w = fixed_weights(s, rng);
    return std::function<Tensor()>([=] { return dot(div(a, b), w); });
  });
  builders.emplace_back("neg", [](Rng& rng, std::vector<Tensor>& in) {
    Tensor a = random_tensor({small(rng), small(rng)}, rng);
    in = {a};
    Tensor w = fixed_weights(a.shape(), rng);
    return std::function<Tensor()>([=] { return dot(neg(a), w); });
  });
  builders.emplace_back("scale", [](Rng& rng, std::vector<Tensor>& in) {
    Tensor a = random_tensor({small(rng), small(rng)}, rng);
    in = {a};
    const double f = rng.uniform(-2.0, 2.0);
    Tensor w = fixed_weights(a.shape(), rng);
    return std::function<Tensor()>([=] { return dot(scale(a, f), w); });
  });
  builders.emplace_back("add_scalar", [](Rng& rng, std::vector<Tensor>& in) {
    Tensor a = random_tensor({small(rng), small(rng)}, rng);
    in = {a};
    const double v = rng.uniform(-2.0, 2.0);
    Tensor w = fixed_weights(a.shape(), rng);
    return std::function<Tensor()>([=] { return dot(mul(add_scalar(a, v), a), w); });
  });
  builders.emplace_back("matmul", [](Rng& rng, std::vector<Tensor>& in) {
    const std::size_t n = small(rng), k = small(rng), m = small(rng);
    Tensor a = random_tensor({n, k}, rng);
    Tensor b = random_tensor({k, m}, rng);
    in = {a, b};
    Tensor w = fixed_weights({n, m}, rng);
    return std::function<Tensor()>([=] { return dot(matmul(a, b), w); });
  });
  builders.emplace_back("transpose", [](Rng& rng, std::vector<Tensor>& in) {
    Tensor a = random_tensor({small(rng), small(rng)}, rng);
    in = {a};
    Tensor w = fixed_weights({a.dim(1), a.dim(0)}, rng);
    return std::function<Tensor()>([=] { return dot(transpose(a), w); });
  });
  builders.emplace_back("reshape", [](Rng& rng, std::vector<Tensor>& in) {
    const std::size_t r = small(rng), c = small(rng);
    Tensor a = random_tensor({r, c}, rng);
    in = {a};
    Tensor w = fixed_weights({c, r}, rng);
    return std::function<Tensor()>([=] { return dot(reshape(a, {c, r}), w); });
  });
  builders.emplace_back("concat", [](Rng& rng, std::vector<Tensor>& in) {
    const std::size_t axis = rng.below(2);
    const std::size_t parts = small(rng, 1, 3);
    const std::size_t fixed = small(rng);
    std::size_t total = 0;
    for (std::size_t p = 0; p < parts; ++p) {
      const std::size_t len = small(rng);
      total += len;
      in.push_back(random_tensor(axis == 0 ? Shape{len, fixed} : Shape{fixed, len}, rng));
    }
    Tensor w = fixed_weights(axis == 0 ? Shape{total, fixed} : Shape{fixed, total}, rng);
    std::vector<Tensor> copy = in;
    return std::function<Tensor()>([=] { return dot(concat(copy, axis), w); });
  });
  builders.emplace_back("slice", [](Rng& rng, std::vector<Tensor>& in) {
    const Shape s{small(rng, 2, 5), small(rng, 2, 5), small(rng, 1, 3)};
    Tensor a = random_tensor(s, rng);
    in = {a};
    const std::size_t axis = rng.below(3);
    const std::size_t begin = rng.below(s[axis]);
    const std::size_t end = begin + 1 + rng.below(s[axis] - begin);
    Shape out = s;
    out[axis] = end - begin;
    Tensor w = fixed_weights(out, rng);
    return std::function<Tensor()>([=] { return dot(slice(a, axis, begin, end), w); });
  });
  builders.emplace_back("softmax", [](Rng& rng, std::vector<Tensor>& in) {
    const Shape s{small(rng), small(rng), small(rng)};
    Tensor a = random_tensor(s, rng);
    in = {a};
    const std::size_t axis = rng.below(3);
    Tensor w = fixed_weights(s, rng);
    return std::function<Tensor()>([=] { return dot(softmax(a, axis), w); });
  });
  builders.emplace_back("layer_norm", [](Rng& rng, std::vector<Tensor>& in) {
    const std::size_t d = small(rng, 2, 6);
    Tensor x = random_tensor({small(rng), d}, rng);
    Tensor g = random_tensor({d}, rng);
    Tensor b = random_tensor({d}, rng);
    in = {x, g, b};
    Tensor w = fixed_weights(x.shape(), rng);
    return std::function<Tensor()>([=] { return dot(layer_norm(x, g, b), w); });
  });
  builders.emplace_back("gelu", [](Rng& rng, std::vector<Tensor>& in) {
    Tensor a = random_tensor({small(rng), small(rng)}, rng, 2.0);
    in = {a};
    Tensor w = fixed_weights(a.shape(), rng);
    return std::function<Tensor()>([=] { return dot(gelu(a), w); });
  });
  builders.emplace_back("mean", [](Rng& rng, std::vector<Tensor>& in) {
    const Shape s{small(rng), small(rng), small(rng)};
    Tensor a = random_tensor(s, rng);
    in = {a};
    const std::size_t axis = rng.below(3);
    Shape out;
    for (std::size_t i = 0; i < 3; ++i)
      if (i != axis) out.push_back(s[i]);
    Tensor w = fixed_weights(out, rng);
    return std::function<Tensor()>([=] { return dot(mean(a, axis), w); });
  });
  builders.emplace_back("mean_all", [](Rng& rng, std::vector<Tensor>& in) {
    Tensor a = random_tensor({small(rng), small(rng)}, rng);
    in = {a};
    return std::function<Tensor()>([=] { return mean_all(mul(a, a)); });
  });
  builders.emplace_back("sum_all", [](Rng& rng, std::vector<Tensor>& in) {
    Tensor a = random_tensor({small(rng), small(rng)}, rng);
    in = {a};
    return std::function<Tensor()>([=] { return sum_all(mul(a, a)); });
  });
  builders.emplace_back("l2_norm", [](Rng& rng, std::vector<Tensor>& in) {
    Tensor a = random_tensor({small(rng), small(rng)}, rng);
    in = {a};
    return std::function<Tensor()>([=] { return l2_norm(a); });
  });
  builders.emplace_back("dot", [](Rng& rng, std::vector<Tensor>& in) {
    const Shape s{small(rng), small(rng)};
    Tensor a = random_tensor(s, rng);
    Tensor b = random_tensor(s, rng);
    in = {a, b};
    return std::function<Tensor()>([=] { return dot(a, b); });
  });
  builders.emplace_back("add_row_vector", [](Rng& rng, std::vector<Tensor>& in) {
    const std::size_t d = small(rng);
    Tensor x = random_tensor({small(rng), d}, rng);
    Tensor v = random_tensor({d}, rng);
    in = {x, v};
    Tensor w = fixed_weights(x.shape(), rng);
    return std::function<Tensor()>([=] { return dot(add_row_vector(x, v), w); });
  });
  builders.emplace_back("cross_entropy", [](Rng& rng, std::vector<Tensor>& in) {
    const std::size_t c = small(rng, 2, 6);
    Tensor logits = random_tensor({c}, rng, 2.0);
    in = {logits};
    const std::size_t label = rng.below(c);
    return std::function<Tensor()>([=] { return cross_entropy(logits, label); });
  });
  builders.emplace_back("cross_entropy(masked)", [](Rng& rng, std::vector<Tensor>& in) {
    const std::size_t c = small(rng, 2, 6);
    Tensor logits = random_tensor({c}, rng, 2.0);
    in = {logits};
    const std::size_t label = rng.below(c);
    auto mask = std::make_shared<std::vector<char>>(c, 0);
    for (auto& m : *mask) m = rng.below(2);
    (*mask)[label] = 1;
    return std::function<Tensor()>([=] {
      bool flags[8] = {};
      for (std::size_t i = 0; i < c; ++i) flags[i] = (*mask)[i];
      return cross_entropy(logits, label, std::span<const bool>(flags, c));
    });
  });

  std::vector<SuiteEntry> out;
  for (const auto& [name, build] : builders) out.push_back(run_case(name, cases, seed, build));
  return out;
}

std::vector<SuiteEntry> triplet_gradient_suite(std::size_t cases, std::uint64_t seed) {
  std::vector<SuiteEntry> out;
  out.push_back(run_case("task_triplet_loss", cases, seed, [](Rng& rng, std::vector<Tensor>& in) {
    const std::size_t e = small(rng, 2, 16);
    const std::size_t n = small(rng, 1, 5);
    for (std::size_t i = 0; i < n; ++i) in.push_back(random_tensor({e}, rng));
    const auto pos = random_feature(rng, e);
    const auto neg = random_feature(rng, e);
    std::vector<Tensor> keys = in;
    return std::function<Tensor()>([=] { return task_triplet_loss(keys, pos, neg); });
  }));
  out.push_back(run_case("class_triplet_loss", cases, seed, [](Rng& rng, std::vector<Tensor>& in) {
    const std::size_t e = small(rng, 2, 16);
    Tensor x = random_tensor({e}, rng);
    in = {x};
    const auto pos = random_feature(rng, e);
    const auto neg = random_feature(rng, e);
    return std::function<Tensor()>([=] { return class_triplet_loss(x, pos, neg); });
  }));
  return out;
}

ViTConfig tiny_vit() {
  ViTConfig c;
  c.image_size = 8;
  c.patch_size = 4;
  c.embed_dim = 8;
  c.num_layers = 2;
  c.num_heads = 2;
  c.mlp_ratio = 2;
  c.num_channels = 3;
  return c;
}

std::vector<SuiteEntry> backbone_gradient_suite(std::size_t cases, std::uint64_t seed) {
  std::vector<SuiteEntry> out;
  out.push_back(run_case("forward_prompt_tuning", cases, seed, [](Rng& rng, std::vector<Tensor>& in) {
    auto vit = std::make_shared<VisionTransformer>(tiny_vit(), rng.next_u64());
    vit->freeze();
    const auto& c = vit->config();
    std::vector<double> px(c.num_channels * c.image_size * c.image_size);
    for (auto& v : px) v = rng.uniform();
    const Tensor image = Tensor::from_data({c.num_channels, c.image_size, c.image_size}, std::move(px));
    Tensor prompts = random_tensor({small(rng, 1, 4), c.embed_dim}, rng, 0.5);
    in = {prompts};
    Tensor w_tokens = fixed_weights({1 + prompts.dim(0) + c.num_patches(), c.embed_dim}, rng);
    Tensor w_feature = fixed_weights({c.embed_dim}, rng);
    return std::function<Tensor()>([=] {
      const auto o = vit->forward_prompt_tuning(image, prompts);
      return add(dot(o.tokens, w_tokens), dot(pool_feature(PromptMode::kPromptTuning, o.prompt_outputs), w_feature));
    });
  }));
  out.push_back(run_case("forward_prefix_tuning", cases, seed, [](Rng& rng, std::vector<Tensor>& in) {
    auto vit = std::make_shared<VisionTransformer>(tiny_vit(), rng.next_u64());
    vit->freeze();
    const auto& c = vit->config();
    std::vector<double> px(c.num_channels * c.image_size * c.image_size);
    for (auto& v : px) v = rng.uniform();
    const Tensor image = Tensor::from_data({c.num_channels, c.image_size, c.image_size}, std::move(px));
    std::set<std::size_t> layers;
    for (std::size_t l = 0; l < c.num_layers; ++l)
      if (rng.below(2) || l == 0) layers.insert(l);
    std::vector<std::size_t> order(layers.begin(), layers.end());
    for (std::size_t i = 0; i < order.size(); ++i) in.push_back(random_tensor({2 * small(rng, 1, 3), c.embed_dim}, rng, 0.5));
    std::vector<Tensor> prompts = in;
    Tensor w = fixed_weights({c.embed_dim}, rng);
    return std::function<Tensor()>([=] {
      LayerPrefixes prefixes;
      for (std::size_t i = 0; i < order.size(); ++i) prefixes[order[i]] = split_prefix(prompts[i]);
      return dot(vit->forward_prefix_tuning(image, prefixes, layers), w);
    });
  }));
  return out;
}

std::vector<std::size_t> brute_force_top_n(const std::vector<double>& query, const std::vector<std::vector<double>>& keys,
                                           std::size_t n) {
  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  const double qn = norm(query);
  std::vector<double> sim;
  for (const auto& k : keys) {
    double d = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) d += query[i] * k[i];
    sim.push_back(d / (qn * norm(k)));
  }
  // Repeated scan for the best unpicked key; strict '>' keeps the lower index on ties.
  std::vector<bool> taken(keys.size(), false);
  std::vector<std::size_t> picked;
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t best = keys.size();
    for (std::size_t j = 0; j < keys.size(); ++j) {
      if (!taken[j] && (best == keys.size() || sim[j] > sim[best])) best = j;
    }
    taken[best] = true;
    picked.push_back(best);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

double brute_force_average_accuracy(const std::vector<std::vector<double>>& e, std::size_t t) {
  double s = 0.0;
  for (std::size_t k = 0; k <= t; ++k) s += e[t][k];
  return s / static_cast<double>(t + 1);
}

std::optional<double> brute_force_forgetting(const std::vector<std::vector<double>>& e, std::size_t t) {
  if (t == 0) return std::nullopt;
  double s = 0.0;
  for (std::size_t k = 0; k < t; ++k) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t tp = k; tp <= t - 1; ++tp) best = std::max(best, e[tp][k]);
    s += std::max(0.0, best - e[t][k]);
  }
  return s / static_cast<double>(t);
}

std::vector<std::vector<double>> random_accuracy_matrix(Rng& rng, std::size_t rows) {
  std::vector<std::vector<double>> e(rows);
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t k = 0; k <= t; ++k) {
      // Coarse grid so that repeated values and ties in the max are common.
      e[t].push_back(static_cast<double>(rng.below(21)) / 20.0);
    }
  }
  return e;
}

ExperimentConfig tiny_experiment(const std::string& output_dir) {
  ExperimentConfig c;
  c.name = "tiny";
  c.mode = PromptMode::kPrefixTuning;
  c.seed = 3;
  c.tasks = 2;
  c.epochs_per_task = 2;
  c.batch_size = 8;
  c.output_dir = output_dir;
  c.pool.M = 4;
  c.pool.N = 1;
  c.pool.L_e = 2;
  c.pool.L_g = 2;
  c.pool.general_layers = {0};
  c.pool.expert_layers = {1};
  c.backbone = tiny_vit();
  c.bootstrap.classes = 4;
  c.bootstrap.train_per_class = 8;
  c.bootstrap.test_per_class = 4;
  c.bootstrap.epochs = 1;
  c.data.num_classes = 8;
  c.data.train_per_class = 8;
  c.data.test_per_class = 4;
  c.data.seed = 5;
  c.provider.seed = 9;
  return c;
}

}  // namespace lgcl::testing
