#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "pongdqn/layers.hpp"

namespace pongdqn {

using LayerSpec = std::variant<ConvSpec, DenseSpec, ReluSpec>;

inline constexpr int kQValues = 4;  // one output per action

// Input dimensions plus an ordered layer list. Shape consistency is checked
// once at validate(); construction of a Network implies a valid descriptor.
struct Architecture {
  int in_c = 0, in_h = 0, in_w = 0;
  std::vector<LayerSpec> layers;

  // 4x32x32 frames -> Conv(8,4x4,s2) -> ReLU -> Conv(16,3x3,s1) -> ReLU
  // -> Dense(128) -> ReLU -> Dense(4).
  static Architecture desk_default() {
    Architecture a;
    a.in_c = 4;
    a.in_h = 32;
    a.in_w = 32;
    a.layers = {ConvSpec{8, 4, 4, 2}, ReluSpec{}, ConvSpec{16, 3, 3, 1}, ReluSpec{},
                DenseSpec{128}, ReluSpec{}, DenseSpec{kQValues}};
    return a;
  }

  void validate() const {
    if (in_c < 1 || in_h < 1 || in_w < 1)
      throw ConfigError("network input dimensions must be positive");
    int c = in_c, h = in_h, w = in_w;
    bool flat = false;
    std::size_t width = 0;
    for (const LayerSpec& l : layers) {
      if (const auto* cv = std::get_if<ConvSpec>(&l)) {
        if (flat) throw ConfigError("conv layer cannot follow a dense layer");
        if (cv->filters < 1 || cv->kh < 1 || cv->kw < 1 || cv->stride < 1)
          throw ConfigError("conv layer parameters must be positive");
        if (cv->kh > h || cv->kw > w)
          throw ConfigError("conv kernel larger than its input");
        h = (h - cv->kh) / cv->stride + 1;
        w = (w - cv->kw) / cv->stride + 1;
        c = cv->filters;
      } else if (const auto* d = std::get_if<DenseSpec>(&l)) {
        if (d->units < 1) throw ConfigError("dense layer needs at least one unit");
        if (!flat) {
          width = static_cast<std::size_t>(c) * h * w;
          flat = true;
        }
        width = static_cast<std::size_t>(d->units);
      }
    }
    if (!flat) throw ConfigError("network must end with a dense layer");
    if (width != kQValues)
      throw ConfigError("network must output " + std::to_string(kQValues) +
                        " values, descriptor ends with " + std::to_string(width));
  }

  bool operator==(const Architecture&) const = default;
};

// Parameter gradients in the same order as Network::params().
template <typename T>
struct Gradients {
  std::vector<Tensor<T>> tensors;
};

// Per-batch activations retained for backward. acts[i] is the input of node
// i; acts.back() is the network output. Conv nodes also keep their im2col
// patch matrices.
template <typename T>
struct ForwardCache {
  bool ready = false;
  std::vector<Tensor<T>> acts;
  std::vector<Tensor<T>> patches;  // parallel to nodes; empty for non-conv
};

// Feed-forward Q-network: convolutions, dense layers and ReLUs over fixed
// input dimensions, with parameters initialized per seed.
template <typename T>
class Network {
 public:
  Network(const Architecture& arch, std::uint64_t seed) : arch_(arch) {
    arch_.validate();
    Rng rng(seed);
    int c = arch_.in_c, h = arch_.in_h, w = arch_.in_w;
    bool flat = false;
    std::size_t width = 0;
    for (const LayerSpec& l : arch_.layers) {
      if (const auto* cv = std::get_if<ConvSpec>(&l)) {
        nodes_.emplace_back(ConvLayer<T>(c, h, w, *cv, rng));
        const auto& layer = std::get<ConvLayer<T>>(nodes_.back());
        h = layer.out_h();
        w = layer.out_w();
        c = cv->filters;
      } else if (const auto* d = std::get_if<DenseSpec>(&l)) {
        if (!flat) {
          width = static_cast<std::size_t>(c) * h * w;
          flat = true;
        }
        nodes_.emplace_back(DenseLayer<T>(width, *d, rng));
        width = static_cast<std::size_t>(d->units);
      } else {
        nodes_.emplace_back(ReluSpec{});
      }
    }
  }

  const Architecture& arch() const { return arch_; }
  std::uint64_t train_steps() const { return train_steps_; }
  void set_train_steps(std::uint64_t s) { train_steps_ = s; }

  Shape input_shape(std::size_t batch) const {
    return {batch, static_cast<std::size_t>(arch_.in_c),
            static_cast<std::size_t>(arch_.in_h), static_cast<std::size_t>(arch_.in_w)};
  }

  // Pure forward pass; the cached variant retains activations for backward.
  Tensor<T> forward(const Tensor<T>& batch) const { return run(batch, nullptr); }
  Tensor<T> forward(const Tensor<T>& batch, ForwardCache<T>& cache) const {
    Tensor<T> out = run(batch, &cache);
    cache.ready = true;
    return out;
  }

  // dloss: [B, 4] gradient of the scalar loss w.r.t. the network output.
  Gradients<T> backward(const Tensor<T>& dloss, const ForwardCache<T>& cache) const {
    if (!cache.ready || cache.acts.size() != nodes_.size() + 1)
      throw ContractViolation("backward requires a cached forward pass");
    if (dloss.shape() != cache.acts.back().shape())
      throw DimensionError("loss gradient expects " + shape_str(cache.acts.back().shape()) +
                           ", got " + shape_str(dloss.shape()));
    Gradients<T> grads;
    grads.tensors.resize(param_count());
    std::size_t slot = param_count();
    Tensor<T> d = dloss;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      // A dense layer hands back a flat [B, features] gradient even when the
      // producing node's output was 4-D; restore that node's shape.
      if (d.shape() != cache.acts[i + 1].shape())
        d = Tensor<T>(cache.acts[i + 1].shape(), d.release());
      if (const auto* cv = std::get_if<ConvLayer<T>>(&nodes_[i])) {
        slot -= 2;
        d = cv->backward(d, cache.patches[i], grads.tensors[slot], grads.tensors[slot + 1]);
      } else if (const auto* dn = std::get_if<DenseLayer<T>>(&nodes_[i])) {
        slot -= 2;
        d = dn->backward(d, cache.acts[i], grads.tensors[slot], grads.tensors[slot + 1]);
      } else {
        d = relu_backward(d, cache.acts[i + 1]);
      }
    }
    return grads;
  }

  // Weight/bias tensors in declaration order.
  std::vector<Tensor<T>*> params() {
    std::vector<Tensor<T>*> out;
    for (auto& n : nodes_) {
      if (auto* cv = std::get_if<ConvLayer<T>>(&n)) {
        out.push_back(&cv->weights());
        out.push_back(&cv->bias());
      } else if (auto* dn = std::get_if<DenseLayer<T>>(&n)) {
        out.push_back(&dn->weights());
        out.push_back(&dn->bias());
      }
    }
    return out;
  }
  std::vector<const Tensor<T>*> params() const {
    std::vector<const Tensor<T>*> out;
    for (const auto& n : nodes_) {
      if (const auto* cv = std::get_if<ConvLayer<T>>(&n)) {
        out.push_back(&cv->weights());
        out.push_back(&cv->bias());
      } else if (const auto* dn = std::get_if<DenseLayer<T>>(&n)) {
        out.push_back(&dn->weights());
        out.push_back(&dn->bias());
      }
    }
    return out;
  }
  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& node : nodes_)
      n += 2 * (std::holds_alternative<ConvLayer<T>>(node) ||
                std::holds_alternative<DenseLayer<T>>(node));
    return n;
  }

  bool operator==(const Network& o) const {
    if (arch_ != o.arch_ || train_steps_ != o.train_steps_) return false;
    auto a = params();
    auto b = o.params();
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!(*a[i] == *b[i])) return false;
    return true;
  }

 private:
  using Node = std::variant<ConvLayer<T>, DenseLayer<T>, ReluSpec>;

  Tensor<T> run(const Tensor<T>& batch, ForwardCache<T>* cache) const {
    if (batch.shape().size() != 4 || batch.shape()[0] == 0 ||
        batch.shape() != input_shape(batch.shape()[0]))
      throw DimensionError("network expects [B, " + std::to_string(arch_.in_c) + ", " +
                           std::to_string(arch_.in_h) + ", " + std::to_string(arch_.in_w) +
                           "], got " + shape_str(batch.shape()));
    if (cache) {
      cache->ready = false;
      cache->acts.clear();
      cache->patches.assign(nodes_.size(), Tensor<T>());
      cache->acts.push_back(batch);
    }
    Tensor<T> x = batch;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (const auto* cv = std::get_if<ConvLayer<T>>(&nodes_[i])) {
        x = cv->forward(x, cache ? &cache->patches[i] : nullptr);
      } else if (const auto* dn = std::get_if<DenseLayer<T>>(&nodes_[i])) {
        x = dn->forward(x);
      } else {
        x = relu_forward(x);
      }
      if (cache) cache->acts.push_back(x);
    }
    return x;
  }

  Architecture arch_;
  std::vector<Node> nodes_;
  std::uint64_t train_steps_ = 0;
};

}  // namespace pongdqn
