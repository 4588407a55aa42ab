#pragma once

#include <cmath>
#include <vector>

#include "pongdqn/network.hpp"

namespace pongdqn {

struct RmsPropConfig {
  double lr = 2.5e-4;
  double decay = 0.95;
  double eps = 0.01;

  void validate() const {
    if (!(lr >= 0) || !(decay >= 0 && decay < 1) || !(eps > 0))
      throw ConfigError("rmsprop settings out of range");
  }
  bool operator==(const RmsPropConfig&) const = default;
};

// RMSProp with per-parameter squared-gradient accumulators:
//   acc <- decay * acc + (1 - decay) * g^2
//   p   <- p - lr * g / sqrt(acc + eps)
template <typename T>
class RmsProp {
 public:
  explicit RmsProp(const RmsPropConfig& cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  const RmsPropConfig& config() const { return cfg_; }
  std::vector<Tensor<T>>& accumulators() { return acc_; }
  const std::vector<Tensor<T>>& accumulators() const { return acc_; }

  // Applies one update. Throws DivergenceError before touching any parameter
  // if the gradients contain non-finite values, so the caller may skip the
  // batch or abort.
  void step(std::vector<Tensor<T>*> params, const Gradients<T>& grads) {
    if (params.size() != grads.tensors.size())
      throw DimensionError("optimizer got " + std::to_string(grads.tensors.size()) +
                           " gradients for " + std::to_string(params.size()) + " parameters");
    for (std::size_t i = 0; i < params.size(); ++i)
      if (!params[i]->same_shape(grads.tensors[i]))
        throw DimensionError("gradient " + std::to_string(i) + " has shape " +
                             shape_str(grads.tensors[i].shape()) + ", parameter has " +
                             shape_str(params[i]->shape()));
    for (const Tensor<T>& g : grads.tensors)
      for (std::size_t j = 0; j < g.numel(); ++j)
        if (!std::isfinite(static_cast<double>(g[j])))
          throw DivergenceError("non-finite gradient encountered");

    if (acc_.empty())
      for (const Tensor<T>* p : params) acc_.emplace_back(p->shape());

    const T decay = static_cast<T>(cfg_.decay);
    const T one_minus = static_cast<T>(1.0 - cfg_.decay);
    const T lr = static_cast<T>(cfg_.lr);
    const T eps = static_cast<T>(cfg_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      T* p = params[i]->data();
      T* a = acc_[i].data();
      const T* g = grads.tensors[i].data();
      const std::size_t n = params[i]->numel();
      for (std::size_t j = 0; j < n; ++j) {
        a[j] = decay * a[j] + one_minus * g[j] * g[j];
        p[j] -= lr * g[j] / std::sqrt(a[j] + eps);
      }
    }
  }

 private:
  RmsPropConfig cfg_;
  std::vector<Tensor<T>> acc_;
};

// Huber loss (delta = 1) on a residual; returns the loss value and writes the
// derivative w.r.t. the prediction, which is the clipped residual.
template <typename T>
T huber(T residual, T& dpred) {
  const T a = residual < T(0) ? -residual : residual;
  if (a <= T(1)) {
    dpred = residual;
    return T(0.5) * residual * residual;
  }
  dpred = residual < T(0) ? T(-1) : T(1);
  return a - T(0.5);
}

}  // namespace pongdqn
