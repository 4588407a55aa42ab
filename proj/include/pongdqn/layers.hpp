#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>

#include "pongdqn/errors.hpp"
#include "pongdqn/rng.hpp"
#include "pongdqn/tensor.hpp"

namespace pongdqn {

struct ConvSpec {
  int filters = 0;
  int kh = 0, kw = 0;
  int stride = 1;
  bool operator==(const ConvSpec&) const = default;
};

struct DenseSpec {
  int units = 0;
  bool operator==(const DenseSpec&) const = default;
};

struct ReluSpec {
  bool operator==(const ReluSpec&) const = default;
};

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fan-in scaled uniform draw with variance 1/fan_in; biases stay zero.
template <typename T>
void init_fan_in_uniform(Tensor<T>& w, std::size_t fan_in, Rng& rng) {
  const double a = std::sqrt(3.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(rng.uniform(-a, a));
}

// 2D valid cross-correlation over [B, C, H, W] input, computed as one GEMM
// over the batch-wide im2col matrix.
template <typename T>
class ConvLayer {
 public:
  ConvLayer(int in_c, int in_h, int in_w, const ConvSpec& spec, Rng& rng)
      : in_c_(in_c), in_h_(in_h), in_w_(in_w), spec_(spec),
        w_({static_cast<std::size_t>(spec.filters), static_cast<std::size_t>(in_c),
            static_cast<std::size_t>(spec.kh), static_cast<std::size_t>(spec.kw)}),
        b_({static_cast<std::size_t>(spec.filters)}) {
    if (spec.filters < 1 || spec.kh < 1 || spec.kw < 1 || spec.stride < 1)
      throw ConfigError("conv layer parameters must be positive");
    if (spec.kh > in_h || spec.kw > in_w)
      throw ConfigError("conv kernel larger than its input");
    init_fan_in_uniform(w_, static_cast<std::size_t>(in_c) * spec.kh * spec.kw, rng);
  }

  int out_h() const { return (in_h_ - spec_.kh) / spec_.stride + 1; }
  int out_w() const { return (in_w_ - spec_.kw) / spec_.stride + 1; }
  Shape out_shape(std::size_t batch) const {
    return {batch, static_cast<std::size_t>(spec_.filters),
            static_cast<std::size_t>(out_h()), static_cast<std::size_t>(out_w())};
  }

  // Patch matrix: one row per (batch item, output pixel), one column per
  // (channel, kernel cell).
  Tensor<T> im2col(const Tensor<T>& in) const {
    const std::size_t batch = in.shape()[0];
    const std::size_t patch = static_cast<std::size_t>(out_h()) * out_w();
    const std::size_t cols = static_cast<std::size_t>(in_c_) * spec_.kh * spec_.kw;
    Tensor<T> k({batch * patch, cols});
    const int oh = out_h(), ow = out_w();
    for (std::size_t b = 0; b < batch; ++b) {
      const T* img = in.data() + b * in_c_ * in_h_ * in_w_;
      for (int c = 0; c < in_c_; ++c)
        for (int i = 0; i < spec_.kh; ++i)
          for (int r = 0; r < oh; ++r) {
            const T* src = img + (static_cast<std::size_t>(c) * in_h_ + r * spec_.stride + i) * in_w_;
            T* dst = k.data() + (b * patch + static_cast<std::size_t>(r) * ow) * cols +
                     (static_cast<std::size_t>(c) * spec_.kh + i) * spec_.kw;
            for (int cc = 0; cc < ow; ++cc)
              for (int j = 0; j < spec_.kw; ++j)
                dst[static_cast<std::size_t>(cc) * cols + j] = src[cc * spec_.stride + j];
          }
    }
    return k;
  }

  // in: [B, C, H, W] -> [B, F, OH, OW]; patches returns the im2col matrix for
  // reuse in backward.
  Tensor<T> forward(const Tensor<T>& in, Tensor<T>* patches = nullptr) const {
    check_input(in);
    const std::size_t batch = in.shape()[0];
    const std::size_t p = static_cast<std::size_t>(out_h()) * out_w();
    const std::size_t cols = static_cast<std::size_t>(in_c_) * spec_.kh * spec_.kw;
    const std::size_t f = static_cast<std::size_t>(spec_.filters);

    Tensor<T> k = im2col(in);
    Tensor<T> prod({batch * p, f});
    {
      Eigen::Map<const MatRM<T>> km(k.data(), batch * p, cols);
      Eigen::Map<const MatRM<T>> wm(w_.data(), f, cols);
      Eigen::Map<MatRM<T>> om(prod.data(), batch * p, f);
      om.noalias() = km * wm.transpose();
    }
    Tensor<T> out(out_shape(batch));
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t ff = 0; ff < f; ++ff) {
        T* dst = out.data() + (b * f + ff) * p;
        const T* src = prod.data() + b * p * f + ff;
        const T bias = b_.data()[ff];
        for (std::size_t i = 0; i < p; ++i) dst[i] = src[i * f] + bias;
      }
    if (patches) *patches = std::move(k);
    return out;
  }

  // dout: [B, F, OH, OW]; patches: the im2col matrix from forward.
  // Returns dInput [B, C, H, W]; writes parameter gradients into dw/db.
  Tensor<T> backward(const Tensor<T>& dout, const Tensor<T>& patches,
                     Tensor<T>& dw, Tensor<T>& db) const {
    const std::size_t batch = dout.shape()[0];
    const std::size_t p = static_cast<std::size_t>(out_h()) * out_w();
    const std::size_t cols = static_cast<std::size_t>(in_c_) * spec_.kh * spec_.kw;
    const std::size_t f = static_cast<std::size_t>(spec_.filters);
    if (dout.shape() != out_shape(batch))
      throw DimensionError("conv backward expects " + shape_str(out_shape(batch)) +
                           ", got " + shape_str(dout.shape()));

    // Gather dout into GEMM layout [B*P, F].
    Tensor<T> g({batch * p, f});
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t ff = 0; ff < f; ++ff) {
        const T* src = dout.data() + (b * f + ff) * p;
        T* dst = g.data() + b * p * f + ff;
        for (std::size_t i = 0; i < p; ++i) dst[i * f] = src[i];
      }

    dw = Tensor<T>(w_.shape());
    db = Tensor<T>(b_.shape());
    Tensor<T> dk({batch * p, cols});
    {
      Eigen::Map<const MatRM<T>> gm(g.data(), batch * p, f);
      Eigen::Map<const MatRM<T>> km(patches.data(), batch * p, cols);
      Eigen::Map<const MatRM<T>> wm(w_.data(), f, cols);
      Eigen::Map<MatRM<T>> dwm(dw.data(), f, cols);
      Eigen::Map<MatRM<T>> dkm(dk.data(), batch * p, cols);
      dwm.noalias() = gm.transpose() * km;
      dkm.noalias() = gm * wm;
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dbm(db.data(), f);
      dbm = gm.colwise().sum().transpose();
    }

    // col2im: scatter-add patch gradients back onto the input grid.
    Tensor<T> din({batch, static_cast<std::size_t>(in_c_),
                   static_cast<std::size_t>(in_h_), static_cast<std::size_t>(in_w_)});
    const int oh = out_h(), ow = out_w();
    for (std::size_t b = 0; b < batch; ++b) {
      T* img = din.data() + b * in_c_ * in_h_ * in_w_;
      for (int c = 0; c < in_c_; ++c)
        for (int i = 0; i < spec_.kh; ++i)
          for (int r = 0; r < oh; ++r) {
            T* dst = img + (static_cast<std::size_t>(c) * in_h_ + r * spec_.stride + i) * in_w_;
            const T* src = dk.data() + (b * p + static_cast<std::size_t>(r) * ow) * cols +
                           (static_cast<std::size_t>(c) * spec_.kh + i) * spec_.kw;
            for (int cc = 0; cc < ow; ++cc)
              for (int j = 0; j < spec_.kw; ++j)
                dst[cc * spec_.stride + j] += src[static_cast<std::size_t>(cc) * cols + j];
          }
    }
    return din;
  }

  void check_input(const Tensor<T>& in) const {
    const Shape want{in.shape().empty() ? 0 : in.shape()[0], static_cast<std::size_t>(in_c_),
                     static_cast<std::size_t>(in_h_), static_cast<std::size_t>(in_w_)};
    if (in.shape().size() != 4 || in.shape()[1] != want[1] || in.shape()[2] != want[2] ||
        in.shape()[3] != want[3])
      throw DimensionError("conv layer expects [B, " + std::to_string(in_c_) + ", " +
                           std::to_string(in_h_) + ", " + std::to_string(in_w_) +
                           "], got " + shape_str(in.shape()));
  }

  const ConvSpec& spec() const { return spec_; }
  Tensor<T>& weights() { return w_; }
  Tensor<T>& bias() { return b_; }
  const Tensor<T>& weights() const { return w_; }
  const Tensor<T>& bias() const { return b_; }

 private:
  int in_c_, in_h_, in_w_;
  ConvSpec spec_;
  Tensor<T> w_;  // [F, C, KH, KW]
  Tensor<T> b_;  // [F]
};

// Fully connected layer over flattened features.
template <typename T>
class DenseLayer {
 public:
  DenseLayer(std::size_t in_features, const DenseSpec& spec, Rng& rng)
      : in_(in_features), units_(static_cast<std::size_t>(spec.units)),
        w_({units_, in_features}), b_({units_}) {
    if (spec.units < 1) throw ConfigError("dense layer needs at least one unit");
    if (in_features < 1) throw ConfigError("dense layer input must be non-empty");
    init_fan_in_uniform(w_, in_features, rng);
  }

  // in: [B, in_features] (higher-rank inputs are treated as flattened).
  Tensor<T> forward(const Tensor<T>& in) const {
    const std::size_t batch = check_input(in);
    Tensor<T> out({batch, units_});
    Eigen::Map<const MatRM<T>> xm(in.data(), batch, in_);
    Eigen::Map<const MatRM<T>> wm(w_.data(), units_, in_);
    Eigen::Map<MatRM<T>> om(out.data(), batch, units_);
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bm(b_.data(), units_);
    om.noalias() = xm * wm.transpose();
    om.rowwise() += bm;
    return out;
  }

  // dout: [B, units]; in: the forward input. Returns dInput [B, in_features].
  Tensor<T> backward(const Tensor<T>& dout, const Tensor<T>& in,
                     Tensor<T>& dw, Tensor<T>& db) const {
    const std::size_t batch = check_input(in);
    if (dout.shape() != Shape{batch, units_})
      throw DimensionError("dense backward expects " + shape_str({batch, units_}) +
                           ", got " + shape_str(dout.shape()));
    dw = Tensor<T>(w_.shape());
    db = Tensor<T>(b_.shape());
    Tensor<T> din({batch, in_});
    Eigen::Map<const MatRM<T>> gm(dout.data(), batch, units_);
    Eigen::Map<const MatRM<T>> xm(in.data(), batch, in_);
    Eigen::Map<const MatRM<T>> wm(w_.data(), units_, in_);
    Eigen::Map<MatRM<T>> dwm(dw.data(), units_, in_);
    Eigen::Map<MatRM<T>> dxm(din.data(), batch, in_);
    dwm.noalias() = gm.transpose() * xm;
    dxm.noalias() = gm * wm;
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dbm(db.data(), units_);
    dbm = gm.colwise().sum().transpose();
    return din;
  }

  std::size_t check_input(const Tensor<T>& in) const {
    if (in.shape().empty() || in.shape()[0] == 0 ||
        in.numel() / in.shape()[0] != in_ || in.numel() % in.shape()[0] != 0)
      throw DimensionError("dense layer expects [B, " + std::to_string(in_) +
                           "], got " + shape_str(in.shape()));
    return in.shape()[0];
  }

  std::size_t in_features() const { return in_; }
  std::size_t units() const { return units_; }
  Tensor<T>& weights() { return w_; }
  Tensor<T>& bias() { return b_; }
  const Tensor<T>& weights() const { return w_; }
  const Tensor<T>& bias() const { return b_; }

 private:
  std::size_t in_;
  std::size_t units_;
  Tensor<T> w_;  // [units, in_features]
  Tensor<T> b_;  // [units]
};

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& in) {
  Tensor<T> out(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i)
    out.data()[i] = in.data()[i] > T(0) ? in.data()[i] : T(0);
  return out;
}

// Uses the forward output as the mask; the subgradient at 0 is 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& dout, const Tensor<T>& out) {
  if (dout.shape() != out.shape())
    throw DimensionError("relu backward expects " + shape_str(out.shape()) + ", got " +
                         shape_str(dout.shape()));
  Tensor<T> din(dout.shape());
  for (std::size_t i = 0; i < dout.numel(); ++i)
    din.data()[i] = out.data()[i] > T(0) ? dout.data()[i] : T(0);
  return din;
}

}  // namespace pongdqn
