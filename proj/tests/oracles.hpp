#pragma once

// Reference computations used by the test suites. Everything here is written
// as directly as possible (nested loops, closed forms) and must stay
// independent of the library's own kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracles {

// Specular reflection of a 1D coordinate into [lo, hi] by repeated folding.
inline double fold_reflect(double y, double lo, double hi) {
  for (int i = 0; i < 64 && (y < lo || y > hi); ++i) {
    if (y < lo) y = 2.0 * lo - y;
    if (y > hi) y = 2.0 * hi - y;
  }
  return y;
}

// Kolmogorov-Smirnov statistic D_n of `samples` against the CDF `cdf`.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, std::abs((static_cast<double>(i) + 1.0) / n - f));
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
  }
  return d;
}

// sqrt(n) * D_n exceeds this at significance 0.01 under the null.
inline constexpr double kKsCritical01 = 1.628;

// Pearson chi-square statistic for observed counts vs a uniform expectation.
inline double chi_square_uniform(const std::vector<std::uint64_t>& counts,
                                 double expected_per_bin) {
  double x2 = 0.0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected_per_bin;
    x2 += d * d / expected_per_bin;
  }
  return x2;
}

// Plain quadruple-loop 2D valid cross-correlation with stride, the textbook
// definition. input: C x H x W, weights: F x C x KH x KW, all row-major.
inline std::vector<double> naive_conv2d(const std::vector<double>& input, int c_in,
                                        int h, int w, const std::vector<double>& weights,
                                        int f_out, int kh, int kw, int stride,
                                        const std::vector<double>& bias) {
  const int oh = (h - kh) / stride + 1;
  const int ow = (w - kw) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(f_out) * oh * ow, 0.0);
  for (int f = 0; f < f_out; ++f)
    for (int r = 0; r < oh; ++r)
      for (int col = 0; col < ow; ++col) {
        double acc = bias[f];
        for (int c = 0; c < c_in; ++c)
          for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
              const int ir = r * stride + i;
              const int ic = col * stride + j;
              acc += input[(static_cast<std::size_t>(c) * h + ir) * w + ic] *
                     weights[((static_cast<std::size_t>(f) * c_in + c) * kh + i) * kw + j];
            }
        out[(static_cast<std::size_t>(f) * oh + r) * ow + col] = acc;
      }
  return out;
}

// Central finite difference of `fn` along coordinate `i` of `x`.
inline double central_diff(const std::function<double(const std::vector<double>&)>& fn,
                           std::vector<double> x, std::size_t i, double h) {
  x[i] += h;
  const double up = fn(x);
  x[i] -= 2.0 * h;
  const double down = fn(x);
  return (up - down) / (2.0 * h);
}

}  // namespace oracles
