#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "dcngan/autograd.hpp"
#include "dcngan/ops.hpp"
#include "dcngan/tensor.hpp"

namespace testing {

using dcngan::Shape;
using dcngan::Tensor;
using dcngan::Var;

template <typename T>
Tensor<T> uniform(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<T> t(shape);
  for (auto& v : t.storage()) v = static_cast<T>(dist(rng));
  return t;
}

// Plain zero-padded cross-correlation, written out loop by loop.
template <typename T>
Tensor<T> naive_conv(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias, int stride, int pad) {
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int co = w.dim(0), k = w.dim(2);
  const int oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  Tensor<T> out({n, co, oh, ow});
  for (int b = 0; b < n; ++b)
    for (int o = 0; o < co; ++o)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double acc = bias ? (*bias)[static_cast<std::size_t>(o)] : 0.0;
          for (int c = 0; c < ci; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = y * stride + ky - pad, ix = xx * stride + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += static_cast<double>(w.at(o, c, ky, kx)) * x.at(b, c, iy, ix);
              }
          out.at(b, o, y, xx) = static_cast<T>(acc);
        }
  return out;
}

inline double max_abs_diff(const Tensor<float>& a, const Tensor<float>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

inline double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Worst relative error between the analytic gradient of `loss` w.r.t. each
// leaf and central differences (step h). Relative to max(|a|,|n|, floor).
inline double fd_check(const std::function<Var<double>()>& loss, std::vector<Var<double>> leaves, double h = 1e-5,
                       double floor = 1e-6) {
  for (auto& v : leaves) v.zero_grad();
  dcngan::backward(loss());
  std::vector<Tensor<double>> analytic;
  for (auto& v : leaves) analytic.push_back(v.grad());
  double worst = 0;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto& value = leaves[l].mutable_value();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      const double up = loss().item();
      value[i] = saved - h;
      const double down = loss().item();
      value[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[l][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace testing
