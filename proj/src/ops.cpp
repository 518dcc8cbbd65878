#include "dcngan/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace dcngan::ops {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

template <typename T>
bool wants(const Node<T>& self, std::size_t i) {
  return self.parents[i]->requires_grad;
}

template <typename T>
Tensor<T>& pgrad(Node<T>& self, std::size_t i) {
  return self.parents[i]->grad_ref();
}

void require_rank4(const Shape& s, const char* what) {
  if (s.size() != 4) throw ShapeError(std::string(what) + ": expected NCHW tensor, got " + shape_str(s));
}

template <typename T, typename F, typename G>
Var<T> unary(const Var<T>& x, F forward, G derivative) {
  Tensor<T> out(x.shape());
  const auto& in = x.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  return make_result<T>(std::move(out), {x}, [derivative](Node<T>& self) {
    const auto& in = self.parents[0]->value;
    auto& g = pgrad(self, 0);
    for (std::size_t i = 0; i < in.size(); ++i) g[i] += self.grad[i] * derivative(in[i], self.value[i]);
  });
}

// Per-thread column buffer, grown on demand and never cleared; callers
// overwrite every element they read.
template <typename T, int Slot>
T* scratch(std::size_t size) {
  thread_local std::vector<T> buffer;
  if (buffer.size() < size) buffer.resize(size);
  return buffer.data();
}

// Output columns [lo, hi) whose tap kx lands inside [0, width).
inline std::pair<int, int> valid_columns(int width, int kx, int stride, int pad, int out_w) {
  int lo = 0;
  while (lo < out_w && lo * stride - pad + kx < 0) ++lo;
  int hi = out_w;
  while (hi > lo && (hi - 1) * stride - pad + kx >= width) --hi;
  return {lo, hi};
}

template <typename T>
void im2col(const T* img, int channels, int height, int width, int k, int stride, int pad, int out_h, int out_w,
            T* col) {
  const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* dst = row + static_cast<std::size_t>(oy) * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + out_w, T(0));
            continue;
          }
          const T* src = img + (static_cast<std::size_t>(c) * height + iy) * width;
          const auto [lo, hi] = valid_columns(width, kx, stride, pad, out_w);
          std::fill(dst, dst + lo, T(0));
          const T* s = src + lo * stride - pad + kx;
          if (stride == 1) {
            std::copy(s, s + (hi - lo), dst + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox, s += stride) dst[ox] = *s;
          }
          std::fill(dst + hi, dst + out_w, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int channels, int height, int width, int k, int stride, int pad, int out_h, int out_w,
            T* img) {
  const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          const T* src = row + static_cast<std::size_t>(oy) * out_w;
          T* dst = img + (static_cast<std::size_t>(c) * height + iy) * width;
          const auto [lo, hi] = valid_columns(width, kx, stride, pad, out_w);
          T* d = dst + lo * stride - pad + kx;
          for (int ox = lo; ox < hi; ++ox, d += stride) *d += src[ox];
        }
      }
    }
  }
}

}  // namespace

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants(self, p)) continue;
      auto& g = pgrad(self, p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    if (wants(self, 0)) {
      auto& g = pgrad(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      auto& g = pgrad(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (wants(self, 0)) {
      auto& g = pgrad(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (wants(self, 1)) {
      auto& g = pgrad(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  return unary<T>(a, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T offset) {
  return unary<T>(a, [offset](T v) { return v + offset; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  const auto& v = a.value();
  if (v.empty()) throw ShapeError("mean of an empty tensor");
  long double acc = 0;
  for (T x : v.values()) acc += x;
  Tensor<T> out({1}, static_cast<T>(acc / static_cast<long double>(v.size())));
  return make_result<T>(std::move(out), {a}, [](Node<T>& self) {
    auto& g = pgrad(self, 0);
    const T d = self.grad[0] / static_cast<T>(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += d;
  });
}

template <typename T>
Var<T> mean_squared_error_to(const Var<T>& a, T target) {
  const auto& v = a.value();
  if (v.empty()) throw ShapeError("mean_squared_error_to of an empty tensor");
  long double acc = 0;
  for (T x : v.values()) acc += static_cast<long double>(x - target) * (x - target);
  Tensor<T> out({1}, static_cast<T>(acc / static_cast<long double>(v.size())));
  return make_result<T>(std::move(out), {a}, [target](Node<T>& self) {
    const auto& in = self.parents[0]->value;
    auto& g = pgrad(self, 0);
    const T d = T(2) * self.grad[0] / static_cast<T>(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += d * (in[i] - target);
  });
}

template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mean_abs_diff");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.empty()) throw ShapeError("mean_abs_diff of empty tensors");
  long double acc = 0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(av[i] - bv[i]);
  Tensor<T> out({1}, static_cast<T>(acc / static_cast<long double>(av.size())));
  return make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    const T d = self.grad[0] / static_cast<T>(av.size());
    auto sign = [](T v) { return v > 0 ? T(1) : (v < 0 ? T(-1) : T(0)); };
    if (wants(self, 0)) {
      auto& g = pgrad(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += d * sign(av[i] - bv[i]);
    }
    if (wants(self, 1)) {
      auto& g = pgrad(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= d * sign(av[i] - bv[i]);
    }
  });
}

template <typename T>
Var<T> channel_scale(const Var<T>& x, const Var<T>& s) {
  require_rank4(x.shape(), "channel_scale");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  if (s.shape() != Shape{n, c}) {
    throw ShapeError("channel_scale: scales " + shape_str(s.shape()) + " do not match features " +
                     shape_str(x.shape()));
  }
  Tensor<T> out(x.shape());
  for (int i = 0; i < n * c; ++i) {
    const T k = s.value()[static_cast<std::size_t>(i)];
    const T* src = x.value().data() + i * plane;
    T* dst = out.data() + i * plane;
    for (std::size_t j = 0; j < plane; ++j) dst[j] = src[j] * k;
  }
  return make_result<T>(std::move(out), {x, s}, [n, c, plane](Node<T>& self) {
    const auto& xv = self.parents[0]->value;
    const auto& sv = self.parents[1]->value;
    for (int i = 0; i < n * c; ++i) {
      const T* g = self.grad.data() + i * plane;
      if (wants(self, 0)) {
        T* gx = pgrad(self, 0).data() + i * plane;
        const T k = sv[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < plane; ++j) gx[j] += g[j] * k;
      }
      if (wants(self, 1)) {
        const T* xs = xv.data() + i * plane;
        T acc = 0;
        for (std::size_t j = 0; j < plane; ++j) acc += g[j] * xs[j];
        pgrad(self, 1)[static_cast<std::size_t>(i)] += acc;
      }
    }
  });
}

template <typename T>
Var<T> channel_affine(const Var<T>& x, const std::vector<T>& mul, const std::vector<T>& add) {
  require_rank4(x.shape(), "channel_affine");
  const int n = x.dim(0), c = x.dim(1);
  if (static_cast<int>(mul.size()) != c || static_cast<int>(add.size()) != c) {
    throw ShapeError("channel_affine: coefficient count does not match " + std::to_string(c) + " channels");
  }
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> out(x.shape());
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * plane;
      for (std::size_t j = 0; j < plane; ++j) out[base + j] = x.value()[base + j] * mul[ch] + add[ch];
    }
  }
  return make_result<T>(std::move(out), {x}, [n, c, plane, mul](Node<T>& self) {
    auto& g = pgrad(self, 0);
    for (int b = 0; b < n; ++b) {
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * plane;
        for (std::size_t j = 0; j < plane; ++j) g[base + j] += self.grad[base + j] * mul[ch];
      }
    }
  });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int padding) {
  require_rank4(x.shape(), "conv2d input");
  require_rank4(weight.shape(), "conv2d weight");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int o = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != c || weight.dim(3) != k) {
    throw ShapeError("conv2d: weight " + shape_str(weight.shape()) + " incompatible with input " +
                     shape_str(x.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{o}) throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()));
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: invalid stride/padding");
  const int oh = (h + 2 * padding - k) / stride + 1;
  const int ow = (w + 2 * padding - k) / stride + 1;
  if (h + 2 * padding < k || w + 2 * padding < k || oh < 1 || ow < 1) {
    throw InputTooSmallError("conv2d: input " + shape_str(x.shape()) + " smaller than kernel " + std::to_string(k));
  }
  const int kk = c * k * k;
  const std::size_t plane = static_cast<std::size_t>(oh) * ow;

  Tensor<T> out({n, o, oh, ow});
  T* col = scratch<T, 0>(static_cast<std::size_t>(kk) * plane);
  CMapRM<T> wm(weight.value().data(), o, kk);
  for (int b = 0; b < n; ++b) {
    im2col(x.value().data() + static_cast<std::size_t>(b) * c * h * w, c, h, w, k, stride, padding, oh, ow,
           col);
    MapRM<T> om(out.data() + static_cast<std::size_t>(b) * o * plane, o, static_cast<Eigen::Index>(plane));
    om.noalias() = wm * CMapRM<T>(col, kk, static_cast<Eigen::Index>(plane));
    if (bias.defined()) {
      for (int oc = 0; oc < o; ++oc) om.row(oc).array() += bias.value()[static_cast<std::size_t>(oc)];
    }
  }

  std::vector<Var<T>> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_result<T>(std::move(out), std::move(parents), [=](Node<T>& self) {
    const auto& xv = self.parents[0]->value;
    const auto& wv = self.parents[1]->value;
    const bool gx = wants(self, 0), gw = wants(self, 1);
    const bool gb = self.parents.size() > 2 && wants(self, 2);
    T* col = gw ? scratch<T, 0>(static_cast<std::size_t>(kk) * plane) : nullptr;
    T* gcol = gx ? scratch<T, 1>(static_cast<std::size_t>(kk) * plane) : nullptr;
    CMapRM<T> wm(wv.data(), o, kk);
    for (int b = 0; b < n; ++b) {
      CMapRM<T> gom(self.grad.data() + static_cast<std::size_t>(b) * o * plane, o, static_cast<Eigen::Index>(plane));
      if (gw) {
        im2col(xv.data() + static_cast<std::size_t>(b) * c * h * w, c, h, w, k, stride, padding, oh, ow, col);
        MapRM<T> gwm(pgrad(self, 1).data(), o, kk);
        gwm.noalias() += gom * CMapRM<T>(col, kk, static_cast<Eigen::Index>(plane)).transpose();
      }
      if (gx) {
        MapRM<T> gcm(gcol, kk, static_cast<Eigen::Index>(plane));
        gcm.noalias() = wm.transpose() * gom;
        col2im(gcol, c, h, w, k, stride, padding, oh, ow,
               pgrad(self, 0).data() + static_cast<std::size_t>(b) * c * h * w);
      }
      if (gb) {
        auto& gbias = pgrad(self, 2);
        // Plain left-to-right sums: Eigen's vectorized reductions depend on
        // the buffer's alignment, which would break run-to-run reproducibility.
        for (int oc = 0; oc < o; ++oc) {
          const T* g = gom.data() + static_cast<std::size_t>(oc) * plane;
          gbias[static_cast<std::size_t>(oc)] += std::accumulate(g, g + plane, T(0));
        }
      }
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  if (x.shape().size() != 2 || weight.shape().size() != 2 || weight.dim(1) != x.dim(1)) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " weight " + shape_str(weight.shape()));
  }
  const int n = x.dim(0), f = x.dim(1), o = weight.dim(0);
  if (bias.defined() && bias.shape() != Shape{o}) throw ShapeError("linear: bias shape " + shape_str(bias.shape()));
  Tensor<T> out({n, o});
  MapRM<T> om(out.data(), n, o);
  om.noalias() = CMapRM<T>(x.value().data(), n, f) * CMapRM<T>(weight.value().data(), o, f).transpose();
  if (bias.defined()) {
    for (int r = 0; r < n; ++r) {
      for (int j = 0; j < o; ++j) om(r, j) += bias.value()[static_cast<std::size_t>(j)];
    }
  }
  std::vector<Var<T>> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_result<T>(std::move(out), std::move(parents), [n, f, o](Node<T>& self) {
    CMapRM<T> g(self.grad.data(), n, o);
    if (wants(self, 0)) {
      MapRM<T>(pgrad(self, 0).data(), n, f).noalias() += g * CMapRM<T>(self.parents[1]->value.data(), o, f);
    }
    if (wants(self, 1)) {
      MapRM<T>(pgrad(self, 1).data(), o, f).noalias() +=
          g.transpose() * CMapRM<T>(self.parents[0]->value.data(), n, f);
    }
    if (self.parents.size() > 2 && wants(self, 2)) {
      auto& gb = pgrad(self, 2);
      for (int r = 0; r < n; ++r)
        for (int j = 0; j < o; ++j) gb[static_cast<std::size_t>(j)] += g(r, j);
    }
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  return unary<T>(
      x, [slope](T v) { return v > 0 ? v : v * slope; }, [slope](T v, T) { return v > 0 ? T(1) : slope; });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return leaky_relu<T>(x, T(0));
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> softplus(const Var<T>& x) {
  // log(1 + e^v) = max(v, 0) + log1p(e^-|v|)
  return unary<T>(
      x, [](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))); },
      [](T v, T) { return T(1) / (T(1) + std::exp(-v)); });
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, Tensor<T>& running_mean,
                  Tensor<T>& running_var, bool training, T momentum, T eps) {
  require_rank4(x.shape(), "batch_norm");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const std::size_t count = plane * static_cast<std::size_t>(n);
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c} || running_mean.shape() != Shape{c} ||
      running_var.shape() != Shape{c}) {
    throw ShapeError("batch_norm: parameter shapes do not match " + std::to_string(c) + " channels");
  }
  const auto& xv = x.value();
  std::vector<T> mu(static_cast<std::size_t>(c)), inv_std(static_cast<std::size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    T m, var;
    if (training) {
      long double s = 0, s2 = 0;
      for (int b = 0; b < n; ++b) {
        const T* p = xv.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
        for (std::size_t j = 0; j < plane; ++j) s += p[j];
      }
      const long double lm = s / static_cast<long double>(count);
      for (int b = 0; b < n; ++b) {
        const T* p = xv.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
        for (std::size_t j = 0; j < plane; ++j) s2 += (p[j] - lm) * (p[j] - lm);
      }
      m = static_cast<T>(lm);
      var = static_cast<T>(s2 / static_cast<long double>(count));
      const T unbiased = count > 1 ? static_cast<T>(s2 / static_cast<long double>(count - 1)) : var;
      running_mean[static_cast<std::size_t>(ch)] =
          (T(1) - momentum) * running_mean[static_cast<std::size_t>(ch)] + momentum * m;
      running_var[static_cast<std::size_t>(ch)] =
          (T(1) - momentum) * running_var[static_cast<std::size_t>(ch)] + momentum * unbiased;
    } else {
      m = running_mean[static_cast<std::size_t>(ch)];
      var = running_var[static_cast<std::size_t>(ch)];
    }
    mu[static_cast<std::size_t>(ch)] = m;
    inv_std[static_cast<std::size_t>(ch)] = T(1) / std::sqrt(var + eps);
  }
  Tensor<T> out(x.shape());
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * plane;
      const auto cu = static_cast<std::size_t>(ch);
      const T g = gamma.value()[cu], bt = beta.value()[cu];
      for (std::size_t j = 0; j < plane; ++j) out[base + j] = (xv[base + j] - mu[cu]) * inv_std[cu] * g + bt;
    }
  }
  return make_result<T>(
      std::move(out), {x, gamma, beta}, [n, c, plane, count, mu, inv_std, training](Node<T>& self) {
        const auto& xv = self.parents[0]->value;
        const auto& gv = self.parents[1]->value;
        for (int ch = 0; ch < c; ++ch) {
          const auto cu = static_cast<std::size_t>(ch);
          T sum_g = 0, sum_gx = 0;
          for (int b = 0; b < n; ++b) {
            const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
              const T xh = (xv[base + j] - mu[cu]) * inv_std[cu];
              sum_g += self.grad[base + j];
              sum_gx += self.grad[base + j] * xh;
            }
          }
          if (wants(self, 1)) pgrad(self, 1)[cu] += sum_gx;
          if (wants(self, 2)) pgrad(self, 2)[cu] += sum_g;
          if (!wants(self, 0)) continue;
          auto& gx = pgrad(self, 0);
          const T k = gv[cu] * inv_std[cu];
          const T inv_count = T(1) / static_cast<T>(count);
          for (int b = 0; b < n; ++b) {
            const std::size_t base = (static_cast<std::size_t>(b) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
              if (training) {
                const T xh = (xv[base + j] - mu[cu]) * inv_std[cu];
                gx[base + j] += k * (self.grad[base + j] - inv_count * sum_g - xh * inv_count * sum_gx);
              } else {
                gx[base + j] += k * self.grad[base + j];
              }
            }
          }
        }
      });
}

template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  require_rank4(x.shape(), "instance_norm");
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    throw ShapeError("instance_norm: parameter shapes do not match " + std::to_string(c) + " channels");
  }
  const auto& xv = x.value();
  std::vector<T> mu(static_cast<std::size_t>(n) * c), inv_std(mu.size());
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const T* p = xv.data() + i * plane;
    long double s = 0, s2 = 0;
    for (std::size_t j = 0; j < plane; ++j) s += p[j];
    const long double m = s / static_cast<long double>(plane);
    for (std::size_t j = 0; j < plane; ++j) s2 += (p[j] - m) * (p[j] - m);
    mu[i] = static_cast<T>(m);
    inv_std[i] = T(1) / std::sqrt(static_cast<T>(s2 / static_cast<long double>(plane)) + eps);
    const std::size_t ch = i % static_cast<std::size_t>(c);
    for (std::size_t j = 0; j < plane; ++j) {
      out[i * plane + j] = (p[j] - mu[i]) * inv_std[i] * gamma.value()[ch] + beta.value()[ch];
    }
  }
  return make_result<T>(std::move(out), {x, gamma, beta}, [c, plane, mu, inv_std](Node<T>& self) {
    const auto& xv = self.parents[0]->value;
    const auto& gv = self.parents[1]->value;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const std::size_t ch = i % static_cast<std::size_t>(c);
      T sum_g = 0, sum_gx = 0;
      for (std::size_t j = 0; j < plane; ++j) {
        const T xh = (xv[i * plane + j] - mu[i]) * inv_std[i];
        sum_g += self.grad[i * plane + j];
        sum_gx += self.grad[i * plane + j] * xh;
      }
      if (wants(self, 1)) pgrad(self, 1)[ch] += sum_gx;
      if (wants(self, 2)) pgrad(self, 2)[ch] += sum_g;
      if (!wants(self, 0)) continue;
      auto& gx = pgrad(self, 0);
      const T k = gv[ch] * inv_std[i];
      const T inv_count = T(1) / static_cast<T>(plane);
      for (std::size_t j = 0; j < plane; ++j) {
        const T xh = (xv[i * plane + j] - mu[i]) * inv_std[i];
        gx[i * plane + j] += k * (self.grad[i * plane + j] - inv_count * sum_g - xh * inv_count * sum_gx);
      }
    }
  });
}

namespace {

struct Tap {
  int lo, hi;
  double frac;
};

// Source taps for half-pixel-center x2 upsampling along one axis.
std::vector<Tap> upsample_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) / 2.0 - 0.5;
    if (src < 0) src = 0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const int hi = std::min(lo + 1, in - 1);
    taps[static_cast<std::size_t>(i)] = {lo, hi, src - lo};
  }
  return taps;
}

}  // namespace

template <typename T>
Var<T> upsample_bilinear2x(const Var<T>& x) {
  require_rank4(x.shape(), "upsample_bilinear2x");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = 2 * h, ow = 2 * w;
  const auto ty = upsample_taps(h, oh);
  const auto tx = upsample_taps(w, ow);
  Tensor<T> out({n, c, oh, ow});
  for (int i = 0; i < n * c; ++i) {
    const T* src = x.value().data() + static_cast<std::size_t>(i) * h * w;
    T* dst = out.data() + static_cast<std::size_t>(i) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const auto& a = ty[static_cast<std::size_t>(oy)];
      const T fy = static_cast<T>(a.frac);
      for (int ox = 0; ox < ow; ++ox) {
        const auto& b = tx[static_cast<std::size_t>(ox)];
        const T fx = static_cast<T>(b.frac);
        const T top = src[a.lo * w + b.lo] * (1 - fx) + src[a.lo * w + b.hi] * fx;
        const T bot = src[a.hi * w + b.lo] * (1 - fx) + src[a.hi * w + b.hi] * fx;
        dst[oy * ow + ox] = top * (1 - fy) + bot * fy;
      }
    }
  }
  return make_result<T>(std::move(out), {x}, [n, c, h, w, oh, ow, ty, tx](Node<T>& self) {
    auto& g = pgrad(self, 0);
    for (int i = 0; i < n * c; ++i) {
      T* dst = g.data() + static_cast<std::size_t>(i) * h * w;
      const T* src = self.grad.data() + static_cast<std::size_t>(i) * oh * ow;
      for (int oy = 0; oy < oh; ++oy) {
        const auto& a = ty[static_cast<std::size_t>(oy)];
        const T fy = static_cast<T>(a.frac);
        for (int ox = 0; ox < ow; ++ox) {
          const auto& b = tx[static_cast<std::size_t>(ox)];
          const T fx = static_cast<T>(b.frac);
          const T v = src[oy * ow + ox];
          dst[a.lo * w + b.lo] += v * (1 - fy) * (1 - fx);
          dst[a.lo * w + b.hi] += v * (1 - fy) * fx;
          dst[a.hi * w + b.lo] += v * fy * (1 - fx);
          dst[a.hi * w + b.hi] += v * fy * fx;
        }
      }
    }
  });
}

template <typename T>
Var<T> max_pool2x2(const Var<T>& x) {
  require_rank4(x.shape(), "max_pool2x2");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = h / 2, ow = w / 2;
  if (oh < 1 || ow < 1) throw InputTooSmallError("max_pool2x2: input " + shape_str(x.shape()));
  Tensor<T> out({n, c, oh, ow});
  std::vector<std::size_t> arg(out.size());
  for (int i = 0; i < n * c; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * h * w;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        std::size_t best = base + static_cast<std::size_t>(2 * oy) * w + 2 * ox;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + static_cast<std::size_t>(2 * oy + dy) * w + 2 * ox + dx;
            if (x.value()[idx] > x.value()[best]) best = idx;
          }
        }
        const std::size_t o = (static_cast<std::size_t>(i) * oh + oy) * ow + ox;
        out[o] = x.value()[best];
        arg[o] = best;
      }
    }
  }
  return make_result<T>(std::move(out), {x}, [arg](Node<T>& self) {
    auto& g = pgrad(self, 0);
    for (std::size_t o = 0; o < arg.size(); ++o) g[arg[o]] += self.grad[o];
  });
}

template <typename T>
Var<T> reflect_pad(const Var<T>& x, int top, int bottom, int left, int right) {
  require_rank4(x.shape(), "reflect_pad");
  if (top < 0 || bottom < 0 || left < 0 || right < 0) throw ShapeError("reflect_pad: negative pad");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = h + top + bottom, ow = w + left + right;
  std::vector<int> ry(static_cast<std::size_t>(oh)), rx(static_cast<std::size_t>(ow));
  for (int i = 0; i < oh; ++i) ry[static_cast<std::size_t>(i)] = reflect_index(i - top, h);
  for (int i = 0; i < ow; ++i) rx[static_cast<std::size_t>(i)] = reflect_index(i - left, w);
  Tensor<T> out({n, c, oh, ow});
  for (int i = 0; i < n * c; ++i) {
    const T* src = x.value().data() + static_cast<std::size_t>(i) * h * w;
    T* dst = out.data() + static_cast<std::size_t>(i) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) dst[y * ow + xx] = src[ry[y] * w + rx[xx]];
    }
  }
  return make_result<T>(std::move(out), {x}, [n, c, h, w, oh, ow, ry, rx](Node<T>& self) {
    auto& g = pgrad(self, 0);
    for (int i = 0; i < n * c; ++i) {
      T* dst = g.data() + static_cast<std::size_t>(i) * h * w;
      const T* src = self.grad.data() + static_cast<std::size_t>(i) * oh * ow;
      for (int y = 0; y < oh; ++y) {
        for (int xx = 0; xx < ow; ++xx) dst[ry[y] * w + rx[xx]] += src[y * ow + xx];
      }
    }
  });
}

template <typename T>
Var<T> crop(const Var<T>& x, int top, int left, int height, int width) {
  require_rank4(x.shape(), "crop");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (top < 0 || left < 0 || height < 1 || width < 1 || top + height > h || left + width > w) {
    throw ShapeError("crop window out of range for " + shape_str(x.shape()));
  }
  Tensor<T> out({n, c, height, width});
  for (int i = 0; i < n * c; ++i) {
    for (int y = 0; y < height; ++y) {
      const T* src = x.value().data() + (static_cast<std::size_t>(i) * h + top + y) * w + left;
      std::copy(src, src + width, out.data() + (static_cast<std::size_t>(i) * height + y) * width);
    }
  }
  return make_result<T>(std::move(out), {x}, [=](Node<T>& self) {
    auto& g = pgrad(self, 0);
    for (int i = 0; i < n * c; ++i) {
      for (int y = 0; y < height; ++y) {
        T* dst = g.data() + (static_cast<std::size_t>(i) * h + top + y) * w + left;
        const T* src = self.grad.data() + (static_cast<std::size_t>(i) * height + y) * width;
        for (int xx = 0; xx < width; ++xx) dst[xx] += src[xx];
      }
    }
  });
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  for (const auto& p : parts) require_rank4(p.shape(), "concat_channels");
  const int n = parts[0].dim(0), h = parts[0].dim(2), w = parts[0].dim(3);
  int total = 0;
  std::vector<int> chans;
  for (const auto& p : parts) {
    if (p.dim(0) != n || p.dim(2) != h || p.dim(3) != w) {
      throw ShapeError("concat_channels: " + shape_str(p.shape()) + " vs " + shape_str(parts[0].shape()));
    }
    chans.push_back(p.dim(1));
    total += p.dim(1);
  }
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor<T> out({n, total, h, w});
  for (int b = 0; b < n; ++b) {
    int offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const T* src = parts[k].value().data() + static_cast<std::size_t>(b) * chans[k] * plane;
      std::copy(src, src + chans[k] * plane, out.data() + (static_cast<std::size_t>(b) * total + offset) * plane);
      offset += chans[k];
    }
  }
  return make_result<T>(std::move(out), parts, [n, total, plane, chans](Node<T>& self) {
    for (int b = 0; b < n; ++b) {
      int offset = 0;
      for (std::size_t k = 0; k < chans.size(); ++k) {
        if (wants(self, k)) {
          T* dst = pgrad(self, k).data() + static_cast<std::size_t>(b) * chans[k] * plane;
          const T* src = self.grad.data() + (static_cast<std::size_t>(b) * total + offset) * plane;
          for (std::size_t j = 0; j < chans[k] * plane; ++j) dst[j] += src[j];
        }
        offset += chans[k];
      }
    }
  });
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, int first, int count) {
  require_rank4(x.shape(), "slice_channels");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (first < 0 || count < 1 || first + count > c) throw ShapeError("slice_channels: range out of bounds");
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor<T> out({n, count, h, w});
  for (int b = 0; b < n; ++b) {
    const T* src = x.value().data() + (static_cast<std::size_t>(b) * c + first) * plane;
    std::copy(src, src + count * plane, out.data() + static_cast<std::size_t>(b) * count * plane);
  }
  return make_result<T>(std::move(out), {x}, [n, c, first, count, plane](Node<T>& self) {
    auto& g = pgrad(self, 0);
    for (int b = 0; b < n; ++b) {
      T* dst = g.data() + (static_cast<std::size_t>(b) * c + first) * plane;
      const T* src = self.grad.data() + static_cast<std::size_t>(b) * count * plane;
      for (std::size_t j = 0; j < count * plane; ++j) dst[j] += src[j];
    }
  });
}

template <typename T>
Var<T> replicate_channels(const Var<T>& x, int copies) {
  require_rank4(x.shape(), "replicate_channels");
  if (x.dim(1) != 1) throw ShapeError("replicate_channels expects a single channel, got " + shape_str(x.shape()));
  return concat_channels<T>(std::vector<Var<T>>(static_cast<std::size_t>(copies), x));
}

#define DCNGAN_INSTANTIATE_OPS(T)                                                                               \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                           \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                                           \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                           \
  template Var<T> scale(const Var<T>&, T);                                                                     \
  template Var<T> add_scalar(const Var<T>&, T);                                                                \
  template Var<T> mean(const Var<T>&);                                                                         \
  template Var<T> mean_squared_error_to(const Var<T>&, T);                                                     \
  template Var<T> mean_abs_diff(const Var<T>&, const Var<T>&);                                                 \
  template Var<T> channel_scale(const Var<T>&, const Var<T>&);                                                 \
  template Var<T> channel_affine(const Var<T>&, const std::vector<T>&, const std::vector<T>&);                 \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);                               \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                                         \
  template Var<T> leaky_relu(const Var<T>&, T);                                                                \
  template Var<T> relu(const Var<T>&);                                                                         \
  template Var<T> sigmoid(const Var<T>&);                                                                      \
  template Var<T> softplus(const Var<T>&);                                                                     \
  template Var<T> batch_norm(const Var<T>&, const Var<T>&, const Var<T>&, Tensor<T>&, Tensor<T>&, bool, T, T); \
  template Var<T> instance_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);                               \
  template Var<T> upsample_bilinear2x(const Var<T>&);                                                          \
  template Var<T> max_pool2x2(const Var<T>&);                                                                  \
  template Var<T> reflect_pad(const Var<T>&, int, int, int, int);                                              \
  template Var<T> crop(const Var<T>&, int, int, int, int);                                                     \
  template Var<T> concat_channels(const std::vector<Var<T>>&);                                                 \
  template Var<T> slice_channels(const Var<T>&, int, int);                                                     \
  template Var<T> replicate_channels(const Var<T>&, int);

DCNGAN_INSTANTIATE_OPS(float)
DCNGAN_INSTANTIATE_OPS(double)

#undef DCNGAN_INSTANTIATE_OPS

}  // namespace dcngan::ops
