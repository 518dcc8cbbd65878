#include "dcngan/deform_conv.hpp"

#include <Eigen/Core>
#include <cmath>
#include <numeric>
#include <vector>

namespace dcngan {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
inline T pixel(const T* plane, int height, int width, int y, int x) {
  return (y >= 0 && y < height && x >= 0 && x < width) ? plane[static_cast<std::size_t>(y) * width + x] : T(0);
}

// Corner layout of one bilinear sample.
template <typename T>
struct Corners {
  int y0, x0;
  T ly, lx;
};

template <typename T>
inline Corners<T> corners(T y, T x) {
  const T fy = std::floor(y), fx = std::floor(x);
  return {static_cast<int>(fy), static_cast<int>(fx), y - fy, x - fx};
}

template <typename T>
inline T sample(const T* plane, int height, int width, T y, T x) {
  // Entirely outside: every neighbour is padding.
  if (!(y > T(-1) && y < T(height) && x > T(-1) && x < T(width))) return T(0);
  const auto c = corners(y, x);
  const T v00 = pixel(plane, height, width, c.y0, c.x0);
  const T v01 = pixel(plane, height, width, c.y0, c.x0 + 1);
  const T v10 = pixel(plane, height, width, c.y0 + 1, c.x0);
  const T v11 = pixel(plane, height, width, c.y0 + 1, c.x0 + 1);
  return (T(1) - c.ly) * ((T(1) - c.lx) * v00 + c.lx * v01) + c.ly * ((T(1) - c.lx) * v10 + c.lx * v11);
}

}  // namespace

template <typename T>
OffsetField<T>::OffsetField(Var<T> offsets) : offsets_(std::move(offsets)) {
  const auto& s = offsets_.shape();
  if (s.size() != 4 || s[1] != kOffsetChannels) {
    throw ShapeError("offset field must be [N, " + std::to_string(kOffsetChannels) + ", H, W], got " + shape_str(s));
  }
  for (T v : offsets_.value().values()) {
    if (!std::isfinite(v)) throw ShapeError("offset field contains a non-finite value");
  }
}

template <typename T>
T bilinear_sample(std::span<const T> plane, int height, int width, T y, T x) {
  if (plane.size() != static_cast<std::size_t>(height) * width) throw ShapeError("bilinear_sample: plane size");
  return sample(plane.data(), height, width, y, x);
}

template <typename T>
BilinearSample<T> bilinear_sample_with_grad(std::span<const T> plane, int height, int width, T y, T x) {
  if (plane.size() != static_cast<std::size_t>(height) * width) throw ShapeError("bilinear_sample: plane size");
  const T* p = plane.data();
  const auto c = corners(y, x);
  const T v00 = pixel(p, height, width, c.y0, c.x0);
  const T v01 = pixel(p, height, width, c.y0, c.x0 + 1);
  const T v10 = pixel(p, height, width, c.y0 + 1, c.x0);
  const T v11 = pixel(p, height, width, c.y0 + 1, c.x0 + 1);
  return {(T(1) - c.ly) * ((T(1) - c.lx) * v00 + c.lx * v01) + c.ly * ((T(1) - c.lx) * v10 + c.lx * v11),
          (T(1) - c.lx) * (v10 - v00) + c.lx * (v11 - v01), (T(1) - c.ly) * (v01 - v00) + c.ly * (v11 - v10)};
}

template <typename T>
Var<T> deformable_conv(const Var<T>& planes, const Var<T>& offsets, const Var<T>& weight, const Var<T>& bias) {
  const auto& ps = planes.shape();
  const auto& os = offsets.shape();
  const auto& ws = weight.shape();
  if (ps.size() != 4 || os.size() != 4 || ws.size() != 4) throw ShapeError("deformable_conv: expected rank-4 tensors");
  const int n = ps[0], np = ps[1], h = ps[2], w = ps[3];
  const int co = ws[0], k = ws[2];
  if (ws[1] != np || ws[3] != k || k % 2 == 0) {
    throw ShapeError("deformable_conv: weight " + shape_str(ws) + " incompatible with planes " + shape_str(ps));
  }
  if (os[0] != n || os[1] != np * kSpatialAxes * k * k || os[2] != h || os[3] != w) {
    throw ShapeError("deformable_conv: offsets " + shape_str(os) + " incompatible with planes " + shape_str(ps));
  }
  if (bias.defined() && bias.shape() != Shape{co}) throw ShapeError("deformable_conv: bias " + shape_str(bias.shape()));

  const int taps = k * k, pad = k / 2;
  const int rows = np * taps;
  const std::size_t hw = static_cast<std::size_t>(h) * w;

  // Sampled columns [rows, H*W] for one batch item.
  auto build_columns = [=](const T* img, const T* off, T* col) {
    for (int t = 0; t < np; ++t) {
      const T* plane = img + static_cast<std::size_t>(t) * hw;
      for (int tap = 0; tap < taps; ++tap) {
        const int ky = tap / k - pad, kx = tap % k - pad;
        const T* dy = off + static_cast<std::size_t>((t * taps + tap) * 2) * hw;
        const T* dx = dy + hw;
        T* row = col + static_cast<std::size_t>(t * taps + tap) * hw;
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            row[i] = sample(plane, h, w, T(y + ky) + dy[i], T(x + kx) + dx[i]);
          }
        }
      }
    }
  };

  Tensor<T> out({n, co, h, w});
  std::vector<T> col(static_cast<std::size_t>(rows) * hw);
  Eigen::Map<const MatRM<T>> wm(weight.value().data(), co, rows);
  for (int b = 0; b < n; ++b) {
    build_columns(planes.value().data() + static_cast<std::size_t>(b) * np * hw,
                  offsets.value().data() + static_cast<std::size_t>(b) * os[1] * hw, col.data());
    Eigen::Map<MatRM<T>> om(out.data() + static_cast<std::size_t>(b) * co * hw, co, static_cast<Eigen::Index>(hw));
    om.noalias() = wm * Eigen::Map<const MatRM<T>>(col.data(), rows, static_cast<Eigen::Index>(hw));
    if (bias.defined()) {
      for (int o = 0; o < co; ++o) om.row(o).array() += bias.value()[static_cast<std::size_t>(o)];
    }
  }

  std::vector<Var<T>> parents{planes, offsets, weight};
  if (bias.defined()) parents.push_back(bias);
  return make_result<T>(std::move(out), std::move(parents), [=](Node<T>& self) {
    const auto& pv = self.parents[0]->value;
    const auto& ov = self.parents[1]->value;
    const auto& wv = self.parents[2]->value;
    const bool g_planes = self.parents[0]->requires_grad;
    const bool g_off = self.parents[1]->requires_grad;
    const bool g_w = self.parents[2]->requires_grad;
    const bool g_b = self.parents.size() > 3 && self.parents[3]->requires_grad;
    const int off_ch = np * kSpatialAxes * taps;
    std::vector<T> col(static_cast<std::size_t>(rows) * hw);
    std::vector<T> gcol(col.size());
    Eigen::Map<const MatRM<T>> wm(wv.data(), co, rows);
    for (int b = 0; b < n; ++b) {
      const T* img = pv.data() + static_cast<std::size_t>(b) * np * hw;
      const T* off = ov.data() + static_cast<std::size_t>(b) * off_ch * hw;
      Eigen::Map<const MatRM<T>> gom(self.grad.data() + static_cast<std::size_t>(b) * co * hw, co,
                                     static_cast<Eigen::Index>(hw));
      if (g_w) {
        build_columns(img, off, col.data());
        Eigen::Map<MatRM<T>>(self.parents[2]->grad_ref().data(), co, rows).noalias() +=
            gom * Eigen::Map<const MatRM<T>>(col.data(), rows, static_cast<Eigen::Index>(hw)).transpose();
      }
      if (g_b) {
        auto& gb = self.parents[3]->grad_ref();
        for (int o = 0; o < co; ++o) {
          const T* g = gom.data() + static_cast<std::size_t>(o) * hw;
          gb[static_cast<std::size_t>(o)] += std::accumulate(g, g + hw, T(0));
        }
      }
      if (!g_planes && !g_off) continue;
      Eigen::Map<MatRM<T>>(gcol.data(), rows, static_cast<Eigen::Index>(hw)).noalias() = wm.transpose() * gom;
      T* gimg = g_planes ? self.parents[0]->grad_ref().data() + static_cast<std::size_t>(b) * np * hw : nullptr;
      T* goff = g_off ? self.parents[1]->grad_ref().data() + static_cast<std::size_t>(b) * off_ch * hw : nullptr;
      for (int t = 0; t < np; ++t) {
        const T* plane = img + static_cast<std::size_t>(t) * hw;
        T* gplane = gimg ? gimg + static_cast<std::size_t>(t) * hw : nullptr;
        for (int tap = 0; tap < taps; ++tap) {
          const int ky = tap / k - pad, kx = tap % k - pad;
          const std::size_t dy_ch = static_cast<std::size_t>((t * taps + tap) * 2);
          const T* dy = off + dy_ch * hw;
          const T* dx = dy + hw;
          const T* grow = gcol.data() + static_cast<std::size_t>(t * taps + tap) * hw;
          for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
              const std::size_t i = static_cast<std::size_t>(y) * w + x;
              const T g = grow[i];
              if (g == T(0)) continue;
              const T sy = T(y + ky) + dy[i], sx = T(x + kx) + dx[i];
              if (!(sy > T(-1) && sy < T(h) && sx > T(-1) && sx < T(w))) continue;
              const auto c = corners(sy, sx);
              if (gplane) {
                const T wts[4] = {(T(1) - c.ly) * (T(1) - c.lx), (T(1) - c.ly) * c.lx, c.ly * (T(1) - c.lx),
                                  c.ly * c.lx};
                const int cy[4] = {c.y0, c.y0, c.y0 + 1, c.y0 + 1};
                const int cx[4] = {c.x0, c.x0 + 1, c.x0, c.x0 + 1};
                for (int q = 0; q < 4; ++q) {
                  if (cy[q] >= 0 && cy[q] < h && cx[q] >= 0 && cx[q] < w) {
                    gplane[static_cast<std::size_t>(cy[q]) * w + cx[q]] += g * wts[q];
                  }
                }
              }
              if (goff) {
                const T v00 = pixel(plane, h, w, c.y0, c.x0);
                const T v01 = pixel(plane, h, w, c.y0, c.x0 + 1);
                const T v10 = pixel(plane, h, w, c.y0 + 1, c.x0);
                const T v11 = pixel(plane, h, w, c.y0 + 1, c.x0 + 1);
                goff[dy_ch * hw + i] += g * ((T(1) - c.lx) * (v10 - v00) + c.lx * (v11 - v01));
                goff[(dy_ch + 1) * hw + i] += g * ((T(1) - c.ly) * (v01 - v00) + c.ly * (v11 - v10));
              }
            }
          }
        }
      }
    }
  });
}

template class OffsetField<float>;
template class OffsetField<double>;
template float bilinear_sample(std::span<const float>, int, int, float, float);
template double bilinear_sample(std::span<const double>, int, int, double, double);
template BilinearSample<float> bilinear_sample_with_grad(std::span<const float>, int, int, float, float);
template BilinearSample<double> bilinear_sample_with_grad(std::span<const double>, int, int, double, double);
template Var<float> deformable_conv(const Var<float>&, const Var<float>&, const Var<float>&, const Var<float>&);
template Var<double> deformable_conv(const Var<double>&, const Var<double>&, const Var<double>&,
                                     const Var<double>&);

}  // namespace dcngan
