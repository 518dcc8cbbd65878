#include "dcngan/flow.hpp"

#include <algorithm>
#include <cmath>

namespace dcngan {

namespace {

struct Plane {
  int h = 0, w = 0;
  std::vector<float> v;

  Plane() = default;
  Plane(int height, int width) : h(height), w(width), v(static_cast<std::size_t>(height) * width) {}
  float& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  float at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
  float clamped(int y, int x) const { return at(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)); }
};

Plane from_frame(const LumaFrame& f) {
  Plane p(f.height(), f.width());
  std::copy(f.pixels().begin(), f.pixels().end(), p.v.begin());
  return p;
}

// Bilinear sample with edge clamping; used inside the estimator only.
float sample_clamped(const Plane& p, float y, float x) {
  y = std::clamp(y, 0.0f, static_cast<float>(p.h - 1));
  x = std::clamp(x, 0.0f, static_cast<float>(p.w - 1));
  const int y0 = std::min(static_cast<int>(y), p.h - 1), x0 = std::min(static_cast<int>(x), p.w - 1);
  const int y1 = std::min(y0 + 1, p.h - 1), x1 = std::min(x0 + 1, p.w - 1);
  const float ly = y - y0, lx = x - x0;
  return (1 - ly) * ((1 - lx) * p.at(y0, x0) + lx * p.at(y0, x1)) + ly * ((1 - lx) * p.at(y1, x0) + lx * p.at(y1, x1));
}

// 5-tap binomial blur then 2x decimation.
Plane downsample(const Plane& p) {
  static constexpr float k[5] = {1 / 16.f, 4 / 16.f, 6 / 16.f, 4 / 16.f, 1 / 16.f};
  Plane tmp(p.h, p.w);
  for (int y = 0; y < p.h; ++y) {
    for (int x = 0; x < p.w; ++x) {
      float s = 0;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * p.clamped(y, x + i);
      tmp.at(y, x) = s;
    }
  }
  Plane out(p.h / 2, p.w / 2);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      float s = 0;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * tmp.clamped(2 * y + i, 2 * x);
      out.at(y, x) = s;
    }
  }
  return out;
}

// Separable box sum of radius r with clamped borders.
Plane box_sum(const Plane& p, int r) {
  Plane tmp(p.h, p.w), out(p.h, p.w);
  for (int y = 0; y < p.h; ++y) {
    for (int x = 0; x < p.w; ++x) {
      float s = 0;
      for (int i = -r; i <= r; ++i) s += p.clamped(y, x + i);
      tmp.at(y, x) = s;
    }
  }
  for (int y = 0; y < p.h; ++y) {
    for (int x = 0; x < p.w; ++x) {
      float s = 0;
      for (int i = -r; i <= r; ++i) s += tmp.clamped(y + i, x);
      out.at(y, x) = s;
    }
  }
  return out;
}

void refine(const Plane& src, const Plane& dst, Plane& fy, Plane& fx, const FlowOptions& opt) {
  const int h = src.h, w = src.w;
  Plane warped(h, w);
  Plane iyy(h, w), ixy(h, w), ixx(h, w), iyr(h, w), ixr(h, w);
  for (int it = 0; it < opt.iterations; ++it) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) warped.at(y, x) = sample_clamped(src, y + fy.at(y, x), x + fx.at(y, x));
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Gradient of the mean of warped and target images.
        const float gy = 0.25f * (warped.clamped(y + 1, x) - warped.clamped(y - 1, x) + dst.clamped(y + 1, x) -
                                  dst.clamped(y - 1, x));
        const float gx = 0.25f * (warped.clamped(y, x + 1) - warped.clamped(y, x - 1) + dst.clamped(y, x + 1) -
                                  dst.clamped(y, x - 1));
        const float r = warped.at(y, x) - dst.at(y, x);
        iyy.at(y, x) = gy * gy;
        ixy.at(y, x) = gx * gy;
        ixx.at(y, x) = gx * gx;
        iyr.at(y, x) = gy * r;
        ixr.at(y, x) = gx * r;
      }
    }
    const Plane syy = box_sum(iyy, opt.window_radius), sxy = box_sum(ixy, opt.window_radius);
    const Plane sxx = box_sum(ixx, opt.window_radius), syr = box_sum(iyr, opt.window_radius);
    const Plane sxr = box_sum(ixr, opt.window_radius);
    const auto lambda = static_cast<float>(opt.regularization);
    for (std::size_t i = 0; i < fy.v.size(); ++i) {
      const float a = syy.v[i] + lambda, b = sxy.v[i], d = sxx.v[i] + lambda;
      const float det = a * d - b * b;
      if (!(det > 0)) continue;
      // A [dy dx]^T = -[syr sxr]^T
      const float ddy = -(d * syr.v[i] - b * sxr.v[i]) / det;
      const float ddx = -(a * sxr.v[i] - b * syr.v[i]) / det;
      fy.v[i] += std::clamp(ddy, -2.0f, 2.0f);
      fx.v[i] += std::clamp(ddx, -2.0f, 2.0f);
    }
  }
}

FlowField estimate_planes(const Plane& src, const Plane& dst, const FlowOptions& opt) {
  std::vector<Plane> sp{src}, dp{dst};
  for (int l = 1; l < opt.levels && sp.back().h >= 16 && sp.back().w >= 16; ++l) {
    sp.push_back(downsample(sp.back()));
    dp.push_back(downsample(dp.back()));
  }
  Plane fy(sp.back().h, sp.back().w), fx(sp.back().h, sp.back().w);
  for (int l = static_cast<int>(sp.size()) - 1; l >= 0; --l) {
    const auto& s = sp[static_cast<std::size_t>(l)];
    if (fy.h != s.h || fy.w != s.w) {
      Plane uy(s.h, s.w), ux(s.h, s.w);
      const float sy = static_cast<float>(fy.h) / s.h, sx = static_cast<float>(fy.w) / s.w;
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          const float cy = (y + 0.5f) * sy - 0.5f, cx = (x + 0.5f) * sx - 0.5f;
          uy.at(y, x) = sample_clamped(fy, cy, cx) / sy;
          ux.at(y, x) = sample_clamped(fx, cy, cx) / sx;
        }
      }
      fy = std::move(uy);
      fx = std::move(ux);
    }
    refine(s, dp[static_cast<std::size_t>(l)], fy, fx, opt);
  }
  FlowField out(src.h, src.w);
  out.dy = std::move(fy.v);
  out.dx = std::move(fx.v);
  return out;
}

Plane warp_plane(const Plane& p, const FlowField& flow) {
  Plane out(p.h, p.w);
  for (int y = 0; y < p.h; ++y) {
    for (int x = 0; x < p.w; ++x) {
      out.at(y, x) = bilinear_sample<float>(p.v, p.h, p.w, y + flow.dy_at(y, x), x + flow.dx_at(y, x));
    }
  }
  return out;
}

}  // namespace

FlowField estimate_flow(const LumaFrame& src, const LumaFrame& dst, const FlowOptions& options) {
  if (!src.same_size(dst)) throw ShapeError("estimate_flow: frames differ in size");
  if (options.levels < 1 || options.iterations < 1) throw ConfigError("flow levels and iterations must be >= 1");
  return estimate_planes(from_frame(src), from_frame(dst), options);
}

LumaFrame warp(const LumaFrame& frame, const FlowField& flow) {
  if (flow.height != frame.height() || flow.width != frame.width()) throw ShapeError("warp: flow size mismatch");
  Plane out = warp_plane(from_frame(frame), flow);
  for (float& v : out.v) v = std::clamp(v, 0.0f, 1.0f);
  return LumaFrame(out.h, out.w, std::move(out.v));
}

template <typename T>
FlowAligner<T>::FlowAligner(int channels, int levels, int iterations, nn::Rng& rng)
    : lift_(kTripletFrames, channels, 3, 1, 1, rng) {
  options_.levels = levels;
  options_.iterations = iterations;
}

template <typename T>
Tensor<T> FlowAligner<T>::aligned_stack(const Tensor<T>& planes) const {
  if (planes.rank() != 4 || planes.dim(1) != kTripletFrames) {
    throw ShapeError("flow alignment expects [N, 3, H, W], got " + shape_str(planes.shape()));
  }
  const int n = planes.dim(0), h = planes.dim(2), w = planes.dim(3);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor<T> out(planes.shape());
  for (int b = 0; b < n; ++b) {
    Plane frames[3];
    for (int c = 0; c < 3; ++c) {
      frames[c] = Plane(h, w);
      const T* src = planes.data() + (static_cast<std::size_t>(b) * 3 + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) frames[c].v[i] = static_cast<float>(src[i]);
    }
    const FlowField to_prev = estimate_planes(frames[0], frames[1], options_);
    const FlowField to_next = estimate_planes(frames[2], frames[1], options_);
    const Plane aligned[3] = {warp_plane(frames[0], to_prev), frames[1], warp_plane(frames[2], to_next)};
    for (int c = 0; c < 3; ++c) {
      T* dst = out.data() + (static_cast<std::size_t>(b) * 3 + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) dst[i] = static_cast<T>(aligned[c].v[i]);
    }
  }
  return out;
}

template <typename T>
Var<T> FlowAligner<T>::align(const Var<T>& planes, nn::Mode) {
  return lift_(Var<T>(aligned_stack(planes.value())));
}

template <typename T>
void FlowAligner<T>::collect(nn::ParamList<T>& out, const std::string& prefix) {
  lift_.collect(out, prefix + ".lift");
}

template class FlowAligner<float>;
template class FlowAligner<double>;

}  // namespace dcngan
