#pragma once

#include <vector>

#include "dcngan/align.hpp"
#include "dcngan/frames.hpp"

namespace dcngan {

// Dense displacement field: frame content at p is taken from p + (dy, dx).
struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<float> dy;
  std::vector<float> dx;

  FlowField() = default;
  FlowField(int h, int w) : height(h), width(w), dy(static_cast<std::size_t>(h) * w), dx(dy.size()) {}
  float dy_at(int y, int x) const { return dy[static_cast<std::size_t>(y) * width + x]; }
  float dx_at(int y, int x) const { return dx[static_cast<std::size_t>(y) * width + x]; }
};

struct FlowOptions {
  int levels = 3;
  int iterations = 3;
  int window_radius = 2;
  double regularization = 1e-4;
};

// Coarse-to-fine Lucas-Kanade: per level, warp src by the current estimate
// and solve the windowed 2x2 normal equations for an increment. The result
// satisfies dst(p) ~ src(p + flow(p)).
FlowField estimate_flow(const LumaFrame& src, const LumaFrame& dst, const FlowOptions& options = {});

// Backward warp: out(p) = bilinear sample of frame at p + flow(p), zero outside.
LumaFrame warp(const LumaFrame& frame, const FlowField& flow);

// Pairwise optical-flow alignment: prev and next are each warped onto curr
// and the (warped_prev, curr, warped_next) stack is lifted to C_a channels by
// one 3x3 convolution, matching the deformable aligner's output shape.
template <typename T>
class FlowAligner final : public Aligner<T> {
 public:
  FlowAligner(int channels, int levels, int iterations, nn::Rng& rng);

  Var<T> align(const Var<T>& planes, nn::Mode mode) override;
  void collect(nn::ParamList<T>& out, const std::string& prefix) override;
  int channels() const override { return lift_.out_channels(); }

  // The warped 3-plane stack before the lifting convolution.
  Tensor<T> aligned_stack(const Tensor<T>& planes) const;

 private:
  nn::Conv2d<T> lift_;
  FlowOptions options_;
};

}  // namespace dcngan
