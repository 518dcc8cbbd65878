#pragma once

#include <span>

#include "dcngan/autograd.hpp"

namespace dcngan {

inline constexpr int kTripletFrames = 3;
inline constexpr int kDeformKernel = 3;
inline constexpr int kSpatialAxes = 2;
// One (vertical, horizontal) displacement per frame and kernel tap.
inline constexpr int kOffsetChannels = kTripletFrames * kSpatialAxes * kDeformKernel * kDeformKernel;
static_assert(kOffsetChannels == 54);

enum class Axis : int { kVertical = 0, kHorizontal = 1 };

// Channel of the displacement for (input plane, kernel tap k = ky*K + kx, axis).
constexpr int offset_channel(int plane, int tap, Axis axis, int kernel = kDeformKernel) {
  return (plane * kernel * kernel + tap) * kSpatialAxes + static_cast<int>(axis);
}

// Sampling displacements steering a deformable convolution, shape
// [N, planes*2*K*K, H, W] with the channel layout of offset_channel().
template <typename T>
class OffsetField {
 public:
  OffsetField() = default;
  // Throws ShapeError unless the tensor is [N, 54, H, W] and finite.
  explicit OffsetField(Var<T> offsets);

  const Var<T>& var() const { return offsets_; }
  const Tensor<T>& values() const { return offsets_.value(); }
  int channels() const { return offsets_.dim(1); }
  int height() const { return offsets_.dim(2); }
  int width() const { return offsets_.dim(3); }

 private:
  Var<T> offsets_;
};

template <typename T>
struct BilinearSample {
  T value;
  T d_y;  // derivative w.r.t. the vertical coordinate
  T d_x;
};

// Bilinear interpolation with zero padding outside [0,H)x[0,W). Integer
// coordinates fall in the cell whose top-left corner they are.
template <typename T>
T bilinear_sample(std::span<const T> plane, int height, int width, T y, T x);

template <typename T>
BilinearSample<T> bilinear_sample_with_grad(std::span<const T> plane, int height, int width, T y, T x);

// Deformable convolution (v1, no modulation masks), stride 1, output H x W.
//   planes  [N, P, H, W]
//   offsets [N, P*2*K*K, H, W]
//   weight  [C, P, K, K], bias [C] (may be undefined)
// out[o, p] = sum_{t,k} weight[o,t,k] * sample(planes_t, p + grid(k) + offset(t,k,p)) + bias[o]
template <typename T>
Var<T> deformable_conv(const Var<T>& planes, const Var<T>& offsets, const Var<T>& weight, const Var<T>& bias);

}  // namespace dcngan
