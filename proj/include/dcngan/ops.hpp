#pragma once

#include <vector>

#include "dcngan/autograd.hpp"

// Differentiable tensor operations. Image tensors are NCHW.
namespace dcngan::ops {

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T factor);
template <typename T> Var<T> add_scalar(const Var<T>& a, T offset);

// Mean over every element, as a one-element tensor.
template <typename T> Var<T> mean(const Var<T>& a);
// mean((a - target)^2) over every element.
template <typename T> Var<T> mean_squared_error_to(const Var<T>& a, T target);
// mean(|a - b|) over every element; subgradient 0 where a == b.
template <typename T> Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b);

// x[N,C,H,W] * s[N,C], broadcast over space.
template <typename T> Var<T> channel_scale(const Var<T>& x, const Var<T>& s);
// Per-channel constant affine map x * mul[c] + add[c].
template <typename T> Var<T> channel_affine(const Var<T>& x, const std::vector<T>& mul, const std::vector<T>& add);

// Cross-correlation with zero padding. `bias` may be undefined.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, int stride, int padding);
// x[N,F] -> [N,O] with weight[O,F], bias[O].
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

template <typename T> Var<T> leaky_relu(const Var<T>& x, T slope);
template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> sigmoid(const Var<T>& x);
template <typename T> Var<T> softplus(const Var<T>& x);

// Batch normalization over (N,H,W) per channel. In training mode the batch
// statistics are used and the running estimates are updated in place.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, Tensor<T>& running_mean,
                  Tensor<T>& running_var, bool training, T momentum, T eps);
// Normalization over (H,W) per sample and channel, with affine gamma/beta[C].
template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps);

// Bilinear x2 upsampling, half-pixel centers, edge clamped.
template <typename T> Var<T> upsample_bilinear2x(const Var<T>& x);
template <typename T> Var<T> max_pool2x2(const Var<T>& x);

// Mirror padding (edge sample not repeated); any pad width is accepted.
template <typename T> Var<T> reflect_pad(const Var<T>& x, int top, int bottom, int left, int right);
template <typename T> Var<T> crop(const Var<T>& x, int top, int left, int height, int width);

template <typename T> Var<T> concat_channels(const std::vector<Var<T>>& parts);
template <typename T> Var<T> slice_channels(const Var<T>& x, int first, int count);
// [N,1,H,W] -> [N,copies,H,W]
template <typename T> Var<T> replicate_channels(const Var<T>& x, int copies);

// Index into a mirrored extension of [0, n).
int reflect_index(int i, int n);

}  // namespace dcngan::ops
