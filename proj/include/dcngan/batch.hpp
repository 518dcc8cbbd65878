#pragma once

#include <vector>

#include "dcngan/frames.hpp"
#include "dcngan/tensor.hpp"

namespace dcngan {

// [N, 3, H, W] with planes (prev, curr, next).
template <typename T>
Tensor<T> stack_triplets(const std::vector<const FrameTriplet*>& triplets);

// [N, 1, H, W]
template <typename T>
Tensor<T> stack_frames(const std::vector<const LumaFrame*>& frames);

// [N, |Q|]
template <typename T>
Tensor<T> stack_qp_codes(const std::vector<const QPCode*>& codes);

// Plane (n, c) of an NCHW tensor as a frame, clamped to [0,1].
template <typename T>
LumaFrame to_frame(const Tensor<T>& t, int n = 0, int c = 0);

}  // namespace dcngan
