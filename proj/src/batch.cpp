#include "dcngan/batch.hpp"

#include <algorithm>
#include <cmath>

namespace dcngan {

template <typename T>
Tensor<T> stack_triplets(const std::vector<const FrameTriplet*>& triplets) {
  if (triplets.empty()) throw EmptyInputError("no triplets to stack");
  const int h = triplets[0]->height(), w = triplets[0]->width();
  Tensor<T> out({static_cast<int>(triplets.size()), 3, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t n = 0; n < triplets.size(); ++n) {
    const auto* t = triplets[n];
    if (t->height() != h || t->width() != w) throw ShapeError("triplets in a batch differ in size");
    const LumaFrame* frames[3] = {&t->prev, &t->curr, &t->next};
    for (int c = 0; c < 3; ++c) {
      std::copy(frames[c]->pixels().begin(), frames[c]->pixels().end(), out.data() + (n * 3 + c) * plane);
    }
  }
  return out;
}

template <typename T>
Tensor<T> stack_frames(const std::vector<const LumaFrame*>& frames) {
  if (frames.empty()) throw EmptyInputError("no frames to stack");
  const int h = frames[0]->height(), w = frames[0]->width();
  Tensor<T> out({static_cast<int>(frames.size()), 1, h, w});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t n = 0; n < frames.size(); ++n) {
    if (!frames[n]->same_size(*frames[0])) throw ShapeError("frames in a batch differ in size");
    std::copy(frames[n]->pixels().begin(), frames[n]->pixels().end(), out.data() + n * plane);
  }
  return out;
}

template <typename T>
Tensor<T> stack_qp_codes(const std::vector<const QPCode*>& codes) {
  if (codes.empty()) throw EmptyInputError("no QP codes to stack");
  const int len = static_cast<int>(codes[0]->length());
  Tensor<T> out({static_cast<int>(codes.size()), len});
  for (std::size_t n = 0; n < codes.size(); ++n) {
    if (static_cast<int>(codes[n]->length()) != len) throw ShapeError("QP codes in a batch differ in length");
    for (int i = 0; i < len; ++i) out[n * len + i] = static_cast<T>(codes[n]->onehot()[static_cast<std::size_t>(i)]);
  }
  return out;
}

template <typename T>
LumaFrame to_frame(const Tensor<T>& t, int n, int c) {
  if (t.rank() != 4) throw ShapeError("to_frame expects an NCHW tensor, got " + shape_str(t.shape()));
  const int h = t.dim(2), w = t.dim(3);
  std::vector<float> pixels(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const T v = t.at(n, c, y, x);
      pixels[static_cast<std::size_t>(y) * w + x] = std::isfinite(v) ? static_cast<float>(std::clamp<T>(v, 0, 1)) : 0.f;
    }
  }
  return LumaFrame(h, w, std::move(pixels));
}

template Tensor<float> stack_triplets(const std::vector<const FrameTriplet*>&);
template Tensor<double> stack_triplets(const std::vector<const FrameTriplet*>&);
template Tensor<float> stack_frames(const std::vector<const LumaFrame*>&);
template Tensor<double> stack_frames(const std::vector<const LumaFrame*>&);
template Tensor<float> stack_qp_codes(const std::vector<const QPCode*>&);
template Tensor<double> stack_qp_codes(const std::vector<const QPCode*>&);
template LumaFrame to_frame(const Tensor<float>&, int, int);
template LumaFrame to_frame(const Tensor<double>&, int, int);

}  // namespace dcngan
