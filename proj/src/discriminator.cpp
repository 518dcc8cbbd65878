#include "dcngan/discriminator.hpp"

namespace dcngan {

namespace {

constexpr int kStrides[Discriminator<float>::kLayers] = {2, 2, 2, 1};

int conv_out(int in, int stride) { return (in + 2 - 4) / stride + 1; }

}  // namespace

template <typename T>
T PatchScoreMap<T>::mean() const {
  return ops::mean(scores).item();
}

template <typename T>
Discriminator<T>::Discriminator(int base, std::uint64_t seed) {
  nn::Rng rng(seed);
  int in = 1;
  for (int l = 0; l < kLayers; ++l) {
    const int out = base << l;
    convs_.emplace_back(in, out, 4, kStrides[l], 1, rng);
    if (l > 0) norms_.emplace_back(out);
    in = out;
  }
  head_ = nn::Conv2d<T>(in, 1, 4, 1, 1, rng);
}

template <typename T>
int Discriminator<T>::score_size(int input_size) {
  int s = input_size;
  for (int stride : kStrides) {
    if (s + 2 < 4) return 0;
    s = conv_out(s, stride);
  }
  return s + 2 < 4 ? 0 : conv_out(s, 1);
}

template <typename T>
int Discriminator<T>::min_input_size() {
  int s = 1;
  while (score_size(s) < 1) ++s;
  return s;
}

template <typename T>
DiscriminatorOutput<T> Discriminator<T>::forward(const Var<T>& frames) const {
  if (frames.shape().size() != 4 || frames.dim(1) != 1) {
    throw ShapeError("discriminator expects [N, 1, H, W], got " + shape_str(frames.shape()));
  }
  if (score_size(frames.dim(2)) < 1 || score_size(frames.dim(3)) < 1) {
    throw InputTooSmallError("discriminator input " + shape_str(frames.shape()) + " is smaller than the minimum " +
                             std::to_string(min_input_size()) + "x" + std::to_string(min_input_size()));
  }
  DiscriminatorOutput<T> out;
  Var<T> x = frames;
  for (int l = 0; l < kLayers; ++l) {
    x = convs_[static_cast<std::size_t>(l)](x);
    if (l > 0) x = norms_[static_cast<std::size_t>(l - 1)](x);
    x = nn::lrelu(x);
    out.features.layers.push_back(x);
  }
  out.scores.scores = head_(x);
  return out;
}

template <typename T>
nn::ParamList<T> Discriminator<T>::parameters() {
  nn::ParamList<T> out;
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    convs_[l].collect(out, "conv" + std::to_string(l));
    if (l > 0) norms_[l - 1].collect(out, "norm" + std::to_string(l));
  }
  head_.collect(out, "head");
  return out;
}

template struct PatchScoreMap<float>;
template struct PatchScoreMap<double>;
template class Discriminator<float>;
template class Discriminator<double>;

}  // namespace dcngan
