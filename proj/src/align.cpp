#include "dcngan/align.hpp"

#include "dcngan/flow.hpp"

namespace dcngan {

template <typename T>
OffsetUNet<T>::OffsetUNet(int base, int levels, nn::Rng& rng) : levels_(levels) {
  in_ = {nn::Conv2d<T>(kTripletFrames, base, 3, 1, 1, rng), nn::Conv2d<T>(base, base, 3, 1, 1, rng)};
  for (int l = 0; l < levels; ++l) {
    const int cin = base << l, cout = base << (l + 1);
    down_.push_back({nn::Conv2d<T>(cin, cout, 3, 2, 1, rng), nn::Conv2d<T>(cout, cout, 3, 1, 1, rng)});
  }
  for (int l = 0; l < levels; ++l) {
    const int c = base << l;
    up_.push_back({nn::Conv2d<T>(2 * c, c, 3, 1, 1, rng), nn::Conv2d<T>(2 * c, c, 3, 1, 1, rng)});
  }
  head_ = nn::Conv2d<T>(base, kOffsetChannels, 3, 1, 1, rng);
  // Training starts from plain convolution sampling.
  head_.zero();
}

template <typename T>
OffsetField<T> OffsetUNet<T>::operator()(const Var<T>& planes) const {
  const int h = planes.dim(2), w = planes.dim(3);
  const int m = 1 << levels_;
  const int ph = (m - h % m) % m, pw = (m - w % m) % m;
  Var<T> x = (ph || pw) ? ops::reflect_pad(planes, 0, ph, 0, pw) : planes;

  x = nn::lrelu(in_.b(nn::lrelu(in_.a(x))));
  std::vector<Var<T>> skips{x};
  for (int l = 0; l < levels_; ++l) {
    const auto& s = down_[static_cast<std::size_t>(l)];
    x = nn::lrelu(s.b(nn::lrelu(s.a(x))));
    if (l + 1 < levels_) skips.push_back(x);
  }
  for (int l = levels_ - 1; l >= 0; --l) {
    const auto& s = up_[static_cast<std::size_t>(l)];
    x = nn::lrelu(s.reduce(ops::upsample_bilinear2x(x)));
    x = nn::lrelu(s.fuse(ops::concat_channels<T>({x, skips[static_cast<std::size_t>(l)]})));
  }
  Var<T> offsets = head_(x);
  if (ph || pw) offsets = ops::crop(offsets, 0, 0, h, w);
  return OffsetField<T>(offsets);
}

template <typename T>
void OffsetUNet<T>::collect(nn::ParamList<T>& out, const std::string& prefix) const {
  in_.a.collect(out, prefix + ".in.0");
  in_.b.collect(out, prefix + ".in.1");
  for (std::size_t l = 0; l < down_.size(); ++l) {
    down_[l].a.collect(out, prefix + ".down" + std::to_string(l) + ".0");
    down_[l].b.collect(out, prefix + ".down" + std::to_string(l) + ".1");
  }
  for (std::size_t l = 0; l < up_.size(); ++l) {
    up_[l].reduce.collect(out, prefix + ".up" + std::to_string(l) + ".reduce");
    up_[l].fuse.collect(out, prefix + ".up" + std::to_string(l) + ".fuse");
  }
  head_.collect(out, prefix + ".head");
}

template <typename T>
DeformableAligner<T>::DeformableAligner(int channels, int unet_base, int unet_levels, nn::Rng& rng)
    : unet_(unet_base, unet_levels, rng),
      dconv_weight_(nn::kaiming_uniform<T>({channels, kTripletFrames, kDeformKernel, kDeformKernel},
                                           kTripletFrames * kDeformKernel * kDeformKernel, rng),
                    true),
      dconv_bias_(Tensor<T>({channels}), true) {}

template <typename T>
Var<T> DeformableAligner<T>::align(const Var<T>& planes, nn::Mode) {
  if (planes.shape().size() != 4 || planes.dim(1) != kTripletFrames) {
    throw ShapeError("deformable alignment expects [N, 3, H, W], got " + shape_str(planes.shape()));
  }
  const auto offsets = predict_offsets(planes);
  return deformable_conv(planes, offsets.var(), dconv_weight_, dconv_bias_);
}

template <typename T>
void DeformableAligner<T>::collect(nn::ParamList<T>& out, const std::string& prefix) {
  unet_.collect(out, prefix + ".unet");
  out.add(prefix + ".dconv.weight", dconv_weight_);
  out.add(prefix + ".dconv.bias", dconv_bias_);
}

template <typename T>
std::unique_ptr<Aligner<T>> make_aligner(const ModelConfig& config, nn::Rng& rng) {
  if (config.align_backend == AlignBackend::kFlow) {
    return std::make_unique<FlowAligner<T>>(config.align_channels, config.flow_levels, config.flow_iterations, rng);
  }
  return std::make_unique<DeformableAligner<T>>(config.align_channels, config.unet_base, config.unet_levels, rng);
}

template class OffsetUNet<float>;
template class OffsetUNet<double>;
template class DeformableAligner<float>;
template class DeformableAligner<double>;
template std::unique_ptr<Aligner<float>> make_aligner(const ModelConfig&, nn::Rng&);
template std::unique_ptr<Aligner<double>> make_aligner(const ModelConfig&, nn::Rng&);

}  // namespace dcngan
