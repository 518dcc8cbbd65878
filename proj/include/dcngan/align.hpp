#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dcngan/config.hpp"
#include "dcngan/deform_conv.hpp"
#include "dcngan/nn.hpp"

namespace dcngan {

// Frame alignment stage of the generator: stacked triplet planes
// [N, 3, H, W] -> aligned features [N, C_a, H, W].
template <typename T>
class Aligner {
 public:
  virtual ~Aligner() = default;
  virtual Var<T> align(const Var<T>& planes, nn::Mode mode) = 0;
  virtual void collect(nn::ParamList<T>& out, const std::string& prefix) = 0;
  virtual int channels() const = 0;
};

// U-Net predicting the 54-channel offset field from the stacked triplet.
// Inputs whose sides are not multiples of 2^levels are reflect-padded and the
// result cropped back.
template <typename T>
class OffsetUNet {
 public:
  OffsetUNet(int base, int levels, nn::Rng& rng);

  OffsetField<T> operator()(const Var<T>& planes) const;
  void collect(nn::ParamList<T>& out, const std::string& prefix) const;
  nn::Conv2d<T>& head() { return head_; }
  int levels() const { return levels_; }

 private:
  struct Stage {
    nn::Conv2d<T> a, b;
  };
  struct UpStage {
    nn::Conv2d<T> reduce, fuse;
  };
  int levels_;
  Stage in_;
  std::vector<Stage> down_;
  std::vector<UpStage> up_;
  nn::Conv2d<T> head_;
};

// Offsets from the U-Net, then one deformable convolution fusing the three
// frames into a single feature map.
template <typename T>
class DeformableAligner final : public Aligner<T> {
 public:
  DeformableAligner(int channels, int unet_base, int unet_levels, nn::Rng& rng);

  Var<T> align(const Var<T>& planes, nn::Mode mode) override;
  void collect(nn::ParamList<T>& out, const std::string& prefix) override;
  int channels() const override { return dconv_weight_.dim(0); }

  OffsetField<T> predict_offsets(const Var<T>& planes) const { return unet_(planes); }
  const Var<T>& dconv_weight() const { return dconv_weight_; }
  const Var<T>& dconv_bias() const { return dconv_bias_; }
  OffsetUNet<T>& unet() { return unet_; }

 private:
  OffsetUNet<T> unet_;
  Var<T> dconv_weight_;  // [C_a, 3, 3, 3]
  Var<T> dconv_bias_;
};

// Builds the aligner selected by config.align_backend.
template <typename T>
std::unique_ptr<Aligner<T>> make_aligner(const ModelConfig& config, nn::Rng& rng);

}  // namespace dcngan
