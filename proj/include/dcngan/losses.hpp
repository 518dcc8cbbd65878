#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "dcngan/config.hpp"
#include "dcngan/discriminator.hpp"
#include "dcngan/nn.hpp"

namespace dcngan {

// Least-squares adversarial terms. D is trained towards real -> 1, fake -> 0;
// G towards fake -> 1.
template <typename T>
Var<T> gan_loss_d(const PatchScoreMap<T>& real, const PatchScoreMap<T>& fake);
template <typename T>
Var<T> gan_loss_g(const PatchScoreMap<T>& fake);

// Fixed feature extractor for the perceptual loss. Input is luminance
// [N, 1, H, W] in [0,1]; output is one tensor per selected layer.
template <typename T>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<Var<T>> features(const Var<T>& luma) const = 0;
  virtual int min_input_size() const { return 1; }
};

// f(x) = x, single layer.
template <typename T>
class IdentityExtractor final : public FeatureExtractor<T> {
 public:
  std::vector<Var<T>> features(const Var<T>& luma) const override { return {luma}; }
};

// 19-layer VGG convolutional trunk (stages of 2, 2, 4, 4, 4 conv3x3+ReLU
// separated by 2x2 max pooling). Luminance is replicated to three channels
// and normalized with the ImageNet mean/std before the first layer.
// Parameters never require gradients.
template <typename T>
class Vgg19Extractor final : public FeatureExtractor<T> {
 public:
  static constexpr int kConvLayers = 16;

  explicit Vgg19Extractor(const VggConfig& config);

  std::vector<Var<T>> features(const Var<T>& luma) const override;
  int min_input_size() const override { return 16; }

  // Archive tensors named features.<i>.weight / features.<i>.bias, i being
  // the layer's index in the torchvision `features` sequence.
  void load_weights(const std::filesystem::path& path);
  const VggConfig& config() const { return config_; }
  bool pretrained() const { return pretrained_; }
  static std::vector<int> torchvision_indices();

 private:
  VggConfig config_;
  std::vector<nn::Conv2d<T>> convs_;
  bool pretrained_ = false;
};

// Builds the extractor for `config`, loading weights when a path is set;
// logs a notice when falling back to seeded random weights.
template <typename T>
std::unique_ptr<Vgg19Extractor<T>> make_vgg(const VggConfig& config);

// sum_i mean_j |f_i(x) - f_i(x_hat)|; x is treated as a constant target.
template <typename T>
Var<T> vgg_loss(const Var<T>& x, const Var<T>& x_hat, const FeatureExtractor<T>& extractor);

// sum_i mean_j |g_i(x) - g_i(x_hat)|; real features are detached.
template <typename T>
Var<T> fm_loss(const FeatureStack<T>& real, const FeatureStack<T>& fake);

struct LossWeights {
  double gan = 1.0;
  double vgg = 1.0;
  double fm = 1.0;
};

// Weighted sum of the generator terms (unit weights by default). Throws
// TrainingDivergenceError naming the first non-finite term.
template <typename T>
Var<T> total_g_loss(const Var<T>& l_gan_g, const Var<T>& l_vgg, const Var<T>& l_fm, const LossWeights& weights = {});

struct LossReport {
  double l_gan_g = 0;
  double l_gan_d = 0;
  double l_vgg = 0;
  double l_fm = 0;
  double total_g = 0;

  bool operator==(const LossReport&) const = default;
};

}  // namespace dcngan
