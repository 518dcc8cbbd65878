#include "dcngan/losses.hpp"

#include <algorithm>
#include <cmath>
#include <spdlog/spdlog.h>

#include "dcngan/archive.hpp"

namespace dcngan {

template <typename T>
Var<T> gan_loss_d(const PatchScoreMap<T>& real, const PatchScoreMap<T>& fake) {
  return ops::add(ops::mean_squared_error_to(real.scores, T(1)), ops::mean_squared_error_to(fake.scores, T(0)));
}

template <typename T>
Var<T> gan_loss_g(const PatchScoreMap<T>& fake) {
  return ops::mean_squared_error_to(fake.scores, T(1));
}

namespace {

constexpr int kStageWidths[5] = {64, 128, 256, 512, 512};
constexpr int kStageConvs[5] = {2, 2, 4, 4, 4};
constexpr double kImageNetMean[3] = {0.485, 0.456, 0.406};
constexpr double kImageNetStd[3] = {0.229, 0.224, 0.225};

}  // namespace

template <typename T>
std::vector<int> Vgg19Extractor<T>::torchvision_indices() {
  std::vector<int> out;
  int index = 0;
  for (int s = 0; s < 5; ++s) {
    for (int c = 0; c < kStageConvs[s]; ++c) {
      out.push_back(index);
      index += 2;  // conv, relu
    }
    index += 1;  // pool
  }
  return out;
}

template <typename T>
Vgg19Extractor<T>::Vgg19Extractor(const VggConfig& config) : config_(config) {
  config_.validate();
  nn::Rng rng(config_.seed);
  int in = 3;
  for (int s = 0; s < 5; ++s) {
    const int width = std::max(1, kStageWidths[s] / config_.width_divisor);
    for (int c = 0; c < kStageConvs[s]; ++c) {
      convs_.emplace_back(in, width, 3, 1, 1, rng);
      convs_.back().weight.set_requires_grad(false);
      convs_.back().bias.set_requires_grad(false);
      in = width;
    }
  }
}

template <typename T>
void Vgg19Extractor<T>::load_weights(const std::filesystem::path& path) {
  const TensorArchive archive = read_archive(path);
  const auto indices = torchvision_indices();
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    const std::string base = "features." + std::to_string(indices[i]);
    convs_[i].weight.mutable_value() = archive.get(base + ".weight", convs_[i].weight.shape()).template cast<T>();
    convs_[i].bias.mutable_value() = archive.get(base + ".bias", convs_[i].bias.shape()).template cast<T>();
  }
  pretrained_ = true;
}

template <typename T>
std::vector<Var<T>> Vgg19Extractor<T>::features(const Var<T>& luma) const {
  if (luma.shape().size() != 4 || luma.dim(1) != 1) {
    throw ShapeError("feature extractor expects [N, 1, H, W], got " + shape_str(luma.shape()));
  }
  if (luma.dim(2) < min_input_size() || luma.dim(3) < min_input_size()) {
    throw InputTooSmallError("feature extractor needs at least 16x16 input, got " + shape_str(luma.shape()));
  }
  std::vector<T> mul(3), add(3);
  for (int c = 0; c < 3; ++c) {
    mul[static_cast<std::size_t>(c)] = static_cast<T>(1.0 / kImageNetStd[c]);
    add[static_cast<std::size_t>(c)] = static_cast<T>(-kImageNetMean[c] / kImageNetStd[c]);
  }
  Var<T> x = ops::channel_affine(ops::replicate_channels(luma, 3), mul, add);
  std::vector<Var<T>> out;
  const int last = config_.layer_ids.back();
  int layer = 0;
  for (int s = 0; s < 5 && layer <= last; ++s) {
    if (s > 0) x = ops::max_pool2x2(x);
    for (int c = 0; c < kStageConvs[s] && layer <= last; ++c, ++layer) {
      x = ops::relu(convs_[static_cast<std::size_t>(layer)](x));
      if (std::find(config_.layer_ids.begin(), config_.layer_ids.end(), layer) != config_.layer_ids.end()) {
        out.push_back(x);
      }
    }
  }
  return out;
}

template <typename T>
std::unique_ptr<Vgg19Extractor<T>> make_vgg(const VggConfig& config) {
  auto vgg = std::make_unique<Vgg19Extractor<T>>(config);
  if (!config.weights_path.empty()) {
    vgg->load_weights(config.weights_path);
  } else {
    spdlog::warn("no --vgg-weights given: perceptual features use a seeded random extractor (seed {}, width 1/{})",
                 config.seed, config.width_divisor);
  }
  return vgg;
}

template <typename T>
Var<T> vgg_loss(const Var<T>& x, const Var<T>& x_hat, const FeatureExtractor<T>& extractor) {
  require_same_shape(x.shape(), x_hat.shape(), "vgg_loss");
  std::vector<Var<T>> target;
  {
    NoGradGuard no_grad;
    target = extractor.features(x.detach());
  }
  const auto pred = extractor.features(x_hat);
  Var<T> total;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    Var<T> term = ops::mean_abs_diff(pred[i], target[i]);
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

template <typename T>
Var<T> fm_loss(const FeatureStack<T>& real, const FeatureStack<T>& fake) {
  if (real.layers.size() != fake.layers.size() || real.layers.empty()) {
    throw ShapeError("fm_loss: feature stacks differ in length or are empty");
  }
  Var<T> total;
  for (std::size_t i = 0; i < real.layers.size(); ++i) {
    Var<T> term = ops::mean_abs_diff(fake.layers[i], real.layers[i].detach());
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

template <typename T>
Var<T> total_g_loss(const Var<T>& l_gan_g, const Var<T>& l_vgg, const Var<T>& l_fm, const LossWeights& weights) {
  const std::pair<const char*, const Var<T>*> terms[] = {{"l_gan_g", &l_gan_g}, {"l_vgg", &l_vgg}, {"l_fm", &l_fm}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v->item())) {
      throw TrainingDivergenceError(std::string("non-finite generator loss term ") + name);
    }
  }
  return ops::add(ops::add(ops::scale(l_gan_g, static_cast<T>(weights.gan)), ops::scale(l_vgg, static_cast<T>(weights.vgg))),
                  ops::scale(l_fm, static_cast<T>(weights.fm)));
}

template Var<float> gan_loss_d(const PatchScoreMap<float>&, const PatchScoreMap<float>&);
template Var<double> gan_loss_d(const PatchScoreMap<double>&, const PatchScoreMap<double>&);
template Var<float> gan_loss_g(const PatchScoreMap<float>&);
template Var<double> gan_loss_g(const PatchScoreMap<double>&);
template class Vgg19Extractor<float>;
template class Vgg19Extractor<double>;
template std::unique_ptr<Vgg19Extractor<float>> make_vgg(const VggConfig&);
template std::unique_ptr<Vgg19Extractor<double>> make_vgg(const VggConfig&);
template Var<float> vgg_loss(const Var<float>&, const Var<float>&, const FeatureExtractor<float>&);
template Var<double> vgg_loss(const Var<double>&, const Var<double>&, const FeatureExtractor<double>&);
template Var<float> fm_loss(const FeatureStack<float>&, const FeatureStack<float>&);
template Var<double> fm_loss(const FeatureStack<double>&, const FeatureStack<double>&);
template Var<float> total_g_loss(const Var<float>&, const Var<float>&, const Var<float>&, const LossWeights&);
template Var<double> total_g_loss(const Var<double>&, const Var<double>&, const Var<double>&, const LossWeights&);

}  // namespace dcngan
