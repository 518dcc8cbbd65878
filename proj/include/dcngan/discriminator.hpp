#pragma once

#include <cstdint>
#include <vector>

#include "dcngan/nn.hpp"

namespace dcngan {

// Raw (unsquashed) per-patch scores [N, 1, h, w].
template <typename T>
struct PatchScoreMap {
  Var<T> scores;
  T mean() const;
};

// Post-activation outputs of the selected discriminator layers, in order.
template <typename T>
struct FeatureStack {
  std::vector<Var<T>> layers;
};

template <typename T>
struct DiscriminatorOutput {
  PatchScoreMap<T> scores;
  FeatureStack<T> features;
};

// Fully convolutional patch discriminator: four k4 convolutions (stride 2, 2,
// 2, 1; widths base x1, x2, x4, x8), LeakyReLU(0.2), instance normalization
// from the second layer on, and a 1-channel k4 head.
template <typename T>
class Discriminator {
 public:
  static constexpr int kLayers = 4;

  Discriminator(int base, std::uint64_t seed);
  Discriminator(const Discriminator&) = delete;
  Discriminator& operator=(const Discriminator&) = delete;
  Discriminator(Discriminator&&) = default;
  Discriminator& operator=(Discriminator&&) = default;

  // frames [N, 1, H, W]; throws InputTooSmallError below min_input_size().
  DiscriminatorOutput<T> forward(const Var<T>& frames) const;
  PatchScoreMap<T> discriminate(const Var<T>& frames) const { return forward(frames).scores; }
  FeatureStack<T> extract_features(const Var<T>& frames) const { return forward(frames).features; }

  // Smallest square side that yields at least one patch score.
  static int min_input_size();
  // Score-grid side for an input side.
  static int score_size(int input_size);

  nn::ParamList<T> parameters();
  nn::Conv2d<T>& head() { return head_; }

 private:
  std::vector<nn::Conv2d<T>> convs_;
  std::vector<nn::InstanceNorm2d<T>> norms_;  // layers 1..3
  nn::Conv2d<T> head_;
};

}  // namespace dcngan
