#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "dcngan/config.hpp"
#include "dcngan/frames.hpp"
#include "dcngan/losses.hpp"

namespace dcngan {

// Reported in place of +inf for identical frames.
inline constexpr double kPsnrCapDb = 99.0;

// 10 log10(1 / MSE) for [0,1] frames, capped at kPsnrCapDb.
double psnr(const LumaFrame& a, const LumaFrame& b);

// Feature-space distance between two frames: the perceptual loss evaluated
// as a metric (unitless, >= 0, symmetric). Optional per-channel weights turn
// it into the learned-calibration form: per layer, unit-normalize features
// along channels, weight the squared difference per channel, average over
// space, sum over layers.
class PerceptualMetric {
 public:
  explicit PerceptualMetric(const VggConfig& config);
  // Archive of float tensors lin<i>.weight, one [C_i] vector per selected layer.
  void load_calibration(const std::filesystem::path& path);

  double distance(const LumaFrame& a, const LumaFrame& b) const;
  bool calibrated() const { return !channel_weights_.empty(); }
  const Vgg19Extractor<float>& extractor() const { return *vgg_; }

 private:
  std::unique_ptr<Vgg19Extractor<float>> vgg_;
  std::vector<Tensor<float>> channel_weights_;
};

}  // namespace dcngan
