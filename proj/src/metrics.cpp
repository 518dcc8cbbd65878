#include "dcngan/metrics.hpp"

#include <cmath>

#include "dcngan/archive.hpp"
#include "dcngan/batch.hpp"

namespace dcngan {

double psnr(const LumaFrame& a, const LumaFrame& b) {
  if (!a.same_size(b)) throw ShapeError("psnr: frames differ in size");
  double sum = 0;
  const auto pa = a.pixels(), pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - pb[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(pa.size());
  if (mse == 0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

PerceptualMetric::PerceptualMetric(const VggConfig& config) : vgg_(make_vgg<float>(config)) {}

void PerceptualMetric::load_calibration(const std::filesystem::path& path) {
  const TensorArchive archive = read_archive(path);
  const auto probe = vgg_->features(Var<float>(Tensor<float>({1, 1, 16, 16})));
  channel_weights_.clear();
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const Tensor<float>& w = archive.get("lin" + std::to_string(i) + ".weight", {probe[i].dim(1)});
    for (float v : w.values()) {
      if (!(v >= 0) || !std::isfinite(v)) throw CheckpointError("calibration weights must be finite and >= 0");
    }
    channel_weights_.push_back(w);
  }
}

double PerceptualMetric::distance(const LumaFrame& a, const LumaFrame& b) const {
  if (!a.same_size(b)) throw ShapeError("perceptual distance: frames differ in size");
  NoGradGuard no_grad;
  const Var<float> va(stack_frames<float>({&a})), vb(stack_frames<float>({&b}));
  if (!calibrated()) return vgg_loss(va, vb, *vgg_).item();

  const auto fa = vgg_->features(va), fb = vgg_->features(vb);
  double total = 0;
  for (std::size_t l = 0; l < fa.size(); ++l) {
    const Tensor<float>& x = fa[l].value();
    const Tensor<float>& y = fb[l].value();
    const int c = x.dim(1);
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    double layer = 0;
    for (std::size_t p = 0; p < hw; ++p) {
      double nx = 0, ny = 0;
      for (int ch = 0; ch < c; ++ch) {
        nx += static_cast<double>(x[ch * hw + p]) * x[ch * hw + p];
        ny += static_cast<double>(y[ch * hw + p]) * y[ch * hw + p];
      }
      nx = std::sqrt(nx) + 1e-10;
      ny = std::sqrt(ny) + 1e-10;
      for (int ch = 0; ch < c; ++ch) {
        const double d = x[ch * hw + p] / nx - y[ch * hw + p] / ny;
        layer += channel_weights_[l][static_cast<std::size_t>(ch)] * d * d;
      }
    }
    total += layer / static_cast<double>(hw);
  }
  return total;
}

}  // namespace dcngan
