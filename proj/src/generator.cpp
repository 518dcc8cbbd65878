#include "dcngan/generator.hpp"

#include <cmath>

#include "dcngan/batch.hpp"

namespace dcngan {

template <typename T>
ModulatedResBlock<T>::ModulatedResBlock(int channels, int qp_levels, nn::Rng& rng)
    : conv1(channels, channels, 3, 1, 1, rng),
      conv2(channels, channels, 3, 1, 1, rng),
      bn1(channels),
      bn2(channels),
      fc(qp_levels, channels, rng) {}

template <typename T>
Var<T> ModulatedResBlock<T>::operator()(const Var<T>& feat, const Var<T>& scales, nn::Mode mode,
                                        bool modulate_after_bn) {
  Var<T> h = conv1(feat);
  if (modulate_after_bn) {
    h = ops::channel_scale(bn1(h, mode), scales);
  } else {
    h = bn1(ops::channel_scale(h, scales), mode);
  }
  h = bn2(conv2(ops::relu(h)), mode);
  return ops::add(feat, h);
}

template <typename T>
void ModulatedResBlock<T>::collect(nn::ParamList<T>& out, const std::string& prefix, bool with_fc) {
  conv1.collect(out, prefix + ".conv1");
  bn1.collect(out, prefix + ".bn1");
  conv2.collect(out, prefix + ".conv2");
  bn2.collect(out, prefix + ".bn2");
  if (with_fc) fc.collect(out, prefix + ".qp_fc");
}

template <typename T>
Var<T> qp_scales(const Var<T>& codes, const nn::Linear<T>& fc) {
  return ops::softplus(fc(codes));
}

template <typename T>
Generator<T>::Generator(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  nn::Rng rng(seed);
  const int b = config_.enc_base, cr = config_.residual_channels();
  const int q = static_cast<int>(config_.qp_set.size());
  aligner_ = make_aligner<T>(config_, rng);
  enc0_ = nn::Conv2d<T>(config_.align_channels, b, 7, 1, 3, rng);
  enc1_ = nn::Conv2d<T>(b, 2 * b, 3, 2, 1, rng);
  enc2_ = nn::Conv2d<T>(2 * b, cr, 3, 2, 1, rng);
  enc0_bn_ = nn::BatchNorm2d<T>(b);
  enc1_bn_ = nn::BatchNorm2d<T>(2 * b);
  enc2_bn_ = nn::BatchNorm2d<T>(cr);
  blocks_.reserve(static_cast<std::size_t>(config_.res_blocks));
  for (int i = 0; i < config_.res_blocks; ++i) blocks_.emplace_back(cr, q, rng);
  shared_fc_ = nn::Linear<T>(q, cr, rng);
  dec1_ = nn::Conv2d<T>(cr, 2 * b, 3, 1, 1, rng);
  dec2_ = nn::Conv2d<T>(2 * b, b, 3, 1, 1, rng);
  dec1_bn_ = nn::BatchNorm2d<T>(2 * b);
  dec2_bn_ = nn::BatchNorm2d<T>(b);
  head_ = nn::Conv2d<T>(b, 1, 7, 1, 3, rng);
}

template <typename T>
Var<T> Generator<T>::forward(const Var<T>& planes, const Var<T>& codes, nn::Mode mode) {
  if (planes.shape().size() != 4 || planes.dim(1) != kTripletFrames) {
    throw ShapeError("generator expects triplet planes [N, 3, H, W], got " + shape_str(planes.shape()));
  }
  const Var<T> z = align(planes, mode);
  return enhance(z, codes, mode, config_.global_skip ? ops::slice_channels(planes, 1, 1) : Var<T>());
}

template <typename T>
Var<T> Generator<T>::encode(const Var<T>& z, nn::Mode mode) {
  Var<T> x = nn::lrelu(enc0_bn_(enc0_(z), mode));
  x = nn::lrelu(enc1_bn_(enc1_(x), mode));
  return nn::lrelu(enc2_bn_(enc2_(x), mode));
}

template <typename T>
Var<T> Generator<T>::block_scales(const Var<T>& codes, int block) const {
  const auto& fc = config_.shared_qp_fc ? shared_fc_ : blocks_.at(static_cast<std::size_t>(block)).fc;
  return qp_scales(codes, fc);
}

template <typename T>
Var<T> Generator<T>::enhance(const Var<T>& z, const Var<T>& codes, nn::Mode mode, const Var<T>& curr) {
  if (z.shape().size() != 4 || z.dim(1) != config_.align_channels) {
    throw ShapeError("enhance expects [N, " + std::to_string(config_.align_channels) + ", H, W], got " +
                     shape_str(z.shape()));
  }
  if (codes.shape() != Shape{z.dim(0), static_cast<int>(config_.qp_set.size())}) {
    throw ShapeError("QP codes " + shape_str(codes.shape()) + " do not match batch of " + std::to_string(z.dim(0)));
  }
  const int h = z.dim(2), w = z.dim(3);
  const int ph = (4 - h % 4) % 4, pw = (4 - w % 4) % 4;
  Var<T> feat = encode((ph || pw) ? ops::reflect_pad(z, 0, ph, 0, pw) : z, mode);
  for (int i = 0; i < residual_block_count(); ++i) {
    feat = blocks_[static_cast<std::size_t>(i)](feat, block_scales(codes, i), mode, config_.modulate_after_bn);
  }
  Var<T> x = nn::lrelu(dec1_bn_(dec1_(ops::upsample_bilinear2x(feat)), mode));
  x = nn::lrelu(dec2_bn_(dec2_(ops::upsample_bilinear2x(x)), mode));
  Var<T> logits = head_(x);
  if (ph || pw) logits = ops::crop(logits, 0, 0, h, w);
  if (config_.global_skip) {
    if (!curr.defined()) throw ShapeError("global skip needs the current frame");
    Tensor<T> prior(curr.shape());
    for (std::size_t i = 0; i < prior.size(); ++i) {
      const T p = std::clamp(curr.value()[i], T(1e-3), T(1 - 1e-3));
      prior[i] = std::log(p / (T(1) - p));
    }
    logits = ops::add(logits, Var<T>(std::move(prior)));
  }
  return ops::sigmoid(logits);
}

template <typename T>
nn::ParamList<T> Generator<T>::parameters() {
  nn::ParamList<T> out;
  aligner_->collect(out, "align");
  enc0_.collect(out, "enc0");
  enc0_bn_.collect(out, "enc0_bn");
  enc1_.collect(out, "enc1");
  enc1_bn_.collect(out, "enc1_bn");
  enc2_.collect(out, "enc2");
  enc2_bn_.collect(out, "enc2_bn");
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect(out, "block" + std::to_string(i), !config_.shared_qp_fc);
  }
  if (config_.shared_qp_fc) shared_fc_.collect(out, "qp_fc");
  dec1_.collect(out, "dec1");
  dec1_bn_.collect(out, "dec1_bn");
  dec2_.collect(out, "dec2");
  dec2_bn_.collect(out, "dec2_bn");
  head_.collect(out, "head");
  return out;
}

template <typename T>
LumaFrame generate(Generator<T>& generator, const FrameTriplet& triplet, int qp) {
  const QPCode code = encode_qp(qp, generator.config().qp_set);
  NoGradGuard no_grad;
  const Var<T> planes(stack_triplets<T>({&triplet}));
  const Var<T> codes(stack_qp_codes<T>({&code}));
  return to_frame(generator.forward(planes, codes, nn::Mode::kEval).value());
}

template <typename T>
void store_parameters(nn::ParamList<T>& params, TensorArchive& archive, const std::string& prefix) {
  for (const auto& p : params.params) archive.add(prefix + p.name, p.var.value().template cast<float>());
  for (const auto& b : params.buffers) archive.add(prefix + b.name, b.tensor->template cast<float>());
}

template <typename T>
void load_parameters(nn::ParamList<T>& params, const TensorArchive& archive, const std::string& prefix) {
  for (auto& p : params.params) {
    p.var.mutable_value() = archive.get(prefix + p.name, p.var.shape()).template cast<T>();
  }
  for (auto& b : params.buffers) *b.tensor = archive.get(prefix + b.name, b.tensor->shape()).template cast<T>();
}

template struct ModulatedResBlock<float>;
template struct ModulatedResBlock<double>;
template Var<float> qp_scales(const Var<float>&, const nn::Linear<float>&);
template Var<double> qp_scales(const Var<double>&, const nn::Linear<double>&);
template class Generator<float>;
template class Generator<double>;
template LumaFrame generate(Generator<float>&, const FrameTriplet&, int);
template LumaFrame generate(Generator<double>&, const FrameTriplet&, int);
template void store_parameters(nn::ParamList<float>&, TensorArchive&, const std::string&);
template void store_parameters(nn::ParamList<double>&, TensorArchive&, const std::string&);
template void load_parameters(nn::ParamList<float>&, const TensorArchive&, const std::string&);
template void load_parameters(nn::ParamList<double>&, const TensorArchive&, const std::string&);

}  // namespace dcngan
