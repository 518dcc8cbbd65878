#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "dcngan/align.hpp"
#include "dcngan/archive.hpp"
#include "dcngan/frames.hpp"

namespace dcngan {

// Residual block whose first convolution output is scaled channel-wise by
// the QP-derived vector: feat + bn2(conv2(relu(bn1(conv1(feat)) * s))).
template <typename T>
struct ModulatedResBlock {
  nn::Conv2d<T> conv1, conv2;
  nn::BatchNorm2d<T> bn1, bn2;
  nn::Linear<T> fc;  // QP code -> C_r, unused when the FC is shared

  ModulatedResBlock(int channels, int qp_levels, nn::Rng& rng);
  Var<T> operator()(const Var<T>& feat, const Var<T>& scales, nn::Mode mode, bool modulate_after_bn);
  void collect(nn::ParamList<T>& out, const std::string& prefix, bool with_fc);
};

// softplus(fc(code)) for each row of codes [N, |Q|] -> [N, C_r], all > 0.
template <typename T>
Var<T> qp_scales(const Var<T>& codes, const nn::Linear<T>& fc);

// G = E o A: alignment followed by the QP-modulated encoder / residual /
// decoder enhancement network, output squashed into [0,1].
template <typename T>
class Generator {
 public:
  Generator(const ModelConfig& config, std::uint64_t seed);
  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;
  Generator(Generator&&) = default;
  Generator& operator=(Generator&&) = default;

  // planes [N, 3, H, W] in [0,1], codes [N, |Q|] one-hot -> [N, 1, H, W].
  Var<T> forward(const Var<T>& planes, const Var<T>& codes, nn::Mode mode);

  Var<T> align(const Var<T>& planes, nn::Mode mode) { return aligner_->align(planes, mode); }
  // z [N, C_a, H, W] -> [N, 1, H, W]. `curr` is only read with global_skip.
  Var<T> enhance(const Var<T>& z, const Var<T>& codes, nn::Mode mode, const Var<T>& curr = {});
  // Encoder output before the first residual block (on a 4-aligned z).
  Var<T> encode(const Var<T>& z, nn::Mode mode);
  Var<T> block_scales(const Var<T>& codes, int block) const;

  const ModelConfig& config() const { return config_; }
  nn::ParamList<T> parameters();
  Aligner<T>& aligner() { return *aligner_; }
  std::vector<ModulatedResBlock<T>>& blocks() { return blocks_; }
  nn::Linear<T>& shared_fc() { return shared_fc_; }
  nn::Conv2d<T>& output_head() { return head_; }
  int residual_block_count() const { return static_cast<int>(blocks_.size()); }

 private:
  ModelConfig config_;
  std::unique_ptr<Aligner<T>> aligner_;
  nn::Conv2d<T> enc0_, enc1_, enc2_;
  nn::BatchNorm2d<T> enc0_bn_, enc1_bn_, enc2_bn_;
  std::vector<ModulatedResBlock<T>> blocks_;
  nn::Linear<T> shared_fc_;
  nn::Conv2d<T> dec1_, dec2_;
  nn::BatchNorm2d<T> dec1_bn_, dec2_bn_;
  nn::Conv2d<T> head_;
};

// Enhanced x_t for one triplet, in inference mode.
template <typename T>
LumaFrame generate(Generator<T>& generator, const FrameTriplet& triplet, int qp);

// Parameters and buffers under `prefix` into / out of an archive. Loading
// checks every name and shape and throws CheckpointError on mismatch.
template <typename T>
void store_parameters(nn::ParamList<T>& params, TensorArchive& archive, const std::string& prefix);
template <typename T>
void load_parameters(nn::ParamList<T>& params, const TensorArchive& archive, const std::string& prefix);

}  // namespace dcngan
