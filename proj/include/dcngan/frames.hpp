#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dcngan/qp.hpp"

namespace dcngan {

inline constexpr int kMinFrameSize = 8;
inline constexpr int kDctBlock = 8;

// Luminance plane with values in [0,1]; at least 8x8.
class LumaFrame {
 public:
  LumaFrame() = default;
  LumaFrame(int height, int width, float fill = 0.0f);
  // Throws MalformedInputError on size mismatch or a value outside [0,1].
  LumaFrame(int height, int width, std::vector<float> pixels);

  int height() const { return height_; }
  int width() const { return width_; }
  std::span<const float> pixels() const { return pixels_; }
  std::span<float> pixels() { return pixels_; }
  float at(int y, int x) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  float& at(int y, int x) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  bool same_size(const LumaFrame& other) const { return height_ == other.height_ && width_ == other.width_; }

  LumaFrame crop(int top, int left, int height, int width) const;

  bool operator==(const LumaFrame&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> pixels_;
};

// y_t = (x_{t-1}, x_t, x_{t+1}).
struct FrameTriplet {
  FrameTriplet(LumaFrame prev, LumaFrame curr, LumaFrame next, int frame_index);

  LumaFrame prev;
  LumaFrame curr;
  LumaFrame next;
  int frame_index = 0;

  int height() const { return curr.height(); }
  int width() const { return curr.width(); }
};

struct TrainingSample {
  TrainingSample(FrameTriplet degraded, LumaFrame target, QPCode qp);

  FrameTriplet degraded;
  LumaFrame target;
  QPCode qp;
};

enum class PixelFormat { kYuv420p, kRgb24, kGray8 };

// Parses "yuv420p", "rgb24" or "gray8"; throws UnsupportedFormatError otherwise.
PixelFormat parse_pixel_format(const std::string& name);

// Y plane of an 8-bit frame, scaled to [0,1]. RGB uses BT.601 weights.
LumaFrame extract_luma(std::span<const std::uint8_t> buffer, PixelFormat format, int width, int height);

// HEVC quantizer step for a QP, in 8-bit sample units.
double qstep_for_qp(int qp);

// Block-DCT quantization stand-in for a lossy encoder: 8x8 orthonormal DCT-II
// on 8-bit-scaled samples (ragged edge blocks zero-padded), coefficients
// rounded to multiples of Qstep(qp), inverse DCT, clipped to [0,1].
LumaFrame degrade(const LumaFrame& frame, int qp);

// One triplet per frame; the sequence edges are replicated.
std::vector<FrameTriplet> make_triplets(const std::vector<LumaFrame>& sequence);

struct PatchRequest {
  int patch = 128;
  int count = 1;
  std::uint64_t seed = 0;
  int qp = 37;
  const std::vector<int>* qp_set = &kDefaultQpSet;
  // Crop offsets are drawn as multiples of this value.
  int align = 1;
};

// Crops the same window from the raw target frame and the three degraded
// triplet frames; positions come from a generator seeded with request.seed.
std::vector<TrainingSample> sample_patches(const std::vector<LumaFrame>& raw_seq,
                                           const std::vector<LumaFrame>& degraded_seq, const PatchRequest& request);

struct SyntheticVideoSpec {
  int height = 64;
  int width = 64;
  int frames = 8;
  std::uint64_t seed = 0;
  // Peak per-frame global motion in pixels.
  double max_speed = 1.5;
};

// Deterministic textured sequence with smooth global motion and one moving
// object, values inside [0.05, 0.95].
std::vector<LumaFrame> synthesize_video(const SyntheticVideoSpec& spec);

double mean_abs_error(const LumaFrame& a, const LumaFrame& b);

}  // namespace dcngan
