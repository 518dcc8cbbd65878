#include "dcngan/frames.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "dcngan/errors.hpp"

namespace dcngan {

LumaFrame::LumaFrame(int height, int width, float fill) : LumaFrame(height, width, std::vector<float>()) {
  std::fill(pixels_.begin(), pixels_.end(), fill);
  if (!(fill >= 0.0f && fill <= 1.0f)) throw MalformedInputError("luma fill value outside [0,1]");
}

LumaFrame::LumaFrame(int height, int width, std::vector<float> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (height < kMinFrameSize || width < kMinFrameSize) {
    throw MalformedInputError("luma frame must be at least 8x8, got " + std::to_string(height) + "x" +
                              std::to_string(width));
  }
  const auto expected = static_cast<std::size_t>(height) * width;
  if (pixels_.empty()) {
    pixels_.assign(expected, 0.0f);
  } else if (pixels_.size() != expected) {
    throw MalformedInputError("luma frame has " + std::to_string(pixels_.size()) + " pixels, expected " +
                              std::to_string(expected));
  }
  for (float v : pixels_) {
    if (!(v >= 0.0f && v <= 1.0f)) throw MalformedInputError("luma value outside [0,1] or non-finite");
  }
}

LumaFrame LumaFrame::crop(int top, int left, int height, int width) const {
  if (top < 0 || left < 0 || top + height > height_ || left + width > width_) {
    throw InvalidPatchError("crop window exceeds frame bounds");
  }
  std::vector<float> out(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y) {
    const float* src = pixels_.data() + static_cast<std::size_t>(top + y) * width_ + left;
    std::copy(src, src + width, out.data() + static_cast<std::size_t>(y) * width);
  }
  return LumaFrame(height, width, std::move(out));
}

FrameTriplet::FrameTriplet(LumaFrame p, LumaFrame c, LumaFrame n, int index)
    : prev(std::move(p)), curr(std::move(c)), next(std::move(n)), frame_index(index) {
  if (!prev.same_size(curr) || !next.same_size(curr)) throw ShapeError("triplet frames differ in size");
}

TrainingSample::TrainingSample(FrameTriplet d, LumaFrame t, QPCode q)
    : degraded(std::move(d)), target(std::move(t)), qp(std::move(q)) {
  if (!target.same_size(degraded.curr)) throw ShapeError("training target and degraded frames differ in size");
}

PixelFormat parse_pixel_format(const std::string& name) {
  if (name == "yuv420p") return PixelFormat::kYuv420p;
  if (name == "rgb24") return PixelFormat::kRgb24;
  if (name == "gray8") return PixelFormat::kGray8;
  throw UnsupportedFormatError("unsupported pixel format '" + name + "' (expected yuv420p, rgb24 or gray8)");
}

LumaFrame extract_luma(std::span<const std::uint8_t> buffer, PixelFormat format, int width, int height) {
  if (width <= 0 || height <= 0) throw MalformedInputError("frame dimensions must be positive");
  const auto pixels = static_cast<std::size_t>(width) * height;
  std::size_t expected = 0;
  switch (format) {
    case PixelFormat::kGray8:
      expected = pixels;
      break;
    case PixelFormat::kRgb24:
      expected = 3 * pixels;
      break;
    case PixelFormat::kYuv420p:
      expected = pixels + 2 * (static_cast<std::size_t>((width + 1) / 2) * ((height + 1) / 2));
      break;
    default:
      throw UnsupportedFormatError("unknown pixel format tag " + std::to_string(static_cast<int>(format)));
  }
  if (buffer.size() != expected) {
    throw MalformedInputError("frame buffer holds " + std::to_string(buffer.size()) + " bytes, expected " +
                              std::to_string(expected));
  }
  std::vector<float> out(pixels);
  if (format == PixelFormat::kRgb24) {
    for (std::size_t i = 0; i < pixels; ++i) {
      const double y = 0.299 * buffer[3 * i] + 0.587 * buffer[3 * i + 1] + 0.114 * buffer[3 * i + 2];
      out[i] = static_cast<float>(std::clamp(y / 255.0, 0.0, 1.0));
    }
  } else {
    // gray8 and the leading Y plane of yuv420p
    for (std::size_t i = 0; i < pixels; ++i) out[i] = static_cast<float>(buffer[i] / 255.0);
  }
  return LumaFrame(height, width, std::move(out));
}

double qstep_for_qp(int qp) { return std::pow(2.0, (qp - 4) / 6.0); }

namespace {

using Block = std::array<double, kDctBlock * kDctBlock>;

// Orthonormal DCT-II basis, basis[u][x].
const std::array<std::array<double, kDctBlock>, kDctBlock>& dct_basis() {
  static const auto basis = [] {
    std::array<std::array<double, kDctBlock>, kDctBlock> b{};
    for (int u = 0; u < kDctBlock; ++u) {
      const double alpha = u == 0 ? std::sqrt(1.0 / kDctBlock) : std::sqrt(2.0 / kDctBlock);
      for (int x = 0; x < kDctBlock; ++x) {
        b[u][x] = alpha * std::cos((2 * x + 1) * u * std::numbers::pi / (2.0 * kDctBlock));
      }
    }
    return b;
  }();
  return basis;
}

Block forward_dct(const Block& in) {
  const auto& b = dct_basis();
  Block tmp{}, out{};
  for (int u = 0; u < kDctBlock; ++u) {
    for (int x = 0; x < kDctBlock; ++x) {
      double s = 0;
      for (int y = 0; y < kDctBlock; ++y) s += b[u][y] * in[y * kDctBlock + x];
      tmp[u * kDctBlock + x] = s;
    }
  }
  for (int u = 0; u < kDctBlock; ++u) {
    for (int v = 0; v < kDctBlock; ++v) {
      double s = 0;
      for (int x = 0; x < kDctBlock; ++x) s += tmp[u * kDctBlock + x] * b[v][x];
      out[u * kDctBlock + v] = s;
    }
  }
  return out;
}

Block inverse_dct(const Block& in) {
  const auto& b = dct_basis();
  Block tmp{}, out{};
  for (int y = 0; y < kDctBlock; ++y) {
    for (int v = 0; v < kDctBlock; ++v) {
      double s = 0;
      for (int u = 0; u < kDctBlock; ++u) s += b[u][y] * in[u * kDctBlock + v];
      tmp[y * kDctBlock + v] = s;
    }
  }
  for (int y = 0; y < kDctBlock; ++y) {
    for (int x = 0; x < kDctBlock; ++x) {
      double s = 0;
      for (int v = 0; v < kDctBlock; ++v) s += tmp[y * kDctBlock + v] * b[v][x];
      out[y * kDctBlock + x] = s;
    }
  }
  return out;
}

}  // namespace

LumaFrame degrade(const LumaFrame& frame, int qp) {
  if (qp < 0 || qp > 51) throw InvalidQpError("qp " + std::to_string(qp) + " outside [0, 51]");
  const double step = qstep_for_qp(qp);
  const int h = frame.height(), w = frame.width();
  std::vector<float> out(static_cast<std::size_t>(h) * w);
  for (int by = 0; by < h; by += kDctBlock) {
    for (int bx = 0; bx < w; bx += kDctBlock) {
      Block block{};
      for (int y = 0; y < kDctBlock; ++y) {
        for (int x = 0; x < kDctBlock; ++x) {
          const int fy = by + y, fx = bx + x;
          block[y * kDctBlock + x] = (fy < h && fx < w) ? 255.0 * frame.at(fy, fx) : 0.0;
        }
      }
      Block coeffs = forward_dct(block);
      for (double& c : coeffs) c = std::round(c / step) * step;
      const Block rec = inverse_dct(coeffs);
      for (int y = 0; y < kDctBlock && by + y < h; ++y) {
        for (int x = 0; x < kDctBlock && bx + x < w; ++x) {
          out[static_cast<std::size_t>(by + y) * w + bx + x] =
              static_cast<float>(std::clamp(rec[y * kDctBlock + x] / 255.0, 0.0, 1.0));
        }
      }
    }
  }
  return LumaFrame(h, w, std::move(out));
}

std::vector<FrameTriplet> make_triplets(const std::vector<LumaFrame>& sequence) {
  if (sequence.empty()) throw EmptyInputError("cannot build triplets from an empty sequence");
  for (const auto& f : sequence) {
    if (!f.same_size(sequence.front())) throw ShapeError("sequence frames differ in size");
  }
  const int n = static_cast<int>(sequence.size());
  std::vector<FrameTriplet> out;
  out.reserve(sequence.size());
  for (int t = 0; t < n; ++t) {
    const auto& prev = sequence[static_cast<std::size_t>(std::max(t - 1, 0))];
    const auto& next = sequence[static_cast<std::size_t>(std::min(t + 1, n - 1))];
    out.emplace_back(prev, sequence[static_cast<std::size_t>(t)], next, t);
  }
  return out;
}

std::vector<TrainingSample> sample_patches(const std::vector<LumaFrame>& raw_seq,
                                           const std::vector<LumaFrame>& degraded_seq, const PatchRequest& req) {
  if (raw_seq.empty()) throw EmptyInputError("cannot sample patches from an empty sequence");
  if (raw_seq.size() != degraded_seq.size()) throw ShapeError("raw and degraded sequences differ in length");
  for (std::size_t i = 0; i < raw_seq.size(); ++i) {
    if (!raw_seq[i].same_size(raw_seq[0]) || !degraded_seq[i].same_size(raw_seq[0])) {
      throw ShapeError("raw and degraded frames differ in size");
    }
  }
  const int h = raw_seq[0].height(), w = raw_seq[0].width();
  if (req.patch < kMinFrameSize || req.patch > std::min(h, w)) {
    throw InvalidPatchError("patch " + std::to_string(req.patch) + " does not fit frames of " + std::to_string(h) +
                            "x" + std::to_string(w));
  }
  if (req.count < 0 || req.align < 1) throw InvalidPatchError("patch count must be >= 0 and align >= 1");
  const QPCode code = encode_qp(req.qp, *req.qp_set);
  const auto triplets = make_triplets(degraded_seq);

  std::mt19937_64 rng(req.seed);
  std::uniform_int_distribution<int> pick_t(0, static_cast<int>(raw_seq.size()) - 1);
  std::uniform_int_distribution<int> pick_y(0, (h - req.patch) / req.align);
  std::uniform_int_distribution<int> pick_x(0, (w - req.patch) / req.align);
  std::vector<TrainingSample> out;
  out.reserve(static_cast<std::size_t>(req.count));
  for (int i = 0; i < req.count; ++i) {
    const int t = pick_t(rng);
    const int y = pick_y(rng) * req.align;
    const int x = pick_x(rng) * req.align;
    const auto& tri = triplets[static_cast<std::size_t>(t)];
    auto cut = [&](const LumaFrame& f) { return f.crop(y, x, req.patch, req.patch); };
    out.emplace_back(FrameTriplet(cut(tri.prev), cut(tri.curr), cut(tri.next), t),
                     cut(raw_seq[static_cast<std::size_t>(t)]), code);
  }
  return out;
}

namespace {

struct Wave {
  double fy, fx, phase, amp;
};
struct Blob {
  double cy, cx, radius, amp;
};
struct Rect {
  double y0, x0, y1, x1, amp;
};

}  // namespace

std::vector<LumaFrame> synthesize_video(const SyntheticVideoSpec& spec) {
  if (spec.frames < 1) throw EmptyInputError("synthetic video needs at least one frame");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const double extent = std::max(spec.height, spec.width) + 2 * spec.max_speed * spec.frames + 16;

  std::vector<Wave> waves;
  for (int i = 0; i < 3; ++i) {
    const double f = uniform(0.01, 0.04), theta = uniform(0, std::numbers::pi);
    waves.push_back({f * std::sin(theta), f * std::cos(theta), uniform(0, 2 * std::numbers::pi), uniform(0.04, 0.1)});
  }
  for (int i = 0; i < 2; ++i) {
    const double f = uniform(0.08, 0.2), theta = uniform(0, std::numbers::pi);
    waves.push_back({f * std::sin(theta), f * std::cos(theta), uniform(0, 2 * std::numbers::pi), uniform(0.02, 0.05)});
  }
  std::vector<Blob> blobs;
  for (int i = 0; i < 12; ++i) {
    blobs.push_back({uniform(-8, extent), uniform(-8, extent), uniform(2, 10), uniform(-0.2, 0.2)});
  }
  std::vector<Rect> rects;
  for (int i = 0; i < 8; ++i) {
    const double y = uniform(-8, extent), x = uniform(-8, extent);
    rects.push_back({y, x, y + uniform(4, 24), x + uniform(4, 24), uniform(-0.18, 0.18)});
  }
  const double vy = uniform(-spec.max_speed, spec.max_speed);
  const double vx = uniform(-spec.max_speed, spec.max_speed);
  const double ovy = uniform(-spec.max_speed, spec.max_speed);
  const double ovx = uniform(-spec.max_speed, spec.max_speed);
  const double obj_r = std::max(3.0, std::min(spec.height, spec.width) / 8.0);
  const double obj_y = uniform(obj_r, spec.height - obj_r), obj_x = uniform(obj_r, spec.width - obj_r);
  const double obj_level = uniform(0.15, 0.85);
  const double margin = spec.max_speed * spec.frames + 8;

  auto scene = [&](double y, double x) {
    double v = 0.5;
    for (const auto& wv : waves) v += wv.amp * std::sin(2 * std::numbers::pi * (wv.fy * y + wv.fx * x) + wv.phase);
    for (const auto& b : blobs) {
      const double d2 = (y - b.cy) * (y - b.cy) + (x - b.cx) * (x - b.cx);
      v += b.amp * std::exp(-d2 / (2 * b.radius * b.radius));
    }
    for (const auto& r : rects) {
      if (y >= r.y0 && y < r.y1 && x >= r.x0 && x < r.x1) v += r.amp;
    }
    return v;
  };

  std::vector<LumaFrame> frames;
  frames.reserve(static_cast<std::size_t>(spec.frames));
  for (int t = 0; t < spec.frames; ++t) {
    std::vector<float> pixels(static_cast<std::size_t>(spec.height) * spec.width);
    const double cy = obj_y + ovy * t, cx = obj_x + ovx * t;
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        double v = scene(y + margin + vy * t, x + margin + vx * t);
        const double dy = y - cy, dx = x - cx;
        if (dy * dy + dx * dx < obj_r * obj_r) {
          const bool check = (static_cast<int>(std::floor(dy / 3)) + static_cast<int>(std::floor(dx / 3))) % 2 == 0;
          v = obj_level + (check ? 0.08 : -0.08);
        }
        pixels[static_cast<std::size_t>(y) * spec.width + x] = static_cast<float>(std::clamp(v, 0.05, 0.95));
      }
    }
    frames.emplace_back(spec.height, spec.width, std::move(pixels));
  }
  return frames;
}

double mean_abs_error(const LumaFrame& a, const LumaFrame& b) {
  if (!a.same_size(b)) throw ShapeError("mean_abs_error: frames differ in size");
  double s = 0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) s += std::abs(double(a.pixels()[i]) - b.pixels()[i]);
  return s / static_cast<double>(a.pixels().size());
}

}  // namespace dcngan
