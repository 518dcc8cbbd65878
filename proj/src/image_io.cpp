#include "dcngan/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "dcngan/errors.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace dcngan {

LumaFrame read_png_luma(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw UnsupportedFormatError("cannot decode image " + path.string());
  const double scale = img.depth() == CV_16U ? 1.0 / 257.0 : 1.0;
  if (img.depth() != CV_8U && img.depth() != CV_16U) throw UnsupportedFormatError("unsupported bit depth in " + path.string());
  cv::Mat bytes;
  img.convertTo(bytes, CV_8U, scale);
  const int h = bytes.rows, w = bytes.cols, ch = bytes.channels();
  std::vector<std::uint8_t> buf;
  buf.reserve(static_cast<std::size_t>(h) * w * (ch == 1 ? 1 : 3));
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = bytes.ptr<std::uint8_t>(y);
    for (int x = 0; x < w; ++x) {
      const std::uint8_t* px = row + static_cast<std::size_t>(x) * ch;
      if (ch == 1 || ch == 2) {
        buf.push_back(px[0]);
      } else {  // BGR(A) -> RGB
        buf.push_back(px[2]);
        buf.push_back(px[1]);
        buf.push_back(px[0]);
      }
    }
  }
  return extract_luma(buf, ch <= 2 ? PixelFormat::kGray8 : PixelFormat::kRgb24, w, h);
}

void write_png_gray(const std::filesystem::path& path, const LumaFrame& frame) {
  cv::Mat img(frame.height(), frame.width(), CV_8UC1);
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      img.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(std::clamp(frame.at(y, x), 0.0f, 1.0f) * 255.0f));
    }
  }
  if (!cv::imwrite(path.string(), img)) throw IoError("cannot write " + path.string());
}

std::vector<LumaFrame> read_frame_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("frame directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  if (files.empty()) throw IoError("no PNG frames in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<LumaFrame> frames;
  for (const auto& f : files) frames.push_back(read_png_luma(f));
  for (const auto& f : frames) {
    if (!f.same_size(frames[0])) throw MalformedInputError("frames in " + dir.string() + " differ in size");
  }
  return frames;
}

void write_frame_dir(const std::filesystem::path& dir, const std::vector<LumaFrame>& frames) {
  std::filesystem::create_directories(dir);
  char name[32];
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::snprintf(name, sizeof name, "%06zu.png", i);
    write_png_gray(dir / name, frames[i]);
  }
}

std::vector<LumaFrame> read_raw_video(const std::filesystem::path& path, PixelFormat format, int width, int height) {
  if (width < 1 || height < 1) throw MalformedInputError("raw video needs a positive width and height");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::size_t px = static_cast<std::size_t>(width) * height;
  std::size_t frame_bytes = px;
  if (format == PixelFormat::kRgb24) frame_bytes = 3 * px;
  if (format == PixelFormat::kYuv420p) {
    frame_bytes = px + 2 * (static_cast<std::size_t>((width + 1) / 2) * ((height + 1) / 2));
  }
  if (bytes.empty() || bytes.size() % frame_bytes != 0) {
    throw MalformedInputError(path.string() + ": size " + std::to_string(bytes.size()) +
                              " is not a whole number of frames of " + std::to_string(frame_bytes) + " bytes");
  }
  std::vector<LumaFrame> frames;
  for (std::size_t off = 0; off < bytes.size(); off += frame_bytes) {
    frames.push_back(extract_luma(std::span<const std::uint8_t>(bytes.data() + off, frame_bytes), format, width, height));
  }
  return frames;
}

std::vector<LumaFrame> read_sequence(const std::filesystem::path& path, const std::string& format, int width,
                                     int height) {
  if (std::filesystem::is_directory(path)) return read_frame_dir(path);
  if (format.empty()) throw ConfigError(path.string() + " is not a frame directory; raw input needs a pixel format");
  return read_raw_video(path, parse_pixel_format(format), width, height);
}

LumaFrame tile_frames(const std::vector<LumaFrame>& frames, int cols) {
  if (frames.empty() || cols < 1) throw EmptyInputError("nothing to tile");
  constexpr int kGutter = 2;
  const int h = frames[0].height(), w = frames[0].width();
  const int n = static_cast<int>(frames.size());
  const int rows = (n + cols - 1) / cols;
  LumaFrame out(rows * h + (rows - 1) * kGutter, cols * w + (cols - 1) * kGutter, 0.0f);
  for (int i = 0; i < n; ++i) {
    if (!frames[static_cast<std::size_t>(i)].same_size(frames[0])) throw ShapeError("tiled frames differ in size");
    const int top = (i / cols) * (h + kGutter), left = (i % cols) * (w + kGutter);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out.at(top + y, left + x) = frames[static_cast<std::size_t>(i)].at(y, x);
    }
  }
  return out;
}

}  // namespace dcngan
