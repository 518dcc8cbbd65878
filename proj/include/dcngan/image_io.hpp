#pragma once

#include <filesystem>
#include <vector>

#include "dcngan/frames.hpp"

namespace dcngan {

// Luma of an 8- or 16-bit PNG. Color images go through the BT.601 weights;
// alpha is ignored.
LumaFrame read_png_luma(const std::filesystem::path& path);

// 8-bit grayscale PNG, round(v * 255).
void write_png_gray(const std::filesystem::path& path, const LumaFrame& frame);

// Frames of a directory of PNGs, in file-name order. IoError if the
// directory is missing or holds no PNG.
std::vector<LumaFrame> read_frame_dir(const std::filesystem::path& dir);

// Writes 000000.png, 000001.png, ... (creates the directory).
void write_frame_dir(const std::filesystem::path& dir, const std::vector<LumaFrame>& frames);

// Headerless 8-bit raw video (yuv420p, rgb24 or gray8) of known size.
std::vector<LumaFrame> read_raw_video(const std::filesystem::path& path, PixelFormat format, int width, int height);

// Frames from a PNG directory or, with format/size given, a raw file.
std::vector<LumaFrame> read_sequence(const std::filesystem::path& path, const std::string& format = "", int width = 0,
                                     int height = 0);

// Side-by-side grid of equally sized frames (rows x cols, row-major) with a
// 2-pixel black gutter.
LumaFrame tile_frames(const std::vector<LumaFrame>& frames, int cols);

}  // namespace dcngan
