#include "dcngan/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dcngan/errors.hpp"

namespace dcngan {

namespace {

constexpr int kWidth = 720, kHeight = 480;
constexpr int kLeft = 80, kRight = 170, kTop = 50, kBottom = 60;
const cv::Scalar kInk(40, 40, 40);
const cv::Scalar kGrid(220, 220, 220);

const cv::Scalar kPalette[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214}, {189, 103, 148},
                               {75, 86, 140}};

void text(cv::Mat& img, const std::string& s, cv::Point at, double scale = 0.45) {
  cv::putText(img, s, at, cv::FONT_HERSHEY_SIMPLEX, scale, kInk, 1, cv::LINE_AA);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Axis {
  double lo, hi;
  double map(double v, int a, int b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

Axis nice_axis(double lo, double hi, bool from_zero) {
  if (from_zero) lo = std::min(lo, 0.0);
  if (!(hi > lo)) hi = lo + 1;
  const double pad = 0.08 * (hi - lo);
  return {from_zero ? lo : lo - pad, hi + pad};
}

cv::Mat canvas(const std::string& title) {
  cv::Mat img(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
  text(img, title, {kLeft, 30}, 0.6);
  return img;
}

void frame_axes(cv::Mat& img, const Axis& y, const std::string& y_label) {
  const int x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  for (int i = 0; i <= 4; ++i) {
    const double v = y.lo + (y.hi - y.lo) * i / 4;
    const int py = static_cast<int>(std::lround(y.map(v, y0, y1)));
    cv::line(img, {x0, py}, {x1, py}, kGrid, 1);
    text(img, fmt(v), {8, py + 4}, 0.4);
  }
  cv::rectangle(img, {x0, y1}, {x1, y0}, kInk, 1);
  text(img, y_label, {8, kTop - 10}, 0.4);
}

void save(const std::filesystem::path& path, const cv::Mat& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), img)) throw IoError("cannot write " + path.string());
}

}  // namespace

void write_bar_plot(const std::filesystem::path& path, const std::string& title, const std::vector<std::string>& groups,
                    const std::vector<std::string>& series, const std::vector<std::vector<double>>& values,
                    const std::string& y_label) {
  if (groups.empty() || series.empty() || values.size() != series.size()) throw ShapeError("bar plot: bad table");
  double hi = 0, lo = 0;
  for (const auto& row : values) {
    if (row.size() != groups.size()) throw ShapeError("bar plot: ragged table");
    for (double v : row) {
      hi = std::max(hi, v);
      lo = std::min(lo, v);
    }
  }
  const Axis y = nice_axis(lo, hi, true);
  cv::Mat img = canvas(title);
  frame_axes(img, y, y_label);
  const int x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  const double group_w = static_cast<double>(x1 - x0) / static_cast<double>(groups.size());
  const double bar_w = 0.8 * group_w / static_cast<double>(series.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = x0 + g * group_w + 0.1 * group_w;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const int bx = static_cast<int>(gx + s * bar_w);
      const int top = static_cast<int>(std::lround(y.map(values[s][g], y0, y1)));
      const int base = static_cast<int>(std::lround(y.map(0, y0, y1)));
      cv::rectangle(img, {bx, std::min(top, base)}, {static_cast<int>(bx + bar_w) - 1, std::max(top, base)},
                    kPalette[s % std::size(kPalette)], cv::FILLED);
    }
    text(img, groups[g], {static_cast<int>(gx), y0 + 20});
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const int ly = kTop + 10 + static_cast<int>(s) * 22;
    cv::rectangle(img, {x1 + 12, ly - 10}, {x1 + 26, ly + 4}, kPalette[s % std::size(kPalette)], cv::FILLED);
    text(img, series[s], {x1 + 32, ly + 2}, 0.4);
  }
  save(path, img);
}

void write_scatter_plot(const std::filesystem::path& path, const std::string& title,
                        const std::vector<ScatterPoint>& points, const std::string& x_label,
                        const std::string& y_label) {
  if (points.empty()) throw EmptyInputError("scatter plot: no points");
  double xlo = points[0].x, xhi = xlo, ylo = points[0].y, yhi = ylo;
  for (const auto& p : points) {
    xlo = std::min(xlo, p.x);
    xhi = std::max(xhi, p.x);
    ylo = std::min(ylo, p.y);
    yhi = std::max(yhi, p.y);
  }
  const Axis x = nice_axis(xlo, xhi, true), y = nice_axis(ylo, yhi, true);
  cv::Mat img = canvas(title);
  frame_axes(img, y, y_label);
  const int x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  for (int i = 0; i <= 4; ++i) {
    const double v = x.lo + (x.hi - x.lo) * i / 4;
    text(img, fmt(v), {static_cast<int>(x.map(v, x0, x1)) - 10, y0 + 18}, 0.4);
  }
  text(img, x_label, {x1 - 160, y0 + 42}, 0.45);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const cv::Point c(static_cast<int>(std::lround(x.map(points[i].x, x0, x1))),
                      static_cast<int>(std::lround(y.map(points[i].y, y0, y1))));
    cv::circle(img, c, 7, kPalette[i % std::size(kPalette)], cv::FILLED, cv::LINE_AA);
    text(img, points[i].label, {c.x + 10, c.y - 8});
  }
  save(path, img);
}

}  // namespace dcngan
