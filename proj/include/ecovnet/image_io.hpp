#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ecovnet/tensor.hpp"

// 8-bit grayscale image files: binary PGM as the baseline format, plus
// single-channel PNG reading and gray/RGB PNG writing for heatmap overlays.

namespace ecov {

struct ImageU8 {
  int64_t h = 0, w = 0;
  std::vector<uint8_t> pixels; // row-major grayscale
};

ImageU8 read_pgm(const std::string& path);
void write_pgm(const std::string& path, const ImageU8& img);

ImageU8 read_png_gray(const std::string& path);
void write_png_gray(const std::string& path, const ImageU8& img);
void write_png_rgb(const std::string& path, int64_t h, int64_t w, const std::vector<uint8_t>& rgb);

// Dispatches on the file's magic bytes (P5 or the PNG signature).
ImageU8 read_image(const std::string& path);

// Half-pixel-centered bilinear resampling of a rank-2 map with edge clamping.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& img, int64_t out_h, int64_t out_w) {
  if (img.rank() != 2) throw DimensionError("bilinear_resize: input must be rank 2");
  if (out_h < 1 || out_w < 1) throw ArgumentError("bilinear_resize: output extents must be positive");
  const int64_t in_h = img.dim(0), in_w = img.dim(1);
  if (in_h == out_h && in_w == out_w) return img;

  Tensor<T> out({out_h, out_w});
  const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);
  for (int64_t r = 0; r < out_h; ++r) {
    double y = (static_cast<double>(r) + 0.5) * sy - 0.5;
    y = std::clamp(y, 0.0, static_cast<double>(in_h - 1));
    const int64_t y0 = static_cast<int64_t>(std::floor(y));
    const int64_t y1 = std::min(y0 + 1, in_h - 1);
    const double fy = y - static_cast<double>(y0);
    for (int64_t c = 0; c < out_w; ++c) {
      double x = (static_cast<double>(c) + 0.5) * sx - 0.5;
      x = std::clamp(x, 0.0, static_cast<double>(in_w - 1));
      const int64_t x0 = static_cast<int64_t>(std::floor(x));
      const int64_t x1 = std::min(x0 + 1, in_w - 1);
      const double fx = x - static_cast<double>(x0);
      const double v = static_cast<double>(img.at(y0, x0)) * (1 - fy) * (1 - fx) +
                       static_cast<double>(img.at(y0, x1)) * (1 - fy) * fx +
                       static_cast<double>(img.at(y1, x0)) * fy * (1 - fx) +
                       static_cast<double>(img.at(y1, x1)) * fy * fx;
      out.at(r, c) = static_cast<T>(v);
    }
  }
  return out;
}

} // namespace ecov
