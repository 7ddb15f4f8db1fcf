#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "ecovnet/rng.hpp"
#include "ecovnet/tensor.hpp"

// Training-time affine augmentation: horizontal flip, rotation, shear, zoom,
// composed in that order about the image center and resampled bilinearly with
// zero fill outside the frame.

namespace ecov {

struct AugmentRanges {
  double rotation_deg = 10.0; // sampled from [-rotation_deg, rotation_deg]
  double shear_deg = 10.0;    // sampled from [-shear_deg, shear_deg]
  double zoom_lo = 0.9;
  double zoom_hi = 1.1;
  double flip_prob = 0.5;
};

struct AffineParams {
  bool flip = false;
  double rotation_deg = 0.0;
  double shear_deg = 0.0;
  double zoom = 1.0;
};

inline void validate_ranges(const AugmentRanges& r) {
  if (r.rotation_deg < 0) throw ArgumentError("augment: rotation range must be nonnegative");
  if (r.shear_deg < 0) throw ArgumentError("augment: shear range must be nonnegative");
  if (r.zoom_lo > r.zoom_hi) throw ArgumentError("augment: zoom range is inverted");
  if (!(r.zoom_lo > 0)) throw ArgumentError("augment: zoom must be positive");
  if (r.flip_prob < 0 || r.flip_prob > 1) throw ArgumentError("augment: flip probability outside [0,1]");
}

inline AffineParams sample_affine(const AugmentRanges& ranges, Rng& rng) {
  validate_ranges(ranges);
  AffineParams p;
  p.flip = rng.bernoulli(ranges.flip_prob);
  p.rotation_deg = rng.uniform(-ranges.rotation_deg, ranges.rotation_deg);
  p.shear_deg = rng.uniform(-ranges.shear_deg, ranges.shear_deg);
  p.zoom = rng.uniform(ranges.zoom_lo, ranges.zoom_hi);
  return p;
}

namespace detail {

template <typename T>
T bilinear_at(const Tensor<T>& img, int64_t plane_offset, int64_t h, int64_t w, double y, double x) {
  if (y <= -1.0 || x <= -1.0 || y >= static_cast<double>(h) || x >= static_cast<double>(w)) return T(0);
  const int64_t y0 = static_cast<int64_t>(std::floor(y));
  const int64_t x0 = static_cast<int64_t>(std::floor(x));
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  auto pick = [&](int64_t yy, int64_t xx) -> double {
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0; // zero fill
    return static_cast<double>(img[plane_offset + yy * w + xx]);
  };
  const double v = pick(y0, x0) * (1 - fy) * (1 - fx) + pick(y0, x0 + 1) * (1 - fy) * fx +
                   pick(y0 + 1, x0) * fy * (1 - fx) + pick(y0 + 1, x0 + 1) * fy * fx;
  return static_cast<T>(v);
}

} // namespace detail

// image is (H,W) or (C,H,W); every channel receives the same transform.
template <typename T>
Tensor<T> apply_affine(const Tensor<T>& image, const AffineParams& params) {
  if (image.rank() != 2 && image.rank() != 3)
    throw DimensionError("apply_affine: image must be rank 2 or 3, got " + shape_string(image.shape()));
  if (!(params.zoom > 0)) throw ArgumentError("apply_affine: zoom must be positive");

  const int64_t channels = image.rank() == 3 ? image.dim(0) : 1;
  const int64_t h = image.dim(image.rank() == 3 ? 1 : 0);
  const int64_t w = image.dim(image.rank() == 3 ? 2 : 1);
  const double cy = static_cast<double>(h - 1) / 2.0;
  const double cx = static_cast<double>(w - 1) / 2.0;

  const double theta = params.rotation_deg * std::numbers::pi / 180.0;
  const double shear_t = std::tan(params.shear_deg * std::numbers::pi / 180.0);
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double inv_zoom = 1.0 / params.zoom;

  Tensor<T> out(image.shape());
  for (int64_t r = 0; r < h; ++r)
    for (int64_t c = 0; c < w; ++c) {
      // walk the forward composition flip -> rotate -> shear -> zoom backwards
      double x = (static_cast<double>(c) - cx) * inv_zoom;
      double y = (static_cast<double>(r) - cy) * inv_zoom;
      const double xs = x - shear_t * y; // undo horizontal shear
      const double ys = y;
      const double xr = cos_t * xs + sin_t * ys; // rotate by -theta
      const double yr = -sin_t * xs + cos_t * ys;
      const double xf = params.flip ? -xr : xr;
      const double src_x = xf + cx;
      const double src_y = yr + cy;
      for (int64_t ch = 0; ch < channels; ++ch)
        out[(ch * h + r) * w + c] = detail::bilinear_at(image, ch * h * w, h, w, src_y, src_x);
    }
  return out;
}

} // namespace ecov
