#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ecovnet/image_io.hpp"
#include "ecovnet/model.hpp"

// Saliency maps: the class probability is backpropagated to the final
// backbone activation, the per-filter gradients are globally averaged into
// filter weights, and the weighted activation sum is rectified, normalized,
// and upsampled to the input resolution.

namespace ecov {

template <typename T>
struct HeatMap {
  Tensor<T> raw;       // feature resolution, values in [0,1]
  Tensor<T> upsampled; // input resolution, values in [0,1]
  int target_class = 0;
  int snapshot_index = 0;
};

template <typename T>
HeatMap<T> compute_cam(Model<T>& model, const Tensor<T>& image, int target_class,
                       const std::string& target_layer = Model<T>::kTopActivation,
                       int snapshot_index = 0) {
  if (image.rank() != 3) throw DimensionError("compute_cam: image must be rank 3 (C,H,W)");
  if (target_class < 0 || target_class >= model.spec().num_classes)
    throw ArgumentError("compute_cam: class " + std::to_string(target_class) + " outside [0," +
                        std::to_string(model.spec().num_classes) + ")");

  Tensor<T> batch({1, image.dim(0), image.dim(1), image.dim(2)});
  for (int64_t i = 0; i < image.numel(); ++i) batch[i] = image[i];

  Rng unused(0);
  auto res = model.forward(batch, Mode::kInference, unused);
  const Tensor<T>& activation = model.retained_activation(target_layer);

  // d(p_c)/d(logit_j) = p_c (delta_cj - p_j)
  const int num_classes = model.spec().num_classes;
  Tensor<T> dlogits({1, static_cast<int64_t>(num_classes)});
  const T pc = res.probs.at(0, target_class);
  for (int j = 0; j < num_classes; ++j)
    dlogits.at(0, j) = pc * ((j == target_class ? T(1) : T(0)) - res.probs.at(0, j));

  model.zero_grads();
  model.backward(dlogits, true, true);
  const Tensor<T>& grads = model.feature_grad();

  const int64_t k = activation.dim(1), h = activation.dim(2), w = activation.dim(3);
  const T inv_z = T(1) / static_cast<T>(h * w);

  std::vector<T> filter_w(static_cast<size_t>(k));
  for (int64_t f = 0; f < k; ++f) {
    T acc = 0;
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j) acc += grads.at(0, f, i, j);
    filter_w[static_cast<size_t>(f)] = acc * inv_z;
  }

  HeatMap<T> heat;
  heat.target_class = target_class;
  heat.snapshot_index = snapshot_index;
  heat.raw = Tensor<T>({h, w});
  T peak = 0;
  for (int64_t i = 0; i < h; ++i)
    for (int64_t j = 0; j < w; ++j) {
      T acc = 0;
      for (int64_t f = 0; f < k; ++f) acc += filter_w[static_cast<size_t>(f)] * activation.at(0, f, i, j);
      const T v = acc > T(0) ? acc : T(0);
      heat.raw.at(i, j) = v;
      peak = std::max(peak, v);
    }
  if (peak > T(0))
    for (int64_t i = 0; i < heat.raw.numel(); ++i) heat.raw[i] /= peak;

  heat.upsampled = bilinear_resize(heat.raw, image.dim(1), image.dim(2));
  return heat;
}

// Alpha-blends a blue-to-red ramp over the grayscale base; the blend weight
// scales with heat so zero heat reproduces the base image exactly.
template <typename T>
std::vector<uint8_t> render_overlay(const Tensor<T>& heat, const Tensor<T>& gray) {
  if (heat.rank() != 2 || gray.rank() != 2)
    throw DimensionError("render_overlay: heatmap and image must be rank 2");
  if (!heat.same_shape(gray))
    throw DimensionError("render_overlay: heatmap " + shape_string(heat.shape()) +
                         " does not match image " + shape_string(gray.shape()));

  std::vector<uint8_t> rgb(static_cast<size_t>(heat.numel()) * 3);
  auto to_byte = [](double v) {
    return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  };
  for (int64_t i = 0; i < heat.numel(); ++i) {
    const double v = std::clamp(static_cast<double>(heat[i]), 0.0, 1.0);
    const double g = std::clamp(static_cast<double>(gray[i]), 0.0, 1.0);
    const double a = 0.4 * v;
    rgb[static_cast<size_t>(i) * 3 + 0] = to_byte((1.0 - a) * g + a * v);
    rgb[static_cast<size_t>(i) * 3 + 1] = to_byte((1.0 - a) * g);
    rgb[static_cast<size_t>(i) * 3 + 2] = to_byte((1.0 - a) * g + a * (1.0 - v));
  }
  return rgb;
}

// Fraction of total heat inside one quadrant: 0 = upper-left, 1 = upper-right,
// 2 = lower-left, 3 = lower-right. Zero maps report zero mass.
template <typename T>
double quadrant_mass(const Tensor<T>& map, int quadrant) {
  if (map.rank() != 2) throw DimensionError("quadrant_mass: map must be rank 2");
  if (quadrant < 0 || quadrant > 3) throw ArgumentError("quadrant_mass: quadrant must be 0..3");
  const int64_t h = map.dim(0), w = map.dim(1);
  const int64_t r0 = (quadrant / 2) * (h / 2), r1 = quadrant / 2 == 0 ? h / 2 : h;
  const int64_t c0 = (quadrant % 2) * (w / 2), c1 = quadrant % 2 == 0 ? w / 2 : w;
  double inside = 0.0, total = 0.0;
  for (int64_t r = 0; r < h; ++r)
    for (int64_t c = 0; c < w; ++c) {
      const double v = static_cast<double>(map.at(r, c));
      total += v;
      if (r >= r0 && r < r1 && c >= c0 && c < c1) inside += v;
    }
  return total > 0.0 ? inside / total : 0.0;
}

} // namespace ecov
