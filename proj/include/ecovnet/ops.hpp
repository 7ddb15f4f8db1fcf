#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ecovnet/rng.hpp"
#include "ecovnet/tensor.hpp"

// Layer primitives in NCHW with explicit backward passes. Backward functions
// accumulate into the .grad buffers of their operands so shared inputs (skip
// connections) compose by simple addition.

namespace ecov {

enum class Mode { kTraining, kInference };
enum class Padding { kSame, kValid };
enum class Act { kSwish, kSigmoid, kRelu };

namespace detail {

struct ConvGeometry {
  int64_t out_h, out_w;
  int64_t pad_top, pad_left;
};

inline ConvGeometry conv_geometry(int64_t in_h, int64_t in_w, int64_t kh, int64_t kw, int stride,
                                  Padding pad) {
  if (stride <= 0) throw ArgumentError("conv: stride must be positive, got " + std::to_string(stride));
  ConvGeometry g{};
  if (pad == Padding::kSame) {
    g.out_h = (in_h + stride - 1) / stride;
    g.out_w = (in_w + stride - 1) / stride;
    // symmetric zero padding, extra pixel on bottom/right when odd
    int64_t pad_h = std::max<int64_t>((g.out_h - 1) * stride + kh - in_h, 0);
    int64_t pad_w = std::max<int64_t>((g.out_w - 1) * stride + kw - in_w, 0);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  } else {
    if (in_h < kh || in_w < kw)
      throw DimensionError("conv: valid padding requires input at least kernel-sized");
    g.out_h = (in_h - kh) / stride + 1;
    g.out_w = (in_w - kw) / stride + 1;
    g.pad_top = 0;
    g.pad_left = 0;
  }
  return g;
}

} // namespace detail

// ---------------------------------------------------------------------------
// conv2d: x (N,Cin,H,W), kernels (Cout,Cin,kh,kw) -> (N,Cout,Ho,Wo)

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& k, int stride, Padding pad) {
  if (x.rank() != 4) throw DimensionError("conv2d: input must be rank 4, got " + shape_string(x.shape()));
  if (k.rank() != 4) throw DimensionError("conv2d: kernels must be rank 4, got " + shape_string(k.shape()));
  if (x.dim(1) != k.dim(1))
    throw DimensionError("conv2d: input channels " + std::to_string(x.dim(1)) + " != kernel channels " +
                         std::to_string(k.dim(1)));
  if (k.dim(2) != k.dim(3)) throw DimensionError("conv2d: kernels must be square");

  const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const auto g = detail::conv_geometry(h, w, kh, kw, stride, pad);

  Tensor<T> y({n, cout, g.out_h, g.out_w});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t oc = 0; oc < cout; ++oc)
      for (int64_t oh = 0; oh < g.out_h; ++oh)
        for (int64_t ow = 0; ow < g.out_w; ++ow) {
          T acc = 0;
          for (int64_t ic = 0; ic < cin; ++ic)
            for (int64_t p = 0; p < kh; ++p) {
              const int64_t ih = oh * stride - g.pad_top + p;
              if (ih < 0 || ih >= h) continue;
              for (int64_t q = 0; q < kw; ++q) {
                const int64_t iw = ow * stride - g.pad_left + q;
                if (iw < 0 || iw >= w) continue;
                acc += x.at(in, ic, ih, iw) * k.at(oc, ic, p, q);
              }
            }
          y.at(in, oc, oh, ow) = acc;
        }
  return y;
}

template <typename T>
void conv2d_backward(Tensor<T>& x, Tensor<T>& k, int stride, Padding pad, const Tensor<T>& gy) {
  const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const auto g = detail::conv_geometry(h, w, kh, kw, stride, pad);
  if (gy.shape() != std::vector<int64_t>{n, cout, g.out_h, g.out_w})
    throw DimensionError("conv2d_backward: output gradient shape mismatch");

  x.ensure_grad();
  k.ensure_grad();
  auto& gx = x.grad();
  auto& gk = k.grad();
  for (int64_t in = 0; in < n; ++in)
    for (int64_t oc = 0; oc < cout; ++oc)
      for (int64_t oh = 0; oh < g.out_h; ++oh)
        for (int64_t ow = 0; ow < g.out_w; ++ow) {
          const T go = gy.at(in, oc, oh, ow);
          if (go == T(0)) continue;
          for (int64_t ic = 0; ic < cin; ++ic)
            for (int64_t p = 0; p < kh; ++p) {
              const int64_t ih = oh * stride - g.pad_top + p;
              if (ih < 0 || ih >= h) continue;
              for (int64_t q = 0; q < kw; ++q) {
                const int64_t iw = ow * stride - g.pad_left + q;
                if (iw < 0 || iw >= w) continue;
                const size_t xi = static_cast<size_t>(((in * cin + ic) * h + ih) * w + iw);
                const size_t ki = static_cast<size_t>(((oc * cin + ic) * kh + p) * kw + q);
                gx[xi] += go * k[static_cast<int64_t>(ki)];
                gk[ki] += go * x[static_cast<int64_t>(xi)];
              }
            }
        }
}

// ---------------------------------------------------------------------------
// depthwise_conv2d: x (N,C,H,W), kernels (C,kh,kw), one kernel per channel

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& k, int stride, Padding pad) {
  if (x.rank() != 4) throw DimensionError("depthwise_conv2d: input must be rank 4");
  if (k.rank() != 3) throw DimensionError("depthwise_conv2d: kernels must be rank 3 (C,kh,kw)");
  if (x.dim(1) != k.dim(0))
    throw DimensionError("depthwise_conv2d: kernel count " + std::to_string(k.dim(0)) +
                         " != input channels " + std::to_string(x.dim(1)));

  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t kh = k.dim(1), kw = k.dim(2);
  const auto g = detail::conv_geometry(h, w, kh, kw, stride, pad);

  Tensor<T> y({n, c, g.out_h, g.out_w});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic)
      for (int64_t oh = 0; oh < g.out_h; ++oh)
        for (int64_t ow = 0; ow < g.out_w; ++ow) {
          T acc = 0;
          for (int64_t p = 0; p < kh; ++p) {
            const int64_t ih = oh * stride - g.pad_top + p;
            if (ih < 0 || ih >= h) continue;
            for (int64_t q = 0; q < kw; ++q) {
              const int64_t iw = ow * stride - g.pad_left + q;
              if (iw < 0 || iw >= w) continue;
              acc += x.at(in, ic, ih, iw) * k.at(ic, p, q);
            }
          }
          y.at(in, ic, oh, ow) = acc;
        }
  return y;
}

template <typename T>
void depthwise_conv2d_backward(Tensor<T>& x, Tensor<T>& k, int stride, Padding pad, const Tensor<T>& gy) {
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t kh = k.dim(1), kw = k.dim(2);
  const auto g = detail::conv_geometry(h, w, kh, kw, stride, pad);
  if (gy.shape() != std::vector<int64_t>{n, c, g.out_h, g.out_w})
    throw DimensionError("depthwise_conv2d_backward: output gradient shape mismatch");

  x.ensure_grad();
  k.ensure_grad();
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic)
      for (int64_t oh = 0; oh < g.out_h; ++oh)
        for (int64_t ow = 0; ow < g.out_w; ++ow) {
          const T go = gy.at(in, ic, oh, ow);
          if (go == T(0)) continue;
          for (int64_t p = 0; p < kh; ++p) {
            const int64_t ih = oh * stride - g.pad_top + p;
            if (ih < 0 || ih >= h) continue;
            for (int64_t q = 0; q < kw; ++q) {
              const int64_t iw = ow * stride - g.pad_left + q;
              if (iw < 0 || iw >= w) continue;
              const size_t xi = static_cast<size_t>(((in * c + ic) * h + ih) * w + iw);
              const size_t ki = static_cast<size_t>((ic * kh + p) * kw + q);
              x.grad()[xi] += go * k[static_cast<int64_t>(ki)];
              k.grad()[ki] += go * x[static_cast<int64_t>(xi)];
            }
          }
        }
}

// ---------------------------------------------------------------------------
// batch_norm over channel axis 1; accepts (N,C) and (N,C,H,W)

template <typename T>
struct BnCache {
  Mode mode = Mode::kInference;
  Tensor<T> x_hat;
  std::vector<T> inv_std; // per channel
  int64_t m = 0;          // reduce-set size per channel
};

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, T eps, T momentum, Mode mode,
                     BnCache<T>* cache = nullptr) {
  if (x.rank() != 2 && x.rank() != 4)
    throw DimensionError("batch_norm: input must be rank 2 or 4, got " + shape_string(x.shape()));
  const int64_t n = x.dim(0), c = x.dim(1);
  const int64_t spatial = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  if (gamma.numel() != c || beta.numel() != c || running_mean.numel() != c || running_var.numel() != c)
    throw DimensionError("batch_norm: parameter length must equal channel count " + std::to_string(c));
  if (!(eps > T(0))) throw ArgumentError("batch_norm: epsilon must be positive");

  const int64_t m = n * spatial;
  Tensor<T> y(x.shape());
  Tensor<T> x_hat(x.shape());
  std::vector<T> inv_std(static_cast<size_t>(c));

  auto index = [&](int64_t in, int64_t ic, int64_t s) {
    return (in * c + ic) * spatial + s;
  };

  if (mode == Mode::kTraining) {
    if (m == 0) throw ArgumentError("batch_norm: empty reduce set in training mode");
    for (int64_t ic = 0; ic < c; ++ic) {
      T mean = 0;
      for (int64_t in = 0; in < n; ++in)
        for (int64_t s = 0; s < spatial; ++s) mean += x[index(in, ic, s)];
      mean /= static_cast<T>(m);
      T var = 0;
      for (int64_t in = 0; in < n; ++in)
        for (int64_t s = 0; s < spatial; ++s) {
          const T d = x[index(in, ic, s)] - mean;
          var += d * d;
        }
      var /= static_cast<T>(m);
      const T istd = T(1) / std::sqrt(var + eps);
      inv_std[static_cast<size_t>(ic)] = istd;
      for (int64_t in = 0; in < n; ++in)
        for (int64_t s = 0; s < spatial; ++s) {
          const int64_t i = index(in, ic, s);
          x_hat[i] = (x[i] - mean) * istd;
          y[i] = gamma[ic] * x_hat[i] + beta[ic];
        }
      running_mean[ic] = momentum * running_mean[ic] + (T(1) - momentum) * mean;
      running_var[ic] = momentum * running_var[ic] + (T(1) - momentum) * var;
    }
  } else {
    for (int64_t ic = 0; ic < c; ++ic) {
      const T istd = T(1) / std::sqrt(running_var[ic] + eps);
      inv_std[static_cast<size_t>(ic)] = istd;
      const T mean = running_mean[ic];
      for (int64_t in = 0; in < n; ++in)
        for (int64_t s = 0; s < spatial; ++s) {
          const int64_t i = index(in, ic, s);
          x_hat[i] = (x[i] - mean) * istd;
          y[i] = gamma[ic] * x_hat[i] + beta[ic];
        }
    }
  }

  if (cache) {
    cache->mode = mode;
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
    cache->m = m;
  }
  return y;
}

template <typename T>
void batch_norm_backward(Tensor<T>& x, Tensor<T>& gamma, Tensor<T>& beta, const BnCache<T>& cache,
                         const Tensor<T>& gy) {
  const int64_t n = x.dim(0), c = x.dim(1);
  const int64_t spatial = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  if (!gy.same_shape(x)) throw DimensionError("batch_norm_backward: gradient shape mismatch");

  x.ensure_grad();
  gamma.ensure_grad();
  beta.ensure_grad();

  auto index = [&](int64_t in, int64_t ic, int64_t s) { return (in * c + ic) * spatial + s; };
  const T m = static_cast<T>(cache.m);

  for (int64_t ic = 0; ic < c; ++ic) {
    T sum_gy = 0, sum_gy_xhat = 0;
    for (int64_t in = 0; in < n; ++in)
      for (int64_t s = 0; s < spatial; ++s) {
        const int64_t i = index(in, ic, s);
        sum_gy += gy[i];
        sum_gy_xhat += gy[i] * cache.x_hat[i];
      }
    gamma.grad()[static_cast<size_t>(ic)] += sum_gy_xhat;
    beta.grad()[static_cast<size_t>(ic)] += sum_gy;

    const T istd = cache.inv_std[static_cast<size_t>(ic)];
    if (cache.mode == Mode::kTraining) {
      const T scale = gamma[ic] * istd / m;
      for (int64_t in = 0; in < n; ++in)
        for (int64_t s = 0; s < spatial; ++s) {
          const int64_t i = index(in, ic, s);
          x.grad()[static_cast<size_t>(i)] +=
              scale * (m * gy[i] - sum_gy - cache.x_hat[i] * sum_gy_xhat);
        }
    } else {
      const T scale = gamma[ic] * istd;
      for (int64_t in = 0; in < n; ++in)
        for (int64_t s = 0; s < spatial; ++s) {
          const int64_t i = index(in, ic, s);
          x.grad()[static_cast<size_t>(i)] += scale * gy[i];
        }
    }
  }
}

// ---------------------------------------------------------------------------
// elementwise activations

template <typename T>
inline T sigmoid_scalar(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

template <typename T>
Tensor<T> activation(Act kind, const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const int64_t n = x.numel();
  switch (kind) {
    case Act::kSwish:
      for (int64_t i = 0; i < n; ++i) y[i] = x[i] * sigmoid_scalar(x[i]);
      break;
    case Act::kSigmoid:
      for (int64_t i = 0; i < n; ++i) y[i] = sigmoid_scalar(x[i]);
      break;
    case Act::kRelu:
      for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
      break;
    default:
      throw ArgumentError("activation: unknown kind");
  }
  return y;
}

template <typename T>
void activation_backward(Act kind, Tensor<T>& x, const Tensor<T>& gy) {
  if (!gy.same_shape(x)) throw DimensionError("activation_backward: gradient shape mismatch");
  x.ensure_grad();
  const int64_t n = x.numel();
  switch (kind) {
    case Act::kSwish:
      for (int64_t i = 0; i < n; ++i) {
        const T s = sigmoid_scalar(x[i]);
        x.grad()[static_cast<size_t>(i)] += gy[i] * s * (T(1) + x[i] * (T(1) - s));
      }
      break;
    case Act::kSigmoid:
      for (int64_t i = 0; i < n; ++i) {
        const T s = sigmoid_scalar(x[i]);
        x.grad()[static_cast<size_t>(i)] += gy[i] * s * (T(1) - s);
      }
      break;
    case Act::kRelu:
      for (int64_t i = 0; i < n; ++i)
        if (x[i] > T(0)) x.grad()[static_cast<size_t>(i)] += gy[i];
      break;
    default:
      throw ArgumentError("activation_backward: unknown kind");
  }
}

// ---------------------------------------------------------------------------
// global average pool (N,C,H,W) -> (N,C)

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  if (x.rank() != 4) throw DimensionError("global_avg_pool: input must be rank 4");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y({n, c});
  const T inv = T(1) / static_cast<T>(h * w);
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic) {
      T acc = 0;
      for (int64_t ih = 0; ih < h; ++ih)
        for (int64_t iw = 0; iw < w; ++iw) acc += x.at(in, ic, ih, iw);
      y.at(in, ic) = acc * inv;
    }
  return y;
}

template <typename T>
void global_avg_pool_backward(Tensor<T>& x, const Tensor<T>& gy) {
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (gy.shape() != std::vector<int64_t>{n, c})
    throw DimensionError("global_avg_pool_backward: gradient shape mismatch");
  x.ensure_grad();
  const T inv = T(1) / static_cast<T>(h * w);
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic) {
      const T g = gy.at(in, ic) * inv;
      for (int64_t ih = 0; ih < h; ++ih)
        for (int64_t iw = 0; iw < w; ++iw)
          x.grad()[static_cast<size_t>(((in * c + ic) * h + ih) * w + iw)] += g;
    }
}

// ---------------------------------------------------------------------------
// fully connected: x (N,C) * w (C,D) + b (D)

template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1)
    throw DimensionError("fully_connected: expected x (N,C), w (C,D), b (D)");
  const int64_t n = x.dim(0), c = x.dim(1), d = w.dim(1);
  if (w.dim(0) != c || b.dim(0) != d)
    throw DimensionError("fully_connected: inner extents disagree, x " + shape_string(x.shape()) +
                         " w " + shape_string(w.shape()));
  Tensor<T> y({n, d});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t od = 0; od < d; ++od) {
      T acc = b[od];
      for (int64_t ic = 0; ic < c; ++ic) acc += x.at(in, ic) * w.at(ic, od);
      y.at(in, od) = acc;
    }
  return y;
}

template <typename T>
void fully_connected_backward(Tensor<T>& x, Tensor<T>& w, Tensor<T>& b, const Tensor<T>& gy) {
  const int64_t n = x.dim(0), c = x.dim(1), d = w.dim(1);
  if (gy.shape() != std::vector<int64_t>{n, d})
    throw DimensionError("fully_connected_backward: gradient shape mismatch");
  x.ensure_grad();
  w.ensure_grad();
  b.ensure_grad();
  for (int64_t in = 0; in < n; ++in)
    for (int64_t od = 0; od < d; ++od) {
      const T go = gy.at(in, od);
      if (go == T(0)) continue;
      b.grad()[static_cast<size_t>(od)] += go;
      for (int64_t ic = 0; ic < c; ++ic) {
        x.grad()[static_cast<size_t>(in * c + ic)] += go * w.at(ic, od);
        w.grad()[static_cast<size_t>(ic * d + od)] += go * x.at(in, ic);
      }
    }
}

// ---------------------------------------------------------------------------
// squeeze-and-excitation: GAP -> FC(C/r) -> swish -> FC(C) -> sigmoid gate

template <typename T>
struct SeParams {
  Tensor<T> w1, b1; // (C, hidden), (hidden)
  Tensor<T> w2, b2; // (hidden, C), (C)
};

template <typename T>
SeParams<T> make_se_params(int64_t channels, int reduce_ratio, Rng& rng) {
  if (reduce_ratio < 1) throw ArgumentError("squeeze_excite: reduce_ratio must be >= 1");
  const int64_t hidden = channels / reduce_ratio;
  if (hidden < 1)
    throw ArgumentError("squeeze_excite: reduce_ratio " + std::to_string(reduce_ratio) +
                        " exceeds channel count " + std::to_string(channels));
  SeParams<T> p;
  p.w1 = Tensor<T>({channels, hidden});
  p.b1 = Tensor<T>({hidden});
  p.w2 = Tensor<T>({hidden, channels});
  p.b2 = Tensor<T>({channels});
  const T s1 = std::sqrt(T(2) / static_cast<T>(channels));
  const T s2 = std::sqrt(T(2) / static_cast<T>(hidden));
  for (auto& v : p.w1.data()) v = static_cast<T>(rng.normal()) * s1;
  for (auto& v : p.w2.data()) v = static_cast<T>(rng.normal()) * s2;
  return p;
}

template <typename T>
struct SeCache {
  Tensor<T> x;      // block input, needed for the gate-path gradient
  Tensor<T> pooled; // (N,C)
  Tensor<T> z1;     // pre-swish
  Tensor<T> h1;     // post-swish
  Tensor<T> z2;     // pre-sigmoid
  Tensor<T> gate;   // (N,C)
};

template <typename T>
Tensor<T> squeeze_excite(const Tensor<T>& x, int reduce_ratio, const SeParams<T>& p,
                         SeCache<T>* cache = nullptr) {
  if (x.rank() != 4) throw DimensionError("squeeze_excite: input must be rank 4");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (reduce_ratio < 1) throw ArgumentError("squeeze_excite: reduce_ratio must be >= 1");
  const int64_t hidden = c / reduce_ratio;
  if (hidden < 1)
    throw ArgumentError("squeeze_excite: reduce_ratio " + std::to_string(reduce_ratio) +
                        " exceeds channel count " + std::to_string(c));
  if (p.w1.dim(0) != c || p.w1.dim(1) != hidden || p.w2.dim(0) != hidden || p.w2.dim(1) != c)
    throw DimensionError("squeeze_excite: parameter shapes do not match channels/ratio");

  Tensor<T> pooled = global_avg_pool(x);
  Tensor<T> z1 = fully_connected(pooled, p.w1, p.b1);
  Tensor<T> h1 = activation(Act::kSwish, z1);
  Tensor<T> z2 = fully_connected(h1, p.w2, p.b2);
  Tensor<T> gate = activation(Act::kSigmoid, z2);

  Tensor<T> y(x.shape());
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic) {
      const T g = gate.at(in, ic);
      for (int64_t ih = 0; ih < h; ++ih)
        for (int64_t iw = 0; iw < w; ++iw) y.at(in, ic, ih, iw) = x.at(in, ic, ih, iw) * g;
    }

  if (cache) {
    cache->x = x;
    cache->pooled = std::move(pooled);
    cache->z1 = std::move(z1);
    cache->h1 = std::move(h1);
    cache->z2 = std::move(z2);
    cache->gate = std::move(gate);
  }
  return y;
}

template <typename T>
void squeeze_excite_backward(Tensor<T>& x, SeParams<T>& p, SeCache<T>& cache, const Tensor<T>& gy) {
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (!gy.same_shape(x)) throw DimensionError("squeeze_excite_backward: gradient shape mismatch");
  x.ensure_grad();

  // direct path: dL/dx += gy * gate; gate path: dL/dgate = sum_hw gy * x
  Tensor<T> ggate({n, c});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ic = 0; ic < c; ++ic) {
      const T g = cache.gate.at(in, ic);
      T acc = 0;
      for (int64_t ih = 0; ih < h; ++ih)
        for (int64_t iw = 0; iw < w; ++iw) {
          const size_t i = static_cast<size_t>(((in * c + ic) * h + ih) * w + iw);
          x.grad()[i] += gy[static_cast<int64_t>(i)] * g;
          acc += gy[static_cast<int64_t>(i)] * cache.x[static_cast<int64_t>(i)];
        }
      ggate.at(in, ic) = acc;
    }

  cache.z2.zero_grad();
  activation_backward(Act::kSigmoid, cache.z2, ggate);
  Tensor<T> gz2 = cache.z2.take_grad();

  cache.h1.zero_grad();
  fully_connected_backward(cache.h1, p.w2, p.b2, gz2);
  Tensor<T> gh1 = cache.h1.take_grad();

  cache.z1.zero_grad();
  activation_backward(Act::kSwish, cache.z1, gh1);
  Tensor<T> gz1 = cache.z1.take_grad();

  cache.pooled.zero_grad();
  fully_connected_backward(cache.pooled, p.w1, p.b1, gz1);
  Tensor<T> gpooled = cache.pooled.take_grad();

  global_avg_pool_backward(x, gpooled);
}

// ---------------------------------------------------------------------------
// inverted dropout

template <typename T>
struct DropoutCache {
  bool identity = true;
  T scale = T(1);
  std::vector<uint8_t> mask;
};

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Mode mode, Rng& rng, DropoutCache<T>* cache = nullptr) {
  if (p < 0.0 || p >= 1.0) throw ArgumentError("dropout: p must be in [0, 1), got " + std::to_string(p));
  if (mode == Mode::kInference || p == 0.0) {
    if (cache) {
      cache->identity = true;
      cache->scale = T(1);
      cache->mask.clear();
    }
    return x;
  }
  const T scale = T(1) / static_cast<T>(1.0 - p);
  Tensor<T> y(x.shape());
  std::vector<uint8_t> mask(static_cast<size_t>(x.numel()));
  for (int64_t i = 0; i < x.numel(); ++i) {
    const bool keep = rng.uniform01() >= p;
    mask[static_cast<size_t>(i)] = keep ? 1 : 0;
    y[i] = keep ? x[i] * scale : T(0);
  }
  if (cache) {
    cache->identity = false;
    cache->scale = scale;
    cache->mask = std::move(mask);
  }
  return y;
}

template <typename T>
void dropout_backward(Tensor<T>& x, const DropoutCache<T>& cache, const Tensor<T>& gy) {
  if (!gy.same_shape(x)) throw DimensionError("dropout_backward: gradient shape mismatch");
  x.ensure_grad();
  if (cache.identity) {
    for (int64_t i = 0; i < x.numel(); ++i) x.grad()[static_cast<size_t>(i)] += gy[i];
    return;
  }
  for (int64_t i = 0; i < x.numel(); ++i)
    if (cache.mask[static_cast<size_t>(i)])
      x.grad()[static_cast<size_t>(i)] += gy[i] * cache.scale;
}

// ---------------------------------------------------------------------------
// softmax, rank-1 vector or rank-2 rowwise, max-subtracted for stability

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  if (logits.numel() == 0) throw ArgumentError("softmax: empty input");
  if (logits.rank() != 1 && logits.rank() != 2)
    throw DimensionError("softmax: input must be rank 1 or 2");
  const int64_t rows = logits.rank() == 2 ? logits.dim(0) : 1;
  const int64_t cols = logits.rank() == 2 ? logits.dim(1) : logits.dim(0);
  Tensor<T> y(logits.shape());
  for (int64_t r = 0; r < rows; ++r) {
    T mx = logits[r * cols];
    for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, logits[r * cols + j]);
    T sum = 0;
    for (int64_t j = 0; j < cols; ++j) {
      const T e = std::exp(logits[r * cols + j] - mx);
      y[r * cols + j] = e;
      sum += e;
    }
    for (int64_t j = 0; j < cols; ++j) y[r * cols + j] /= sum;
  }
  return y;
}

// ---------------------------------------------------------------------------
// weighted categorical cross-entropy with L1/L2 terms over selected parameters

template <typename T>
T cross_entropy_loss(const Tensor<T>& probs, const Tensor<T>& onehot, const std::vector<T>& class_weights,
                     T l1_coeff, T l2_coeff, std::span<const Tensor<T>* const> reg_params) {
  if (probs.rank() != 2 || !onehot.same_shape(probs))
    throw DimensionError("cross_entropy_loss: probs and labels must be matching (N,C)");
  const int64_t n = probs.dim(0), c = probs.dim(1);
  if (!class_weights.empty() && static_cast<int64_t>(class_weights.size()) != c)
    throw DimensionError("cross_entropy_loss: class weight count must equal C");
  for (const T wv : class_weights)
    if (!(wv > T(0))) throw ArgumentError("cross_entropy_loss: class weights must be positive");

  T data_loss = 0;
  for (int64_t r = 0; r < n; ++r) {
    T row_sum = 0;
    int64_t hot = -1;
    for (int64_t j = 0; j < c; ++j) {
      row_sum += probs.at(r, j);
      const T lv = onehot.at(r, j);
      if (lv == T(1)) {
        if (hot >= 0) throw ArgumentError("cross_entropy_loss: label row has multiple ones");
        hot = j;
      } else if (lv != T(0)) {
        throw ArgumentError("cross_entropy_loss: labels must be one-hot");
      }
    }
    if (hot < 0) throw ArgumentError("cross_entropy_loss: label row has no one set");
    if (std::abs(row_sum - T(1)) > T(1e-4))
      throw ArgumentError("cross_entropy_loss: probability row does not sum to 1");
    const T w = class_weights.empty() ? T(1) : class_weights[static_cast<size_t>(hot)];
    const T p = std::max(probs.at(r, hot), static_cast<T>(1e-12));
    data_loss -= w * std::log(p);
  }
  data_loss /= static_cast<T>(n);

  T reg = 0;
  if (l1_coeff != T(0) || l2_coeff != T(0)) {
    for (const Tensor<T>* t : reg_params)
      for (const T v : t->data()) reg += l1_coeff * std::abs(v) + l2_coeff * v * v;
  }
  return data_loss + reg;
}

// Fused softmax cross-entropy gradient with respect to the logits.
template <typename T>
Tensor<T> softmax_ce_grad(const Tensor<T>& probs, const Tensor<T>& onehot,
                          const std::vector<T>& class_weights) {
  const int64_t n = probs.dim(0), c = probs.dim(1);
  Tensor<T> g(probs.shape());
  for (int64_t r = 0; r < n; ++r) {
    int64_t hot = 0;
    for (int64_t j = 0; j < c; ++j)
      if (onehot.at(r, j) == T(1)) hot = j;
    const T w = class_weights.empty() ? T(1) : class_weights[static_cast<size_t>(hot)];
    for (int64_t j = 0; j < c; ++j)
      g.at(r, j) = w * (probs.at(r, j) - onehot.at(r, j)) / static_cast<T>(n);
  }
  return g;
}

// d(l1*|th| + l2*th^2)/dth accumulated into the grads of the given parameters
template <typename T>
void add_reg_grads(T l1_coeff, T l2_coeff, std::span<Tensor<T>* const> reg_params) {
  for (Tensor<T>* t : reg_params) {
    t->ensure_grad();
    for (int64_t i = 0; i < t->numel(); ++i) {
      const T v = (*t)[i];
      const T sign = v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
      t->grad()[static_cast<size_t>(i)] += l1_coeff * sign + T(2) * l2_coeff * v;
    }
  }
}

} // namespace ecov
