#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "ecovnet/errors.hpp"

namespace ecov {

// Dense row-major tensor in NCHW convention for rank 4. Carries an optional
// gradient buffer of identical shape; grads are allocated lazily so inference
// never pays for them.
template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>, "Tensor element type must be float or double");

public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    numel_ = checked_numel(shape_);
    data_.assign(static_cast<size_t>(numel_), T(0));
  }

  Tensor(std::vector<int64_t> shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    numel_ = checked_numel(shape_);
    if (static_cast<int64_t>(data_.size()) != numel_)
      throw DimensionError("Tensor: value count " + std::to_string(data_.size()) +
                           " does not match shape product " + std::to_string(numel_));
  }

  static Tensor full(std::vector<int64_t> shape, T v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int64_t numel() const { return numel_; }
  bool empty() const { return numel_ == 0; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // rank-2 (N, C)
  T& at(int64_t n, int64_t c) { return data_[static_cast<size_t>(n * shape_[1] + c)]; }
  const T& at(int64_t n, int64_t c) const { return data_[static_cast<size_t>(n * shape_[1] + c)]; }

  // rank-3 (C, H, W)
  T& at(int64_t c, int64_t h, int64_t w) {
    return data_[static_cast<size_t>((c * shape_[1] + h) * shape_[2] + w)];
  }
  const T& at(int64_t c, int64_t h, int64_t w) const {
    return data_[static_cast<size_t>((c * shape_[1] + h) * shape_[2] + w)];
  }

  // rank-4 (N, C, H, W)
  T& at(int64_t n, int64_t c, int64_t h, int64_t w) {
    return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  const T& at(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return data_[static_cast<size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }

  void fill(T v) {
    for (auto& x : data_) x = v;
  }

  bool has_grad() const { return !grad_.empty(); }

  std::vector<T>& grad() {
    ensure_grad();
    return grad_;
  }
  const std::vector<T>& grad() const {
    if (grad_.empty()) throw ArgumentError("Tensor: gradient buffer not allocated");
    return grad_;
  }

  void ensure_grad() {
    if (grad_.empty()) grad_.assign(static_cast<size_t>(numel_), T(0));
  }

  void zero_grad() {
    if (!grad_.empty())
      for (auto& g : grad_) g = T(0);
  }

  void drop_grad() { grad_.clear(); }

  // Moves the gradient buffer out as a value tensor of the same shape.
  Tensor take_grad() {
    ensure_grad();
    Tensor out;
    out.shape_ = shape_;
    out.numel_ = numel_;
    out.data_ = std::move(grad_);
    grad_.clear();
    return out;
  }

  bool all_finite() const {
    for (const auto& x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
  static int64_t checked_numel(const std::vector<int64_t>& shape) {
    if (shape.empty()) throw DimensionError("Tensor: shape must have at least one extent");
    int64_t n = 1;
    for (int64_t d : shape) {
      if (d <= 0) throw DimensionError("Tensor: extents must be positive, got " + std::to_string(d));
      n *= d;
    }
    return n;
  }

  std::vector<int64_t> shape_;
  std::vector<T> data_;
  std::vector<T> grad_;
  int64_t numel_ = 0;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

inline std::string shape_string(const std::vector<int64_t>& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  s += ")";
  return s;
}

} // namespace ecov
