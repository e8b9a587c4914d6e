#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "medner/common.hpp"
#include "medner/rng.hpp"

namespace medner {

using Shape = std::vector<std::int64_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

// Dense row-major tensor. float for training, double for gradient checks.
template <class T>
class Tensor {
 public:
  using Scalar = T;
  using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatMap =
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(count(shape_), T(0)) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != count(shape_))
      throw ShapeMismatch("tensor data length does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, T v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  static Tensor gaussian(Shape shape, Rng& rng, T mean = T(0), T stddev = T(1)) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = mean + stddev * static_cast<T>(rng.normal());
    return t;
  }

  static Tensor uniform(Shape shape, Rng& rng, T lo, T hi) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  T operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  T& at(std::int64_t r, std::int64_t c) { return data_[static_cast<std::size_t>(r * dim(1) + c)]; }
  T at(std::int64_t r, std::int64_t c) const {
    return data_[static_cast<std::size_t>(r * dim(1) + c)];
  }

  // rank-2 Eigen view; rank-1 tensors map as a single row
  MatMap mat() {
    if (rank() == 1) return MatMap(data_.data(), 1, dim(0));
    return MatMap(data_.data(), dim(0), dim(1));
  }
  ConstMatMap mat() const {
    if (rank() == 1) return ConstMatMap(data_.data(), 1, dim(0));
    return ConstMatMap(data_.data(), dim(0), dim(1));
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (const T& x : data_)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  static std::int64_t count(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) {
      if (d < 0) throw ShapeMismatch("negative extent in shape " + shape_str(s));
      n *= d;
    }
    return n;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

}  // namespace medner
