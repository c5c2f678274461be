#pragma once

#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "partgait/errors.hpp"

namespace partgait {

// Dense row-major tensor owning its storage. Kept deliberately small:
// layer kernels index raw data directly, this class only tracks shape.
template <typename T>
class tensor {
 public:
  tensor() = default;

  explicit tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), T(0));
  }

  tensor(std::initializer_list<int64_t> shape)
      : tensor(std::vector<int64_t>(shape)) {}

  static tensor full(std::vector<int64_t> shape, T value) {
    tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  const std::vector<int64_t>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  template <typename... Ix>
  T& at(Ix... ix) {
    return data_[static_cast<size_t>(offset(ix...))];
  }

  template <typename... Ix>
  const T& at(Ix... ix) const {
    return data_[static_cast<size_t>(offset(ix...))];
  }

  template <typename... Ix>
  int64_t offset(Ix... ix) const {
    const int64_t idx[] = {static_cast<int64_t>(ix)...};
    const int n = static_cast<int>(sizeof...(Ix));
    int64_t off = 0;
    for (int i = 0; i < n; ++i) off = off * shape_[static_cast<size_t>(i)] + idx[i];
    return off;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  // Reinterpret shape in place; element count must be preserved.
  void set_shape(std::vector<int64_t> shape) {
    if (count(shape) != numel())
      throw shape_mismatch_error("set_shape: element count changed " +
                                 describe(shape_) + " -> " + describe(shape));
    shape_ = std::move(shape);
  }

  bool same_shape(const tensor& o) const { return shape_ == o.shape_; }

  static std::string describe(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
  }

  std::string describe() const { return describe(shape_); }

 private:
  static int64_t count(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
      if (d < 0) throw shape_mismatch_error("negative dimension");
      n *= d;
    }
    return shape.empty() ? 0 : n;
  }

  std::vector<int64_t> shape_;
  std::vector<T> data_;
};

using tensorf = tensor<float>;
using tensord = tensor<double>;

}  // namespace partgait
