#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clenet/error.hpp"

namespace clenet {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

// Row-major flat index: the last coordinate varies fastest.
inline int64_t index_of(std::span<const int64_t> coords, const Shape& shape) {
  if (coords.size() != shape.size())
    throw IndexError("index_of: got " + std::to_string(coords.size()) +
                     " coordinates for rank-" + std::to_string(shape.size()) +
                     " shape");
  int64_t idx = 0;
  for (size_t a = 0; a < shape.size(); ++a) {
    if (coords[a] < 0 || coords[a] >= shape[a])
      throw IndexError("index_of: coordinate " + std::to_string(coords[a]) +
                       " out of range for axis " + std::to_string(a) +
                       " (extent " + std::to_string(shape[a]) + ")");
    idx = idx * shape[a] + coords[a];
  }
  return idx;
}

inline int64_t index_of(std::initializer_list<int64_t> coords,
                        const Shape& shape) {
  return index_of(std::span<const int64_t>(coords.begin(), coords.size()),
                  shape);
}

inline Shape coords_of(int64_t index, const Shape& shape) {
  if (index < 0 || index >= shape_numel(shape))
    throw IndexError("coords_of: flat index " + std::to_string(index) +
                     " out of range for shape " + shape_str(shape));
  Shape coords(shape.size());
  for (size_t a = shape.size(); a-- > 0;) {
    coords[a] = index % shape[a];
    index /= shape[a];
  }
  return coords;
}

// Dense n-d array, row-major. float carries weights/activations; the double
// instantiation backs the 64-bit evaluation mode used by gradient checks.
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(size_t(shape_numel(shape_)), T(0));
  }

  TensorT(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (int64_t(data_.size()) != shape_numel(shape_))
      throw ShapeError("tensor: data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static TensorT full(Shape shape, T value) {
    TensorT t(std::move(shape));
    t.fill(value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  int64_t rank() const { return int64_t(shape_.size()); }
  int64_t extent(size_t axis) const { return shape_.at(axis); }
  int64_t numel() const { return int64_t(data_.size()); }
  bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](int64_t i) { return data_[size_t(i)]; }
  const T& operator[](int64_t i) const { return data_[size_t(i)]; }

  T& at(std::initializer_list<int64_t> coords) {
    return data_[size_t(index_of(coords, shape_))];
  }
  const T& at(std::initializer_list<int64_t> coords) const {
    return data_[size_t(index_of(coords, shape_))];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  // Same data, new extents; element count must match.
  TensorT reshaped(Shape new_shape) const {
    if (shape_numel(new_shape) != numel())
      throw ShapeError("reshape: " + shape_str(shape_) + " -> " +
                       shape_str(new_shape) + " changes element count");
    return TensorT(std::move(new_shape), data_);
  }

  // Fixed left-to-right reduction: bit-deterministic run to run.
  T sum() const {
    T acc = T(0);
    for (const T& v : data_) acc += v;
    return acc;
  }

  TensorT add(const TensorT& o) const {
    require_same_shape(o, "add");
    TensorT out(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = data_[size_t(i)] + o[i];
    return out;
  }

  TensorT mul(const TensorT& o) const {
    require_same_shape(o, "mul");
    TensorT out(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = data_[size_t(i)] * o[i];
    return out;
  }

  template <typename U>
  TensorT<U> astype() const {
    std::vector<U> d(data_.size());
    for (size_t i = 0; i < data_.size(); ++i) d[i] = U(data_[i]);
    return TensorT<U>(shape_, std::move(d));
  }

 private:
  void validate_shape() const {
    if (shape_.empty()) throw ShapeError("tensor: empty shape");
    for (size_t a = 0; a < shape_.size(); ++a)
      if (shape_[a] <= 0)
        throw ShapeError("tensor: non-positive extent " +
                         std::to_string(shape_[a]) + " on axis " +
                         std::to_string(a));
  }

  void require_same_shape(const TensorT& o, const char* op) const {
    if (!same_shape(o))
      throw ShapeError(std::string(op) + ": shape mismatch " +
                       shape_str(shape_) + " vs " + shape_str(o.shape_));
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace clenet
