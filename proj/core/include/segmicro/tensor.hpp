#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "segmicro/errors.hpp"

namespace segmicro {

// Dimensions of a rank-4 tensor in (batch, height, width, channels) order.
struct Shape4 {
  int batch = 0;
  int height = 0;
  int width = 0;
  int channels = 0;

  bool operator==(const Shape4&) const = default;

  std::int64_t volume() const {
    return static_cast<std::int64_t>(batch) * height * width * channels;
  }

  std::string to_string() const;
};

// Contiguous rank-4 array, row-major in (batch, height, width, channels).
// Tensors are values: layer ops never mutate their inputs.
template <typename T>
class Tensor4 {
 public:
  Tensor4() = default;

  explicit Tensor4(Shape4 shape, T fill = T{0}) : shape_(shape) {
    if (shape.batch < 1 || shape.height < 1 || shape.width < 1 ||
        shape.channels < 1) {
      throw ShapeError("Tensor4 dimensions must all be >= 1, got " +
                       shape.to_string());
    }
    data_.assign(static_cast<std::size_t>(shape.volume()), fill);
  }

  Tensor4(Shape4 shape, std::vector<T> data) : shape_(shape) {
    if (static_cast<std::int64_t>(data.size()) != shape.volume()) {
      throw ShapeError("Tensor4 data length " + std::to_string(data.size()) +
                       " does not match shape " + shape.to_string());
    }
    data_ = std::move(data);
  }

  const Shape4& shape() const { return shape_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(int b, int y, int x, int c) const {
    return ((static_cast<std::size_t>(b) * shape_.height + y) * shape_.width +
            x) *
               shape_.channels +
           c;
  }

  T& at(int b, int y, int x, int c) { return data_[offset(b, y, x, c)]; }
  const T& at(int b, int y, int x, int c) const {
    return data_[offset(b, y, x, c)];
  }

  // Pointer to the channel vector of one pixel.
  T* pixel(int b, int y, int x) { return data_.data() + offset(b, y, x, 0); }
  const T* pixel(int b, int y, int x) const {
    return data_.data() + offset(b, y, x, 0);
  }

  template <typename U>
  Tensor4<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) {
      out[i] = static_cast<U>(data_[i]);
    }
    return Tensor4<U>(shape_, std::move(out));
  }

 private:
  Shape4 shape_;
  std::vector<T> data_;
};

// Throws ShapeError naming both shapes unless they are equal.
void require_same_shape(const Shape4& a, const Shape4& b, const char* what);

extern template class Tensor4<float>;
extern template class Tensor4<double>;

}  // namespace segmicro
