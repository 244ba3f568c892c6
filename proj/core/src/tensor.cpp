#include "segmicro/tensor.hpp"

namespace segmicro {

std::string Shape4::to_string() const {
  return "(" + std::to_string(batch) + ", " + std::to_string(height) + ", " +
         std::to_string(width) + ", " + std::to_string(channels) + ")";
}

void require_same_shape(const Shape4& a, const Shape4& b, const char* what) {
  if (!(a == b)) {
    throw ShapeError(std::string(what) + ": shapes differ, " + a.to_string() +
                     " vs " + b.to_string());
  }
}

template class Tensor4<float>;
template class Tensor4<double>;

}  // namespace segmicro
