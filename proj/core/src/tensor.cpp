#include "drunet/tensor.hpp"

namespace drunet {

std::size_t shape_numel(const Shape& shape) {
  if (shape.empty()) throw ShapeError("shape must have at least one extent");
  std::size_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw ShapeError("shape extents must be positive, got " + shape_str(shape));
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace drunet
