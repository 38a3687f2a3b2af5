#include "distillab/tensor.hpp"

namespace distillab {

std::string_view dtype_name(DType dtype) {
  return dtype == DType::f32 ? "f32" : "f64";
}

DType parse_dtype(std::string_view name) {
  if (name == "f32") return DType::f32;
  if (name == "f64") return DType::f64;
  throw FormatError("unknown dtype '" + std::string(name) + "'");
}

std::size_t dtype_width(DType dtype) {
  return dtype == DType::f32 ? 4 : 8;
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "×";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace distillab
