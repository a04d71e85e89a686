#include "core/tensor.hpp"

#include <cmath>

namespace voxcond {

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
  size_t n = 1;
  for (int d : shape) {
    require(d > 0, ErrorCode::InvalidArgument, "tensor dims must be positive");
    n *= size_t(d);
  }
  data.assign(n, fill);
}

std::string Tensor::shape_str() const {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i)
    s += (i ? "," : "") + std::to_string(shape[i]);
  return s + ")";
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::check_finite(const std::string& what) const {
  require(all_finite(), ErrorCode::InvalidArgument, what + " must be finite");
}

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what) {
  require(a.same_shape(b), ErrorCode::ShapeMismatch,
          what + ": shape " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace voxcond
