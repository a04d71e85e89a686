#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace voxcond {

/* Dense row-major double tensor; rank up to 4 is what the toy model uses. */
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0);

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

  size_t numel() const { return data.size(); }
  int rank() const { return int(shape.size()); }
  int dim(int i) const { return shape[size_t(i)]; }

  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }

  /* (d0, d1) and (d0, d1, d2, d3) accessors. */
  double& at2(int i, int j) { return data[size_t(i) * shape[1] + j]; }
  double at2(int i, int j) const { return data[size_t(i) * shape[1] + j]; }
  size_t idx4(int a, int b, int c, int d) const {
    return ((size_t(a) * shape[1] + b) * shape[2] + c) * shape[3] + d;
  }
  double& at4(int a, int b, int c, int d) { return data[idx4(a, b, c, d)]; }
  double at4(int a, int b, int c, int d) const { return data[idx4(a, b, c, d)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  std::string shape_str() const;
  bool all_finite() const;
  void check_finite(const std::string& what) const;
};

void require_same_shape(const Tensor& a, const Tensor& b, const std::string& what);

}  // namespace voxcond
