#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace natlab::compute {

// Dense row-major tensor of doubles. Everything in the lab is small enough
// that 64-bit floats and plain vectors are the right tool.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(count(shape), 0.0) {}
  Tensor(std::vector<int> s, std::vector<double> data)
      : shape(std::move(s)), v(std::move(data)) {
    if (static_cast<size_t>(count(shape)) != v.size())
      throw std::invalid_argument("Tensor: shape/value count mismatch");
  }

  static int count(const std::vector<int>& s) {
    int n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dim");
      n *= d;
    }
    return n;
  }

  static Tensor scalar(double x) { return Tensor({1, 1}, {x}); }
  static Tensor row(std::vector<double> data) {
    int n = static_cast<int>(data.size());
    return Tensor({1, n}, std::move(data));
  }

  int size() const { return static_cast<int>(v.size()); }
  bool is_scalar() const { return size() == 1; }

  // Matrix view: rank-1 tensors are treated as a single row.
  int rows() const { return shape.size() >= 2 ? shape[0] : 1; }
  int cols() const {
    if (shape.empty()) return 0;
    return shape.size() >= 2 ? shape[1] : shape[0];
  }
  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols() + c]; }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }

  bool same_shape(const Tensor& o) const {
    return rows() == o.rows() && cols() == o.cols();
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

}  // namespace natlab::compute
