// Row-major dense tensor over double. Deliberately minimal: shape + flat
// storage; the encoder and gradient code index it directly.
#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "aspects/common.hpp"

namespace aspects {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(numel(shape), 0.0);
  }

  static std::size_t numel(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }
  std::size_t size() const { return data.size(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  // 2-d / 3-d accessors; callers guarantee rank.
  double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t l) {
    return data[(i * shape[1] + j) * shape[2] + l];
  }
  double at(std::size_t i, std::size_t j, std::size_t l) const {
    return data[(i * shape[1] + j) * shape[2] + l];
  }

  double* row(std::size_t i) { return data.data() + i * shape[1]; }
  const double* row(std::size_t i) const { return data.data() + i * shape[1]; }

  void fill(double v) { data.assign(data.size(), v); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double sum_squares() const {
    double s = 0.0;
    for (double v : data) s += v * v;
    return s;
  }
};

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

}  // namespace aspects
