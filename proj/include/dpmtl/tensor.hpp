#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dpmtl/errors.hpp"

namespace dpmtl {

// Dense row-major tensor of doubles, rank 0 (scalar), 1 or 2. Rank 2 is all the
// models need; anything higher is out of scope.
class Tensor {
 public:
  Tensor() = default;

  static Tensor scalar(double v) {
    Tensor t;
    t.rank_ = 0;
    t.data_.assign(1, v);
    return t;
  }

  static Tensor zeros_vector(std::size_t n) {
    Tensor t;
    t.rank_ = 1;
    t.dims_[0] = n;
    t.data_.assign(n, 0.0);
    return t;
  }

  static Tensor from_vector(std::vector<double> values) {
    Tensor t;
    t.rank_ = 1;
    t.dims_[0] = values.size();
    t.data_ = std::move(values);
    return t;
  }

  static Tensor zeros_matrix(std::size_t rows, std::size_t cols) {
    Tensor t;
    t.rank_ = 2;
    t.dims_[0] = rows;
    t.dims_[1] = cols;
    t.data_.assign(rows * cols, 0.0);
    return t;
  }

  static Tensor from_matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    if (values.size() != rows * cols)
      throw ShapeError("from_matrix: " + std::to_string(values.size()) + " values for " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    Tensor t;
    t.rank_ = 2;
    t.dims_[0] = rows;
    t.dims_[1] = cols;
    t.data_ = std::move(values);
    return t;
  }

  std::size_t rank() const { return rank_; }
  std::size_t rows() const { return rank_ == 2 ? dims_[0] : (rank_ == 1 ? dims_[0] : 1); }
  std::size_t cols() const { return rank_ == 2 ? dims_[1] : 1; }
  std::size_t size() const { return data_.size(); }
  bool is_scalar() const { return data_.size() == 1; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * dims_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * dims_[1] + c]; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool same_shape(const Tensor& o) const { return rank_ == o.rank_ && dims_ == o.dims_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) {
    for (double& x : data_) x = v;
  }

  std::string shape_str() const {
    if (rank_ == 0) return "()";
    if (rank_ == 1) return "(" + std::to_string(dims_[0]) + ")";
    return "(" + std::to_string(dims_[0]) + "x" + std::to_string(dims_[1]) + ")";
  }

  // Same shape, zero values.
  Tensor zeros_like() const {
    Tensor t;
    t.rank_ = rank_;
    t.dims_ = dims_;
    t.data_.assign(data_.size(), 0.0);
    return t;
  }

 private:
  std::array<std::size_t, 2> dims_{1, 1};
  std::uint8_t rank_{0};
  std::vector<double> data_{0.0};
};

inline void ensure_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
}

}  // namespace dpmtl
