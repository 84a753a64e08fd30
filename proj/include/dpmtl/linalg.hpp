#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "dpmtl/errors.hpp"
#include "dpmtl/rng.hpp"

namespace dpmtl {

// Solves A x = b in place by Gaussian elimination with partial pivoting.
// Returns false when a pivot is (near) zero, i.e. A is rank deficient.
inline bool solve_linear_system(std::vector<std::vector<double>> a, std::vector<double> b,
                                std::vector<double>& x) {
  const std::size_t n = a.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-12) return false;
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t row = n; row-- > 0;) {
    double s = b[row];
    for (std::size_t c = row + 1; c < n; ++c) s -= a[row][c] * x[c];
    x[row] = s / a[row][row];
  }
  return true;
}

// Orthonormalizes a seeded Gaussian d x d matrix with modified Gram-Schmidt;
// used for the recurrent weight init. Returns row-major d*d values.
inline std::vector<double> random_orthogonal(std::size_t d, SplitMix64& rng) {
  std::vector<std::vector<double>> rows(d, std::vector<double>(d));
  for (auto& row : rows)
    for (double& v : row) v = rng.next_gaussian();
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += rows[i][c] * rows[k][c];
      for (std::size_t c = 0; c < d; ++c) rows[i][c] -= dot * rows[k][c];
    }
    double norm = 0.0;
    for (double v : rows[i]) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      rows[i].assign(d, 0.0);
      rows[i][i % d] = 1.0;  // degenerate draw; fall back to a unit vector
      norm = 1.0;
    }
    for (double& v : rows[i]) v /= norm;
  }
  std::vector<double> flat;
  flat.reserve(d * d);
  for (const auto& row : rows) flat.insert(flat.end(), row.begin(), row.end());
  return flat;
}

}  // namespace dpmtl
