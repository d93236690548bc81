// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstddef>

#include "tvmerge/linalg.hpp"

namespace tvmerge {

// Cholesky d = L L^T (lower triangle, no pivoting) followed by forward and
// back substitution for each right-hand-side column.
Matrix spd_solve(const Matrix& d, const Matrix& b) {
  const std::size_t n = d.rows();
  if (d.cols() != n || n == 0) {
    throw ArgumentError("spd_solve: matrix must be square and non-empty");
  }
  if (b.rows() != n) throw ArgumentError("spd_solve: rhs row count mismatch");
  if (!all_finite(d) || !all_finite(b)) {
    throw ArgumentError("spd_solve: non-finite entries");
  }
  // Only the lower triangle is read, but a matrix that is not close to
  // symmetric would silently get the wrong answer, so reject it.
  double asym = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      asym = std::max(asym, std::abs(d(i, j) - d(j, i)));
  if (asym > 1e-8 * std::max(1.0, max_abs(d))) {
    throw ArgumentError("spd_solve: matrix is not symmetric");
  }

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = d(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      throw DefinitenessError(
          "spd_solve: matrix is not positive definite (Cholesky pivot <= 0); "
          "for regularized quotients make sure pi > 0");
    }
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double acc = d(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
      l(i, j) = acc / l(j, j);
    }
  }

  Matrix x = b;
  const std::size_t cols = b.cols();
  // L y = b (forward), then L^T x = y (backward), column by column.
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = x(i, c);
      for (std::size_t k = 0; k < i; ++k) acc -= l(i, k) * x(k, c);
      x(i, c) = acc / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double acc = x(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) acc -= l(k, ii) * x(k, c);
      x(ii, c) = acc / l(ii, ii);
    }
  }
  return x;
}

}  // namespace tvmerge
