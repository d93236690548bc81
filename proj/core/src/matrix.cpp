// SPDX-License-Identifier: Apache-2.0
#include "tvmerge/matrix.hpp"

#include <cmath>
#include <cstdlib>

#include "tvmerge/errors.hpp"

namespace tvmerge {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::of(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ArgumentError("Matrix::of: ragged rows");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "operator+");
  Matrix out = a;
  auto ob = out.data();
  auto bb = b.data();
  for (std::size_t i = 0; i < ob.size(); ++i) ob[i] += bb[i];
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "operator-");
  Matrix out = a;
  auto ob = out.data();
  auto bb = b.data();
  for (std::size_t i = 0; i < ob.size(); ++i) ob[i] -= bb[i];
  return out;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ArgumentError("operator*: inner dimensions disagree");
  }
  Matrix out(a.rows(), b.cols());
  // i-k-j order: streams through b and out row-wise.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out(i, j) += aik * b(k, j);
      }
    }
  }
  return out;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

Matrix transposed(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix gram(const Matrix& a) {
  Matrix out(a.cols(), a.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < a.cols(); ++j) {
        out(i, j) += aki * a(k, j);
      }
    }
  }
  return out;
}

double frobenius_norm(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v * v;
  return std::sqrt(acc);
}

double max_abs(const Matrix& a) {
  double best = 0.0;
  for (double v : a.data()) best = std::max(best, std::abs(v));
  return best;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "max_abs_diff");
  double best = 0.0;
  auto ab = a.data();
  auto bb = b.data();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    best = std::max(best, std::abs(ab[i] - bb[i]));
  }
  return best;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool all_finite(const Matrix& a) { return all_finite(a.data()); }

double column_norm(const Matrix& a, std::size_t j) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) acc += a(i, j) * a(i, j);
  return std::sqrt(acc);
}

}  // namespace tvmerge
