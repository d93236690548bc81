// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace tvmerge {

// Dense row-major matrix of doubles. Plain value type: copyable, movable,
// no views, no expression templates. Sizes here are desk-scale (up to a few
// thousand per side), so naive O(n^3) kernels are fine and keep everything
// bit-reproducible.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);
  // Row-wise literal, e.g. Matrix::of({{1, 2}, {3, 4}}).
  static Matrix of(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Matrix& other) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

Matrix transposed(const Matrix& a);
// A^T * A without forming the transpose.
Matrix gram(const Matrix& a);

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
// max |a - b| over all entries; shapes must match.
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& a);
bool all_finite(std::span<const double> v);

// Euclidean norm of column j.
double column_norm(const Matrix& a, std::size_t j);

}  // namespace tvmerge
