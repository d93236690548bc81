// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "testutil.hpp"
#include "tvmerge/errors.hpp"
#include "tvmerge/matrix.hpp"

using tvmerge::Matrix;

TEST_SUITE("matrix") {

TEST_CASE("basic algebra") {
  const Matrix a = Matrix::of({{1, 2}, {3, 4}});
  const Matrix b = Matrix::of({{5, 6}, {7, 8}});
  CHECK((a + b) == Matrix::of({{6, 8}, {10, 12}}));
  CHECK((b - a) == Matrix::of({{4, 4}, {4, 4}}));
  CHECK((a * b) == Matrix::of({{19, 22}, {43, 50}}));
  CHECK((2.0 * a) == Matrix::of({{2, 4}, {6, 8}}));
  CHECK(tvmerge::transposed(a) == Matrix::of({{1, 3}, {2, 4}}));
}

TEST_CASE("gram equals explicit transpose product") {
  const Matrix a = testutil::random_matrix(7, 4, 42);
  CHECK(tvmerge::max_abs_diff(tvmerge::gram(a),
                              tvmerge::transposed(a) * a) < 1e-12);
}

TEST_CASE("norms and finiteness") {
  const Matrix a = Matrix::of({{3, 0}, {0, 4}});
  CHECK(tvmerge::frobenius_norm(a) == doctest::Approx(5.0));
  CHECK(tvmerge::max_abs(a) == 4.0);
  CHECK(tvmerge::all_finite(a));
  Matrix bad = a;
  bad(1, 0) = std::nan("");
  CHECK(!tvmerge::all_finite(bad));
  CHECK(tvmerge::column_norm(a, 1) == doctest::Approx(4.0));
}

TEST_CASE("shape mismatches throw") {
  CHECK_THROWS_AS(Matrix(2, 2) + Matrix(2, 3), tvmerge::ArgumentError);
  CHECK_THROWS_AS(Matrix(2, 2) * Matrix(3, 2), tvmerge::ArgumentError);
  CHECK_THROWS_AS(Matrix::of({{1, 2}, {3}}), tvmerge::ArgumentError);
}

}  // TEST_SUITE
