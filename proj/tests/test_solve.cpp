// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "testutil.hpp"
#include "tvmerge/linalg.hpp"

using tvmerge::Matrix;
using tvmerge::spd_solve;

TEST_SUITE("solve") {

TEST_CASE("identity returns the rhs") {
  const Matrix b = testutil::random_matrix(5, 3, 1);
  CHECK(tvmerge::max_abs_diff(spd_solve(Matrix::identity(5), b), b) == 0.0);
}

TEST_CASE("scaled identity halves") {
  const Matrix x = spd_solve(2.0 * Matrix::identity(4), Matrix::identity(4));
  CHECK(tvmerge::max_abs_diff(x, 0.5 * Matrix::identity(4)) < 1e-15);
}

TEST_CASE("hand-worked diagonal solve") {
  const Matrix d = Matrix::of({{4, 0}, {0, 1}});
  const Matrix b = Matrix::of({{1}, {1}});
  const Matrix x = spd_solve(d, b);
  CHECK(x(0, 0) == doctest::Approx(0.25));
  CHECK(x(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("random SPD systems solve to tight residual") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const std::size_t n = 16;
    const Matrix m = testutil::random_matrix(n, n, 900 + seed);
    // gram(m) + n I is comfortably positive definite.
    Matrix d = tvmerge::gram(m);
    for (std::size_t i = 0; i < n; ++i) d(i, i) += static_cast<double>(n);
    const Matrix b = testutil::random_matrix(n, 4, 1900 + seed);
    const Matrix x = spd_solve(d, b);
    CHECK(testutil::rel_fro_error(d * x, b) < 1e-10);
  }
}

TEST_CASE("indefinite and asymmetric inputs are rejected") {
  CHECK_THROWS_AS(spd_solve(Matrix::of({{1, 0}, {0, -1}}), Matrix::identity(2)),
                  tvmerge::DefinitenessError);
  CHECK_THROWS_AS(spd_solve(Matrix::of({{0, 0}, {0, 0}}), Matrix::identity(2)),
                  tvmerge::DefinitenessError);
  CHECK_THROWS_AS(spd_solve(Matrix::of({{1, 5}, {0, 1}}), Matrix::identity(2)),
                  tvmerge::ArgumentError);
}

}  // TEST_SUITE
