// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include "doctest.h"
#include "testutil.hpp"
#include "tvmerge/linalg.hpp"

using tvmerge::Matrix;
using tvmerge::SvdFactors;
using tvmerge::svd_thin;

namespace {

Matrix reconstruct(const SvdFactors& f) {
  Matrix us = f.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j)
      us(i, j) *= f.singular_values[j];
  return us * f.vt;
}

}  // namespace

TEST_SUITE("svd") {

TEST_CASE("identity has unit spectrum") {
  const SvdFactors f = svd_thin(Matrix::identity(3));
  REQUIRE(f.singular_values.size() == 3);
  for (double s : f.singular_values) CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(testutil::rel_fro_error(reconstruct(f), Matrix::identity(3)) < 1e-14);
}

TEST_CASE("hand-worked 2x2: [[0,2],[1,0]]") {
  // A^T A = diag(1, 4), so the singular values are exactly 2 and 1 and the
  // singular vectors are axis vectors.
  const Matrix a = Matrix::of({{0, 2}, {1, 0}});
  const SvdFactors f = svd_thin(a);
  CHECK(f.singular_values[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(f.singular_values[1] == doctest::Approx(1.0).epsilon(1e-14));
  // Largest-entry-positive convention pins u = e1, e2 exactly.
  CHECK(f.u(0, 0) == doctest::Approx(1.0));
  CHECK(f.u(1, 0) == doctest::Approx(0.0));
  CHECK(f.u(1, 1) == doctest::Approx(1.0));
  CHECK(f.vt(0, 1) == doctest::Approx(1.0));
  CHECK(f.vt(1, 0) == doctest::Approx(1.0));
  CHECK(testutil::rel_fro_error(reconstruct(f), a) < 1e-14);
}

TEST_CASE("zero singular values are retained") {
  const Matrix a = Matrix::of({{3, 0}, {0, 0}});
  const SvdFactors f = svd_thin(a);
  REQUIRE(f.singular_values.size() == 2);
  CHECK(f.singular_values[0] == doctest::Approx(3.0));
  CHECK(f.singular_values[1] == 0.0);
}

TEST_CASE("rank-1 outer product") {
  // a = x y^T has a single nonzero singular value |x||y|.
  const std::vector<double> x = {1, 2, 2};   // norm 3
  const std::vector<double> y = {3, 0, 0, 4};  // norm 5
  Matrix a(3, 4);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) a(i, j) = x[i] * y[j];
  const SvdFactors f = svd_thin(a);
  REQUIRE(f.singular_values.size() == 3);
  CHECK(f.singular_values[0] == doctest::Approx(15.0).epsilon(1e-12));
  CHECK(f.singular_values[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(f.singular_values[2] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("random shapes: reconstruction and orthonormality") {
  const std::size_t shapes[][2] = {{5, 5}, {8, 3}, {3, 8}, {64, 64},
                                   {32, 16}, {16, 32}, {1, 7}, {7, 1}};
  std::uint64_t seed = 11;
  for (const auto& sh : shapes) {
    const Matrix a = testutil::random_matrix(sh[0], sh[1], seed++);
    const SvdFactors f = svd_thin(a);
    const std::size_t k = std::min(sh[0], sh[1]);
    REQUIRE(f.singular_values.size() == k);
    REQUIRE(f.u.rows() == sh[0]);
    REQUIRE(f.u.cols() == k);
    REQUIRE(f.vt.rows() == k);
    REQUIRE(f.vt.cols() == sh[1]);
    CHECK(testutil::rel_fro_error(reconstruct(f), a) < 1e-8);
    CHECK(testutil::orthonormality_error(f.u) < 1e-10);
    CHECK(testutil::orthonormality_error(tvmerge::transposed(f.vt)) < 1e-10);
    for (std::size_t j = 0; j + 1 < k; ++j) {
      CHECK(f.singular_values[j] >= f.singular_values[j + 1]);
    }
    for (double s : f.singular_values) CHECK(s >= 0.0);
  }
}

TEST_CASE("spectrum is invariant under transpose and scales linearly") {
  const Matrix a = testutil::random_matrix(12, 7, 99);
  const SvdFactors fa = svd_thin(a);
  const SvdFactors fat = svd_thin(tvmerge::transposed(a));
  const SvdFactors f3 = svd_thin(3.0 * a);
  for (std::size_t i = 0; i < fa.singular_values.size(); ++i) {
    CHECK(fa.singular_values[i] ==
          doctest::Approx(fat.singular_values[i]).epsilon(1e-10));
    CHECK(3.0 * fa.singular_values[i] ==
          doctest::Approx(f3.singular_values[i]).epsilon(1e-10));
  }
}

TEST_CASE("deterministic: repeated runs agree bit for bit") {
  const Matrix a = testutil::random_matrix(20, 9, 5);
  const SvdFactors f1 = svd_thin(a);
  const SvdFactors f2 = svd_thin(a);
  CHECK(f1.u == f2.u);
  CHECK(f1.vt == f2.vt);
  CHECK(f1.singular_values == f2.singular_values);
}

TEST_CASE("sign convention: largest-magnitude u entry is positive") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Matrix a = testutil::random_matrix(10, 6, 1000 + seed);
    const SvdFactors f = svd_thin(a);
    for (std::size_t j = 0; j < f.u.cols(); ++j) {
      double best = 0.0;
      for (std::size_t i = 0; i < f.u.rows(); ++i) {
        if (std::abs(f.u(i, j)) > std::abs(best)) best = f.u(i, j);
      }
      CHECK(best > 0.0);
    }
  }
}

TEST_CASE("rejects empty and non-finite input") {
  CHECK_THROWS_AS(svd_thin(Matrix()), tvmerge::ArgumentError);
  Matrix bad(2, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(svd_thin(bad), tvmerge::ArgumentError);
}

}  // TEST_SUITE
