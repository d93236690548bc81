// SPDX-License-Identifier: Apache-2.0
#include <vector>

#include "doctest.h"
#include "testutil.hpp"
#include "tvmerge/linalg.hpp"

using tvmerge::Matrix;
using tvmerge::WarningList;
using tvmerge::generalized_procrustes;
using tvmerge::polar_orthonormalize;

TEST_SUITE("polar") {

TEST_CASE("orthogonal input is a fixed point") {
  const Matrix q = Matrix::of({{0, -1}, {1, 0}});
  CHECK(tvmerge::max_abs_diff(polar_orthonormalize(q), q) < 1e-14);
}

TEST_CASE("positive diagonal flattens to identity") {
  const Matrix d = Matrix::of({{2, 0}, {0, 0.5}});
  CHECK(tvmerge::max_abs_diff(polar_orthonormalize(d), Matrix::identity(2)) <
        1e-14);
}

TEST_CASE("hand-worked: polar of [[0,-3],[2,0]]") {
  // A = U diag(3,2) V^T with axis singular vectors; the polar factor is the
  // rotation [[0,-1],[1,0]].
  const Matrix a = Matrix::of({{0, -3}, {2, 0}});
  const Matrix want = Matrix::of({{0, -1}, {1, 0}});
  CHECK(tvmerge::max_abs_diff(polar_orthonormalize(a), want) < 1e-14);
}

TEST_CASE("idempotent and orthonormal on random input") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix a = testutil::random_matrix(9, 5, 300 + seed);
    const Matrix q = polar_orthonormalize(a);
    CHECK(testutil::orthonormality_error(q) < 1e-10);
    CHECK(tvmerge::max_abs_diff(polar_orthonormalize(q), q) < 1e-10);
  }
}

TEST_CASE("rank-deficient input warns but still returns") {
  WarningList warnings;
  const Matrix q = polar_orthonormalize(Matrix::of({{1, 0}, {0, 0}}), &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("degenerate") != std::string::npos);
  // Sign convention pins the free column to +1.
  CHECK(tvmerge::max_abs_diff(q, Matrix::identity(2)) < 1e-14);
}

TEST_CASE("wide input is rejected") {
  CHECK_THROWS_AS(polar_orthonormalize(Matrix(2, 3)), tvmerge::ArgumentError);
}

TEST_CASE("procrustes of identical rotations returns the rotation") {
  const Matrix q = Matrix::of({{0, -1}, {1, 0}});
  const std::vector<Matrix> mats = {q, q, q};
  CHECK(tvmerge::max_abs_diff(generalized_procrustes(mats), q) < 1e-14);
}

TEST_CASE("procrustes hand case: mean is rank-deficient") {
  // mean([I, diag(1,-1)]) = diag(1, 0): polar factor is diag(1, s) with the
  // sign fixed to +1 by the convention, plus a degenerate warning.
  const std::vector<Matrix> mats = {Matrix::identity(2),
                                    Matrix::of({{1, 0}, {0, -1}})};
  WarningList warnings;
  const Matrix q = generalized_procrustes(mats, &warnings);
  CHECK(tvmerge::max_abs_diff(q, Matrix::identity(2)) < 1e-14);
  CHECK(!warnings.empty());
}

TEST_CASE("procrustes averages toward the common frame") {
  // Small perturbations of one rotation: the procrustes mean should stay
  // close to that rotation and be exactly orthonormal.
  const Matrix base =
      tvmerge::polar_orthonormalize(testutil::random_matrix(6, 6, 77));
  std::vector<Matrix> mats;
  for (std::uint64_t s = 0; s < 4; ++s) {
    mats.push_back(base + 0.01 * testutil::random_matrix(6, 6, 400 + s));
  }
  const Matrix q = generalized_procrustes(mats);
  CHECK(testutil::orthonormality_error(q) < 1e-10);
  CHECK(tvmerge::max_abs_diff(q, base) < 0.05);
}

TEST_CASE("procrustes rejects an empty list") {
  CHECK_THROWS_AS(generalized_procrustes(std::vector<Matrix>{}),
                  tvmerge::ArgumentError);
}

}  // TEST_SUITE
