// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "tvmerge/errors.hpp"
#include "tvmerge/matrix.hpp"

namespace tvmerge {

// Thin SVD a = u * diag(singular_values) * vt with k = min(rows, cols).
struct SvdFactors {
  Matrix u;                             // rows x k, orthonormal columns
  std::vector<double> singular_values;  // length k, descending, >= 0
  Matrix vt;                            // k x cols, orthonormal rows
};

// Real eigendecomposition s * eigenvectors = eigenvectors * diag(eigenvalues).
struct EigFactors {
  std::vector<double> eigenvalues;  // descending
  Matrix eigenvectors;              // unit-norm columns, order matches
  // max |Im(lambda)| / max(1, max |lambda|) seen before the imaginary parts
  // were dropped. Zero for symmetric inputs.
  double max_imag_residual = 0.0;
};

// Thin SVD of a finite matrix. Zero singular values are retained, the
// spectrum is sorted descending, and each left singular vector's
// largest-magnitude entry is made positive (first index wins ties) so results
// are deterministic. Throws ArgumentError on empty/non-finite input and
// FactorizationError if the QR sweep fails to converge.
SvdFactors svd_thin(const Matrix& a);

// Eigendecomposition of a square real matrix that is expected to have a real
// spectrum. Exactly symmetric inputs take a tridiagonal path; everything else
// goes through a Hessenberg reduction plus shifted-QR sweep. Throws
// SpectrumError if the relative imaginary residual exceeds tol_imag.
EigFactors eig_real(const Matrix& s, double tol_imag);

// Nearest matrix with orthonormal columns (polar factor u * vt). Requires
// rows >= cols. A zero singular value makes the factor non-unique; that case
// emits a degenerate-polar warning and still returns u * vt under the SVD's
// deterministic sign convention.
Matrix polar_orthonormalize(const Matrix& m, WarningList* warnings = nullptr);

// Orthonormal matrix closest (in the least-squares sense) to a set of
// same-shaped matrices: the polar factor of their elementwise mean. Throws
// ArgumentError on an empty list.
Matrix generalized_procrustes(std::span<const Matrix> mats,
                              WarningList* warnings = nullptr);

// Solve d * x = b for symmetric positive definite d via Cholesky. Throws
// DefinitenessError if a non-positive pivot shows up.
Matrix spd_solve(const Matrix& d, const Matrix& b);

}  // namespace tvmerge
