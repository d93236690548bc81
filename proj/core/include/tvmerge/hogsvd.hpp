// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tvmerge/checkpoint.hpp"
#include "tvmerge/errors.hpp"
#include "tvmerge/matrix.hpp"

namespace tvmerge {

// Knobs for the regularized joint decomposition and everything built on it.
struct HogsvdConfig {
  double pi = 1e-2;        // quotient regularization; > 0 tolerates rank loss
  double eps = 1e-12;      // additive guard inside log-ratios
  double tol_imag = 1e-6;  // max tolerated imaginary residual in eigenvalues
  double common_tolerance = 0.1;  // log-ratio band for "common" dimensions
  double sigma_scale = 1.0;  // pre-scale on summed spectra before boosting
  double max_condition = 1e12;  // shared-factor conditioning guard
};

// Joint factorization of N matrices sharing a column count n:
// A_i ~= u[i] * diag(sigma[i]) * v^T, with one shared right factor v.
struct HogsvdFactors {
  std::vector<Matrix> u;                   // N entries, each m_i x n
  std::vector<std::vector<double>> sigma;  // N entries, each length n, >= 0
  Matrix v;                                // n x n, unit-norm columns
  std::vector<double> eigenvalues;         // of the quotient mean, descending
  double max_imag_residual = 0.0;          // from the eigensolver
};

// Dimensions partitioned by how the per-task scales sigma[i][k] compare.
struct SubspaceClassification {
  std::vector<std::size_t> common;  // scales agree across all tasks
  std::vector<std::vector<std::size_t>> unique_per_task;  // one set per task
  std::vector<std::size_t> unclassified;  // everything else
};

// Pairwise misalignment scores: entry (i, j) averages |log(sigma ratio)|
// over every dimension of every shared component. Symmetric, zero diagonal,
// nonnegative; LOWER is better aligned.
struct AlignmentMatrix {
  Matrix scores;                        // N x N mean over components
  std::vector<Matrix> partials;         // per-component N x N matrices
  std::vector<std::string> components;  // names matching `partials`
};

// Mean of the pairwise regularized Gram quotients:
//   D_i = A_i^T A_i + pi * sum_j A_j^T A_j
//   S = (1 / (N (N - 1))) * sum_{i<j} (D_i D_j^{-1} + D_j D_i^{-1})
// Inverses are applied through symmetric positive-definite solves, which is
// where a singular D_j surfaces as a DefinitenessError (raise pi).
Matrix compute_s_pi(std::span<const Matrix> a, double pi);

// Eigendecompose compute_s_pi's output into the shared factor v, then peel
// per-task factors out of B_i = A_i (v^T)^{-1}: sigma[i] are B_i's column
// norms and u[i] the normalized columns (zero norm -> zero column, sigma 0).
HogsvdFactors hogsvd_decompose(std::span<const Matrix> a,
                               const HogsvdConfig& config = {});

// Dimension k is common when every pairwise log-ratio of (sigma + eps) stays
// within tau; unique to task j when every other task's scale is at most
// tau times task j's; unclassified otherwise.
SubspaceClassification classify_subspaces(const HogsvdFactors& factors,
                                          double tau, double eps = 1e-12);

// Average the per-dimension |log sigma-ratios| over dimensions, then over
// components. Every component must cover the same N tasks.
AlignmentMatrix alignment_matrix(std::span<const HogsvdFactors> per_component,
                                 double eps = 1e-12);

// One decomposed mergeable component of a task-vector pool.
struct ComponentFactors {
  std::string component;
  HogsvdFactors factors;
};

// Decompose every mergeable-2d tensor across the pool. Components that are
// all-zero in every delta cannot be decomposed; they are skipped with a
// warning.
std::vector<ComponentFactors> decompose_task_vectors(
    std::span<const TaskVector> deltas, const HogsvdConfig& config = {},
    WarningList* warnings = nullptr);

AlignmentMatrix alignment_from_components(
    std::span<const ComponentFactors> components, double eps = 1e-12);

enum class SelectionMode { kGreedy, kExhaustive };

// Pick k of the N experts scored by `scores`. Greedy: seed with the highest
// scoring pair, then repeatedly add the candidate with the highest mean
// score against the current selection; ties go to the lowest index.
// Exhaustive: maximize the total pairwise score over all k-subsets (ties go
// to the lexicographically smallest subset); refuses absurd subset counts.
// Returns ascending indices.
std::vector<std::size_t> select_experts(
    const Matrix& scores, std::size_t k,
    SelectionMode mode = SelectionMode::kGreedy);

// Residual bookkeeping from the merge: how far each component's mean left
// factor was from orthonormal before the repair (relative Frobenius).
struct HogsvdMergeDiagnostics {
  std::vector<std::pair<std::string, double>> procrustes_residuals;
};

// Joint-factorization merge: per mergeable component, decompose the pool,
// orthonormalize the mean left factor (Procrustes) and the shared right
// factor (polar), sum the per-task spectra, sort descending (permuting the
// factors to match), flatten the tail via boost_spectrum(beta), and
// reconstruct. Passthrough tensors are summed elementwise. All-zero
// components stay zero with a warning.
TaskVector hogsvd_boost_merge(std::span<const TaskVector> deltas,
                              const HogsvdConfig& config, double beta,
                              WarningList* warnings = nullptr,
                              HogsvdMergeDiagnostics* diagnostics = nullptr);

// CSV exports: partials as component,i,j,score; the mean matrix as
// i,j,score; spectra as component,task,index,gsv.
void write_alignment_csv(const AlignmentMatrix& alignment,
                         const std::filesystem::path& partials_csv,
                         const std::filesystem::path& mean_csv);
void write_gsv_csv(std::span<const ComponentFactors> components,
                   const std::filesystem::path& csv);

}  // namespace tvmerge
