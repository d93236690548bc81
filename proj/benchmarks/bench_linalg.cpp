// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the dense kernels everything else sits on. Shapes
// mirror the usual desk-scale inputs: per-layer components up to 128 rows
// and quotient-mean eigenproblems up to 64 columns.

#include <benchmark/benchmark.h>

#include <random>

#include "tvmerge/linalg.hpp"
#include "tvmerge/matrix.hpp"

namespace {

tvmerge::Matrix random_matrix(std::size_t rows, std::size_t cols,
                              std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> gauss;
  tvmerge::Matrix m(rows, cols);
  for (double& v : m.data()) v = gauss(engine);
  return m;
}

void BM_SvdThin(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto cols = static_cast<std::size_t>(state.range(1));
  const tvmerge::Matrix a = random_matrix(rows, cols, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvmerge::svd_thin(a));
  }
}
BENCHMARK(BM_SvdThin)->Args({32, 32})->Args({64, 64})->Args({128, 64});

void BM_EigReal(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  // An S_pi-shaped input: similar to symmetric positive definite, real
  // spectrum, mildly non-normal.
  const tvmerge::Matrix g = random_matrix(n + 4, n, 2);
  const tvmerge::Matrix h = random_matrix(n + 4, n, 3);
  const tvmerge::Matrix s =
      tvmerge::spd_solve(gram(h) + tvmerge::Matrix::identity(n), gram(g));
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvmerge::eig_real(s, 1e-6));
  }
}
BENCHMARK(BM_EigReal)->Arg(16)->Arg(32)->Arg(64);

void BM_SpdSolve(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const tvmerge::Matrix d =
      gram(random_matrix(2 * n, n, 4)) + tvmerge::Matrix::identity(n);
  const tvmerge::Matrix b = random_matrix(n, n, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvmerge::spd_solve(d, b));
  }
}
BENCHMARK(BM_SpdSolve)->Arg(16)->Arg(32)->Arg(64);

void BM_PolarOrthonormalize(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const tvmerge::Matrix m = random_matrix(n, n, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvmerge::polar_orthonormalize(m));
  }
}
BENCHMARK(BM_PolarOrthonormalize)->Arg(32)->Arg(64);

}  // namespace
