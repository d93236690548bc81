// SPDX-License-Identifier: Apache-2.0
//
// End-to-end costs of the merge pipeline stages on synthetic pools, so a
// regression in any stage (merge arithmetic, spectrum boosting, joint
// decomposition, selection) shows up as a wall-clock jump.

#include <benchmark/benchmark.h>

#include <vector>

#include "tvmerge/hogsvd.hpp"
#include "tvmerge/merge.hpp"
#include "tvmerge/subspace_boost.hpp"
#include "tvmerge/synthetic.hpp"

namespace {

// Eight 64x64 experts, four layers each: the default desk-scale pool.
std::vector<tvmerge::TaskVector> default_pool() {
  tvmerge::SyntheticSpec spec;
  const tvmerge::Checkpoint base = tvmerge::synthetic_base(spec);
  std::vector<tvmerge::TaskVector> deltas;
  for (std::size_t e = 0; e < spec.n_experts; ++e) {
    deltas.push_back(
        tvmerge::task_vector(tvmerge::synthetic_expert(spec, e), base));
  }
  return deltas;
}

// A pool whose stacked components span their column space, which the joint
// decomposition requires: 6 experts of rank 4 in 12 columns.
std::vector<tvmerge::TaskVector> spanning_pool() {
  tvmerge::SyntheticSpec spec;
  spec.n_experts = 6;
  spec.n_layers = 2;
  spec.rows = 24;
  spec.cols = 12;
  spec.expert_rank = 4;
  const tvmerge::Checkpoint base = tvmerge::synthetic_base(spec);
  std::vector<tvmerge::TaskVector> deltas;
  for (std::size_t e = 0; e < spec.n_experts; ++e) {
    deltas.push_back(
        tvmerge::task_vector(tvmerge::synthetic_expert(spec, e), base));
  }
  return deltas;
}

void BM_MergeTa(benchmark::State& state) {
  const auto deltas = default_pool();
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvmerge::merge_ta(deltas));
  }
}
BENCHMARK(BM_MergeTa);

void BM_MergeTies(benchmark::State& state) {
  const auto deltas = default_pool();
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvmerge::merge_ties(deltas, 0.2));
  }
}
BENCHMARK(BM_MergeTies);

void BM_BoostTaskVector(benchmark::State& state) {
  const tvmerge::TaskVector merged = tvmerge::merge_ta(default_pool());
  tvmerge::BoostConfig config;
  config.beta = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvmerge::boost_task_vector(merged, config));
  }
}
BENCHMARK(BM_BoostTaskVector);

void BM_ComputeSPi(benchmark::State& state) {
  const auto deltas = spanning_pool();
  std::vector<tvmerge::Matrix> pool;
  for (const auto& d : deltas) pool.push_back(d.tensors[0].as_matrix());
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvmerge::compute_s_pi(pool, 1e-2));
  }
}
BENCHMARK(BM_ComputeSPi);

void BM_HogsvdDecompose(benchmark::State& state) {
  const auto deltas = spanning_pool();
  std::vector<tvmerge::Matrix> pool;
  for (const auto& d : deltas) pool.push_back(d.tensors[0].as_matrix());
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvmerge::hogsvd_decompose(pool));
  }
}
BENCHMARK(BM_HogsvdDecompose);

void BM_AlignAndSelect(benchmark::State& state) {
  const auto deltas = spanning_pool();
  for (auto _ : state) {
    const auto components = tvmerge::decompose_task_vectors(deltas);
    const auto alignment = tvmerge::alignment_from_components(components);
    benchmark::DoNotOptimize(tvmerge::select_experts(alignment.scores, 3));
  }
}
BENCHMARK(BM_AlignAndSelect);

void BM_HogsvdBoostMerge(benchmark::State& state) {
  const auto deltas = spanning_pool();
  tvmerge::HogsvdConfig config;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tvmerge::hogsvd_boost_merge(deltas, config, 0.01));
  }
}
BENCHMARK(BM_HogsvdBoostMerge);

}  // namespace

BENCHMARK_MAIN();
