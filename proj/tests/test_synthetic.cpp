// SPDX-License-Identifier: Apache-2.0
#include "tvmerge/synthetic.hpp"

#include <cmath>
#include <cstdlib>

#include "doctest.h"
#include "testutil.hpp"
#include "tvmerge/hogsvd.hpp"
#include "tvmerge/linalg.hpp"
#include "tvmerge/merge.hpp"
#include "tvmerge/rank.hpp"

using namespace tvmerge;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.n_experts = 3;
  spec.n_layers = 2;
  spec.rows = 12;
  spec.cols = 9;
  spec.expert_rank = 4;
  spec.seed = 99;
  return spec;
}

std::vector<TaskVector> expert_deltas(const SyntheticSpec& spec) {
  const Checkpoint base = synthetic_base(spec);
  std::vector<TaskVector> deltas;
  for (std::size_t e = 0; e < spec.n_experts; ++e) {
    deltas.push_back(task_vector(synthetic_expert(spec, e), base));
  }
  return deltas;
}

}  // namespace

TEST_SUITE("synthetic") {

TEST_CASE("manifest structure and the all-zero base") {
  const SyntheticSpec spec = small_spec();
  const Checkpoint base = synthetic_base(spec);
  const Checkpoint expert = synthetic_expert(spec, 0);

  REQUIRE(base.tensors.size() == 4);
  REQUIRE(expert.tensors.size() == 4);
  for (std::size_t l = 0; l < 2; ++l) {
    const Tensor& w = expert.tensors[2 * l];
    const Tensor& b = expert.tensors[2 * l + 1];
    CHECK(w.name == synthetic_weight_name(l));
    CHECK(w.kind == TensorKind::kMergeable2d);
    CHECK(w.shape == std::vector<std::size_t>({12, 9}));
    CHECK(b.name == synthetic_bias_name(l));
    CHECK(b.kind == TensorKind::kPassthrough);
    CHECK(b.shape == std::vector<std::size_t>({12}));
  }
  CHECK(synthetic_weight_name(0) == "layer_000.weight");
  CHECK(synthetic_bias_name(17) == "layer_017.bias");

  for (const Tensor& t : base.tensors) {
    for (double v : t.values) CHECK(v == 0.0);
  }
  // Expert biases are small but alive.
  double bias_max = 0.0;
  for (double v : expert.tensors[1].values) {
    bias_max = std::max(bias_max, std::abs(v));
  }
  CHECK(bias_max > 0.0);
  CHECK(bias_max < 0.1);
  // Since the base is zero, the task vector is the expert itself.
  const TaskVector delta = task_vector(expert, base);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(delta.tensors[t].values == expert.tensors[t].values);
  }
}

TEST_CASE("same seed twice gives byte-identical checkpoints") {
  const SyntheticSpec spec = small_spec();
  testutil::TempDir a("syntha");
  testutil::TempDir b("synthb");
  save_checkpoint(synthetic_expert(spec, 1), a.path());
  save_checkpoint(synthetic_expert(spec, 1), b.path());
  CHECK(testutil::dirs_byte_identical(a.path(), b.path()));

  SyntheticSpec other = spec;
  other.seed = 100;
  testutil::TempDir c("synthc");
  save_checkpoint(synthetic_expert(other, 1), c.path());
  CHECK(!testutil::dirs_byte_identical(a.path(), c.path()));
}

TEST_CASE("an expert does not depend on the declared pool size") {
  SyntheticSpec small = small_spec();
  SyntheticSpec large = small_spec();
  large.n_experts = 20;
  const Checkpoint x = synthetic_expert(small, 2);
  const Checkpoint y = synthetic_expert(large, 2);
  REQUIRE(x.tensors.size() == y.tensors.size());
  for (std::size_t t = 0; t < x.tensors.size(); ++t) {
    CHECK(x.tensors[t].values == y.tensors[t].values);
  }
}

TEST_CASE("full shared weight collapses the pool onto one direction") {
  SyntheticSpec spec = small_spec();
  spec.shared_direction_weight = 1.0;
  const Checkpoint e0 = synthetic_expert(spec, 0);
  const Checkpoint e1 = synthetic_expert(spec, 1);
  // Weights coincide exactly; biases stay expert-specific.
  CHECK(e0.tensors[0].values == e1.tensors[0].values);
  CHECK(e0.tensors[1].values != e1.tensors[1].values);

  const Matrix w = e0.tensors[0].as_matrix();
  CHECK(frobenius_norm(w) == doctest::Approx(1.0).epsilon(1e-12));
  const SvdFactors f = svd_thin(w);
  CHECK(stable_rank(f.singular_values) == doctest::Approx(1.0).epsilon(1e-9));

  // Collinear sums: the plain task-arithmetic merge is still rank 1.
  const TaskVector merged = merge_task_vectors(expert_deltas(spec), {});
  const double merged_rank = stable_rank(
      svd_thin(merged.tensors[0].as_matrix()).singular_values);
  CHECK(merged_rank == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("zero shared weight keeps every pairwise alignment positive") {
  SyntheticSpec spec = small_spec();
  spec.shared_direction_weight = 0.0;
  const auto components = decompose_task_vectors(expert_deltas(spec));
  const AlignmentMatrix alignment = alignment_from_components(components);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i == j) continue;
      CHECK(alignment.scores(i, j) > 0.0);
    }
  }
}

TEST_CASE("the shared direction cancels in expert differences") {
  SyntheticSpec spec = small_spec();
  spec.rows = 10;
  spec.cols = 8;
  spec.expert_rank = 3;
  const Matrix diff = synthetic_expert(spec, 0).tensors[0].as_matrix() -
                      synthetic_expert(spec, 1).tensors[0].as_matrix();
  // Two private rank-2 components remain: rank at most 4 of 8.
  const SvdFactors f = svd_thin(diff);
  REQUIRE(f.singular_values.size() == 8);
  for (std::size_t k = 4; k < 8; ++k) {
    CHECK(f.singular_values[k] <= 1e-10 * f.singular_values[0]);
  }
}

TEST_CASE("weights carry exactly the configured numerical rank") {
  SyntheticSpec spec = small_spec();
  spec.expert_rank = 5;
  const SvdFactors f =
      svd_thin(synthetic_expert(spec, 0).tensors[0].as_matrix());
  std::size_t numerical_rank = 0;
  for (double s : f.singular_values) {
    if (s > 1e-10 * f.singular_values[0]) ++numerical_rank;
  }
  CHECK(numerical_rank == 5);
}

TEST_CASE("expert_rank 1 leaves only the shared direction") {
  SyntheticSpec spec = small_spec();
  spec.expert_rank = 1;
  const SvdFactors f =
      svd_thin(synthetic_expert(spec, 2).tensors[0].as_matrix());
  CHECK(stable_rank(f.singular_values) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(frobenius_norm(synthetic_expert(spec, 2).tensors[0].as_matrix()) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("spec validation") {
  SyntheticSpec spec = small_spec();
  spec.n_experts = 0;
  CHECK_THROWS_AS(synthetic_base(spec), ArgumentError);
  spec = small_spec();
  spec.expert_rank = 0;
  CHECK_THROWS_AS(synthetic_expert(spec, 0), ArgumentError);
  spec = small_spec();
  spec.expert_rank = 10;  // > min(12, 9)
  CHECK_THROWS_AS(synthetic_expert(spec, 0), ArgumentError);
  spec = small_spec();
  spec.shared_direction_weight = 1.5;
  CHECK_THROWS_AS(synthetic_expert(spec, 0), ArgumentError);
  spec = small_spec();
  spec.shared_direction_weight = std::nan("");
  CHECK_THROWS_AS(synthetic_expert(spec, 0), ArgumentError);
  spec = small_spec();
  CHECK_THROWS_AS(synthetic_expert(spec, 3), ArgumentError);
}

TEST_CASE("growing pools drive the merged stable rank down") {
  // Desk-scale version of the rank-collapse trend: with a shared direction
  // present, summing more experts concentrates energy on it.
  SyntheticSpec spec;
  spec.n_experts = 12;
  spec.n_layers = 1;
  spec.rows = 24;
  spec.cols = 24;
  spec.expert_rank = 6;
  spec.shared_direction_weight = 0.5;
  spec.seed = 3;
  const auto deltas = expert_deltas(spec);

  const auto merged_rank = [&deltas](std::size_t count) {
    const std::vector<TaskVector> prefix(deltas.begin(),
                                         deltas.begin() + count);
    const TaskVector merged = merge_ta(prefix);
    return stable_rank(
        svd_thin(merged.tensors[0].as_matrix()).singular_values);
  };
  const double at3 = merged_rank(3);
  const double at12 = merged_rank(12);
  CHECK(at12 < at3);

  double individual = 0.0;
  for (const TaskVector& d : deltas) {
    individual +=
        stable_rank(svd_thin(d.tensors[0].as_matrix()).singular_values);
  }
  individual /= static_cast<double>(deltas.size());
  CHECK(at12 < individual);
}

}  // TEST_SUITE
