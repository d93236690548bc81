// SPDX-License-Identifier: Apache-2.0
#include "tvmerge/merge.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "testutil.hpp"

using namespace tvmerge;

namespace {

// One mergeable 1 x n tensor named "w"; optionally a passthrough "b".
TaskVector row_delta(std::vector<double> w, std::vector<double> b = {}) {
  TaskVector tv;
  Tensor t;
  t.name = "w";
  t.shape = {1, w.size()};
  t.kind = TensorKind::kMergeable2d;
  t.values = std::move(w);
  tv.tensors.push_back(std::move(t));
  if (!b.empty()) {
    Tensor p;
    p.name = "b";
    p.shape = {b.size()};
    p.kind = TensorKind::kPassthrough;
    p.values = std::move(b);
    tv.tensors.push_back(std::move(p));
  }
  return tv;
}

TaskVector random_delta(std::uint64_t seed, std::size_t n = 12) {
  testutil::Gauss g(seed);
  std::vector<double> w(n), b(3);
  for (double& v : w) v = g();
  for (double& v : b) v = g();
  return row_delta(std::move(w), std::move(b));
}

}  // namespace

TEST_SUITE("merge") {

TEST_CASE("task arithmetic sums elementwise") {
  const std::vector<TaskVector> deltas = {row_delta({1.0, 0.0}),
                                          row_delta({0.0, 1.0})};
  const TaskVector merged = merge_ta(deltas);
  CHECK(merged.tensors[0].values == std::vector<double>{1.0, 1.0});

  const std::vector<TaskVector> opposed = {row_delta({3.0, -2.0}),
                                           row_delta({-3.0, 2.0})};
  CHECK(merge_ta(opposed).tensors[0].values ==
        std::vector<double>{0.0, 0.0});
}

TEST_CASE("task arithmetic is permutation-invariant") {
  std::vector<TaskVector> deltas;
  for (std::uint64_t s = 0; s < 5; ++s) deltas.push_back(random_delta(40 + s));
  const TaskVector forward = merge_ta(deltas);
  std::reverse(deltas.begin(), deltas.end());
  const TaskVector backward = merge_ta(deltas);
  for (std::size_t t = 0; t < forward.tensors.size(); ++t) {
    for (std::size_t j = 0; j < forward.tensors[t].values.size(); ++j) {
      CHECK(std::abs(forward.tensors[t].values[j] -
                     backward.tensors[t].values[j]) <= 1e-12);
    }
  }
}

TEST_CASE("averaging identity: N copies applied with alpha = 1/N") {
  const TaskVector delta = random_delta(7);
  const std::vector<TaskVector> copies(4, delta);
  const TaskVector merged = merge_ta(copies);

  Checkpoint base;
  base.tensors = delta.tensors;
  for (Tensor& t : base.tensors)
    for (double& v : t.values) v = 0.0;
  const Checkpoint rebuilt = apply_task_vector(base, merged, 0.25);
  for (std::size_t t = 0; t < rebuilt.tensors.size(); ++t) {
    for (std::size_t j = 0; j < rebuilt.tensors[t].values.size(); ++j) {
      CHECK(rebuilt.tensors[t].values[j] ==
            doctest::Approx(delta.tensors[t].values[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("trim-elect-merge hand example") {
  // Coordinate 1: votes 2, 1, -1: positive mass 3 beats 1, mean(2, 1) = 1.5.
  // Coordinate 2: votes -1, -3, -1: negative wins, mean = -5/3.
  const std::vector<TaskVector> deltas = {row_delta({2.0, -1.0}),
                                          row_delta({1.0, -3.0}),
                                          row_delta({-1.0, -1.0})};
  const TaskVector merged = merge_ties(deltas, 1.0);
  CHECK(merged.tensors[0].values[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(merged.tensors[0].values[1] ==
        doctest::Approx(-5.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("identical deltas survive trim-elect-merge unchanged") {
  const TaskVector delta = random_delta(11);
  const std::vector<TaskVector> copies(3, delta);
  const TaskVector merged = merge_ties(copies, 1.0);
  for (std::size_t t = 0; t < merged.tensors.size(); ++t) {
    for (std::size_t j = 0; j < merged.tensors[t].values.size(); ++j) {
      CHECK(merged.tensors[t].values[j] ==
            doctest::Approx(delta.tensors[t].values[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("trim keeps exactly ceil(fraction * n) mergeable entries") {
  // Two identical 10-entry deltas with distinct magnitudes: merging keeps
  // exactly the top-2 coordinates, everything else trims to zero.
  std::vector<double> w(10);
  for (std::size_t j = 0; j < 10; ++j)
    w[j] = (j % 2 ? -1.0 : 1.0) * static_cast<double>(j + 1);
  TaskVector tv;
  Tensor t;
  t.name = "w";
  t.shape = {2, 5};
  t.kind = TensorKind::kMergeable2d;
  t.values = w;
  tv.tensors.push_back(t);
  const std::vector<TaskVector> deltas = {tv, tv};
  const TaskVector merged = merge_ties(deltas, 0.2);

  std::size_t nonzero = 0;
  for (double v : merged.tensors[0].values)
    if (v != 0.0) ++nonzero;
  CHECK(nonzero == 2);
  CHECK(merged.tensors[0].values[9] == doctest::Approx(-10.0));
  CHECK(merged.tensors[0].values[8] == doctest::Approx(9.0));
}

TEST_CASE("equal-magnitude trim ties break by manifest position") {
  const TaskVector tv = row_delta({1.0, 1.0, 1.0, 1.0});
  const std::vector<TaskVector> deltas = {tv, tv};
  const TaskVector merged = merge_ties(deltas, 0.5);
  CHECK(merged.tensors[0].values ==
        std::vector<double>{1.0, 1.0, 0.0, 0.0});
}

TEST_CASE("sign election ties go positive") {
  const std::vector<TaskVector> deltas = {row_delta({1.0}),
                                          row_delta({-1.0})};
  const TaskVector merged = merge_ties(deltas, 1.0);
  // Tie on mass: elect +, lone positive survivor keeps its value.
  CHECK(merged.tensors[0].values[0] == 1.0);
}

TEST_CASE("coordinates with no surviving votes merge to zero") {
  const std::vector<TaskVector> deltas = {row_delta({10.0, 0.1}),
                                          row_delta({-10.0, 0.1})};
  const TaskVector merged = merge_ties(deltas, 0.5);
  CHECK(merged.tensors[0].values[0] == 10.0);  // tie -> positive survivor
  CHECK(merged.tensors[0].values[1] == 0.0);   // trimmed in both deltas
}

TEST_CASE("trim-elect-merge matches a threshold-based reference") {
  // Gaussian magnitudes are distinct, so "keep the top k" is equivalently
  // "keep everything at or above the k-th largest magnitude" -- an
  // independent formulation of the same trim.
  std::vector<TaskVector> deltas;
  for (std::uint64_t s = 0; s < 6; ++s) deltas.push_back(random_delta(90 + s));
  const double trim_fraction = 0.5;
  const TaskVector merged = merge_ties(deltas, trim_fraction);

  const std::size_t n = deltas[0].tensors[0].values.size();
  const auto k = static_cast<std::size_t>(
      std::ceil(trim_fraction * static_cast<double>(n)));
  std::vector<double> thresholds;
  for (const TaskVector& tv : deltas) {
    std::vector<double> mags;
    for (double v : tv.tensors[0].values) mags.push_back(std::abs(v));
    std::sort(mags.rbegin(), mags.rend());
    thresholds.push_back(mags[k - 1]);
  }
  for (std::size_t t = 0; t < merged.tensors.size(); ++t) {
    const bool mergeable = merged.tensors[t].is_mergeable_2d();
    for (std::size_t j = 0; j < merged.tensors[t].values.size(); ++j) {
      double positive_mass = 0.0, negative_mass = 0.0;
      std::vector<double> survivors;
      for (std::size_t d = 0; d < deltas.size(); ++d) {
        const double v = deltas[d].tensors[t].values[j];
        if (mergeable && std::abs(v) < thresholds[d]) continue;  // trimmed
        if (v > 0.0) positive_mass += v;
        if (v < 0.0) negative_mass -= v;
        survivors.push_back(v);
      }
      const double elected = positive_mass >= negative_mass ? 1.0 : -1.0;
      double sum = 0.0;
      std::size_t agreeing = 0;
      for (double v : survivors) {
        if (v * elected > 0.0) {
          sum += v;
          ++agreeing;
        }
      }
      const double want = agreeing ? sum / agreeing : 0.0;
      CHECK(merged.tensors[t].values[j] ==
            doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("passthrough tensors are never trimmed") {
  // Mergeable parts dominate the magnitude ranking; tiny passthrough values
  // must still reach the elect-and-mean stage.
  const std::vector<TaskVector> deltas = {
      row_delta({100.0, 90.0}, {0.001, -0.002}),
      row_delta({80.0, 70.0}, {0.003, -0.004})};
  const TaskVector merged = merge_ties(deltas, 0.5);
  CHECK(merged.tensors[1].values[0] == doctest::Approx(0.002).epsilon(1e-12));
  CHECK(merged.tensors[1].values[1] == doctest::Approx(-0.003).epsilon(1e-12));
}

TEST_CASE("consensus with min_tasks 1 equals task arithmetic here") {
  const std::vector<TaskVector> deltas = {row_delta({3.0, 1.0}),
                                          row_delta({1.0, 3.0})};
  const TaskVector consensus = merge_consensus(deltas, 1, 1.0);
  const TaskVector ta = merge_ta(deltas);
  CHECK(consensus.tensors[0].values == ta.tensors[0].values);
}

TEST_CASE("orthogonal one-hot experts cancel under consensus") {
  const std::vector<TaskVector> deltas = {row_delta({5.0, 0.0, 0.0, 0.0}),
                                          row_delta({0.0, 5.0, 0.0, 0.0})};
  const TaskVector merged = merge_consensus(deltas, 2, 0.25);
  CHECK(merged.tensors[0].values ==
        std::vector<double>{0.0, 0.0, 0.0, 0.0});
}

TEST_CASE("coordinate relevant to only one task is zeroed") {
  // k = 1 per task: only each delta's largest coordinate is relevant.
  const std::vector<TaskVector> deltas = {row_delta({9.0, 1.0, 8.0}),
                                          row_delta({9.0, 1.0, 0.5})};
  const TaskVector merged = merge_consensus(deltas, 2, 0.33);
  CHECK(merged.tensors[0].values[0] == 18.0);  // relevant to both
  CHECK(merged.tensors[0].values[1] == 0.0);
  CHECK(merged.tensors[0].values[2] == 0.0);  // only the first task cares
}

TEST_CASE("consensus output is exactly masked task arithmetic") {
  std::vector<TaskVector> deltas;
  for (std::uint64_t s = 0; s < 5; ++s)
    deltas.push_back(random_delta(130 + s));
  const TaskVector consensus = merge_consensus(deltas, 2, 0.4);
  const TaskVector ta = merge_ta(deltas);
  for (std::size_t t = 0; t < consensus.tensors.size(); ++t) {
    for (std::size_t j = 0; j < consensus.tensors[t].values.size(); ++j) {
      const double v = consensus.tensors[t].values[j];
      if (v != 0.0) CHECK(v == ta.tensors[t].values[j]);
    }
  }
  // Passthrough is handed through unmasked.
  CHECK(consensus.tensors[1].values == ta.tensors[1].values);
}

TEST_CASE("depth-linear scaling endpoints and interpolation") {
  TaskVector tv;
  for (int i = 0; i < 3; ++i) {
    Tensor t;
    t.name = "t" + std::to_string(i);
    t.shape = {1};
    t.kind = TensorKind::kPassthrough;
    t.values = {1.0};
    tv.tensors.push_back(t);
  }

  const TaskVector mid = lines_scale(tv, 0.5, 1.0);
  CHECK(mid.tensors[0].values[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mid.tensors[1].values[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(mid.tensors[2].values[0] == doctest::Approx(1.0).epsilon(1e-15));

  const TaskVector flat = lines_scale(tv, 1.0, 1.0);
  for (const Tensor& t : flat.tensors) CHECK(t.values[0] == 1.0);

  TaskVector two;
  two.tensors = {tv.tensors[0], tv.tensors[1]};
  const TaskVector ends = lines_scale(two, 0.0, 1.0);
  CHECK(ends.tensors[0].values[0] == 0.0);
  CHECK(ends.tensors[1].values[0] == 1.0);

  TaskVector one;
  one.tensors = {tv.tensors[0]};
  CHECK(lines_scale(one, 0.5, 1.0).tensors[0].values[0] == 0.5);

  // Explicit layer map: first two tensors share a layer.
  const std::vector<std::size_t> layers = {1, 1, 2};
  const TaskVector grouped = lines_scale(tv, 0.0, 1.0, &layers);
  CHECK(grouped.tensors[0].values[0] == 0.0);
  CHECK(grouped.tensors[1].values[0] == 0.0);
  CHECK(grouped.tensors[2].values[0] == 1.0);
}

TEST_CASE("depth-linear scaling validates arguments") {
  const TaskVector tv = random_delta(3);
  CHECK_THROWS_AS(lines_scale(tv, 1.0, 0.5), ArgumentError);
  CHECK_THROWS_AS(lines_scale(tv, -0.1, 0.5), ArgumentError);
  const std::vector<std::size_t> wrong_size = {1};
  CHECK_THROWS_AS(lines_scale(tv, 0.0, 1.0, &wrong_size), ArgumentError);
}

TEST_CASE("method dispatch and post-scaling") {
  const std::vector<TaskVector> deltas = {row_delta({2.0, 2.0}),
                                          row_delta({2.0, 2.0})};
  MergeConfig config;
  config.method = "ta";
  config.lines_enabled = true;
  config.lines_start = 0.5;
  config.lines_end = 0.5;
  const TaskVector merged = merge_task_vectors(deltas, config);
  CHECK(merged.tensors[0].values == std::vector<double>{2.0, 2.0});

  config.method = "nonsense";
  CHECK_THROWS_AS(merge_task_vectors(deltas, config), ArgumentError);
}

TEST_CASE("names carry no semantics: consistent renames commute") {
  std::vector<TaskVector> deltas = {random_delta(201), random_delta(202)};
  const TaskVector merged = merge_ties(deltas, 0.5);
  for (TaskVector& tv : deltas)
    for (Tensor& t : tv.tensors) t.name = "renamed." + t.name;
  const TaskVector renamed = merge_ties(deltas, 0.5);
  CHECK(renamed.tensors[0].values == merged.tensors[0].values);
  CHECK(renamed.tensors[1].values == merged.tensors[1].values);
}

TEST_CASE("merge input validation") {
  const std::vector<TaskVector> one = {random_delta(1)};
  CHECK_THROWS_AS(merge_ta(one), ArgumentError);
  std::vector<TaskVector> mismatched = {random_delta(1), random_delta(2)};
  mismatched[1].tensors[0].name = "other";
  CHECK_THROWS_AS(merge_ta(mismatched), CongruenceError);
  const std::vector<TaskVector> pair = {random_delta(1), random_delta(2)};
  CHECK_THROWS_AS(merge_ties(pair, 0.0), ArgumentError);
  CHECK_THROWS_AS(merge_ties(pair, 1.5), ArgumentError);
  CHECK_THROWS_AS(merge_consensus(pair, 0, 0.5), ArgumentError);
  CHECK_THROWS_AS(merge_consensus(pair, 3, 0.5), ArgumentError);
}

}  // TEST_SUITE
