// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tvmerge/checkpoint.hpp"

namespace tvmerge {

// Settings for combining expert task vectors. The merged task vector is
// always stored unscaled; `alpha` is applied when the vector is added onto a
// base checkpoint, so one merge artifact serves a whole alpha sweep.
struct MergeConfig {
  std::string method = "ta";  // ta | ties | consensus
  double alpha = 1.0;
  double ties_trim_fraction = 0.2;
  std::size_t consensus_min_tasks = 2;
  bool lines_enabled = false;
  double lines_start = 0.5;
  double lines_end = 1.0;
};

// Plain elementwise sum of >= 2 congruent deltas.
TaskVector merge_ta(std::span<const TaskVector> deltas);

// Trim-elect-merge: per task vector, keep only the k = ceil(trim_fraction * n)
// largest-magnitude entries counted globally across its mergeable-2d tensors
// (passthrough entries are never trimmed); per coordinate, elect the sign with
// the larger summed magnitude (ties go positive); output the mean over
// surviving entries that agree with the elected sign, or 0 when none do.
TaskVector merge_ties(std::span<const TaskVector> deltas, double trim_fraction);

// Masked task arithmetic: a mergeable coordinate survives when it clears the
// per-task top-k magnitude threshold (same k as merge_ties) for at least
// `min_tasks` of the deltas; all other mergeable coordinates are zeroed.
// Passthrough coordinates pass through unmasked.
TaskVector merge_consensus(std::span<const TaskVector> deltas,
                           std::size_t min_tasks, double trim_fraction);

// Depth-linear rescaling: the tensor with 1-based layer index l out of L is
// scaled by start + (end - start) * (l - 1) / (L - 1); a single layer gets
// `start`. By default every tensor is its own layer in manifest order;
// `layer_of` (1-based indices, one per tensor) overrides the grouping and
// then L is the largest supplied index.
TaskVector lines_scale(const TaskVector& delta, double start, double end,
                       const std::vector<std::size_t>* layer_of = nullptr);

// Dispatch on config.method, then apply lines_scale when enabled. Does NOT
// apply alpha (see MergeConfig).
TaskVector merge_task_vectors(std::span<const TaskVector> deltas,
                              const MergeConfig& config);

}  // namespace tvmerge
