// SPDX-License-Identifier: Apache-2.0
#include "tvmerge/merge.hpp"

#include <algorithm>
#include <cmath>

namespace tvmerge {
namespace {

void require_merge_inputs(std::span<const TaskVector> deltas,
                          const char* context) {
  if (deltas.size() < 2) {
    throw ArgumentError(std::string(context) +
                        ": need at least 2 task vectors");
  }
  for (std::size_t d = 1; d < deltas.size(); ++d) {
    require_congruent(deltas[0].tensors, deltas[d].tensors, context);
  }
}

std::size_t mergeable_entry_count(const TaskVector& tv) {
  std::size_t n = 0;
  for (const Tensor& t : tv.tensors) {
    if (t.is_mergeable_2d()) n += t.values.size();
  }
  return n;
}

std::size_t top_k_count(double trim_fraction, std::size_t total,
                        const char* context) {
  if (!(trim_fraction > 0.0) || !(trim_fraction <= 1.0)) {
    throw ArgumentError(std::string(context) +
                        ": trim_fraction must be in (0, 1]");
  }
  const auto k = static_cast<std::size_t>(
      std::ceil(trim_fraction * static_cast<double>(total)));
  return std::min(k, total);
}

// One mergeable entry, ordered by magnitude descending, ties broken by
// manifest position then flat index so the cut is deterministic.
struct RankedEntry {
  double magnitude;
  std::size_t tensor;
  std::size_t index;
};

std::vector<RankedEntry> ranked_mergeable_entries(const TaskVector& tv) {
  std::vector<RankedEntry> entries;
  entries.reserve(mergeable_entry_count(tv));
  for (std::size_t t = 0; t < tv.tensors.size(); ++t) {
    if (!tv.tensors[t].is_mergeable_2d()) continue;
    for (std::size_t j = 0; j < tv.tensors[t].values.size(); ++j) {
      entries.push_back({std::abs(tv.tensors[t].values[j]), t, j});
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const RankedEntry& a, const RankedEntry& b) {
              if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
              if (a.tensor != b.tensor) return a.tensor < b.tensor;
              return a.index < b.index;
            });
  return entries;
}

// Elect a sign per coordinate from the (possibly trimmed) deltas, then mean
// the surviving entries that agree with it. Zero entries never vote.
TaskVector elect_and_mean(std::span<const TaskVector> deltas) {
  TaskVector out = deltas[0];
  for (std::size_t t = 0; t < out.tensors.size(); ++t) {
    for (std::size_t j = 0; j < out.tensors[t].values.size(); ++j) {
      double positive_mass = 0.0;
      double negative_mass = 0.0;
      for (const TaskVector& tv : deltas) {
        const double v = tv.tensors[t].values[j];
        if (v > 0.0) positive_mass += v;
        if (v < 0.0) negative_mass -= v;
      }
      const double sign = positive_mass >= negative_mass ? 1.0 : -1.0;
      double sum = 0.0;
      std::size_t survivors = 0;
      for (const TaskVector& tv : deltas) {
        const double v = tv.tensors[t].values[j];
        if (v * sign > 0.0) {
          sum += v;
          ++survivors;
        }
      }
      out.tensors[t].values[j] = survivors ? sum / survivors : 0.0;
    }
  }
  return out;
}

}  // namespace

TaskVector merge_ta(std::span<const TaskVector> deltas) {
  require_merge_inputs(deltas, "merge_ta");
  return sum_task_vectors(deltas);
}

TaskVector merge_ties(std::span<const TaskVector> deltas,
                      double trim_fraction) {
  require_merge_inputs(deltas, "merge_ties");
  const std::size_t total = mergeable_entry_count(deltas[0]);
  const std::size_t k = top_k_count(trim_fraction, total, "merge_ties");

  std::vector<TaskVector> trimmed(deltas.begin(), deltas.end());
  if (total > 0) {
    for (TaskVector& tv : trimmed) {
      const auto ranked = ranked_mergeable_entries(tv);
      for (std::size_t r = k; r < ranked.size(); ++r) {
        tv.tensors[ranked[r].tensor].values[ranked[r].index] = 0.0;
      }
    }
  }
  return elect_and_mean(trimmed);
}

TaskVector merge_consensus(std::span<const TaskVector> deltas,
                           std::size_t min_tasks, double trim_fraction) {
  require_merge_inputs(deltas, "merge_consensus");
  if (min_tasks < 1 || min_tasks > deltas.size()) {
    throw ArgumentError("merge_consensus: min_tasks must be in [1, N]");
  }
  TaskVector out = merge_ta(deltas);
  const std::size_t total = mergeable_entry_count(deltas[0]);
  if (total == 0) return out;
  const std::size_t k = top_k_count(trim_fraction, total, "merge_consensus");

  // Per-task relevance cutoff: the k-th largest magnitude in that delta.
  std::vector<double> threshold(deltas.size());
  for (std::size_t d = 0; d < deltas.size(); ++d) {
    threshold[d] = ranked_mergeable_entries(deltas[d])[k - 1].magnitude;
  }

  for (std::size_t t = 0; t < out.tensors.size(); ++t) {
    if (!out.tensors[t].is_mergeable_2d()) continue;
    for (std::size_t j = 0; j < out.tensors[t].values.size(); ++j) {
      std::size_t relevant = 0;
      for (std::size_t d = 0; d < deltas.size(); ++d) {
        if (std::abs(deltas[d].tensors[t].values[j]) >= threshold[d]) {
          ++relevant;
        }
      }
      if (relevant < min_tasks) out.tensors[t].values[j] = 0.0;
    }
  }
  return out;
}

TaskVector lines_scale(const TaskVector& delta, double start, double end,
                       const std::vector<std::size_t>* layer_of) {
  if (!std::isfinite(start) || !std::isfinite(end) || start < 0.0 ||
      end < start) {
    throw ArgumentError("lines_scale: need 0 <= start <= end, both finite");
  }
  const std::size_t count = delta.tensors.size();
  std::vector<std::size_t> layers(count);
  if (layer_of) {
    if (layer_of->size() != count) {
      throw ArgumentError("lines_scale: layer_of must name every tensor");
    }
    for (std::size_t i = 0; i < count; ++i) {
      if ((*layer_of)[i] < 1) {
        throw ArgumentError("lines_scale: layer indices are 1-based");
      }
      layers[i] = (*layer_of)[i];
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) layers[i] = i + 1;
  }
  std::size_t depth = 0;
  for (std::size_t l : layers) depth = std::max(depth, l);

  TaskVector out = delta;
  for (std::size_t i = 0; i < count; ++i) {
    const double scale =
        depth <= 1 ? start
                   : start + (end - start) *
                                 static_cast<double>(layers[i] - 1) /
                                 static_cast<double>(depth - 1);
    for (double& v : out.tensors[i].values) v *= scale;
  }
  return out;
}

TaskVector merge_task_vectors(std::span<const TaskVector> deltas,
                              const MergeConfig& config) {
  TaskVector merged;
  if (config.method == "ta") {
    merged = merge_ta(deltas);
  } else if (config.method == "ties") {
    merged = merge_ties(deltas, config.ties_trim_fraction);
  } else if (config.method == "consensus") {
    merged = merge_consensus(deltas, config.consensus_min_tasks,
                             config.ties_trim_fraction);
  } else {
    throw ArgumentError("unknown merge method \"" + config.method +
                        "\" (expected ta, ties, or consensus)");
  }
  if (config.lines_enabled) {
    merged = lines_scale(merged, config.lines_start, config.lines_end);
  }
  return merged;
}

}  // namespace tvmerge
