// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tvmerge/checkpoint.hpp"
#include "tvmerge/errors.hpp"

namespace tvmerge {

// sum(sigma^2) / max(sigma)^2 -- a smooth rank proxy that drops when the
// spectrum concentrates in a few directions. Requires a non-empty spectrum
// with at least one positive entry (all-zero spectra have no defined rank).
double stable_rank(std::span<const double> sigma);

// Smallest r such that the top-r squared singular values cover at least
// `fraction` of the total squared mass. Returns a 1-based count in
// [1, #nonzero]. `fraction` must lie in (0, 1].
std::size_t cumulative_energy_rank(std::span<const double> sigma,
                                   double fraction);

// Per-tensor diagnostics for the mergeable-2d tensors of one task vector.
struct RankRow {
  std::string tensor;
  std::size_t layer = 0;  // 1-based position among mergeable tensors
  bool degenerate = false;  // all-zero tensor: rank fields are meaningless
  double stable_rank = 0.0;
  std::size_t energy_rank = 0;
  std::vector<double> sigma;  // full spectrum, descending
};

struct RankReport {
  double fraction = 0.95;
  std::vector<RankRow> rows;
};

RankReport rank_report(const TaskVector& tv, double fraction = 0.95);

// Writes `csv_path` with header tensor,layer,stable_rank,energy_rank,fraction
// (degenerate tensors emit "nan" / 0) and `sigma_csv_path` with
// tensor,index,sigma for every retained singular value.
void write_rank_report_csv(const RankReport& report,
                           const std::filesystem::path& csv_path,
                           const std::filesystem::path& sigma_csv_path);

}  // namespace tvmerge
