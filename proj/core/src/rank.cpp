// SPDX-License-Identifier: Apache-2.0
#include "tvmerge/rank.hpp"

#include <cmath>
#include <fstream>

#include "tvmerge/linalg.hpp"
#include "tvmerge/text.hpp"

namespace tvmerge {

double stable_rank(std::span<const double> sigma) {
  if (sigma.empty()) {
    throw ArgumentError("stable_rank: empty spectrum");
  }
  double top = 0.0;
  double total = 0.0;
  for (double s : sigma) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw ArgumentError("stable_rank: spectrum must be finite and >= 0");
    }
    top = std::max(top, s);
    total += s * s;
  }
  if (top == 0.0) {
    throw DegenerateSpectrumError("stable_rank: all-zero spectrum");
  }
  return total / (top * top);
}

std::size_t cumulative_energy_rank(std::span<const double> sigma,
                                   double fraction) {
  if (sigma.empty()) {
    throw ArgumentError("cumulative_energy_rank: empty spectrum");
  }
  if (!(fraction > 0.0) || !(fraction <= 1.0)) {
    throw ArgumentError("cumulative_energy_rank: fraction must be in (0, 1]");
  }
  double total = 0.0;
  for (double s : sigma) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw ArgumentError(
          "cumulative_energy_rank: spectrum must be finite and >= 0");
    }
    total += s * s;
  }
  if (total == 0.0) {
    throw DegenerateSpectrumError("cumulative_energy_rank: all-zero spectrum");
  }
  const double target = fraction * total;
  double cumulative = 0.0;
  for (std::size_t r = 0; r < sigma.size(); ++r) {
    cumulative += sigma[r] * sigma[r];
    if (cumulative >= target) return r + 1;
  }
  return sigma.size();  // only reachable through rounding at fraction == 1
}

RankReport rank_report(const TaskVector& tv, double fraction) {
  RankReport report;
  report.fraction = fraction;
  std::size_t layer = 0;
  for (const Tensor& t : tv.tensors) {
    if (!t.is_mergeable_2d()) continue;
    ++layer;
    RankRow row;
    row.tensor = t.name;
    row.layer = layer;
    const Matrix m = t.as_matrix();
    if (max_abs(m) == 0.0) {
      row.degenerate = true;
      row.sigma.assign(std::min(m.rows(), m.cols()), 0.0);
    } else {
      const SvdFactors f = svd_thin(m);
      row.sigma = f.singular_values;
      row.stable_rank = stable_rank(row.sigma);
      row.energy_rank = cumulative_energy_rank(row.sigma, fraction);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_rank_report_csv(const RankReport& report,
                           const std::filesystem::path& csv_path,
                           const std::filesystem::path& sigma_csv_path) {
  std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot open " + csv_path.string());
  out << "tensor,layer,stable_rank,energy_rank,fraction\n";
  for (const RankRow& row : report.rows) {
    out << csv_field(row.tensor) << ',' << row.layer << ','
        << (row.degenerate ? "nan" : format_double(row.stable_rank)) << ','
        << row.energy_rank << ',' << format_double(report.fraction) << '\n';
  }
  if (!out) throw StorageError("short write: " + csv_path.string());

  std::ofstream sig(sigma_csv_path, std::ios::binary | std::ios::trunc);
  if (!sig) throw StorageError("cannot open " + sigma_csv_path.string());
  sig << "tensor,index,sigma\n";
  for (const RankRow& row : report.rows) {
    for (std::size_t i = 0; i < row.sigma.size(); ++i) {
      sig << csv_field(row.tensor) << ',' << i << ',' << format_double(row.sigma[i])
          << '\n';
    }
  }
  if (!sig) throw StorageError("short write: " + sigma_csv_path.string());
}

}  // namespace tvmerge
