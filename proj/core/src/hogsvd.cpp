// SPDX-License-Identifier: Apache-2.0
#include "tvmerge/hogsvd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "tvmerge/linalg.hpp"
#include "tvmerge/subspace_boost.hpp"
#include "tvmerge/text.hpp"

namespace tvmerge {
namespace {

void require_pool(std::span<const Matrix> a) {
  if (a.size() < 2) {
    throw ArgumentError("need at least 2 matrices");
  }
  const std::size_t n = a[0].cols();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].rows() == 0 || a[i].cols() == 0) {
      throw ArgumentError("matrix " + std::to_string(i) + " is empty");
    }
    if (a[i].cols() != n) {
      throw ArgumentError("matrix " + std::to_string(i) + " has " +
                          std::to_string(a[i].cols()) + " columns, expected " +
                          std::to_string(n));
    }
    if (!all_finite(a[i])) {
      throw ArgumentError("matrix " + std::to_string(i) + " is not finite");
    }
  }
}

// Re-throw decomposition failures with the component name attached, keeping
// the concrete error type so callers can still dispatch on it.
template <typename Fn>
auto with_component_context(const std::string& name, Fn&& fn) {
  const auto prefix = [&name](const std::exception& e) {
    return "component " + name + ": " + e.what();
  };
  try {
    return fn();
  } catch (const DefinitenessError& e) {
    throw DefinitenessError(prefix(e));
  } catch (const ConditioningError& e) {
    throw ConditioningError(prefix(e));
  } catch (const SpectrumError& e) {
    throw SpectrumError(prefix(e));
  } catch (const FactorizationError& e) {
    throw FactorizationError(prefix(e));
  } catch (const DegenerateSpectrumError& e) {
    throw DegenerateSpectrumError(prefix(e));
  } catch (const ArgumentError& e) {
    throw ArgumentError(prefix(e));
  }
}

// Mean |log((sigma_i + eps) / (sigma_j + eps))| over all dimensions of one
// decomposition, for every pair. Exactly symmetric, exactly zero diagonal.
Matrix pairwise_misalignment(const HogsvdFactors& factors, double eps) {
  const std::size_t tasks = factors.sigma.size();
  const std::size_t dims = factors.sigma.empty() ? 0 : factors.sigma[0].size();
  Matrix partial(tasks, tasks);
  for (std::size_t i = 0; i < tasks; ++i) {
    for (std::size_t j = i + 1; j < tasks; ++j) {
      double total = 0.0;
      for (std::size_t p = 0; p < dims; ++p) {
        total += std::abs(std::log((factors.sigma[i][p] + eps) /
                                   (factors.sigma[j][p] + eps)));
      }
      partial(i, j) = total / static_cast<double>(dims);
      partial(j, i) = partial(i, j);
    }
  }
  return partial;
}

Matrix permuted_columns(const Matrix& m, std::span<const std::size_t> perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t j = 0; j < perm.size(); ++j) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      out(i, j) = m(i, perm[j]);
    }
  }
  return out;
}

std::uint64_t subset_count(std::size_t n, std::size_t k) {
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < k; ++i) {
    count = count * (n - i) / (i + 1);
    if (count > 100'000'000ull) return count;  // enough to reject
  }
  return count;
}

}  // namespace

Matrix compute_s_pi(std::span<const Matrix> a, double pi) {
  require_pool(a);
  if (!(pi >= 0.0) || !std::isfinite(pi)) {
    throw ArgumentError("compute_s_pi: pi must be finite and >= 0");
  }
  const std::size_t count = a.size();
  const std::size_t n = a[0].cols();

  std::vector<Matrix> grams;
  grams.reserve(count);
  for (const Matrix& m : a) grams.push_back(gram(m));
  Matrix stack_gram(n, n);  // A^T A of the row-stack = sum of the Grams
  for (const Matrix& g : grams) stack_gram = stack_gram + g;

  std::vector<Matrix> d;
  d.reserve(count);
  for (const Matrix& g : grams) d.push_back(g + pi * stack_gram);

  // D_i D_j^{-1} = solve(D_j, D_i)^T because both factors are symmetric.
  Matrix sum(n, n);
  try {
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t j = i + 1; j < count; ++j) {
        sum = sum + transposed(spd_solve(d[j], d[i])) +
              transposed(spd_solve(d[i], d[j]));
      }
    }
  } catch (const DefinitenessError&) {
    if (pi > 0.0) {
      // With pi > 0 every D_i inherits the stacked Gram's null space, so the
      // failure means the pool as a whole does not span its column space and
      // no amount of regularization can fix that.
      throw DefinitenessError(
          "compute_s_pi: the stacked inputs do not span their column space "
          "(pooled rank < column count), so the regularized factors stay "
          "singular for every pi");
    }
    throw;
  }
  const double scale =
      1.0 / (static_cast<double>(count) * static_cast<double>(count - 1));
  return scale * sum;
}

HogsvdFactors hogsvd_decompose(std::span<const Matrix> a,
                               const HogsvdConfig& config) {
  const Matrix s = compute_s_pi(a, config.pi);
  const EigFactors eig = eig_real(s, config.tol_imag);

  HogsvdFactors factors;
  factors.v = eig.eigenvectors;
  factors.eigenvalues = eig.eigenvalues;
  factors.max_imag_residual = eig.max_imag_residual;

  // (V^T)^{-1} through the SVD of V, guarding against a collapsed basis.
  const SvdFactors vsvd = svd_thin(factors.v);
  const double top = vsvd.singular_values.front();
  const double bottom = vsvd.singular_values.back();
  if (bottom <= 0.0 || top / bottom > config.max_condition) {
    throw ConditioningError(
        "hogsvd_decompose: shared factor condition number " +
        format_double(bottom > 0.0 ? top / bottom
                                   : std::numeric_limits<double>::infinity()) +
        " exceeds " + format_double(config.max_condition));
  }
  const std::size_t n = factors.v.rows();
  Matrix inv_vt = vsvd.u;  // becomes U * diag(1/s) * Vt
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      inv_vt(i, j) /= vsvd.singular_values[j];
    }
  }
  inv_vt = inv_vt * vsvd.vt;

  for (const Matrix& m : a) {
    const Matrix b = m * inv_vt;
    std::vector<double> sigma(n);
    Matrix u(b.rows(), n);
    for (std::size_t j = 0; j < n; ++j) {
      sigma[j] = column_norm(b, j);
      if (sigma[j] > 0.0) {
        for (std::size_t i = 0; i < b.rows(); ++i) {
          u(i, j) = b(i, j) / sigma[j];
        }
      }
    }
    factors.sigma.push_back(std::move(sigma));
    factors.u.push_back(std::move(u));
  }
  return factors;
}

SubspaceClassification classify_subspaces(const HogsvdFactors& factors,
                                          double tau, double eps) {
  if (!(tau > 0.0)) {
    throw ArgumentError("classify_subspaces: tau must be > 0");
  }
  const std::size_t tasks = factors.sigma.size();
  const std::size_t dims = factors.sigma.empty() ? 0 : factors.sigma[0].size();
  SubspaceClassification result;
  result.unique_per_task.resize(tasks);

  for (std::size_t k = 0; k < dims; ++k) {
    double lo = factors.sigma[0][k];
    double hi = lo;
    for (std::size_t i = 1; i < tasks; ++i) {
      lo = std::min(lo, factors.sigma[i][k]);
      hi = std::max(hi, factors.sigma[i][k]);
    }
    // Widest pairwise log-ratio = ratio of the extremes.
    if (std::log((hi + eps) / (lo + eps)) <= tau) {
      result.common.push_back(k);
      continue;
    }
    bool placed = false;
    for (std::size_t j = 0; j < tasks && !placed; ++j) {
      bool dominates = true;
      for (std::size_t i = 0; i < tasks; ++i) {
        if (i == j) continue;
        if (factors.sigma[i][k] / (factors.sigma[j][k] + eps) > tau) {
          dominates = false;
          break;
        }
      }
      if (dominates) {
        result.unique_per_task[j].push_back(k);
        placed = true;
      }
    }
    if (!placed) result.unclassified.push_back(k);
  }
  return result;
}

AlignmentMatrix alignment_matrix(std::span<const HogsvdFactors> per_component,
                                 double eps) {
  if (per_component.empty()) {
    throw ArgumentError("alignment_matrix: no components");
  }
  const std::size_t tasks = per_component[0].sigma.size();
  for (const HogsvdFactors& f : per_component) {
    if (f.sigma.size() != tasks) {
      throw CongruenceError(
          "alignment_matrix: components disagree on the task count");
    }
  }
  AlignmentMatrix result;
  result.scores = Matrix(tasks, tasks);
  for (const HogsvdFactors& f : per_component) {
    result.partials.push_back(pairwise_misalignment(f, eps));
    result.scores = result.scores + result.partials.back();
  }
  result.scores =
      (1.0 / static_cast<double>(per_component.size())) * result.scores;
  return result;
}

std::vector<ComponentFactors> decompose_task_vectors(
    std::span<const TaskVector> deltas, const HogsvdConfig& config,
    WarningList* warnings) {
  if (deltas.size() < 2) {
    throw ArgumentError("decompose_task_vectors: need at least 2 task vectors");
  }
  for (std::size_t d = 1; d < deltas.size(); ++d) {
    require_congruent(deltas[0].tensors, deltas[d].tensors,
                      "decompose_task_vectors");
  }
  std::vector<ComponentFactors> result;
  for (std::size_t t = 0; t < deltas[0].tensors.size(); ++t) {
    if (!deltas[0].tensors[t].is_mergeable_2d()) continue;
    const std::string& name = deltas[0].tensors[t].name;
    std::vector<Matrix> pool;
    double magnitude = 0.0;
    for (const TaskVector& tv : deltas) {
      pool.push_back(tv.tensors[t].as_matrix());
      magnitude = std::max(magnitude, max_abs(pool.back()));
    }
    if (magnitude == 0.0) {
      warn(warnings, "component " + name + ": all-zero across the pool, "
                     "skipped");
      continue;
    }
    result.push_back(
        {name, with_component_context(name, [&] {
           return hogsvd_decompose(pool, config);
         })});
  }
  return result;
}

AlignmentMatrix alignment_from_components(
    std::span<const ComponentFactors> components, double eps) {
  if (components.empty()) {
    throw ArgumentError("alignment_from_components: no components");
  }
  std::vector<HogsvdFactors> factors;
  factors.reserve(components.size());
  for (const ComponentFactors& c : components) factors.push_back(c.factors);
  AlignmentMatrix result = alignment_matrix(factors, eps);
  for (const ComponentFactors& c : components) {
    result.components.push_back(c.component);
  }
  return result;
}

std::vector<std::size_t> select_experts(const Matrix& scores, std::size_t k,
                                        SelectionMode mode) {
  const std::size_t n = scores.rows();
  if (scores.cols() != n || n < 2) {
    throw ArgumentError("select_experts: scores must be square, N >= 2");
  }
  if (k < 2 || k > n) {
    throw ArgumentError("select_experts: need 2 <= k <= N");
  }

  if (mode == SelectionMode::kExhaustive) {
    if (subset_count(n, k) > 2'000'000ull) {
      throw ArgumentError(
          "select_experts: exhaustive mode over this many subsets is "
          "impractical; use greedy");
    }
    // Lexicographic odometer over k-subsets; strict improvement keeps the
    // lexicographically smallest optimum.
    std::vector<std::size_t> subset(k);
    std::iota(subset.begin(), subset.end(), 0);
    std::vector<std::size_t> best = subset;
    double best_total = -1.0;
    while (true) {
      double total = 0.0;
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
          total += scores(subset[a], subset[b]);
        }
      }
      if (total > best_total) {
        best_total = total;
        best = subset;
      }
      std::size_t pos = k;
      while (pos-- > 0) {
        if (subset[pos] != n - k + pos) break;
        if (pos == 0) return best;
      }
      if (subset[pos] == n - k + pos) return best;
      ++subset[pos];
      for (std::size_t q = pos + 1; q < k; ++q) subset[q] = subset[q - 1] + 1;
    }
  }

  // Greedy: best pair first, then highest mean score against the selection.
  std::size_t seed_i = 0, seed_j = 1;
  double best_pair = scores(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (scores(i, j) > best_pair) {
        best_pair = scores(i, j);
        seed_i = i;
        seed_j = j;
      }
    }
  }
  std::vector<std::size_t> selected = {seed_i, seed_j};
  std::vector<bool> in_set(n, false);
  in_set[seed_i] = in_set[seed_j] = true;
  while (selected.size() < k) {
    std::size_t best_candidate = n;
    double best_mean = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      if (in_set[c]) continue;
      double mean = 0.0;
      for (std::size_t s : selected) mean += scores(c, s);
      mean /= static_cast<double>(selected.size());
      if (best_candidate == n || mean > best_mean) {
        best_mean = mean;
        best_candidate = c;
      }
    }
    selected.push_back(best_candidate);
    in_set[best_candidate] = true;
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

TaskVector hogsvd_boost_merge(std::span<const TaskVector> deltas,
                              const HogsvdConfig& config, double beta,
                              WarningList* warnings,
                              HogsvdMergeDiagnostics* diagnostics) {
  if (deltas.size() < 2) {
    throw ArgumentError("hogsvd_boost_merge: need at least 2 task vectors");
  }
  for (std::size_t d = 1; d < deltas.size(); ++d) {
    require_congruent(deltas[0].tensors, deltas[d].tensors,
                      "hogsvd_boost_merge");
  }
  if (!(config.sigma_scale > 0.0) || !std::isfinite(config.sigma_scale)) {
    throw ArgumentError("hogsvd_boost_merge: sigma_scale must be > 0");
  }

  TaskVector out = deltas[0];
  for (std::size_t t = 0; t < out.tensors.size(); ++t) {
    Tensor& tensor = out.tensors[t];
    if (!tensor.is_mergeable_2d()) {
      for (std::size_t d = 1; d < deltas.size(); ++d) {
        for (std::size_t j = 0; j < tensor.values.size(); ++j) {
          tensor.values[j] += deltas[d].tensors[t].values[j];
        }
      }
      continue;
    }

    // A wide component has no n-column orthonormal left factor, so merge its
    // transpose and flip the result back.
    const bool wide = tensor.shape[0] < tensor.shape[1];
    std::vector<Matrix> pool;
    double magnitude = 0.0;
    for (const TaskVector& tv : deltas) {
      Matrix m = tv.tensors[t].as_matrix();
      if (wide) m = transposed(m);
      magnitude = std::max(magnitude, max_abs(m));
      pool.push_back(std::move(m));
    }
    if (magnitude == 0.0) {
      warn(warnings, "component " + tensor.name +
                     ": all-zero across the pool, left as zero");
      continue;
    }

    const Matrix merged = with_component_context(tensor.name, [&] {
      const HogsvdFactors factors = hogsvd_decompose(pool, config);
      const std::size_t n = factors.v.rows();

      Matrix u_mean(pool[0].rows(), n);
      for (const Matrix& u : factors.u) u_mean = u_mean + u;
      u_mean = (1.0 / static_cast<double>(pool.size())) * u_mean;

      WarningList local;
      const Matrix u_ortho = polar_orthonormalize(u_mean, &local);
      const Matrix v_ortho = polar_orthonormalize(factors.v, &local);
      for (const std::string& w : local) {
        warn(warnings, "component " + tensor.name + ": " + w);
      }
      if (diagnostics) {
        const double denom = std::max(frobenius_norm(u_ortho), 1e-300);
        diagnostics->procrustes_residuals.emplace_back(
            tensor.name, frobenius_norm(u_mean - u_ortho) / denom);
      }

      std::vector<double> sigma_sum(n, 0.0);
      for (const std::vector<double>& s : factors.sigma) {
        for (std::size_t j = 0; j < n; ++j) sigma_sum[j] += s[j];
      }
      for (double& s : sigma_sum) s *= config.sigma_scale;

      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::stable_sort(perm.begin(), perm.end(),
                       [&sigma_sum](std::size_t a, std::size_t b) {
                         return sigma_sum[a] > sigma_sum[b];
                       });
      std::vector<double> sigma_sorted(n);
      for (std::size_t j = 0; j < n; ++j) sigma_sorted[j] = sigma_sum[perm[j]];
      const std::vector<double> boosted = boost_spectrum(sigma_sorted, beta);

      Matrix u_scaled = permuted_columns(u_ortho, perm);
      for (std::size_t i = 0; i < u_scaled.rows(); ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          u_scaled(i, j) *= boosted[j];
        }
      }
      return u_scaled * transposed(permuted_columns(v_ortho, perm));
    });

    const Matrix oriented = wide ? transposed(merged) : merged;
    tensor.values.assign(oriented.data().begin(), oriented.data().end());
  }
  return out;
}

void write_alignment_csv(const AlignmentMatrix& alignment,
                         const std::filesystem::path& partials_csv,
                         const std::filesystem::path& mean_csv) {
  std::ofstream partials(partials_csv, std::ios::binary | std::ios::trunc);
  if (!partials) throw StorageError("cannot open " + partials_csv.string());
  partials << "component,i,j,score\n";
  for (std::size_t l = 0; l < alignment.partials.size(); ++l) {
    const std::string name = l < alignment.components.size()
                                 ? alignment.components[l]
                                 : "component_" + std::to_string(l);
    const Matrix& p = alignment.partials[l];
    for (std::size_t i = 0; i < p.rows(); ++i) {
      for (std::size_t j = 0; j < p.cols(); ++j) {
        partials << csv_field(name) << ',' << i << ',' << j << ','
                 << format_double(p(i, j)) << '\n';
      }
    }
  }
  if (!partials) throw StorageError("short write: " + partials_csv.string());

  std::ofstream mean(mean_csv, std::ios::binary | std::ios::trunc);
  if (!mean) throw StorageError("cannot open " + mean_csv.string());
  mean << "i,j,score\n";
  for (std::size_t i = 0; i < alignment.scores.rows(); ++i) {
    for (std::size_t j = 0; j < alignment.scores.cols(); ++j) {
      mean << i << ',' << j << ',' << format_double(alignment.scores(i, j))
           << '\n';
    }
  }
  if (!mean) throw StorageError("short write: " + mean_csv.string());
}

void write_gsv_csv(std::span<const ComponentFactors> components,
                   const std::filesystem::path& csv) {
  std::ofstream out(csv, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot open " + csv.string());
  out << "component,task,index,gsv\n";
  for (const ComponentFactors& c : components) {
    for (std::size_t i = 0; i < c.factors.sigma.size(); ++i) {
      for (std::size_t p = 0; p < c.factors.sigma[i].size(); ++p) {
        out << csv_field(c.component) << ',' << i << ',' << p << ','
            << format_double(c.factors.sigma[i][p]) << '\n';
      }
    }
  }
  if (!out) throw StorageError("short write: " + csv.string());
}

}  // namespace tvmerge
