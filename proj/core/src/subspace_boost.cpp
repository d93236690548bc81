// SPDX-License-Identifier: Apache-2.0
#include "tvmerge/subspace_boost.hpp"

#include <cmath>

#include "tvmerge/linalg.hpp"

namespace tvmerge {

bool is_attention_name(std::string_view name) {
  return name.find("attn") != std::string_view::npos ||
         name.find("attention") != std::string_view::npos;
}

double beta_for_tensor(const BoostConfig& config, std::string_view name) {
  if (is_attention_name(name)) {
    return config.beta_attn.value_or(config.beta);
  }
  return config.beta_fc.value_or(config.beta);
}

std::vector<double> boost_spectrum(std::span<const double> sigma,
                                   double beta) {
  if (sigma.empty()) {
    throw ArgumentError("boost_spectrum: empty spectrum");
  }
  if (!(beta >= 0.0) || !(beta < 1.0)) {
    throw ArgumentError("boost_spectrum: beta must be in [0, 1)");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < sigma.size(); ++j) {
    if (!std::isfinite(sigma[j]) || sigma[j] < 0.0) {
      throw ArgumentError("boost_spectrum: spectrum must be finite and >= 0");
    }
    if (j > 0 && sigma[j] > sigma[j - 1]) {
      throw ArgumentError("boost_spectrum: spectrum must be descending");
    }
    total += sigma[j];
  }
  if (total == 0.0) {
    throw DegenerateSpectrumError("boost_spectrum: zero total");
  }

  // Walk the normalized cumulative sum; remember the last index still below
  // the threshold. When even nSum[0] clears it (beta = 0 always does), the
  // clamp lands on the first index and the whole tail flattens to sigma[0].
  std::size_t clamp_index = 0;
  double cumulative = 0.0;
  for (std::size_t j = 0; j < sigma.size(); ++j) {
    cumulative += sigma[j];
    if (cumulative / total < beta) clamp_index = j;
  }

  std::vector<double> boosted(sigma.begin(), sigma.end());
  for (std::size_t j = clamp_index + 1; j < boosted.size(); ++j) {
    boosted[j] = boosted[clamp_index];
  }
  return boosted;
}

Matrix boost_component(const Matrix& delta, double beta,
                       WarningList* warnings) {
  if (max_abs(delta) == 0.0) {
    warn(warnings, "boost_component: zero matrix left unchanged");
    return delta;
  }
  const SvdFactors f = svd_thin(delta);
  const std::vector<double> boosted = boost_spectrum(f.singular_values, beta);
  // U * diag(boosted) * Vt, with the diagonal folded into U's columns.
  Matrix scaled_u = f.u;
  for (std::size_t i = 0; i < scaled_u.rows(); ++i) {
    for (std::size_t j = 0; j < scaled_u.cols(); ++j) {
      scaled_u(i, j) *= boosted[j];
    }
  }
  return scaled_u * f.vt;
}

TaskVector boost_task_vector(const TaskVector& delta, const BoostConfig& config,
                             WarningList* warnings) {
  for (double beta : {config.beta, config.beta_fc.value_or(config.beta),
                      config.beta_attn.value_or(config.beta)}) {
    if (!(beta >= 0.0) || !(beta < 1.0)) {
      throw ArgumentError("boost_task_vector: beta must be in [0, 1)");
    }
  }
  TaskVector out = delta;
  for (Tensor& t : out.tensors) {
    if (!t.is_mergeable_2d()) continue;
    try {
      WarningList local;
      const Matrix boosted = boost_component(
          t.as_matrix(), beta_for_tensor(config, t.name), &local);
      t.values.assign(boosted.data().begin(), boosted.data().end());
      for (const std::string& w : local) {
        warn(warnings, "tensor " + t.name + ": " + w);
      }
    } catch (const FactorizationError& e) {
      throw FactorizationError("tensor " + t.name + ": " + e.what());
    } catch (const ArgumentError& e) {
      throw ArgumentError("tensor " + t.name + ": " + e.what());
    }
  }
  return out;
}

}  // namespace tvmerge
