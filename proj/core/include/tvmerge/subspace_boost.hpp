// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tvmerge/checkpoint.hpp"
#include "tvmerge/errors.hpp"
#include "tvmerge/matrix.hpp"

namespace tvmerge {

// Spectrum-flattening settings. `beta` positions the clamp threshold on the
// normalized cumulative spectrum; sensible values are tiny (grid-search over
// {0, 0.01, 0.02}). The optional per-class values override `beta` for fully
// connected / attention tensors respectively (classed by tensor name: names
// containing "attn" or "attention" count as attention, everything else as
// fully connected).
struct BoostConfig {
  double beta = 0.0;
  std::optional<double> beta_fc;
  std::optional<double> beta_attn;
};

// True when the tensor name denotes an attention projection.
bool is_attention_name(std::string_view name);

// The beta that applies to the named tensor under `config`.
double beta_for_tensor(const BoostConfig& config, std::string_view name);

// Flatten the spectrum's tail: with nSum[j] = (sum of sigma[0..j]) / total,
// find the last index where nSum < beta (or the first index when none
// qualifies) and overwrite everything after it with the value there. The
// head of the spectrum is untouched, so sigma*[j] >= sigma[j] everywhere and
// the top singular value never changes. beta = 0 flattens the whole spectrum
// to sigma[0].
std::vector<double> boost_spectrum(std::span<const double> sigma, double beta);

// svd -> boost_spectrum -> reconstruct. A zero matrix has no spectrum to
// boost; it is returned unchanged and noted in `warnings`.
Matrix boost_component(const Matrix& delta, double beta,
                       WarningList* warnings = nullptr);

// boost_component over every mergeable-2d tensor (per-class beta override
// applied); passthrough tensors are copied untouched. Errors are rethrown
// with the offending tensor's name attached.
TaskVector boost_task_vector(const TaskVector& delta, const BoostConfig& config,
                             WarningList* warnings = nullptr);

}  // namespace tvmerge
