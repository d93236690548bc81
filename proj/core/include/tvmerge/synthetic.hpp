// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "tvmerge/checkpoint.hpp"

namespace tvmerge {

// Recipe for a desk-scale pool of correlated experts. Every expert's weight
// on layer l is
//
//   w * S_l + (1 - w) * R_{e,l}
//
// with S_l a unit-Frobenius rank-1 direction shared by the whole pool and
// R_{e,l} a unit-Frobenius rank-(expert_rank - 1) component private to
// expert e (zero when expert_rank == 1). w = shared_direction_weight tunes
// cross-expert correlation: 1 collapses the pool onto one direction, 0 makes
// the dominant subspaces disjoint.
struct SyntheticSpec {
  std::size_t n_experts = 8;
  std::size_t n_layers = 4;
  std::size_t rows = 64;
  std::size_t cols = 64;
  std::size_t expert_rank = 8;
  double shared_direction_weight = 0.5;
  std::uint64_t seed = 0;
};

// Manifest naming scheme, shared with the command-line tool.
std::string synthetic_weight_name(std::size_t layer);
std::string synthetic_bias_name(std::size_t layer);

// All-zero checkpoint with the same manifest as the experts, so task-vector
// extraction is the identity on expert values.
Checkpoint synthetic_base(const SyntheticSpec& spec);

// Expert number `index` (0-based, < n_experts). Each (role, expert, layer)
// triple gets its own counter-derived random stream, so expert k is
// byte-identical no matter how many experts the pool declares or in which
// order they are generated.
Checkpoint synthetic_expert(const SyntheticSpec& spec, std::size_t index);

}  // namespace tvmerge
