// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tvmerge/errors.hpp"
#include "tvmerge/matrix.hpp"

namespace tvmerge {

// How a tensor participates in merging. Factorization-based operations only
// ever touch mergeable-2d tensors; passthrough tensors (biases, norms, 1-D
// stats) travel through every pipeline with plain elementwise arithmetic.
// The kind is declared in the manifest, never guessed from names.
enum class TensorKind { kMergeable2d, kPassthrough };

std::string_view to_string(TensorKind kind);
TensorKind tensor_kind_from_string(std::string_view s);

// One named tensor. On disk the payload is little-endian IEEE-754 f32; in
// memory everything is f64 so repeated arithmetic does not grind precision.
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  TensorKind kind = TensorKind::kPassthrough;
  std::vector<double> values;  // row-major, shape-product elements

  std::size_t element_count() const;
  bool is_mergeable_2d() const { return kind == TensorKind::kMergeable2d; }
  Matrix as_matrix() const;  // mergeable-2d only
  static Tensor from_matrix(std::string name, const Matrix& m,
                            TensorKind kind = TensorKind::kMergeable2d);
};

// A model checkpoint: tensors in manifest order. Order is meaningful (it
// defines layer indices for reports and depth-based scaling), so this is a
// vector, not a map.
struct Checkpoint {
  std::vector<Tensor> tensors;

  const Tensor* find(std::string_view name) const;
};

// A parameter delta with the same structure as the checkpoint it came from.
struct TaskVector {
  std::vector<Tensor> tensors;
};

// Directory layout: <dir>/manifest.json plus one raw f32 blob per tensor
// (no header, exactly 4 * element-count bytes). Loading validates shape/blob
// agreement, unique names, dtype, kind arity, and finiteness; saving is
// deterministic byte-for-byte.
Checkpoint load_checkpoint(const std::filesystem::path& dir);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
TaskVector load_task_vector(const std::filesystem::path& dir);
void save_task_vector(const TaskVector& tv, const std::filesystem::path& dir);

// Throws CongruenceError unless both collections have identical (name, shape,
// kind) sequences. `context` names the operation for the error message.
void require_congruent(std::span<const Tensor> a, std::span<const Tensor> b,
                       const char* context);

// expert - base. Kind tags are copied from the base manifest.
TaskVector task_vector(const Checkpoint& expert, const Checkpoint& base);

// base + alpha * delta.
Checkpoint apply_task_vector(const Checkpoint& base, const TaskVector& delta,
                             double alpha);

// Elementwise sum; every entry must be congruent with the first.
TaskVector sum_task_vectors(std::span<const TaskVector> deltas);

}  // namespace tvmerge
