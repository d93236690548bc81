// SPDX-License-Identifier: Apache-2.0
#include "tvmerge/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <utility>

#include "tvmerge/errors.hpp"
#include "tvmerge/matrix.hpp"

namespace tvmerge {
namespace {

// splitmix64 finalizer. Structured keys (seed, role, expert, layer) are
// highly correlated; this turns them into decorrelated engine seeds so each
// tensor draws from its own stream and generation order never matters.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t role,
                          std::uint64_t expert, std::uint64_t layer) {
  return mix(mix(mix(mix(seed) ^ role) ^ expert) ^ layer);
}

constexpr std::uint64_t kRoleShared = 1;  // expert key unused (always 0)
constexpr std::uint64_t kRoleUnique = 2;
constexpr std::uint64_t kRoleBias = 3;

// Standard normal via Box-Muller on mt19937_64. The engine's stream is
// pinned by the C++ standard; std::normal_distribution's is not, and the
// contract here is byte-identical checkpoints for a fixed seed.
class Gauss {
public:
  explicit Gauss(std::uint64_t seed) : engine_(seed) {}

  double operator()() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(6.283185307179586 * u2);
    have_spare_ = true;
    return mag * std::cos(6.283185307179586 * u2);
  }

private:
  double uniform() {  // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

Matrix unit_frobenius(Matrix m) {
  const double norm = frobenius_norm(m);
  if (norm > 0.0) {
    for (double& v : m.data()) v /= norm;
  }
  return m;
}

void validate(const SyntheticSpec& spec) {
  if (spec.n_experts == 0) {
    throw ArgumentError("synthetic: n_experts must be positive");
  }
  if (spec.n_layers == 0) {
    throw ArgumentError("synthetic: n_layers must be positive");
  }
  if (spec.rows == 0 || spec.cols == 0) {
    throw ArgumentError("synthetic: layer shape must be positive");
  }
  if (spec.expert_rank == 0 ||
      spec.expert_rank > std::min(spec.rows, spec.cols)) {
    throw ArgumentError(
        "synthetic: expert_rank must lie in [1, min(rows, cols)]");
  }
  if (!(spec.shared_direction_weight >= 0.0 &&
        spec.shared_direction_weight <= 1.0)) {
    throw ArgumentError(
        "synthetic: shared_direction_weight must lie in [0, 1]");
  }
}

// Unit-Frobenius rank-1 direction common to the whole pool on this layer.
Matrix shared_direction(const SyntheticSpec& spec, std::size_t layer) {
  Gauss g(stream_seed(spec.seed, kRoleShared, 0, layer));
  Matrix left(spec.rows, 1);
  for (double& v : left.data()) v = g();
  Matrix right(1, spec.cols);
  for (double& v : right.data()) v = g();
  return unit_frobenius(left * right);
}

// Rank-(expert_rank - 1) component private to one expert: a sum of that many
// unit-Frobenius rank-1 directions. Random directions in a large space are
// near-orthogonal, so the private spectrum stays close to flat and each
// expert keeps a genuinely high stable rank — which is what lets a merge of
// many experts (whose shared direction adds coherently while the private
// directions do not) exhibit the rank collapse the diagnostics look for.
Matrix unique_component(const SyntheticSpec& spec, std::size_t expert,
                        std::size_t layer) {
  const std::size_t rank = spec.expert_rank - 1;
  Matrix sum(spec.rows, spec.cols);
  if (rank == 0) return sum;
  Gauss g(stream_seed(spec.seed, kRoleUnique, expert, layer));
  for (std::size_t k = 0; k < rank; ++k) {
    Matrix left(spec.rows, 1);
    for (double& v : left.data()) v = g();
    Matrix right(1, spec.cols);
    for (double& v : right.data()) v = g();
    sum = sum + unit_frobenius(left * right);
  }
  return sum;
}

Tensor bias_tensor(const std::string& name, std::vector<double> values) {
  Tensor t;
  t.name = name;
  t.shape = {values.size()};
  t.kind = TensorKind::kPassthrough;
  t.values = std::move(values);
  return t;
}

}  // namespace

std::string synthetic_weight_name(std::size_t layer) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "layer_%03zu.weight", layer);
  return buf;
}

std::string synthetic_bias_name(std::size_t layer) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "layer_%03zu.bias", layer);
  return buf;
}

Checkpoint synthetic_base(const SyntheticSpec& spec) {
  validate(spec);
  Checkpoint ckpt;
  for (std::size_t l = 0; l < spec.n_layers; ++l) {
    ckpt.tensors.push_back(Tensor::from_matrix(synthetic_weight_name(l),
                                               Matrix(spec.rows, spec.cols)));
    ckpt.tensors.push_back(bias_tensor(synthetic_bias_name(l),
                                       std::vector<double>(spec.rows, 0.0)));
  }
  return ckpt;
}

Checkpoint synthetic_expert(const SyntheticSpec& spec, std::size_t index) {
  validate(spec);
  if (index >= spec.n_experts) {
    throw ArgumentError("synthetic: expert index out of range");
  }
  const double w = spec.shared_direction_weight;
  Checkpoint ckpt;
  for (std::size_t l = 0; l < spec.n_layers; ++l) {
    const Matrix weight = w * shared_direction(spec, l) +
                          (1.0 - w) * unique_component(spec, index, l);
    ckpt.tensors.push_back(
        Tensor::from_matrix(synthetic_weight_name(l), weight));

    Gauss g(stream_seed(spec.seed, kRoleBias, index, l));
    std::vector<double> bias(spec.rows);
    for (double& v : bias) v = 0.01 * g();
    ckpt.tensors.push_back(bias_tensor(synthetic_bias_name(l), std::move(bias)));
  }
  return ckpt;
}

}  // namespace tvmerge
