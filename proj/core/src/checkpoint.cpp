// SPDX-License-Identifier: Apache-2.0
#include "tvmerge/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace tvmerge {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string blob_file_name(std::size_t index, std::string_view tensor_name) {
  // Deterministic and collision-free: the zero-padded manifest index keeps
  // names unique even when sanitizing maps distinct tensor names together.
  std::string safe;
  safe.reserve(tensor_name.size());
  for (char c : tensor_name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '-' || c == '_';
    safe.push_back(ok ? c : '_');
  }
  char prefix[32];
  std::snprintf(prefix, sizeof prefix, "%04zu_", index);
  return std::string(prefix) + safe + ".bin";
}

void write_f32_blob(const std::filesystem::path& path,
                    std::span<const double> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot open for writing: " + path.string());
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto word = std::bit_cast<std::uint32_t>(
        static_cast<float>(values[i]));
    bytes[4 * i + 0] = static_cast<unsigned char>(word & 0xffu);
    bytes[4 * i + 1] = static_cast<unsigned char>((word >> 8) & 0xffu);
    bytes[4 * i + 2] = static_cast<unsigned char>((word >> 16) & 0xffu);
    bytes[4 * i + 3] = static_cast<unsigned char>((word >> 24) & 0xffu);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw StorageError("short write: " + path.string());
}

std::vector<double> read_f32_blob(const std::filesystem::path& path,
                                  std::size_t expected_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open for reading: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() != expected_count * 4) {
    throw ParseError("blob " + path.string() + " holds " +
                     std::to_string(bytes.size()) + " bytes, expected " +
                     std::to_string(expected_count * 4));
  }
  std::vector<double> values(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    const std::uint32_t word =
        static_cast<std::uint32_t>(bytes[4 * i + 0]) |
        (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
        (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
        (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    values[i] = static_cast<double>(std::bit_cast<float>(word));
  }
  return values;
}

std::string require_string(const nlohmann::json& entry, const char* key,
                           std::size_t index) {
  if (!entry.contains(key) || !entry[key].is_string()) {
    throw ParseError("manifest tensor " + std::to_string(index) +
                     ": missing or non-string \"" + key + "\"");
  }
  return entry[key].get<std::string>();
}

std::vector<Tensor> load_tensors(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw StorageError("cannot open " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("version") ||
      !manifest["version"].is_number_integer() ||
      manifest["version"].get<int>() != 1) {
    throw ParseError(manifest_path.string() + ": expected {\"version\": 1}");
  }
  if (!manifest.contains("tensors") || !manifest["tensors"].is_array()) {
    throw ParseError(manifest_path.string() + ": missing \"tensors\" array");
  }

  std::vector<Tensor> tensors;
  std::set<std::string> seen_names;
  std::size_t index = 0;
  for (const auto& entry : manifest["tensors"]) {
    if (!entry.is_object()) {
      throw ParseError("manifest tensor " + std::to_string(index) +
                       ": expected an object");
    }
    Tensor t;
    t.name = require_string(entry, "name", index);
    if (t.name.empty()) {
      throw ParseError("manifest tensor " + std::to_string(index) +
                       ": empty name");
    }
    if (!seen_names.insert(t.name).second) {
      throw ParseError("duplicate tensor name: " + t.name);
    }

    if (!entry.contains("shape") || !entry["shape"].is_array() ||
        entry["shape"].empty()) {
      throw ParseError("tensor " + t.name + ": missing or empty shape");
    }
    for (const auto& dim : entry["shape"]) {
      if (!dim.is_number_integer() || dim.get<std::int64_t>() < 1) {
        throw ParseError("tensor " + t.name +
                         ": shape entries must be positive integers");
      }
      t.shape.push_back(static_cast<std::size_t>(dim.get<std::int64_t>()));
    }

    const auto dtype = require_string(entry, "dtype", index);
    if (dtype != "f32") {
      throw ParseError("tensor " + t.name + ": unsupported dtype \"" + dtype +
                       "\" (only f32)");
    }
    t.kind = tensor_kind_from_string(require_string(entry, "kind", index));
    if (t.kind == TensorKind::kMergeable2d && t.shape.size() != 2) {
      throw ParseError("tensor " + t.name +
                       ": mergeable-2d requires exactly 2 dimensions, got " +
                       std::to_string(t.shape.size()));
    }

    const auto file = require_string(entry, "file", index);
    if (file.empty() || file.find("..") != std::string::npos ||
        file.front() == '/') {
      throw ParseError("tensor " + t.name + ": unsafe blob path \"" + file +
                       "\"");
    }
    t.values = read_f32_blob(dir / file, t.element_count());
    if (!all_finite(std::span<const double>(t.values))) {
      throw ParseError("tensor " + t.name + ": payload has NaN or Inf");
    }
    tensors.push_back(std::move(t));
    ++index;
  }
  return tensors;
}

void save_tensors(std::span<const Tensor> tensors,
                  const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw StorageError("cannot create " + dir.string());

  std::set<std::string> seen_names;
  ordered_json manifest;
  manifest["version"] = 1;
  manifest["tensors"] = ordered_json::array();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const Tensor& t = tensors[i];
    if (t.name.empty()) {
      throw ArgumentError("tensor " + std::to_string(i) + ": empty name");
    }
    if (!seen_names.insert(t.name).second) {
      throw ArgumentError("duplicate tensor name: " + t.name);
    }
    if (t.shape.empty()) {
      throw ArgumentError("tensor " + t.name + ": empty shape");
    }
    if (t.kind == TensorKind::kMergeable2d && t.shape.size() != 2) {
      throw ArgumentError("tensor " + t.name +
                          ": mergeable-2d requires exactly 2 dimensions");
    }
    if (t.values.size() != t.element_count()) {
      throw ArgumentError("tensor " + t.name + ": payload holds " +
                          std::to_string(t.values.size()) +
                          " values, shape needs " +
                          std::to_string(t.element_count()));
    }
    if (!all_finite(std::span<const double>(t.values))) {
      throw ArgumentError("tensor " + t.name + ": payload has NaN or Inf");
    }

    const std::string file = blob_file_name(i, t.name);
    write_f32_blob(dir / file, t.values);

    ordered_json entry;
    entry["name"] = t.name;
    entry["shape"] = t.shape;
    entry["dtype"] = "f32";
    entry["kind"] = std::string(to_string(t.kind));
    entry["file"] = file;
    manifest["tensors"].push_back(std::move(entry));
  }

  const auto manifest_path = dir / "manifest.json";
  std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot open " + manifest_path.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw StorageError("short write: " + manifest_path.string());
}

}  // namespace

std::string_view to_string(TensorKind kind) {
  return kind == TensorKind::kMergeable2d ? "mergeable-2d" : "passthrough";
}

TensorKind tensor_kind_from_string(std::string_view s) {
  if (s == "mergeable-2d") return TensorKind::kMergeable2d;
  if (s == "passthrough") return TensorKind::kPassthrough;
  throw ParseError("unknown tensor kind \"" + std::string(s) + "\"");
}

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (std::size_t dim : shape) n *= dim;
  return n;
}

Matrix Tensor::as_matrix() const {
  if (shape.size() != 2) {
    throw ArgumentError("tensor " + name + " is not 2-D");
  }
  Matrix m(shape[0], shape[1]);
  for (std::size_t i = 0; i < values.size(); ++i) m.data()[i] = values[i];
  return m;
}

Tensor Tensor::from_matrix(std::string name, const Matrix& m,
                           TensorKind kind) {
  Tensor t;
  t.name = std::move(name);
  t.shape = {m.rows(), m.cols()};
  t.kind = kind;
  t.values.assign(m.data().begin(), m.data().end());
  return t;
}

const Tensor* Checkpoint::find(std::string_view name) const {
  for (const Tensor& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  return Checkpoint{load_tensors(dir)};
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  save_tensors(ckpt.tensors, dir);
}

TaskVector load_task_vector(const std::filesystem::path& dir) {
  return TaskVector{load_tensors(dir)};
}

void save_task_vector(const TaskVector& tv, const std::filesystem::path& dir) {
  save_tensors(tv.tensors, dir);
}

void require_congruent(std::span<const Tensor> a, std::span<const Tensor> b,
                       const char* context) {
  if (a.size() != b.size()) {
    throw CongruenceError(std::string(context) + ": tensor counts differ (" +
                          std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name) {
      throw CongruenceError(std::string(context) + ": tensor " +
                            std::to_string(i) + " names differ (" + a[i].name +
                            " vs " + b[i].name + ")");
    }
    if (a[i].shape != b[i].shape) {
      throw CongruenceError(std::string(context) + ": tensor " + a[i].name +
                            " shapes differ");
    }
    if (a[i].kind != b[i].kind) {
      throw CongruenceError(std::string(context) + ": tensor " + a[i].name +
                            " kinds differ");
    }
  }
}

TaskVector task_vector(const Checkpoint& expert, const Checkpoint& base) {
  require_congruent(expert.tensors, base.tensors, "task_vector");
  TaskVector delta;
  delta.tensors = base.tensors;  // copies names, shapes, kinds
  for (std::size_t i = 0; i < delta.tensors.size(); ++i) {
    for (std::size_t j = 0; j < delta.tensors[i].values.size(); ++j) {
      delta.tensors[i].values[j] =
          expert.tensors[i].values[j] - base.tensors[i].values[j];
    }
  }
  return delta;
}

Checkpoint apply_task_vector(const Checkpoint& base, const TaskVector& delta,
                             double alpha) {
  require_congruent(base.tensors, delta.tensors, "apply_task_vector");
  if (!std::isfinite(alpha)) {
    throw ArgumentError("apply_task_vector: alpha must be finite");
  }
  Checkpoint out;
  out.tensors = base.tensors;
  for (std::size_t i = 0; i < out.tensors.size(); ++i) {
    for (std::size_t j = 0; j < out.tensors[i].values.size(); ++j) {
      out.tensors[i].values[j] += alpha * delta.tensors[i].values[j];
    }
  }
  return out;
}

TaskVector sum_task_vectors(std::span<const TaskVector> deltas) {
  if (deltas.empty()) {
    throw ArgumentError("sum_task_vectors: need at least one task vector");
  }
  TaskVector out = deltas[0];
  for (std::size_t d = 1; d < deltas.size(); ++d) {
    require_congruent(out.tensors, deltas[d].tensors, "sum_task_vectors");
    for (std::size_t i = 0; i < out.tensors.size(); ++i) {
      for (std::size_t j = 0; j < out.tensors[i].values.size(); ++j) {
        out.tensors[i].values[j] += deltas[d].tensors[i].values[j];
      }
    }
  }
  return out;
}

}  // namespace tvmerge
