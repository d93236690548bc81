// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "tvmerge/matrix.hpp"

namespace testutil {

// Fresh directory under the system temp root, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("tvmerge_test_" + tag + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const {
    return path_ / leaf;
  }

private:
  std::filesystem::path path_;
};

inline std::vector<unsigned char> read_bytes(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
}

// True when the two directories hold the same file names with identical bytes.
inline bool dirs_byte_identical(const std::filesystem::path& a,
                                const std::filesystem::path& b) {
  std::vector<std::string> names_a, names_b;
  for (const auto& e : std::filesystem::directory_iterator(a))
    names_a.push_back(e.path().filename().string());
  for (const auto& e : std::filesystem::directory_iterator(b))
    names_b.push_back(e.path().filename().string());
  std::sort(names_a.begin(), names_a.end());
  std::sort(names_b.begin(), names_b.end());
  if (names_a != names_b) return false;
  for (const auto& name : names_a) {
    if (read_bytes(a / name) != read_bytes(b / name)) return false;
  }
  return true;
}

// Deterministic standard normal via Box-Muller on mt19937_64. The engine's
// output is pinned by the standard; std::normal_distribution's is not, and
// several tests compare bytes across runs.
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

  double uniform() {  // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline tvmerge::Matrix random_matrix(std::size_t rows, std::size_t cols,
                                     std::uint64_t seed) {
  Gauss g(seed);
  tvmerge::Matrix m(rows, cols);
  for (double& v : m.data()) v = g();
  return m;
}

inline double rel_fro_error(const tvmerge::Matrix& got,
                            const tvmerge::Matrix& want) {
  const double denom = std::max(tvmerge::frobenius_norm(want), 1e-300);
  return tvmerge::frobenius_norm(got - want) / denom;
}

// max |m^T m - I|
inline double orthonormality_error(const tvmerge::Matrix& m) {
  const tvmerge::Matrix g = tvmerge::gram(m);
  return tvmerge::max_abs_diff(g, tvmerge::Matrix::identity(m.cols()));
}

}  // namespace testutil
