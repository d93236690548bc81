// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tvmerge {

// Root of the library's exception hierarchy. Anything thrown on purpose by
// tvmerge derives from this; catching it cleanly separates our failures from
// genuine bugs (std::logic_error and friends).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Caller handed us something structurally unusable (bad flag value, empty
// input list, mismatched dimensions at an API boundary).
class ArgumentError : public Error {
public:
  using Error::Error;
};

// A manifest, config file, or tensor blob could not be parsed/validated.
class ParseError : public Error {
public:
  using Error::Error;
};

// Filesystem-level failure: missing file, short read, failed write.
class StorageError : public Error {
public:
  using Error::Error;
};

// Two tensor collections that must line up (same names, shapes, kinds, order)
// do not.
class CongruenceError : public Error {
public:
  using Error::Error;
};

// An iterative factorization (SVD / eigen QR sweep) failed to converge.
class FactorizationError : public Error {
public:
  using Error::Error;
};

// An eigensolve produced eigenvalues with imaginary parts beyond tolerance.
class SpectrumError : public Error {
public:
  using Error::Error;
};

// A matrix required to be symmetric positive definite is not (Cholesky hit a
// non-positive pivot).
class DefinitenessError : public Error {
public:
  using Error::Error;
};

// A matrix that must be inverted is too ill-conditioned to trust.
class ConditioningError : public Error {
public:
  using Error::Error;
};

// An operation on a singular-value spectrum got an all-zero spectrum.
class DegenerateSpectrumError : public Error {
public:
  using Error::Error;
};

// Non-fatal diagnostics accumulated by operations that have a defined
// degenerate path (e.g. polar factor of a rank-deficient matrix). Callers
// that do not care pass nullptr.
using WarningList = std::vector<std::string>;

inline void warn(WarningList* warnings, std::string message) {
  if (warnings != nullptr) {
    warnings->push_back(std::move(message));
  }
}

}  // namespace tvmerge
