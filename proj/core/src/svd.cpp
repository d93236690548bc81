// SPDX-License-Identifier: Apache-2.0
//
// Thin SVD via Householder bidiagonalization + implicit-shift QR, the classic
// Golub-Reinsch scheme in its JAMA/EISPACK formulation. Double precision
// throughout, no pivoting, fully deterministic.
#include <algorithm>
#include <cmath>
#include <cstddef>

#include "tvmerge/linalg.hpp"

namespace tvmerge {

namespace {

// Core decomposition for m >= n: a = u * diag(s) * v^T with u m-by-n and
// v n-by-n. The caller handles the wide case by transposing.
struct TallSvd {
  Matrix u;
  std::vector<double> s;
  Matrix v;
};

TallSvd svd_tall(const Matrix& input) {
  const int m = static_cast<int>(input.rows());
  const int n = static_cast<int>(input.cols());
  Matrix a = input;  // working copy, overwritten by Householder vectors

  const int nu = n;
  std::vector<double> s(n, 0.0);
  std::vector<double> e(n, 0.0);
  std::vector<double> work(m, 0.0);
  Matrix u(m, nu, 0.0);
  Matrix v(n, n, 0.0);

  // Reduce a to bidiagonal form, storing the diagonal in s and the
  // superdiagonal in e.
  const int nct = std::min(m - 1, n);
  const int nrt = std::max(0, std::min(n - 2, m));
  for (int k = 0; k < std::max(nct, nrt); ++k) {
    if (k < nct) {
      // Householder for column k: norm of a[k..m-1][k], sign matched to the
      // pivot so the reflection is stable.
      s[k] = 0.0;
      for (int i = k; i < m; ++i) s[k] = std::hypot(s[k], a(i, k));
      if (s[k] != 0.0) {
        if (a(k, k) < 0.0) s[k] = -s[k];
        for (int i = k; i < m; ++i) a(i, k) /= s[k];
        a(k, k) += 1.0;
      }
      s[k] = -s[k];
    }
    for (int j = k + 1; j < n; ++j) {
      if ((k < nct) && (s[k] != 0.0)) {
        double t = 0.0;
        for (int i = k; i < m; ++i) t += a(i, k) * a(i, j);
        t = -t / a(k, k);
        for (int i = k; i < m; ++i) a(i, j) += t * a(i, k);
      }
      e[j] = a(k, j);
    }
    if (k < nct) {
      for (int i = k; i < m; ++i) u(i, k) = a(i, k);
    }
    if (k < nrt) {
      // Householder for row k, zeroing a[k][k+2..n-1].
      e[k] = 0.0;
      for (int i = k + 1; i < n; ++i) e[k] = std::hypot(e[k], e[i]);
      if (e[k] != 0.0) {
        if (e[k + 1] < 0.0) e[k] = -e[k];
        for (int i = k + 1; i < n; ++i) e[i] /= e[k];
        e[k + 1] += 1.0;
      }
      e[k] = -e[k];
      if ((k + 1 < m) && (e[k] != 0.0)) {
        for (int i = k + 1; i < m; ++i) work[i] = 0.0;
        for (int j = k + 1; j < n; ++j) {
          for (int i = k + 1; i < m; ++i) work[i] += e[j] * a(i, j);
        }
        for (int j = k + 1; j < n; ++j) {
          const double t = -e[j] / e[k + 1];
          for (int i = k + 1; i < m; ++i) a(i, j) += t * work[i];
        }
      }
      for (int i = k + 1; i < n; ++i) v(i, k) = e[i];
    }
  }

  // Set up the final bidiagonal matrix of order p.
  int p = std::min(n, m + 1);
  if (nct < n) s[nct] = a(nct, nct);
  if (m < p) s[p - 1] = 0.0;
  if (nrt + 1 < p) e[nrt] = a(nrt, p - 1);
  e[p - 1] = 0.0;

  // Accumulate the left transformations into u.
  for (int j = nct; j < nu; ++j) {
    for (int i = 0; i < m; ++i) u(i, j) = 0.0;
    u(j, j) = 1.0;
  }
  for (int k = nct - 1; k >= 0; --k) {
    if (s[k] != 0.0) {
      for (int j = k + 1; j < nu; ++j) {
        double t = 0.0;
        for (int i = k; i < m; ++i) t += u(i, k) * u(i, j);
        t = -t / u(k, k);
        for (int i = k; i < m; ++i) u(i, j) += t * u(i, k);
      }
      for (int i = k; i < m; ++i) u(i, k) = -u(i, k);
      u(k, k) = 1.0 + u(k, k);
      for (int i = 0; i < k - 1; ++i) u(i, k) = 0.0;
    } else {
      for (int i = 0; i < m; ++i) u(i, k) = 0.0;
      u(k, k) = 1.0;
    }
  }

  // Accumulate the right transformations into v.
  for (int k = n - 1; k >= 0; --k) {
    if ((k < nrt) && (e[k] != 0.0)) {
      for (int j = k + 1; j < nu; ++j) {
        double t = 0.0;
        for (int i = k + 1; i < n; ++i) t += v(i, k) * v(i, j);
        t = -t / v(k + 1, k);
        for (int i = k + 1; i < n; ++i) v(i, j) += t * v(i, k);
      }
    }
    for (int i = 0; i < n; ++i) v(i, k) = 0.0;
    v(k, k) = 1.0;
  }

  // Main iteration loop: chase the bidiagonal down to diagonal form.
  const int pp_initial = p - 1;
  int iter = 0;
  const double eps = std::ldexp(1.0, -52);
  const double tiny = std::ldexp(1.0, -966);
  while (p > 0) {
    if (iter > 200) {
      throw FactorizationError("svd_thin: QR sweep failed to converge");
    }
    int k;
    int kase;

    // Negligible superdiagonal element => the problem splits at k.
    for (k = p - 2; k >= -1; --k) {
      if (k == -1) break;
      if (std::abs(e[k]) <= tiny + eps * (std::abs(s[k]) + std::abs(s[k + 1]))) {
        e[k] = 0.0;
        break;
      }
    }
    if (k == p - 2) {
      kase = 4;
    } else {
      int ks;
      for (ks = p - 1; ks >= k; --ks) {
        if (ks == k) break;
        const double t = (ks != p ? std::abs(e[ks]) : 0.0) +
                         (ks != k + 1 ? std::abs(e[ks - 1]) : 0.0);
        if (std::abs(s[ks]) <= tiny + eps * t) {
          s[ks] = 0.0;
          break;
        }
      }
      if (ks == k) {
        kase = 3;
      } else if (ks == p - 1) {
        kase = 1;
      } else {
        kase = 2;
        k = ks;
      }
    }
    ++k;

    switch (kase) {
      case 1: {  // Deflate negligible s[p-1].
        double f = e[p - 2];
        e[p - 2] = 0.0;
        for (int j = p - 2; j >= k; --j) {
          double t = std::hypot(s[j], f);
          const double cs = s[j] / t;
          const double sn = f / t;
          s[j] = t;
          if (j != k) {
            f = -sn * e[j - 1];
            e[j - 1] = cs * e[j - 1];
          }
          for (int i = 0; i < n; ++i) {
            t = cs * v(i, j) + sn * v(i, p - 1);
            v(i, p - 1) = -sn * v(i, j) + cs * v(i, p - 1);
            v(i, j) = t;
          }
        }
        break;
      }
      case 2: {  // Split at negligible s[k-1].
        double f = e[k - 1];
        e[k - 1] = 0.0;
        for (int j = k; j < p; ++j) {
          double t = std::hypot(s[j], f);
          const double cs = s[j] / t;
          const double sn = f / t;
          s[j] = t;
          f = -sn * e[j];
          e[j] = cs * e[j];
          for (int i = 0; i < m; ++i) {
            t = cs * u(i, j) + sn * u(i, k - 1);
            u(i, k - 1) = -sn * u(i, j) + cs * u(i, k - 1);
            u(i, j) = t;
          }
        }
        break;
      }
      case 3: {  // One implicit-shift QR step.
        const double scale = std::max(
            {std::abs(s[p - 1]), std::abs(s[p - 2]), std::abs(e[p - 2]),
             std::abs(s[k]), std::abs(e[k])});
        const double sp = s[p - 1] / scale;
        const double spm1 = s[p - 2] / scale;
        const double epm1 = e[p - 2] / scale;
        const double sk = s[k] / scale;
        const double ek = e[k] / scale;
        const double b = ((spm1 + sp) * (spm1 - sp) + epm1 * epm1) / 2.0;
        const double c = (sp * epm1) * (sp * epm1);
        double shift = 0.0;
        if ((b != 0.0) || (c != 0.0)) {
          shift = std::sqrt(b * b + c);
          if (b < 0.0) shift = -shift;
          shift = c / (b + shift);
        }
        double f = (sk + sp) * (sk - sp) + shift;
        double g = sk * ek;
        for (int j = k; j < p - 1; ++j) {
          double t = std::hypot(f, g);
          double cs = f / t;
          double sn = g / t;
          if (j != k) e[j - 1] = t;
          f = cs * s[j] + sn * e[j];
          e[j] = cs * e[j] - sn * s[j];
          g = sn * s[j + 1];
          s[j + 1] = cs * s[j + 1];
          for (int i = 0; i < n; ++i) {
            t = cs * v(i, j) + sn * v(i, j + 1);
            v(i, j + 1) = -sn * v(i, j) + cs * v(i, j + 1);
            v(i, j) = t;
          }
          t = std::hypot(f, g);
          cs = f / t;
          sn = g / t;
          s[j] = t;
          f = cs * e[j] + sn * s[j + 1];
          s[j + 1] = -sn * e[j] + cs * s[j + 1];
          g = sn * e[j + 1];
          e[j + 1] = cs * e[j + 1];
          if (j < m - 1) {
            for (int i = 0; i < m; ++i) {
              t = cs * u(i, j) + sn * u(i, j + 1);
              u(i, j + 1) = -sn * u(i, j) + cs * u(i, j + 1);
              u(i, j) = t;
            }
          }
        }
        e[p - 2] = f;
        ++iter;
        break;
      }
      case 4: {  // s[k] converged: fix sign, restore descending order.
        if (s[k] <= 0.0) {
          s[k] = (s[k] < 0.0 ? -s[k] : 0.0);
          for (int i = 0; i <= pp_initial; ++i) v(i, k) = -v(i, k);
        }
        while (k < pp_initial) {
          if (s[k] >= s[k + 1]) break;
          std::swap(s[k], s[k + 1]);
          if (k < n - 1) {
            for (int i = 0; i < n; ++i) std::swap(v(i, k), v(i, k + 1));
          }
          if (k < m - 1) {
            for (int i = 0; i < m; ++i) std::swap(u(i, k), u(i, k + 1));
          }
          ++k;
        }
        iter = 0;
        --p;
        break;
      }
    }
  }

  s.resize(n);
  return TallSvd{std::move(u), std::move(s), std::move(v)};
}

bool column_wants_flip(const Matrix& m, std::size_t j) {
  std::size_t imax = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double a = std::abs(m(i, j));
    if (a > best) {
      best = a;
      imax = i;
    }
  }
  return m(imax, j) < 0.0;
}

void flip_column(Matrix& m, std::size_t j) {
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) = -m(i, j);
}

// Make each u column's largest-magnitude entry (first index on ties)
// positive; the matching v column flips too, keeping u*s*v^T unchanged. For a
// zero singular value the two columns are independent of each other, so each
// gets its own sign fix — that pins down otherwise-arbitrary factors (the
// polar of diag(1, 0) comes out as +identity, not diag(1, -1)).
void apply_sign_convention(Matrix& u, Matrix& v,
                           const std::vector<double>& s) {
  for (std::size_t j = 0; j < u.cols(); ++j) {
    if (j < s.size() && s[j] == 0.0) {
      if (column_wants_flip(u, j)) flip_column(u, j);
      if (column_wants_flip(v, j)) flip_column(v, j);
    } else if (column_wants_flip(u, j)) {
      flip_column(u, j);
      flip_column(v, j);
    }
  }
}

}  // namespace

SvdFactors svd_thin(const Matrix& a) {
  if (a.empty()) throw ArgumentError("svd_thin: empty matrix");
  if (!all_finite(a)) throw ArgumentError("svd_thin: non-finite entries");

  const bool wide = a.rows() < a.cols();
  TallSvd core = wide ? svd_tall(transposed(a)) : svd_tall(a);
  // For a wide input we decomposed a^T = u s v^T, so a = v s u^T: the roles
  // of the factors swap.
  Matrix& left = wide ? core.v : core.u;
  Matrix& right = wide ? core.u : core.v;
  apply_sign_convention(left, right, core.s);

  SvdFactors out;
  out.u = std::move(left);
  out.singular_values = std::move(core.s);
  out.vt = transposed(right);
  return out;
}

Matrix polar_orthonormalize(const Matrix& m, WarningList* warnings) {
  if (m.rows() < m.cols()) {
    throw ArgumentError("polar_orthonormalize: need rows >= cols");
  }
  SvdFactors f = svd_thin(m);
  const double top = f.singular_values.empty() ? 0.0 : f.singular_values.front();
  const double floor = 1e-12 * std::max(top, 1e-300);
  for (double sv : f.singular_values) {
    if (sv <= floor) {
      warn(warnings,
           "polar_orthonormalize: rank-deficient input, polar factor is not "
           "unique (degenerate)");
      break;
    }
  }
  return f.u * f.vt;
}

Matrix generalized_procrustes(std::span<const Matrix> mats,
                              WarningList* warnings) {
  if (mats.empty()) {
    throw ArgumentError("generalized_procrustes: empty matrix list");
  }
  Matrix mean = mats[0];
  for (std::size_t i = 1; i < mats.size(); ++i) {
    if (mats[i].rows() != mean.rows() || mats[i].cols() != mean.cols()) {
      throw ArgumentError("generalized_procrustes: shape mismatch");
    }
    mean = mean + mats[i];
  }
  mean = (1.0 / static_cast<double>(mats.size())) * mean;
  return polar_orthonormalize(mean, warnings);
}

}  // namespace tvmerge
