// SPDX-License-Identifier: Apache-2.0
//
// Real eigendecomposition in the EISPACK/JAMA formulation. Exactly symmetric
// matrices go through Householder tridiagonalization (tred2) + implicit-shift
// QL (tql2); everything else through Hessenberg reduction (orthes) + the
// Martin/Wilkinson shifted-QR sweep (hqr2) with eigenvector back-substitution.
// The sweep produces complex-conjugate eigenvalue pairs for genuinely complex
// spectra; eig_real only accepts inputs whose spectrum is real up to the
// caller's tolerance and reports the worst imaginary residual it saw.
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "tvmerge/linalg.hpp"

namespace tvmerge {

namespace {

struct EigWork {
  int n = 0;
  Matrix v;               // eigenvector accumulator
  Matrix h;               // Hessenberg / Schur working storage
  std::vector<double> d;  // real parts
  std::vector<double> e;  // imaginary parts / subdiagonal
  std::vector<double> ort;
  double cdivr = 0.0, cdivi = 0.0;

  void cdiv(double xr, double xi, double yr, double yi) {
    double r, d_;
    if (std::abs(yr) > std::abs(yi)) {
      r = yi / yr;
      d_ = yr + r * yi;
      cdivr = (xr + r * xi) / d_;
      cdivi = (xi - r * xr) / d_;
    } else {
      r = yr / yi;
      d_ = yi + r * yr;
      cdivr = (r * xr + xi) / d_;
      cdivi = (r * xi - xr) / d_;
    }
  }
};

// Householder reduction of a symmetric matrix (preloaded in w.v) to
// tridiagonal form.
void tred2(EigWork& w) {
  const int n = w.n;
  auto& v = w.v;
  auto& d = w.d;
  auto& e = w.e;

  for (int j = 0; j < n; ++j) d[j] = v(n - 1, j);

  for (int i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (int k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (int j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (int k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h = h - f * g;
      d[i - 1] = f - g;
      for (int j = 0; j < i; ++j) e[j] = 0.0;

      for (int j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (int k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (int j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (int j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (int j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (int k = j; k <= i - 1; ++k) {
          v(k, j) -= (f * e[k] + g * d[k]);
        }
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (int i = 0; i < n - 1; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (int k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (int j = 0; j <= i; ++j) {
        double g = 0.0;
        for (int k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (int k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (int k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (int j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  w.e[0] = 0.0;
}

// Implicit-shift QL on the tridiagonal form; eigenvalues land in w.d
// ascending with eigenvectors accumulated in w.v.
void tql2(EigWork& w) {
  const int n = w.n;
  auto& v = w.v;
  auto& d = w.d;
  auto& e = w.e;

  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::ldexp(1.0, -52);
  for (int l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    int m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }

    if (m > l) {
      int iter = 0;
      do {
        if (++iter > 60) {
          throw FactorizationError("eig_real: QL sweep failed to converge");
        }
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (int i = l + 2; i < n; ++i) d[i] -= h;
        f = f + h;

        p = d[m];
        double c = 1.0;
        double c2 = c;
        double c3 = c;
        const double el1 = e[l + 1];
        double s = 0.0;
        double s2 = 0.0;
        for (int i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);

          for (int k = 0; k < n; ++k) {
            h = v(k, i + 1);
            v(k, i + 1) = s * v(k, i) + c * h;
            v(k, i) = c * v(k, i) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] = d[l] + f;
    e[l] = 0.0;
  }
}

// Householder reduction to upper Hessenberg form with accumulated transform.
void orthes(EigWork& w) {
  const int n = w.n;
  auto& h = w.h;
  auto& v = w.v;
  auto& ort = w.ort;

  const int low = 0;
  const int high = n - 1;

  for (int m = low + 1; m <= high - 1; ++m) {
    double scale = 0.0;
    for (int i = m; i <= high; ++i) scale += std::abs(h(i, m - 1));
    if (scale != 0.0) {
      double hsum = 0.0;
      for (int i = high; i >= m; --i) {
        ort[i] = h(i, m - 1) / scale;
        hsum += ort[i] * ort[i];
      }
      double g = std::sqrt(hsum);
      if (ort[m] > 0) g = -g;
      hsum = hsum - ort[m] * g;
      ort[m] = ort[m] - g;

      for (int j = m; j < n; ++j) {
        double f = 0.0;
        for (int i = high; i >= m; --i) f += ort[i] * h(i, j);
        f = f / hsum;
        for (int i = m; i <= high; ++i) h(i, j) -= f * ort[i];
      }
      for (int i = 0; i <= high; ++i) {
        double f = 0.0;
        for (int j = high; j >= m; --j) f += ort[j] * h(i, j);
        f = f / hsum;
        for (int j = m; j <= high; ++j) h(i, j) -= f * ort[j];
      }
      ort[m] = scale * ort[m];
      h(m, m - 1) = scale * g;
    }
  }

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) v(i, j) = (i == j ? 1.0 : 0.0);

  for (int m = high - 1; m >= low + 1; --m) {
    if (h(m, m - 1) != 0.0) {
      for (int i = m + 1; i <= high; ++i) ort[i] = h(i, m - 1);
      for (int j = m; j <= high; ++j) {
        double g = 0.0;
        for (int i = m; i <= high; ++i) g += ort[i] * v(i, j);
        // Double division avoids possible underflow.
        g = (g / ort[m]) / h(m, m - 1);
        for (int i = m; i <= high; ++i) v(i, j) += g * ort[i];
      }
    }
  }
}

// Shifted-QR reduction of the Hessenberg form to real Schur form, followed by
// back-substitution for the eigenvectors of the original matrix.
void hqr2(EigWork& w) {
  const int nn = w.n;
  auto& h = w.h;
  auto& v = w.v;
  auto& d = w.d;
  auto& e = w.e;

  int n = nn - 1;
  const int low = 0;
  const int high = nn - 1;
  const double eps = std::ldexp(1.0, -52);
  double exshift = 0.0;
  double p = 0, q = 0, r = 0, s = 0, z = 0, t, ww, x, y;

  double norm = 0.0;
  for (int i = 0; i < nn; ++i) {
    for (int j = std::max(i - 1, 0); j < nn; ++j) {
      norm = norm + std::abs(h(i, j));
    }
  }

  int iter = 0;
  int total_iter = 0;
  while (n >= low) {
    if (++total_iter > 60 * nn) {
      throw FactorizationError("eig_real: QR sweep failed to converge");
    }

    // Look for a single small subdiagonal element.
    int l = n;
    while (l > low) {
      s = std::abs(h(l - 1, l - 1)) + std::abs(h(l, l));
      if (s == 0.0) s = norm;
      if (std::abs(h(l, l - 1)) < eps * s) break;
      --l;
    }

    if (l == n) {
      // One root found.
      h(n, n) = h(n, n) + exshift;
      d[n] = h(n, n);
      e[n] = 0.0;
      --n;
      iter = 0;
    } else if (l == n - 1) {
      // Two roots found.
      ww = h(n, n - 1) * h(n - 1, n);
      p = (h(n - 1, n - 1) - h(n, n)) / 2.0;
      q = p * p + ww;
      z = std::sqrt(std::abs(q));
      h(n, n) = h(n, n) + exshift;
      h(n - 1, n - 1) = h(n - 1, n - 1) + exshift;
      x = h(n, n);

      if (q >= 0) {
        // Real pair.
        z = (p >= 0) ? p + z : p - z;
        d[n - 1] = x + z;
        d[n] = d[n - 1];
        if (z != 0.0) d[n] = x - ww / z;
        e[n - 1] = 0.0;
        e[n] = 0.0;
        x = h(n, n - 1);
        s = std::abs(x) + std::abs(z);
        p = x / s;
        q = z / s;
        r = std::sqrt(p * p + q * q);
        p = p / r;
        q = q / r;

        for (int j = n - 1; j < nn; ++j) {
          z = h(n - 1, j);
          h(n - 1, j) = q * z + p * h(n, j);
          h(n, j) = q * h(n, j) - p * z;
        }
        for (int i = 0; i <= n; ++i) {
          z = h(i, n - 1);
          h(i, n - 1) = q * z + p * h(i, n);
          h(i, n) = q * h(i, n) - p * z;
        }
        for (int i = low; i <= high; ++i) {
          z = v(i, n - 1);
          v(i, n - 1) = q * z + p * v(i, n);
          v(i, n) = q * v(i, n) - p * z;
        }
      } else {
        // Complex pair.
        d[n - 1] = x + p;
        d[n] = x + p;
        e[n - 1] = z;
        e[n] = -z;
      }
      n = n - 2;
      iter = 0;
    } else {
      // No convergence yet: form a shift.
      x = h(n, n);
      y = 0.0;
      ww = 0.0;
      if (l < n) {
        y = h(n - 1, n - 1);
        ww = h(n, n - 1) * h(n - 1, n);
      }

      // Wilkinson's original ad hoc shift.
      if (iter == 10) {
        exshift += x;
        for (int i = low; i <= n; ++i) h(i, i) -= x;
        s = std::abs(h(n, n - 1)) + std::abs(h(n - 1, n - 2));
        x = y = 0.75 * s;
        ww = -0.4375 * s * s;
      }

      // MATLAB's ad hoc shift.
      if (iter == 30) {
        s = (y - x) / 2.0;
        s = s * s + ww;
        if (s > 0) {
          s = std::sqrt(s);
          if (y < x) s = -s;
          s = x - ww / ((y - x) / 2.0 + s);
          for (int i = low; i <= n; ++i) h(i, i) -= s;
          exshift += s;
          x = y = ww = 0.964;
        }
      }

      iter = iter + 1;

      // Look for two consecutive small subdiagonal elements.
      int m = n - 2;
      while (m >= l) {
        z = h(m, m);
        r = x - z;
        s = y - z;
        p = (r * s - ww) / h(m + 1, m) + h(m, m + 1);
        q = h(m + 1, m + 1) - z - r - s;
        r = h(m + 2, m + 1);
        s = std::abs(p) + std::abs(q) + std::abs(r);
        p = p / s;
        q = q / s;
        r = r / s;
        if (m == l) break;
        if (std::abs(h(m, m - 1)) * (std::abs(q) + std::abs(r)) <
            eps * (std::abs(p) * (std::abs(h(m - 1, m - 1)) + std::abs(z) +
                                  std::abs(h(m + 1, m + 1))))) {
          break;
        }
        --m;
      }

      for (int i = m + 2; i <= n; ++i) {
        h(i, i - 2) = 0.0;
        if (i > m + 2) h(i, i - 3) = 0.0;
      }

      // Double QR step over rows l..n, columns m..n.
      for (int k = m; k <= n - 1; ++k) {
        const bool notlast = (k != n - 1);
        if (k != m) {
          p = h(k, k - 1);
          q = h(k + 1, k - 1);
          r = notlast ? h(k + 2, k - 1) : 0.0;
          x = std::abs(p) + std::abs(q) + std::abs(r);
          if (x != 0.0) {
            p = p / x;
            q = q / x;
            r = r / x;
          }
        }
        if (x == 0.0) break;
        s = std::sqrt(p * p + q * q + r * r);
        if (p < 0) s = -s;
        if (s != 0) {
          if (k != m) {
            h(k, k - 1) = -s * x;
          } else if (l != m) {
            h(k, k - 1) = -h(k, k - 1);
          }
          p = p + s;
          x = p / s;
          y = q / s;
          z = r / s;
          q = q / p;
          r = r / p;

          for (int j = k; j < nn; ++j) {
            p = h(k, j) + q * h(k + 1, j);
            if (notlast) {
              p = p + r * h(k + 2, j);
              h(k + 2, j) = h(k + 2, j) - p * z;
            }
            h(k, j) = h(k, j) - p * x;
            h(k + 1, j) = h(k + 1, j) - p * y;
          }
          for (int i = 0; i <= std::min(n, k + 3); ++i) {
            p = x * h(i, k) + y * h(i, k + 1);
            if (notlast) {
              p = p + z * h(i, k + 2);
              h(i, k + 2) = h(i, k + 2) - p * r;
            }
            h(i, k) = h(i, k) - p;
            h(i, k + 1) = h(i, k + 1) - p * q;
          }
          for (int i = low; i <= high; ++i) {
            p = x * v(i, k) + y * v(i, k + 1);
            if (notlast) {
              p = p + z * v(i, k + 2);
              v(i, k + 2) = v(i, k + 2) - p * r;
            }
            v(i, k) = v(i, k) - p;
            v(i, k + 1) = v(i, k + 1) - p * q;
          }
        }
      }
    }
  }

  // Back-substitution: eigenvectors of the triangular form.
  if (norm == 0.0) return;

  for (n = nn - 1; n >= 0; --n) {
    p = d[n];
    q = e[n];

    if (q == 0) {
      // Real eigenvector.
      int l = n;
      h(n, n) = 1.0;
      for (int i = n - 1; i >= 0; --i) {
        ww = h(i, i) - p;
        r = 0.0;
        for (int j = l; j <= n; ++j) r = r + h(i, j) * h(j, n);
        if (e[i] < 0.0) {
          z = ww;
          s = r;
        } else {
          l = i;
          if (e[i] == 0.0) {
            h(i, n) = (ww != 0.0) ? -r / ww : -r / (eps * norm);
          } else {
            // Solve the real 2x2 block.
            x = h(i, i + 1);
            y = h(i + 1, i);
            q = (d[i] - p) * (d[i] - p) + e[i] * e[i];
            t = (x * s - z * r) / q;
            h(i, n) = t;
            if (std::abs(x) > std::abs(z)) {
              h(i + 1, n) = (-r - ww * t) / x;
            } else {
              h(i + 1, n) = (-s - y * t) / z;
            }
          }

          // Overflow control.
          t = std::abs(h(i, n));
          if ((eps * t) * t > 1) {
            for (int j = i; j <= n; ++j) h(j, n) = h(j, n) / t;
          }
        }
      }
    } else if (q < 0) {
      // Complex eigenvector (pair occupies columns n-1, n as Re/Im).
      int l = n - 1;

      if (std::abs(h(n, n - 1)) > std::abs(h(n - 1, n))) {
        h(n - 1, n - 1) = q / h(n, n - 1);
        h(n - 1, n) = -(h(n, n) - p) / h(n, n - 1);
      } else {
        w.cdiv(0.0, -h(n - 1, n), h(n - 1, n - 1) - p, q);
        h(n - 1, n - 1) = w.cdivr;
        h(n - 1, n) = w.cdivi;
      }
      h(n, n - 1) = 0.0;
      h(n, n) = 1.0;
      for (int i = n - 2; i >= 0; --i) {
        double ra = 0.0, sa = 0.0, vr, vi;
        for (int j = l; j <= n; ++j) {
          ra = ra + h(i, j) * h(j, n - 1);
          sa = sa + h(i, j) * h(j, n);
        }
        ww = h(i, i) - p;

        if (e[i] < 0.0) {
          z = ww;
          r = ra;
          s = sa;
        } else {
          l = i;
          if (e[i] == 0) {
            w.cdiv(-ra, -sa, ww, q);
            h(i, n - 1) = w.cdivr;
            h(i, n) = w.cdivi;
          } else {
            x = h(i, i + 1);
            y = h(i + 1, i);
            vr = (d[i] - p) * (d[i] - p) + e[i] * e[i] - q * q;
            vi = (d[i] - p) * 2.0 * q;
            if (vr == 0.0 && vi == 0.0) {
              vr = eps * norm *
                   (std::abs(ww) + std::abs(q) + std::abs(x) + std::abs(y) +
                    std::abs(z));
            }
            w.cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
            h(i, n - 1) = w.cdivr;
            h(i, n) = w.cdivi;
            if (std::abs(x) > (std::abs(z) + std::abs(q))) {
              h(i + 1, n - 1) = (-ra - ww * h(i, n - 1) + q * h(i, n)) / x;
              h(i + 1, n) = (-sa - ww * h(i, n) - q * h(i, n - 1)) / x;
            } else {
              w.cdiv(-r - y * h(i, n - 1), -s - y * h(i, n), z, q);
              h(i + 1, n - 1) = w.cdivr;
              h(i + 1, n) = w.cdivi;
            }
          }

          t = std::max(std::abs(h(i, n - 1)), std::abs(h(i, n)));
          if ((eps * t) * t > 1) {
            for (int j = i; j <= n; ++j) {
              h(j, n - 1) = h(j, n - 1) / t;
              h(j, n) = h(j, n) / t;
            }
          }
        }
      }
    }
  }

  // Back-transform to eigenvectors of the original matrix.
  for (int j = nn - 1; j >= low; --j) {
    for (int i = low; i <= high; ++i) {
      z = 0.0;
      for (int k = low; k <= std::min(j, high); ++k) {
        z = z + v(i, k) * h(k, j);
      }
      v(i, j) = z;
    }
  }
}

bool exactly_symmetric(const Matrix& a) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (a(i, j) != a(j, i)) return false;
  return true;
}

}  // namespace

EigFactors eig_real(const Matrix& s_in, double tol_imag) {
  if (s_in.rows() != s_in.cols() || s_in.empty()) {
    throw ArgumentError("eig_real: matrix must be square and non-empty");
  }
  if (!all_finite(s_in)) throw ArgumentError("eig_real: non-finite entries");

  const int n = static_cast<int>(s_in.rows());
  EigWork w;
  w.n = n;
  w.d.assign(n, 0.0);
  w.e.assign(n, 0.0);

  if (exactly_symmetric(s_in)) {
    w.v = s_in;
    tred2(w);
    tql2(w);
  } else {
    w.h = s_in;
    w.v = Matrix(n, n);
    w.ort.assign(n, 0.0);
    orthes(w);
    hqr2(w);
  }

  // Relative imaginary residual over the whole spectrum.
  double scale = 0.0;
  double max_imag = 0.0;
  for (int i = 0; i < n; ++i) {
    scale = std::max(scale, std::hypot(w.d[i], w.e[i]));
    max_imag = std::max(max_imag, std::abs(w.e[i]));
  }
  const double residual = max_imag / std::max(1.0, scale);
  if (residual > tol_imag) {
    throw SpectrumError(
        "eig_real: spectrum has imaginary parts beyond tolerance (residual " +
        std::to_string(residual) + ")");
  }

  // Sort descending by real part, stable in the original order.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return w.d[a] > w.d[b]; });

  EigFactors out;
  out.max_imag_residual = residual;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (int j = 0; j < n; ++j) {
    const int src = order[j];
    out.eigenvalues[j] = w.d[src];
    // Normalize to unit length with the largest-magnitude entry positive.
    double nrm = 0.0;
    for (int i = 0; i < n; ++i) nrm += w.v(i, src) * w.v(i, src);
    nrm = std::sqrt(nrm);
    int imax = 0;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
      const double a = std::abs(w.v(i, src));
      if (a > best) {
        best = a;
        imax = i;
      }
    }
    const double flip = (w.v(imax, src) < 0.0) ? -1.0 : 1.0;
    for (int i = 0; i < n; ++i) {
      out.eigenvectors(i, j) = (nrm > 0.0) ? flip * w.v(i, src) / nrm : 0.0;
    }
  }
  return out;
}

}  // namespace tvmerge
