#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "ouc/error.hpp"
#include "ouc/matrix.hpp"

namespace ouc {

namespace detail {

inline void require_square(const auto& m, const char* what) {
  if (!m.square()) {
    throw Error(ErrorKind::Dimension, std::string(what) + " needs a square matrix, got " + m.shape());
  }
}

[[nodiscard]] inline double magnitude(double v) { return std::abs(v); }
[[nodiscard]] inline double magnitude(const Complex& v) { return std::abs(v); }

}  // namespace detail

/// LU factorization with partial pivoting, reusable across right-hand sides.
template <typename T>
class LuFactor {
 public:
  /// `tiny_pivot_fallback` replaces (near-)zero pivots instead of failing;
  /// inverse iteration relies on this for exactly singular shifted systems.
  /// `reference_scale` sets the replacement pivot size when the matrix itself is (nearly) zero.
  explicit LuFactor(BasicMatrix<T> a, bool tiny_pivot_fallback = false, double reference_scale = 0.0)
      : lu_(std::move(a)), perm_(lu_.rows()) {
    detail::require_square(lu_, "LU factorization");
    const std::size_t n = lu_.rows();
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    double scale = 0.0;
    for (const T& v : lu_.data()) scale = std::max(scale, detail::magnitude(v));
    const double tiny = std::numeric_limits<double>::epsilon() * std::max({scale, reference_scale, 1e-300});
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      double best = detail::magnitude(lu_(k, k));
      for (std::size_t r = k + 1; r < n; ++r) {
        const double v = detail::magnitude(lu_(r, k));
        if (v > best) {
          best = v;
          piv = r;
        }
      }
      if (best <= tiny * static_cast<double>(n)) {
        if (!tiny_pivot_fallback) {
          throw Error(ErrorKind::NumericalFailure,
                      "singular matrix in LU factorization at column " + std::to_string(k));
        }
        lu_(piv, k) = T{tiny};
        best = tiny;
      }
      if (piv != k) {
        for (std::size_t c = 0; c < n; ++c) std::swap(lu_(k, c), lu_(piv, c));
        std::swap(perm_[k], perm_[piv]);
      }
      const T pivot = lu_(k, k);
      for (std::size_t r = k + 1; r < n; ++r) {
        const T f = lu_(r, k) / pivot;
        lu_(r, k) = f;
        if (f == T{}) continue;
        for (std::size_t c = k + 1; c < n; ++c) lu_(r, c) -= f * lu_(k, c);
      }
    }
  }

  [[nodiscard]] std::vector<T> solve(std::span<const T> b) const {
    const std::size_t n = lu_.rows();
    if (b.size() != n) throw Error(ErrorKind::Dimension, "LU solve right-hand side size");
    std::vector<T> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < i; ++k) x[i] -= lu_(i, k) * x[k];
    for (std::size_t ii = n; ii-- > 0;) {
      for (std::size_t k = ii + 1; k < n; ++k) x[ii] -= lu_(ii, k) * x[k];
      x[ii] /= lu_(ii, ii);
    }
    return x;
  }

  [[nodiscard]] BasicMatrix<T> solve(const BasicMatrix<T>& b) const {
    BasicMatrix<T> x(b.rows(), b.cols());
    for (std::size_t c = 0; c < b.cols(); ++c) {
      const auto col = solve(std::span<const T>(b.col(c)));
      for (std::size_t r = 0; r < b.rows(); ++r) x(r, c) = col[r];
    }
    return x;
  }

 private:
  BasicMatrix<T> lu_;
  std::vector<std::size_t> perm_;
};

[[nodiscard]] inline Vector solve(const Matrix& a, std::span<const double> b) {
  return LuFactor<double>(a).solve(b);
}

[[nodiscard]] inline Matrix solve(const Matrix& a, const Matrix& b) {
  return LuFactor<double>(a).solve(b);
}

[[nodiscard]] inline Matrix inverse(const Matrix& a) {
  detail::require_square(a, "inverse");
  return LuFactor<double>(a).solve(Matrix::identity(a.rows()));
}

// ---------------------------------------------------------------------------
// Matrix exponential: scaling and squaring with a diagonal Pade approximant.

namespace detail {

/// Coefficients of the [m/m] Pade numerator of exp, c_0 = 1.
[[nodiscard]] inline std::vector<double> pade_coefficients(int m) {
  std::vector<double> c(static_cast<std::size_t>(m) + 1);
  c[0] = 1.0;
  for (int j = 1; j <= m; ++j) {
    c[static_cast<std::size_t>(j)] =
        c[static_cast<std::size_t>(j - 1)] * static_cast<double>(m - j + 1) /
        (static_cast<double>(j) * static_cast<double>(2 * m - j + 1));
  }
  return c;
}

}  // namespace detail

/// e^{M t}. Pade degree and squaring count follow the 1-norm of M t using the
/// backward-error thresholds for degrees 3, 5, 7, 9 and 13.
[[nodiscard]] inline Matrix mat_exp(const Matrix& m, double t) {
  detail::require_square(m, "mat_exp");
  if (!std::isfinite(t)) throw Error(ErrorKind::Domain, "mat_exp time must be finite");
  if (!all_finite(m)) throw Error(ErrorKind::Domain, "mat_exp matrix has non-finite entries");
  const std::size_t n = m.rows();
  if (n == 0) return {};

  Matrix x = m * t;
  const double nrm = one_norm(x);

  constexpr std::pair<int, double> kThetas[] = {
      {3, 1.495585217958292e-2}, {5, 2.539398330063230e-1}, {7, 9.504178996162932e-1},
      {9, 2.097847961257068e0},  {13, 5.371920351148152e0}};
  int degree = 13;
  int squarings = 0;
  for (const auto& [d, theta] : kThetas) {
    if (nrm <= theta) {
      degree = d;
      break;
    }
  }
  if (degree == 13 && nrm > kThetas[4].second) {
    squarings = static_cast<int>(std::ceil(std::log2(nrm / kThetas[4].second)));
    x *= std::ldexp(1.0, -squarings);
  }

  const auto c = detail::pade_coefficients(degree);
  const Matrix eye = Matrix::identity(n);
  Matrix even = eye * c[0];
  Matrix odd(n, n);
  Matrix power = eye;
  for (int j = 1; j <= degree; ++j) {
    power = power * x;
    if (j % 2 == 0) {
      even += power * c[static_cast<std::size_t>(j)];
    } else {
      odd += power * c[static_cast<std::size_t>(j)];
    }
  }
  Matrix result = solve(even - odd, even + odd);
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

// ---------------------------------------------------------------------------
// Nonsymmetric eigenproblem.

struct ComplexEigenSystem {
  CVector values;
  /// Column j is the unit-norm eigenvector of values[j].
  CMatrix vectors;
  bool distinct = false;
  bool converged = true;
  double min_gap = 0.0;
};

namespace detail {

/// Parlett-Reinsch balancing (diagonal similarity); eigenvalues are unchanged.
inline void balance(Matrix& a) {
  constexpr double kRadix = 2.0;
  const std::size_t n = a.rows();
  bool done = false;
  while (!done) {
    done = true;
    for (std::size_t i = 0; i < n; ++i) {
      double r = 0.0;
      double c = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / kRadix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= kRadix;
        c *= kRadix * kRadix;
      }
      g = r * kRadix;
      while (c > g) {
        f /= kRadix;
        c /= kRadix * kRadix;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        g = 1.0 / f;
        for (std::size_t j = 0; j < n; ++j) a(i, j) *= g;
        for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
      }
    }
  }
}

/// Householder reduction to upper Hessenberg form.
inline void hessenberg(Matrix& a) {
  const std::size_t n = a.rows();
  if (n < 3) return;
  std::vector<double> v(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    double alpha = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) alpha += a(i, k) * a(i, k);
    alpha = std::sqrt(alpha);
    if (alpha == 0.0) continue;
    if (a(k + 1, k) > 0.0) alpha = -alpha;
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t i = k + 1; i < n; ++i) v[i] = a(i, k);
    v[k + 1] -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;
    // Left: rows k+1.. of columns k..
    for (std::size_t j = k; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k + 1; i < n; ++i) s += v[i] * a(i, j);
      s = 2.0 * s / vnorm2;
      for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= s * v[i];
    }
    // Right: all rows, columns k+1..
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) s += a(i, j) * v[j];
      s = 2.0 * s / vnorm2;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= s * v[j];
    }
    for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
  }
}

struct HqrResult {
  CVector values;
  bool converged = true;
};

/// Francis double-shift QR on an upper Hessenberg matrix (eigenvalues only).
/// Complex eigenvalues come out as exact conjugate pairs.
[[nodiscard]] inline HqrResult hqr(Matrix a, int max_its_per_value) {
  const int n = static_cast<int>(a.rows());
  HqrResult out;
  out.values.assign(static_cast<std::size_t>(n), Complex{});
  auto at = [&a](int r, int c) -> double& {
    return a(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  };
  auto put = [&out](int i, Complex v) { out.values[static_cast<std::size_t>(i)] = v; };
  const double eps = std::numeric_limits<double>::epsilon();
  double anorm = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(at(i, j));

  int nn = n - 1;
  double t = 0.0;
  double p = 0.0, q = 0.0, r = 0.0, s = 0.0, w = 0.0, x = 0.0, y = 0.0, z = 0.0;
  while (nn >= 0) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l > 0; --l) {
        s = std::abs(at(l - 1, l - 1)) + std::abs(at(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(at(l, l - 1)) <= eps * s) {
          at(l, l - 1) = 0.0;
          break;
        }
      }
      x = at(nn, nn);
      if (l == nn) {
        put(nn--, Complex(x + t, 0.0));
      } else {
        y = at(nn - 1, nn - 1);
        w = at(nn, nn - 1) * at(nn - 1, nn);
        if (l == nn - 1) {
          p = 0.5 * (y - x);
          q = p * p + w;
          z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + std::copysign(z, p);
            put(nn - 1, Complex(x + z, 0.0));
            put(nn, Complex(z != 0.0 ? x - w / z : x + z, 0.0));
          } else {
            put(nn - 1, Complex(x + p, z));
            put(nn, Complex(x + p, -z));
          }
          nn -= 2;
        } else {
          if (its == max_its_per_value) {
            out.converged = false;
            // Unconverged tail: report the diagonal as the partial spectrum.
            for (int i = 0; i <= nn; ++i) put(i, Complex(at(i, i) + t, 0.0));
            return out;
          }
          if (its > 0 && its % 10 == 0) {
            t += x;
            for (int i = 0; i <= nn; ++i) at(i, i) -= x;
            s = std::abs(at(nn, nn - 1)) + std::abs(at(nn - 1, nn - 2));
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m = nn - 2;
          for (; m >= l; --m) {
            z = at(m, m);
            r = x - z;
            s = y - z;
            p = (r * s - w) / at(m + 1, m) + at(m, m + 1);
            q = at(m + 1, m + 1) - z - r - s;
            r = at(m + 2, m + 1);
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(at(m, m - 1)) * (std::abs(q) + std::abs(r));
            const double v =
                std::abs(p) * (std::abs(at(m - 1, m - 1)) + std::abs(z) + std::abs(at(m + 1, m + 1)));
            if (u <= eps * v) break;
          }
          for (int i = m; i < nn - 1; ++i) {
            at(i + 2, i) = 0.0;
            if (i != m) at(i + 2, i - 1) = 0.0;
          }
          for (int k = m; k < nn; ++k) {
            if (k != m) {
              p = at(k, k - 1);
              q = at(k + 1, k - 1);
              r = 0.0;
              if (k + 1 != nn) r = at(k + 2, k - 1);
              if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            if ((s = std::copysign(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
              if (k == m) {
                if (l != m) at(k, k - 1) = -at(k, k - 1);
              } else {
                at(k, k - 1) = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              for (int j = k; j <= nn; ++j) {
                p = at(k, j) + q * at(k + 1, j);
                if (k + 1 != nn) {
                  p += r * at(k + 2, j);
                  at(k + 2, j) -= p * z;
                }
                at(k + 1, j) -= p * y;
                at(k, j) -= p * x;
              }
              const int mmin = nn < k + 3 ? nn : k + 3;
              for (int i = l; i <= mmin; ++i) {
                p = x * at(i, k) + y * at(i, k + 1);
                if (k + 1 != nn) {
                  p += z * at(i, k + 2);
                  at(i, k + 2) -= p * r;
                }
                at(i, k + 1) -= p * q;
                at(i, k) -= p;
              }
            }
          }
        }
      }
    } while (l + 1 < nn);
  }
  return out;
}

/// Inverse iteration for one eigenvector: an initial solve plus two refinement
/// solves, then unit normalization with the largest component made real positive.
[[nodiscard]] inline CVector inverse_iteration(const Matrix& a, Complex lambda) {
  const std::size_t n = a.rows();
  CMatrix shifted = to_complex(a);
  for (std::size_t i = 0; i < n; ++i) shifted(i, i) -= lambda;
  double ref = std::abs(lambda);
  for (double v : a.data()) ref = std::max(ref, std::abs(v));
  const LuFactor<Complex> lu(std::move(shifted), /*tiny_pivot_fallback=*/true, ref);
  CVector v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = Complex(1.0 + 0.1 * static_cast<double>(i % 7), 0.05 * static_cast<double>(i % 3));
  }
  for (int it = 0; it < 3; ++it) {
    v = lu.solve(std::span<const Complex>(v));
    double nrm = 0.0;
    for (const auto& c : v) nrm += std::norm(c);
    nrm = std::sqrt(nrm);
    if (!(nrm > 0.0) || !std::isfinite(nrm)) {
      throw Error(ErrorKind::NumericalFailure, "inverse iteration broke down");
    }
    for (auto& c : v) c /= nrm;
  }
  std::size_t big = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(v[i]) > std::abs(v[big]) * (1.0 + 1e-12)) big = i;
  const Complex phase = std::conj(v[big]) / std::abs(v[big]);
  for (auto& c : v) c *= phase;
  v[big] = Complex(v[big].real(), 0.0);
  return v;
}

}  // namespace detail

/// Distinctness threshold for a generic spectrum: gap > 1e-8 (1 + max|lambda|).
inline constexpr double kDistinctnessRelTol = 1e-8;

/// Full complex spectrum of a real square matrix with unit eigenvectors.
/// Ordering: ascending real part, conjugate pairs adjacent (positive imaginary first).
[[nodiscard]] inline ComplexEigenSystem eig(const Matrix& m,
                                            double distinct_rel_tol = kDistinctnessRelTol) {
  detail::require_square(m, "eig");
  if (m.rows() > 64) throw Error(ErrorKind::Capacity, "eig supports m <= 64");
  if (!all_finite(m)) throw Error(ErrorKind::Domain, "eig matrix has non-finite entries");
  const std::size_t n = m.rows();
  ComplexEigenSystem es;
  if (n == 0) return es;

  Matrix h = m;
  detail::balance(h);
  detail::hessenberg(h);
  auto hq = detail::hqr(std::move(h), 60);
  if (!hq.converged) {
    throw Error(ErrorKind::NumericalFailure,
                "QR iteration did not converge; partial spectrum diagonal retained");
  }

  auto& vals = hq.values;
  std::stable_sort(vals.begin(), vals.end(), [](const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    if (std::abs(a.imag()) != std::abs(b.imag())) return std::abs(a.imag()) < std::abs(b.imag());
    return a.imag() > b.imag();
  });

  es.values = vals;
  es.vectors = CMatrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    CVector v;
    if (vals[j].imag() < 0.0 && j > 0 && vals[j - 1] == std::conj(vals[j])) {
      v = es.vectors.col(j - 1);
      for (auto& c : v) c = std::conj(c);
    } else {
      v = detail::inverse_iteration(m, vals[j]);
    }
    for (std::size_t i = 0; i < n; ++i) es.vectors(i, j) = v[i];
  }

  double max_abs = 0.0;
  for (const auto& v : vals) max_abs = std::max(max_abs, std::abs(v));
  es.min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      es.min_gap = std::min(es.min_gap, std::abs(vals[i] - vals[j]));
  es.distinct = es.min_gap > distinct_rel_tol * (1.0 + max_abs);
  return es;
}

/// Largest residual ||M v_j - lambda_j v_j|| over the eigenpairs.
[[nodiscard]] inline double eig_residual(const Matrix& m, const ComplexEigenSystem& es) {
  const CMatrix mc = to_complex(m);
  double worst = 0.0;
  for (std::size_t j = 0; j < es.values.size(); ++j) {
    const CVector v = es.vectors.col(j);
    const CVector mv = mc * v;
    double r = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) r += std::norm(mv[i] - es.values[j] * v[i]);
    worst = std::max(worst, std::sqrt(r));
  }
  return worst;
}

[[nodiscard]] inline bool is_normal(const Matrix& a, double rel_tol = 1e-10) {
  const Matrix at = a.transpose();
  const double nrm = frobenius_norm(a);
  return frobenius_norm(a * at - at * a) <= rel_tol * nrm * nrm;
}

// ---------------------------------------------------------------------------
// Symmetric eigenproblem, PSD square root, Lyapunov equation.

struct SymmetricEigen {
  Vector values;  ///< ascending
  Matrix vectors; ///< orthogonal, column j pairs with values[j]
};

[[nodiscard]] inline double max_asymmetry(const Matrix& c) {
  double worst = 0.0;
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = i + 1; j < c.cols(); ++j) worst = std::max(worst, std::abs(c(i, j) - c(j, i)));
  return worst;
}

/// Cyclic Jacobi rotations; input is symmetrized first.
[[nodiscard]] inline SymmetricEigen sym_eig(const Matrix& c) {
  detail::require_square(c, "sym_eig");
  const std::size_t n = c.rows();
  Matrix a = symmetrize(c);
  Matrix v = Matrix::identity(n);
  const double total = frobenius_norm(a);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(off) <= 1e-17 * total || off == 0.0) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * cs;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = cs * akp - sn * akq;
          a(k, q) = sn * akp + cs * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = cs * apk - sn * aqk;
          a(q, k) = sn * apk + cs * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = cs * vkp - sn * vkq;
          v(k, q) = sn * vkp + cs * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&a](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

inline constexpr double kSymmetryTol = 1e-10;
inline constexpr double kPsdClamp = 1e-10;

/// Symmetric PSD square root. Tolerances are absolute for ||C|| <= 1 and
/// relative beyond that.
[[nodiscard]] inline Matrix psd_sqrt(const Matrix& c) {
  detail::require_square(c, "psd_sqrt");
  const double scale = std::max(1.0, frobenius_norm(c));
  if (max_asymmetry(c) > kSymmetryTol * scale) {
    throw Error(ErrorKind::Domain, "psd_sqrt input is not symmetric");
  }
  const auto se = sym_eig(c);
  const std::size_t n = c.rows();
  Vector root(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (se.values[k] < -kPsdClamp * scale) {
      throw Error(ErrorKind::NotPsd, "eigenvalue " + std::to_string(se.values[k]) + " below clamp");
    }
    root[k] = std::sqrt(std::max(0.0, se.values[k]));
  }
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += se.vectors(i, k) * root[k] * se.vectors(j, k);
      s(i, j) = acc;
      s(j, i) = acc;
    }
  }
  return s;
}

/// Smallest eigenvalue of a symmetric matrix.
[[nodiscard]] inline double min_eigenvalue(const Matrix& c) { return sym_eig(c).values.front(); }

inline constexpr double kStabilityMargin = 1e-10;

/// Throws NotHurwitz naming the first eigenvalue with Re <= margin.
inline void require_positively_stable(const CVector& values, double margin = kStabilityMargin) {
  for (const auto& v : values) {
    if (v.real() <= margin) {
      throw Error(ErrorKind::NotHurwitz, "eigenvalue " + std::to_string(v.real()) +
                                             (v.imag() >= 0 ? "+" : "") + std::to_string(v.imag()) +
                                             "i has non-positive real part");
    }
  }
}

/// Solves A S + S A^T = Q through the m^2 x m^2 Kronecker system, with one
/// step of iterative refinement.
[[nodiscard]] inline Matrix lyapunov_solve(const Matrix& a, const Matrix& q) {
  detail::require_square(a, "lyapunov_solve");
  if (q.rows() != a.rows() || q.cols() != a.cols()) {
    throw Error(ErrorKind::Dimension, "lyapunov_solve Q shape " + q.shape());
  }
  require_positively_stable(eig(a).values);
  const std::size_t m = a.rows();
  const std::size_t mm = m * m;
  Matrix k(mm, mm);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t row = i * m + j;
      for (std::size_t l = 0; l < m; ++l) {
        k(row, l * m + j) += a(i, l);
        k(row, i * m + l) += a(j, l);
      }
    }
  }
  const LuFactor<double> lu(std::move(k));
  auto vec = [m](const Matrix& s) { return Vector(s.data().begin(), s.data().end()); };
  auto unvec = [m](const Vector& v) {
    Matrix s(m, m);
    std::copy(v.begin(), v.end(), s.data().begin());
    return s;
  };
  Matrix sigma = unvec(lu.solve(std::span<const double>(vec(q))));
  const Matrix residual = q - a * sigma - sigma * a.transpose();
  sigma += unvec(lu.solve(std::span<const double>(vec(residual))));
  return symmetrize(sigma);
}

}  // namespace ouc
