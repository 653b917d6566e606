#pragma once

// Deterministic generators and small oracles shared by the test suites.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ouc/linalg.hpp"
#include "ouc/matrix.hpp"
#include "ouc/noise.hpp"
#include "ouc/ou.hpp"
#include "ouc/rng.hpp"

namespace testing_support {

using ouc::Matrix;
using ouc::RngStream;
using ouc::Vector;

inline Matrix random_matrix(RngStream& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = scale * rng.normal();
  return m;
}

inline Vector random_vector(RngStream& rng, std::size_t n, double scale = 1.0) {
  Vector v(n);
  for (auto& e : v) e = scale * rng.normal();
  return v;
}

/// Random matrix shifted so that every eigenvalue has real part >= margin.
inline Matrix random_stable(RngStream& rng, std::size_t m, double margin = 0.3) {
  Matrix g = random_matrix(rng, m, m, 1.0 / std::sqrt(static_cast<double>(m)));
  double lowest = 1e300;
  for (const auto& l : ouc::eig(g).values) lowest = std::min(lowest, l.real());
  const double shift = margin - lowest;
  for (std::size_t i = 0; i < m; ++i) g(i, i) += shift;
  return g;
}

inline Matrix random_spd(RngStream& rng, std::size_t m, double floor = 0.2) {
  const Matrix g = random_matrix(rng, m, m, 1.0 / std::sqrt(static_cast<double>(m)));
  Matrix s = g * g.transpose();
  for (std::size_t i = 0; i < m; ++i) s(i, i) += floor;
  return ouc::symmetrize(s);
}

/// Orthogonal matrix from modified Gram-Schmidt on a Gaussian matrix.
inline Matrix random_orthogonal(RngStream& rng, std::size_t m) {
  Matrix q = random_matrix(rng, m, m);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < j; ++k) {
      double d = 0.0;
      for (std::size_t i = 0; i < m; ++i) d += q(i, j) * q(i, k);
      for (std::size_t i = 0; i < m; ++i) q(i, j) -= d * q(i, k);
    }
    double n = 0.0;
    for (std::size_t i = 0; i < m; ++i) n += q(i, j) * q(i, j);
    n = std::sqrt(n);
    for (std::size_t i = 0; i < m; ++i) q(i, j) /= n;
  }
  return q;
}

inline double rel_frob(const Matrix& got, const Matrix& want) {
  return ouc::frobenius_norm(got - want) / std::max(1e-300, ouc::frobenius_norm(want));
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(Vector a, Vector b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Critical value of the two-sample KS statistic at level alpha (asymptotic).
inline double ks_critical(std::size_t na, std::size_t nb, double alpha = 0.01) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(static_cast<double>(na + nb) / static_cast<double>(na * nb));
}

struct Moments {
  Vector mean;
  Matrix cov;
  Vector se;  ///< standard error of each mean coordinate
};

inline Moments sample_moments(const std::vector<Vector>& xs) {
  const std::size_t m = xs.front().size();
  const auto n = static_cast<double>(xs.size());
  Moments r{Vector(m, 0.0), Matrix(m, m), Vector(m, 0.0)};
  for (const auto& x : xs)
    for (std::size_t i = 0; i < m; ++i) r.mean[i] += x[i] / n;
  for (const auto& x : xs)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) r.cov(i, j) += (x[i] - r.mean[i]) * (x[j] - r.mean[j]) / (n - 1.0);
  for (std::size_t i = 0; i < m; ++i) r.se[i] = std::sqrt(r.cov(i, i) / n);
  return r;
}

/// Exact draw of X_t(0) for sigma * (compound Poisson + drift): jump times are
/// uniform given their Poisson count, and each jump J at time s contributes
/// e^{-A(t-s)} sigma J; the drift contributes A^{-1}(I - e^{-At}) sigma gamma.
inline Vector exact_compound_poisson_state(const ouc::OUSystem& sys, double rate, double jump_std, const Vector& gamma,
                                           double t, RngStream& rng) {
  const std::size_t m = sys.dim();
  const std::size_t n = sys.noise_dim();
  Vector x(m, 0.0);
  if (!gamma.empty()) {
    const Vector sg = sys.dispersion() * gamma;
    const Vector decayed = ouc::subtract(sg, ouc::mat_exp(sys.drift(), -t) * sg);
    x = ouc::solve(sys.drift(), std::span<const double>(decayed));
  }
  const auto count = rng.poisson(rate * t);
  for (std::uint64_t k = 0; k < count; ++k) {
    const double s = t * rng.uniform();
    Vector jump(n);
    for (auto& v : jump) v = jump_std * rng.normal();
    const Vector kick = ouc::mat_exp(sys.drift(), -(t - s)) * (sys.dispersion() * jump);
    for (std::size_t i = 0; i < m; ++i) x[i] += kick[i];
  }
  return x;
}

}  // namespace testing_support
