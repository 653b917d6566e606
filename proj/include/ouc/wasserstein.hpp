#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ouc/assignment.hpp"
#include "ouc/error.hpp"
#include "ouc/linalg.hpp"
#include "ouc/matrix.hpp"
#include "ouc/ou.hpp"
#include "ouc/parallel.hpp"
#include "ouc/rng.hpp"

namespace ouc {

// ---------------------------------------------------------------------------
// Gaussian W2.

namespace detail {

/// Bures term tr(C1 + C2 - 2 (C1^{1/2} C2 C1^{1/2})^{1/2}) with C2 = C1 + E.
///
/// With S = C1^{1/2} and D = (S C2 S)^{1/2} - C1, D solves C1 D + D C1 + D^2 = S E S
/// and the trace term equals tr(C1^{-1} D^2). Nothing cancels in that form, so the
/// result keeps full relative accuracy even when C2 -> C1. Requires C1 positive definite.
[[nodiscard]] inline double bures_sq_perturbed(const Matrix& c1, const Matrix& e) {
  const std::size_t m = c1.rows();
  const auto se = sym_eig(c1);
  const Matrix& u = se.vectors;
  const Vector& c = se.values;
  Vector root(m);
  for (std::size_t k = 0; k < m; ++k) root[k] = std::sqrt(c[k]);

  // Work in the eigenbasis of C1: S = diag(root), F = S (U^T E U) S.
  const Matrix et = u.transpose() * e * u;
  Matrix f(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) f(i, j) = root[i] * et(i, j) * root[j];
  f = symmetrize(f);

  // Direct square root gives a starting point that is accurate when D is large.
  Matrix c1_diag(m, m);
  for (std::size_t k = 0; k < m; ++k) c1_diag(k, k) = c[k];
  Matrix m2 = symmetrize(f);
  for (std::size_t k = 0; k < m; ++k) m2(k, k) += c[k] * c[k];
  Matrix d = psd_sqrt(symmetrize(m2)) - c1_diag;

  // Fixed point D <- L^{-1}(F - D^2) with L(X) = C1 X + X C1, which is diagonal here.
  const double cmin = c.front();
  double dnorm = frobenius_norm(d);
  if (dnorm < 0.5 * cmin) {
    Matrix next(m, m);
    for (int it = 0; it < 200; ++it) {
      const Matrix rhs = f - d * d;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) next(i, j) = rhs(i, j) / (c[i] + c[j]);
      next = symmetrize(next);
      const double change = frobenius_norm(next - d);
      d = next;
      dnorm = frobenius_norm(d);
      if (change <= 1e-17 * dnorm || dnorm == 0.0) break;
    }
  }
  const Matrix d2 = d * d;
  double out = 0.0;
  for (std::size_t k = 0; k < m; ++k) out += d2(k, k) / c[k];
  return std::max(0.0, out);
}

/// Plain trace formula, used when neither covariance is invertible.
[[nodiscard]] inline double bures_sq_direct(const Matrix& c1, const Matrix& c2) {
  const Matrix s = psd_sqrt(c1);
  const Matrix inner = psd_sqrt(symmetrize(s * c2 * s));
  const double value = trace(c1) + trace(c2) - 2.0 * trace(inner);
  return std::max(0.0, value);
}

}  // namespace detail

inline constexpr double kSingularCovarianceRelTol = 1e-12;

/// Squared Bures distance between covariance matrices (the trace term of the Gaussian W2).
[[nodiscard]] inline double bures_sq(const Matrix& c1, const Matrix& c2) {
  if (!c1.square() || c1.rows() != c2.rows() || c1.cols() != c2.cols()) {
    throw Error(ErrorKind::Dimension, "covariance shapes " + c1.shape() + " and " + c2.shape());
  }
  if (c1.rows() == 0) return 0.0;
  const double scale = std::max({1.0, frobenius_norm(c1), frobenius_norm(c2)});
  for (const Matrix* c : {&c1, &c2}) {
    if (max_asymmetry(*c) > kSymmetryTol * scale) throw Error(ErrorKind::Domain, "covariance is not symmetric");
  }
  const double min1 = min_eigenvalue(c1);
  const double min2 = min_eigenvalue(c2);
  for (double v : {min1, min2}) {
    if (v < -kPsdClamp * scale) throw Error(ErrorKind::NotPsd, "covariance has a negative eigenvalue");
  }
  const double floor = kSingularCovarianceRelTol * scale;
  if (std::max(min1, min2) <= floor) return detail::bures_sq_direct(c1, c2);
  if (min1 >= min2) return detail::bures_sq_perturbed(c1, c2 - c1);
  return detail::bures_sq_perturbed(c2, c1 - c2);
}

/// W2 between two Gaussian laws.
[[nodiscard]] inline double w2_gaussian(const GaussianLaw& p, const GaussianLaw& q) {
  if (p.mean.size() != q.mean.size() || p.mean.size() != p.cov.rows()) {
    throw Error(ErrorKind::Dimension, "gaussian law dimensions differ");
  }
  const Vector diff = subtract(p.mean, q.mean);
  return std::sqrt(dot(diff, diff) + bures_sq(p.cov, q.cov));
}

/// W2(N(e^{-At}x, Sigma_t), N(0, Sigma_inf)). The covariance gap is formed as
/// Sigma_t - Sigma_inf = -e^{-At} Sigma_inf e^{-A^T t}, exact in exact arithmetic and free
/// of cancellation, which keeps tiny distances at large t meaningful.
[[nodiscard]] inline double w2_gaussian_to_stationary(const OUSystem& sys, std::span<const double> x, double t) {
  if (x.size() != sys.dim()) throw Error(ErrorKind::Dimension, "state dimension mismatch");
  const Matrix f = mat_exp(sys.drift(), -t);
  const Vector shifted = f * x;
  const Matrix s_inf = sigma_inf(sys);
  const Matrix gap = symmetrize(f * s_inf * f.transpose());
  const double scale = std::max(1.0, frobenius_norm(s_inf));
  double trace_term = 0.0;
  if (min_eigenvalue(s_inf) > kSingularCovarianceRelTol * scale) {
    trace_term = detail::bures_sq_perturbed(s_inf, -gap);
  } else {
    trace_term = detail::bures_sq_direct(s_inf, s_inf - gap);
  }
  return std::sqrt(dot(shifted, shifted) + trace_term);
}

/// Diagnostics for the commuting case: m ||S_t^{1/2} - S_inf^{1/2}||_F^2 and the same
/// without the factor m, next to the trace term itself.
struct CommutingDiagnostic {
  double trace_term = 0.0;
  double frobenius_sq = 0.0;
  double m_times_frobenius_sq = 0.0;
  bool commute = false;
};

[[nodiscard]] inline CommutingDiagnostic commuting_diagnostic(const Matrix& s_t, const Matrix& s_inf) {
  CommutingDiagnostic d;
  d.trace_term = bures_sq(s_t, s_inf);
  const Matrix diff = psd_sqrt(s_t) - psd_sqrt(s_inf);
  d.frobenius_sq = frobenius_norm(diff) * frobenius_norm(diff);
  d.m_times_frobenius_sq = static_cast<double>(s_t.rows()) * d.frobenius_sq;
  const double scale = std::max(1.0, frobenius_norm(s_t) * frobenius_norm(s_inf));
  d.commute = frobenius_norm(s_t * s_inf - s_inf * s_t) <= 1e-9 * scale;
  return d;
}

/// How conjugate pairs enter the spectral sums.
enum class PairConvention {
  EachEigenvalue,  ///< every eigenvalue of the spectrum is one summand
  PairOnce,        ///< a conjugate pair contributes a single summand
};

/// Closed-form W2(X_t(x), mu) for normal A, sigma = I and Brownian noise:
///   sum_j e^{-2 Re l_j t} (<x, Re v_j>^2 + <x, Im v_j>^2)
///   + sum_j 1/(2 Re l_j) e^{-4 Re l_j t} / (sqrt(1 - e^{-2 Re l_j t}) + 1)^2.
/// Repeated eigenvalues fall back to the orthonormal eigenbasis of (A + A^T)/2,
/// whose eigenvalues are the Re l_j of a normal A.
[[nodiscard]] inline double w2_normal_spectral(const OUSystem& sys, std::span<const double> x, double t,
                                               PairConvention convention = PairConvention::EachEigenvalue) {
  const std::size_t m = sys.dim();
  if (!sys.normal()) throw Error(ErrorKind::Unsupported, "A is not normal; use w2_gaussian");
  if (!is_brownian(sys.noise())) throw Error(ErrorKind::Unsupported, "closed form needs Brownian noise");
  const Matrix& sigma = sys.dispersion();
  if (!sigma.square() || frobenius_norm(sigma - Matrix::identity(m)) > 1e-12) {
    throw Error(ErrorKind::Unsupported, "closed form needs sigma = I; use w2_gaussian");
  }
  if (x.size() != m) throw Error(ErrorKind::Dimension, "state dimension mismatch");
  if (!(t >= 0.0)) throw Error(ErrorKind::Domain, "time must be >= 0");

  struct Mode {
    double rate;
    double weight;  // <x, Re v>^2 + <x, Im v>^2
    bool skip;
  };
  std::vector<Mode> modes;
  const auto& es = sys.spectral();
  // Unit eigenvectors of a normal matrix are orthonormal only for a simple spectrum.
  double worst_overlap = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      Complex ip{};
      for (std::size_t k = 0; k < m; ++k) ip += std::conj(es.vectors(k, i)) * es.vectors(k, j);
      worst_overlap = std::max(worst_overlap, std::abs(ip));
    }
  }
  if (es.distinct && worst_overlap <= 1e-8) {
    for (std::size_t j = 0; j < m; ++j) {
      double re = 0.0;
      double im = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        re += x[k] * es.vectors(k, j).real();
        im += x[k] * es.vectors(k, j).imag();
      }
      const bool second_of_pair = es.values[j].imag() < 0.0;
      modes.push_back({es.values[j].real(), re * re + im * im,
                       convention == PairConvention::PairOnce && second_of_pair});
    }
  } else {
    const auto he = sym_eig(symmetrize(sys.drift()));
    for (std::size_t j = 0; j < m; ++j) {
      double proj = 0.0;
      for (std::size_t k = 0; k < m; ++k) proj += x[k] * he.vectors(k, j);
      modes.push_back({he.values[j], proj * proj, false});
    }
  }
  double total = 0.0;
  for (const auto& mode : modes) {
    if (mode.skip) continue;
    const double decay = std::exp(-2.0 * mode.rate * t);
    const double root = std::sqrt(-std::expm1(-2.0 * mode.rate * t)) + 1.0;
    total += decay * mode.weight;
    total += (1.0 / (2.0 * mode.rate)) * decay * decay / (root * root);
  }
  return std::sqrt(total);
}

// ---------------------------------------------------------------------------
// Empirical W_p by exact optimal assignment.

inline constexpr std::size_t kMaxAssignmentPoints = 4096;

struct EmpiricalMeasure {
  std::vector<Vector> points;
};

namespace detail {

inline std::size_t check_measures(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.points.empty() || nu.points.empty()) throw Error(ErrorKind::Size, "empirical measure is empty");
  if (mu.points.size() != nu.points.size()) {
    throw Error(ErrorKind::Size, "empirical measures differ in size: " + std::to_string(mu.points.size()) +
                                     " vs " + std::to_string(nu.points.size()));
  }
  if (mu.points.size() > kMaxAssignmentPoints) {
    throw Error(ErrorKind::Capacity, "empirical measures limited to 4096 points");
  }
  const std::size_t d = mu.points.front().size();
  for (const auto* m : {&mu, &nu}) {
    for (const auto& p : m->points) {
      if (p.size() != d) throw Error(ErrorKind::Dimension, "points differ in dimension");
      for (double v : p)
        if (!std::isfinite(v)) throw Error(ErrorKind::Domain, "non-finite sample point");
    }
  }
  return d;
}

[[nodiscard]] inline double power_cost(std::span<const double> a, std::span<const double> b, double p) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  if (p == 2.0) return s;
  return std::pow(std::sqrt(s), p);
}

}  // namespace detail

/// Minimal total cost sum_i |u_i - v_pi(i)|^p over permutations, divided by n.
[[nodiscard]] inline double empirical_transport_cost(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                                     double p) {
  if (!(p >= 1.0)) throw Error(ErrorKind::OutOfScope, "order p must be >= 1");
  const std::size_t d = detail::check_measures(mu, nu);
  const std::size_t n = mu.points.size();
  if (d == 1) {
    Vector a(n);
    Vector b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = mu.points[i][0];
      b[i] = nu.points[i][0];
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += std::pow(std::abs(a[i] - b[i]), p);
    return total / static_cast<double>(n);
  }
  Matrix cost(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost(i, j) = detail::power_cost(mu.points[i], nu.points[j], p);
  return solve_assignment(cost).cost / static_cast<double>(n);
}

/// W_p between two uniform empirical measures of equal size.
[[nodiscard]] inline double wp_empirical(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double p) {
  return std::pow(empirical_transport_cost(mu, nu, p), 1.0 / p);
}

// ---------------------------------------------------------------------------
// Ergodicity bounds.

/// Monte-Carlo mean with its standard error.
struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

[[nodiscard]] inline McEstimate mc_summary(std::span<const double> values) {
  McEstimate e;
  e.n = values.size();
  if (e.n == 0) return e;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(e.n);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  e.mean = mean;
  e.se = e.n > 1 ? std::sqrt(var / static_cast<double>(e.n - 1) / static_cast<double>(e.n)) : 0.0;
  return e;
}

/// (mean of v^p)^{1/p} from samples of v >= 0; the error is carried through by the delta method.
[[nodiscard]] inline McEstimate mc_power_mean(std::span<const double> values, double p) {
  if (p == 1.0) return mc_summary(values);
  Vector pw(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) pw[i] = std::pow(values[i], p);
  const McEstimate m = mc_summary(pw);
  McEstimate e = m;
  e.mean = std::pow(m.mean, 1.0 / p);
  e.se = m.mean > 0.0 ? e.mean / (p * m.mean) * m.se : 0.0;
  return e;
}

/// (int |e^{-At}(x - y)|^p mu(dy))^{1/p} over stationary samples y. Synchronous coupling of
/// X_t(x) with X_t(Y), Y ~ mu, makes this an upper bound on W_p for every p >= 1.
[[nodiscard]] inline McEstimate disintegration_bound(const OUSystem& sys, std::span<const double> x, double t,
                                                     const std::vector<Vector>& stationary, double p = 1.0) {
  if (!(p >= 1.0)) throw Error(ErrorKind::OutOfScope, "order p must be >= 1");
  const Matrix f = mat_exp(sys.drift(), -t);
  Vector values(stationary.size());
  for (std::size_t i = 0; i < stationary.size(); ++i) {
    values[i] = norm(f * subtract(x, stationary[i]));
  }
  return mc_power_mean(values, p);
}

/// |e^{-At}(x - A^{-1} sigma E[L_1])|, which equals |e^{-At}x + E[X_t(0)] - E[X_inf]|.
[[nodiscard]] inline double lower_mean_bound(const OUSystem& sys, std::span<const double> x, double t) {
  const Vector z = subtract(x, stationary_mean(sys));
  return norm(mat_exp(sys.drift(), -t) * z);
}

/// n draws of X_t(x). Brownian and noiseless drivers are sampled exactly; other drivers
/// by exponential midpoint steps of size at most 0.5 / spectral radius.
[[nodiscard]] inline std::vector<Vector> sample_transient(const OUSystem& sys, std::span<const double> x, double t,
                                                          std::size_t n, const RngStream& rng, unsigned threads = 1) {
  if (t == 0.0) return std::vector<Vector>(n, Vector(x.begin(), x.end()));
  if (is_brownian(sys.noise()) || is_deterministic(sys.noise())) {
    return simulate_endpoints(sys, x, t, 1, n, rng, Scheme::Exact, threads);
  }
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(2.0 * t * sys.spectral_radius())));
  return simulate_endpoints(sys, x, t, steps, n, rng, Scheme::ExponentialMidpoint, threads);
}

struct BoundBundle {
  double t = 0.0;
  double p = 0.0;
  double upper_shift = 0.0;
  double upper_disintegration = 0.0;
  double upper_disintegration_se = 0.0;
  double lower_shift = 0.0;
  double lower_mean = 0.0;
  double wp_estimate = 0.0;  ///< W_p(X_t(0), mu)
  bool wp_exact = false;
  std::size_t mc_n = 0;
  std::uint64_t seed = 0;
};

/// Upper bounds |e^{-At}x| + W_p(X_t(0), mu) and (int |e^{-At}(x - y)|^p mu(dy))^{1/p}; lower
/// bounds |e^{-At}x| - W_p(X_t(0), mu) and the mean bound. W_p(X_t(0), mu) is exact
/// for Brownian noise and p = 2, otherwise the empirical assignment distance on
/// min(mc, 4096) samples per side.
[[nodiscard]] inline BoundBundle ergodicity_bounds(const OUSystem& sys, std::span<const double> x, double t, double p,
                                                   std::size_t mc, const RngStream& rng, unsigned threads = 1) {
  if (!(p >= 1.0)) throw Error(ErrorKind::OutOfScope, "bounds for p < 1 are not provided");
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorKind::Domain, "time must be finite and >= 0");
  if (x.size() != sys.dim()) throw Error(ErrorKind::Dimension, "state dimension mismatch");
  if (mc == 0) throw Error(ErrorKind::Domain, "Monte-Carlo budget must be >= 1");
  BoundBundle b;
  b.t = t;
  b.p = p;
  b.seed = rng.seed();
  const double shift = norm(propagate(sys, x, t));
  const auto stationary = sample_stationary(sys, mc, rng.substream(1), threads);
  if (is_brownian(sys.noise()) && p == 2.0) {
    const Vector origin(sys.dim(), 0.0);
    b.wp_estimate = w2_gaussian_to_stationary(sys, origin, t);
    b.wp_exact = true;
  } else {
    const std::size_t n_ot = std::min(mc, kMaxAssignmentPoints);
    const Vector origin(sys.dim(), 0.0);
    EmpiricalMeasure transient{sample_transient(sys, origin, t, n_ot, rng.substream(0), threads)};
    EmpiricalMeasure invariant{std::vector<Vector>(stationary.begin(), stationary.begin() + static_cast<long>(n_ot))};
    b.wp_estimate = wp_empirical(transient, invariant, p);
  }
  const auto dis = disintegration_bound(sys, x, t, stationary, p);
  b.mc_n = mc;
  b.upper_shift = shift + b.wp_estimate;
  b.upper_disintegration = dis.mean;
  b.upper_disintegration_se = dis.se;
  b.lower_shift = std::max(0.0, shift - b.wp_estimate);
  b.lower_mean = lower_mean_bound(sys, x, t);
  return b;
}

}  // namespace ouc
