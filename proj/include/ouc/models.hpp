#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ouc/error.hpp"
#include "ouc/matrix.hpp"
#include "ouc/noise.hpp"
#include "ouc/ou.hpp"
#include "ouc/wasserstein.hpp"

namespace ouc {

// ---------------------------------------------------------------------------
// Damped harmonic oscillator: dX = Y dt, dY = -kappa X dt - gamma Y dt + varsigma dB.

struct OscillatorParams {
  double kappa = 1.0;
  double gamma = 0.1;
  double varsigma = 1.0;

  [[nodiscard]] double discriminant() const noexcept { return gamma * gamma - 4.0 * kappa; }
  [[nodiscard]] bool subcritical() const noexcept { return discriminant() < 0.0; }
};

inline void validate(const OscillatorParams& p) {
  if (!(p.kappa > 0.0) || !std::isfinite(p.kappa)) throw Error(ErrorKind::Domain, "kappa must be > 0");
  if (!std::isfinite(p.gamma)) throw Error(ErrorKind::Domain, "gamma must be finite");
  if (!(p.varsigma > 0.0) || !std::isfinite(p.varsigma)) throw Error(ErrorKind::Domain, "varsigma must be > 0");
}

/// A = [[0, -1], [kappa, gamma]], sigma = [[0, 0], [0, varsigma]], two-dimensional Brownian driver.
/// gamma <= 0 is rejected by the stability check of build_system.
[[nodiscard]] inline OUSystem oscillator_system(const OscillatorParams& p) {
  validate(p);
  Matrix a{{0.0, -1.0}, {p.kappa, p.gamma}};
  Matrix sigma{{0.0, 0.0}, {0.0, p.varsigma}};
  return build_system(std::move(a), std::move(sigma), Brownian{2});
}

/// Off-diagonal entry of Sigma_t in real trigonometric form, e^{-gamma t}(cos(sqrt|D| t) - 1)/D
/// (for varsigma = 1; scales with varsigma^2).
[[nodiscard]] inline double oscillator_sigma12_closed(const OscillatorParams& p, double t) {
  validate(p);
  const double d = p.discriminant();
  if (!(d < 0.0)) throw Error(ErrorKind::Unsupported, "closed form is given for the subcritical case only");
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorKind::Domain, "time must be finite and >= 0");
  const double w = std::sqrt(-d);
  return p.varsigma * p.varsigma * std::exp(-p.gamma * t) * (std::cos(w * t) - 1.0) / d;
}

/// e^{2 gamma t} W_2^2(X_t(0), mu) on the given times.
[[nodiscard]] inline Vector oscillator_band_curve(const OscillatorParams& p, std::span<const double> t_grid) {
  validate(p);
  if (!p.subcritical()) throw Error(ErrorKind::Unsupported, "band curve is defined for the subcritical case");
  const OUSystem sys = oscillator_system(p);
  const Vector origin(2, 0.0);
  Vector out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    const double w = w2_gaussian_to_stationary(sys, origin, t);
    out.push_back(std::exp(2.0 * p.gamma * t) * w * w);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Jacobi chain of m oscillators with heat baths on the first and last momentum.
// State (p_1..p_m, q_1..q_m).

struct JacobiParams {
  std::size_t m = 5;
  double kappa = 1.0;
  double gamma = 0.01;
  double varsigma_1 = 1.0;
  double varsigma_m = 1.0;
};

inline void validate(const JacobiParams& p) {
  if (p.m < 2) throw Error(ErrorKind::Domain, "Jacobi chain needs m >= 2");
  if (2 * p.m > 64) throw Error(ErrorKind::Capacity, "Jacobi chain limited to 2m <= 64");
  if (!(p.kappa > 0.0) || !std::isfinite(p.kappa)) throw Error(ErrorKind::Domain, "kappa must be > 0");
  if (!(p.gamma >= 0.0) || !std::isfinite(p.gamma)) throw Error(ErrorKind::Domain, "gamma must be >= 0");
  if (!(p.varsigma_1 > 0.0) || !(p.varsigma_m > 0.0)) throw Error(ErrorKind::Domain, "bath amplitudes must be > 0");
}

/// Drift and dispersion of the chain without building the system.
[[nodiscard]] inline std::pair<Matrix, Matrix> jacobi_matrices(const JacobiParams& p) {
  validate(p);
  const std::size_t m = p.m;
  Matrix a(2 * m, 2 * m);
  a(0, 0) = p.varsigma_1;
  a(m - 1, m - 1) = p.varsigma_m;
  for (std::size_t i = 0; i < m; ++i) {
    const bool end = i == 0 || i + 1 == m;
    a(i, m + i) = (end ? p.kappa : 2.0 * p.kappa) + p.gamma;
    if (i > 0) a(i, m + i - 1) = -p.kappa;
    if (i + 1 < m) a(i, m + i + 1) = -p.kappa;
    a(m + i, i) = -1.0;
  }
  Matrix sigma(2 * m, 2);
  sigma(0, 0) = p.varsigma_1;
  sigma(m - 1, 1) = p.varsigma_m;
  return {std::move(a), std::move(sigma)};
}

/// Builds the chain; the driver defaults to a two-dimensional Brownian motion.
[[nodiscard]] inline OUSystem jacobi_system(const JacobiParams& p, std::optional<NoiseSpec> noise = std::nullopt) {
  auto [a, sigma] = jacobi_matrices(p);
  return build_system(std::move(a), std::move(sigma), noise ? std::move(*noise) : NoiseSpec(Brownian{2}));
}

/// Pinning-free chains (gamma = 0) may fail the stability check.
[[nodiscard]] inline bool jacobi_unpinned(const JacobiParams& p) noexcept { return p.gamma == 0.0; }

}  // namespace ouc
