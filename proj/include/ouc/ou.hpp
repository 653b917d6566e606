#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ouc/error.hpp"
#include "ouc/linalg.hpp"
#include "ouc/matrix.hpp"
#include "ouc/noise.hpp"
#include "ouc/parallel.hpp"
#include "ouc/rng.hpp"

namespace ouc {

/// dX = -A X dt + sigma dL, validated at construction and immutable afterwards.
class OUSystem {
 public:
  [[nodiscard]] const Matrix& drift() const noexcept { return a_; }
  [[nodiscard]] const Matrix& dispersion() const noexcept { return sigma_; }
  [[nodiscard]] const NoiseSpec& noise() const noexcept { return noise_; }
  [[nodiscard]] const ComplexEigenSystem& spectral() const noexcept { return spectral_; }
  /// sigma sigma^T
  [[nodiscard]] const Matrix& diffusion() const noexcept { return q_; }
  [[nodiscard]] std::size_t dim() const noexcept { return a_.rows(); }
  [[nodiscard]] std::size_t noise_dim() const noexcept { return sigma_.cols(); }
  [[nodiscard]] bool hurwitz() const noexcept { return true; }
  [[nodiscard]] bool generic() const noexcept { return spectral_.distinct; }
  [[nodiscard]] bool normal() const noexcept { return normal_; }

  /// Smallest and largest real part of the spectrum of A.
  [[nodiscard]] double rho_min() const noexcept { return rho_min_; }
  [[nodiscard]] double rho_max() const noexcept { return rho_max_; }
  [[nodiscard]] double spectral_radius() const noexcept { return radius_; }

  /// sigma E[L_1]
  [[nodiscard]] const Vector& forcing_mean() const noexcept { return forcing_mean_; }

 private:
  friend OUSystem build_system(Matrix a, Matrix sigma, NoiseSpec noise, double distinct_rel_tol);

  Matrix a_;
  Matrix sigma_;
  NoiseSpec noise_;
  ComplexEigenSystem spectral_;
  Matrix q_;
  Vector forcing_mean_;
  bool normal_ = false;
  double rho_min_ = 0.0;
  double rho_max_ = 0.0;
  double radius_ = 0.0;
};

/// Validates dimensions and positive stability of A, then computes the spectral data.
[[nodiscard]] inline OUSystem build_system(Matrix a, Matrix sigma, NoiseSpec noise,
                                           double distinct_rel_tol = kDistinctnessRelTol) {
  if (!a.square() || a.rows() == 0) throw Error(ErrorKind::Dimension, "A must be square, got " + a.shape());
  if (sigma.rows() != a.rows()) {
    throw Error(ErrorKind::Dimension, "sigma has " + std::to_string(sigma.rows()) + " rows, A has " +
                                          std::to_string(a.rows()));
  }
  if (!all_finite(a) || !all_finite(sigma)) throw Error(ErrorKind::Domain, "non-finite system matrix");
  validate(noise);
  if (ouc::noise_dim(noise) != sigma.cols()) {
    throw Error(ErrorKind::Dimension, "noise dimension " + std::to_string(ouc::noise_dim(noise)) +
                                          " does not match sigma columns " + std::to_string(sigma.cols()));
  }
  OUSystem sys;
  sys.spectral_ = eig(a, distinct_rel_tol);
  require_positively_stable(sys.spectral_.values);
  sys.rho_min_ = std::numeric_limits<double>::infinity();
  for (const auto& v : sys.spectral_.values) {
    sys.rho_min_ = std::min(sys.rho_min_, v.real());
    sys.rho_max_ = std::max(sys.rho_max_, v.real());
    sys.radius_ = std::max(sys.radius_, std::abs(v));
  }
  sys.normal_ = is_normal(a);
  sys.q_ = sigma * sigma.transpose();
  sys.forcing_mean_ = sigma * noise_mean(noise);
  sys.a_ = std::move(a);
  sys.sigma_ = std::move(sigma);
  sys.noise_ = std::move(noise);
  return sys;
}

struct HurwitzSumReport {
  bool a_stable = false;
  bool b_stable = false;
  bool each_stable = false;
  bool commute = false;
  bool sum_stable = false;
  CVector sum_eigenvalues;
};

/// Positive stability of A, B and A + B, plus whether A and B commute.
[[nodiscard]] inline HurwitzSumReport hurwitz_sum_check(const Matrix& a, const Matrix& b) {
  if (!a.square() || a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::Dimension, "hurwitz_sum_check shapes " + a.shape() + " and " + b.shape());
  }
  auto stable = [](const CVector& vals) {
    for (const auto& v : vals)
      if (v.real() <= kStabilityMargin) return false;
    return true;
  };
  HurwitzSumReport r;
  r.a_stable = stable(eig(a).values);
  r.b_stable = stable(eig(b).values);
  r.each_stable = r.a_stable && r.b_stable;
  const double scale = std::max(1.0, frobenius_norm(a) * frobenius_norm(b));
  r.commute = frobenius_norm(a * b - b * a) <= 1e-12 * scale;
  r.sum_eigenvalues = eig(a + b).values;
  r.sum_stable = stable(r.sum_eigenvalues);
  return r;
}

/// e^{-At} together with the covariance integral of the same horizon.
struct CovarianceFlow {
  Matrix propagator;  ///< e^{-At}
  Matrix covariance;  ///< int_0^t e^{-As} Q e^{-A^T s} ds
};

/// Base step by one Van Loan block exponential of [[-A, Q], [0, A^T]], then
/// repeated doubling S_{2h} = S_h + e^{-Ah} S_h e^{-A^T h}. The block exponential
/// grows like e^{|A| t}, so the base step keeps ||A|| h <= 1.
[[nodiscard]] inline CovarianceFlow covariance_flow(const Matrix& a, const Matrix& q, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorKind::Domain, "time must be finite and >= 0");
  const std::size_t m = a.rows();
  if (t == 0.0) return {Matrix::identity(m), Matrix(m, m)};
  int doublings = 0;
  const double nrm = one_norm(a);
  double h = t;
  while (nrm * h > 1.0 && doublings < 60) {
    h *= 0.5;
    ++doublings;
  }
  Matrix block(2 * m, 2 * m);
  block.set_block(0, 0, -a);
  block.set_block(0, m, q);
  block.set_block(m, m, a.transpose());
  const Matrix e = mat_exp(block, h);
  Matrix f = e.block(0, 0, m, m);
  Matrix s = symmetrize(e.block(0, m, m, m) * f.transpose());
  for (int k = 0; k < doublings; ++k) {
    s = symmetrize(s + f * s * f.transpose());
    f = f * f;
  }
  return {std::move(f), std::move(s)};
}

/// Sigma_t
[[nodiscard]] inline Matrix sigma_t(const OUSystem& sys, double t) {
  return covariance_flow(sys.drift(), sys.diffusion(), t).covariance;
}

/// Sigma_inf from the Lyapunov equation A S + S A^T = sigma sigma^T.
[[nodiscard]] inline Matrix sigma_inf(const OUSystem& sys) {
  return lyapunov_solve(sys.drift(), sys.diffusion());
}

/// e^{-At} x
[[nodiscard]] inline Vector propagate(const OUSystem& sys, std::span<const double> x, double t) {
  if (x.size() != sys.dim()) throw Error(ErrorKind::Dimension, "state dimension mismatch");
  return mat_exp(sys.drift(), -t) * x;
}

/// E[X_inf] = A^{-1} sigma E[L_1]
[[nodiscard]] inline Vector stationary_mean(const OUSystem& sys) {
  return solve(sys.drift(), std::span<const double>(sys.forcing_mean()));
}

/// E[X_t(0)] = A^{-1}(I - e^{-At}) sigma E[L_1]; t = +inf gives the stationary mean.
[[nodiscard]] inline Vector transient_mean(const OUSystem& sys, double t) {
  if (!(t >= 0.0)) throw Error(ErrorKind::Domain, "time must be >= 0");
  if (std::isinf(t)) return stationary_mean(sys);
  const Matrix f = mat_exp(sys.drift(), -t);
  const Vector decayed = subtract(sys.forcing_mean(), f * sys.forcing_mean());
  return solve(sys.drift(), std::span<const double>(decayed));
}

/// N(mean, cov)
struct GaussianLaw {
  Vector mean;
  Matrix cov;
};

/// Law of X_t(x) for a pure Brownian driver: N(e^{-At}x, Sigma_t).
[[nodiscard]] inline GaussianLaw gaussian_marginal(const OUSystem& sys, std::span<const double> x, double t) {
  if (!is_brownian(sys.noise())) {
    throw Error(ErrorKind::Unsupported, "gaussian_marginal requires a Brownian driver");
  }
  if (x.size() != sys.dim()) throw Error(ErrorKind::Dimension, "state dimension mismatch");
  auto flow = covariance_flow(sys.drift(), sys.diffusion(), t);
  return {flow.propagator * x, std::move(flow.covariance)};
}

/// N(0, Sigma_inf) for a pure Brownian driver.
[[nodiscard]] inline GaussianLaw stationary_law(const OUSystem& sys) {
  if (!is_brownian(sys.noise())) {
    throw Error(ErrorKind::Unsupported, "stationary_law requires a Brownian driver");
  }
  return {Vector(sys.dim(), 0.0), sigma_inf(sys)};
}

// ---------------------------------------------------------------------------
// Simulation.

struct SamplePath {
  Vector times;
  std::vector<Vector> states;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

enum class Scheme {
  Auto,                 ///< Exact for Brownian or noiseless drivers, Euler-Maruyama otherwise
  Exact,                ///< Gaussian transition N(e^{-Ah}x + drift, Sigma_h)
  EulerMaruyama,        ///< X + (-A X) h + sigma dL
  ExponentialMidpoint,  ///< e^{-Ah}X + exact drift + e^{-Ah/2} sigma dL_random
};

inline constexpr double kBlowUpNorm = 1e12;

/// Precomputed one-step operators for a fixed step size h.
class StepOperator {
 public:
  StepOperator(const OUSystem& sys, double h, Scheme scheme) : sys_(&sys), h_(h), scheme_(resolve(sys, scheme)) {
    if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::Domain, "step size must be > 0");
    const std::size_t m = sys.dim();
    const Vector drift_forcing = sys.dispersion() * drift_part(sys.noise());
    switch (scheme_) {
      case Scheme::Exact: {
        if (!is_brownian(sys.noise()) && !is_deterministic(sys.noise())) {
          throw Error(ErrorKind::Unsupported, "exact transitions need a Brownian or noiseless driver");
        }
        auto flow = covariance_flow(sys.drift(), sys.diffusion(), h);
        propagator_ = std::move(flow.propagator);
        if (is_brownian(sys.noise())) root_ = psd_sqrt(flow.covariance);
        offset_ = exact_drift_offset(drift_forcing);
        break;
      }
      case Scheme::EulerMaruyama:
        propagator_ = Matrix::identity(m) - sys.drift() * h;
        break;
      case Scheme::ExponentialMidpoint:
        propagator_ = mat_exp(sys.drift(), -h);
        half_ = mat_exp(sys.drift(), -0.5 * h) * sys.dispersion();
        offset_ = exact_drift_offset(drift_forcing);
        break;
      case Scheme::Auto:
        break;
    }
  }

  [[nodiscard]] Scheme scheme() const noexcept { return scheme_; }
  [[nodiscard]] double step() const noexcept { return h_; }

  /// Reusable buffers for advance().
  struct Workspace {
    Vector next;
    Vector increment;
    Vector normals;
  };

  /// Advances x in place by one step.
  void advance(Vector& x, RngStream& rng, Workspace& ws) const {
    const std::size_t m = x.size();
    ws.next.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) acc += propagator_(i, k) * x[k];
      ws.next[i] = acc;
    }
    switch (scheme_) {
      case Scheme::Exact:
        if (!root_.empty()) {
          ws.normals.resize(m);
          for (double& v : ws.normals) v = rng.normal();
          for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < m; ++k) acc += root_(i, k) * ws.normals[k];
            ws.next[i] += acc;
          }
        }
        for (std::size_t i = 0; i < m; ++i) ws.next[i] += offset_[i];
        break;
      case Scheme::EulerMaruyama:
        kick(sys_->dispersion(), /*include_drift=*/true, rng, ws);
        break;
      case Scheme::ExponentialMidpoint:
        kick(half_, /*include_drift=*/false, rng, ws);
        for (std::size_t i = 0; i < m; ++i) ws.next[i] += offset_[i];
        break;
      case Scheme::Auto:
        break;
    }
    x.swap(ws.next);
  }

 private:
  void kick(const Matrix& gain, bool include_drift, RngStream& rng, Workspace& ws) const {
    ws.increment.assign(gain.cols(), 0.0);
    detail::add_increment(sys_->noise(), h_, rng, ws.increment, include_drift);
    for (std::size_t i = 0; i < gain.rows(); ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < gain.cols(); ++k) acc += gain(i, k) * ws.increment[k];
      ws.next[i] += acc;
    }
  }

  static Scheme resolve(const OUSystem& sys, Scheme s) {
    if (s != Scheme::Auto) return s;
    return (is_brownian(sys.noise()) || is_deterministic(sys.noise())) ? Scheme::Exact : Scheme::EulerMaruyama;
  }

  /// int_0^h e^{-As} ds * sigma gamma = A^{-1}(I - e^{-Ah}) sigma gamma
  Vector exact_drift_offset(const Vector& forcing) const {
    const Vector decayed = subtract(forcing, propagator_ * forcing);
    return solve(sys_->drift(), std::span<const double>(decayed));
  }

  const OUSystem* sys_;
  double h_;
  Scheme scheme_;
  Matrix propagator_;
  Matrix root_;
  Matrix half_;
  Vector offset_;
};

namespace detail {

inline void check_blow_up(const Vector& x, std::size_t step) {
  const double n = norm(x);
  if (!(n <= kBlowUpNorm)) {
    throw Error(ErrorKind::BlowUp, "state norm " + std::to_string(n) + " exceeds 1e12 at step " +
                                       std::to_string(step) + "; reduce the step size");
  }
}

}  // namespace detail

/// Path on the uniform grid t_k = k t_end / n_steps, k = 0..n_steps.
[[nodiscard]] inline SamplePath simulate_path(const OUSystem& sys, std::span<const double> x, double t_end,
                                              std::size_t n_steps, RngStream rng, Scheme scheme = Scheme::Auto) {
  if (n_steps == 0) throw Error(ErrorKind::Domain, "n_steps must be >= 1");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw Error(ErrorKind::Domain, "t_end must be > 0");
  if (x.size() != sys.dim()) throw Error(ErrorKind::Dimension, "state dimension mismatch");
  const double h = t_end / static_cast<double>(n_steps);
  const StepOperator op(sys, h, scheme);
  SamplePath path;
  path.seed = rng.seed();
  path.stream = rng.stream();
  path.times.reserve(n_steps + 1);
  path.states.reserve(n_steps + 1);
  Vector state(x.begin(), x.end());
  StepOperator::Workspace ws;
  path.times.push_back(0.0);
  path.states.push_back(state);
  for (std::size_t k = 1; k <= n_steps; ++k) {
    op.advance(state, rng, ws);
    detail::check_blow_up(state, k);
    path.times.push_back(static_cast<double>(k) * h);
    path.states.push_back(state);
  }
  return path;
}

/// Endpoints X_{t_end}(x) of n independent paths; path i uses rng.substream(i).
[[nodiscard]] inline std::vector<Vector> simulate_endpoints(const OUSystem& sys, std::span<const double> x,
                                                            double t_end, std::size_t n_steps, std::size_t n,
                                                            const RngStream& rng, Scheme scheme = Scheme::Auto,
                                                            unsigned threads = 1) {
  if (n_steps == 0) throw Error(ErrorKind::Domain, "n_steps must be >= 1");
  if (x.size() != sys.dim()) throw Error(ErrorKind::Dimension, "state dimension mismatch");
  std::vector<Vector> out(n);
  if (t_end == 0.0) {
    for (auto& v : out) v.assign(x.begin(), x.end());
    return out;
  }
  const StepOperator op(sys, t_end / static_cast<double>(n_steps), scheme);
  parallel_for(n, threads, [&](std::size_t i) {
    RngStream local = rng.substream(i);
    Vector state(x.begin(), x.end());
    StepOperator::Workspace ws;
    for (std::size_t k = 1; k <= n_steps; ++k) {
      op.advance(state, local, ws);
      detail::check_blow_up(state, k);
    }
    out[i] = std::move(state);
  });
  return out;
}

/// Horizon T* with e^{-rho_min T*} <= tol.
[[nodiscard]] inline double burn_in_horizon(const OUSystem& sys, double tol = 1e-6) {
  return -std::log(tol) / sys.rho_min();
}

/// n draws from the invariant law. Brownian: exact N(0, Sigma_inf). Noiseless:
/// the equilibrium A^{-1} sigma gamma. Otherwise: endpoint of an exponential
/// midpoint path from 0 over the burn-in horizon, one substream per sample.
[[nodiscard]] inline std::vector<Vector> sample_stationary(const OUSystem& sys, std::size_t n, const RngStream& rng,
                                                           unsigned threads = 1) {
  if (n == 0) throw Error(ErrorKind::Domain, "sample count must be >= 1");
  const std::size_t m = sys.dim();
  std::vector<Vector> out(n);
  if (is_deterministic(sys.noise())) {
    const Vector eq = stationary_mean(sys);
    for (auto& v : out) v = eq;
    return out;
  }
  if (is_brownian(sys.noise())) {
    const Matrix root = psd_sqrt(sigma_inf(sys));
    parallel_for(n, threads, [&](std::size_t i) {
      RngStream local = rng.substream(i);
      Vector z(m);
      for (double& v : z) v = local.normal();
      out[i] = root * z;
    });
    return out;
  }
  const double horizon = burn_in_horizon(sys);
  const double h_target = std::min(0.5 / sys.spectral_radius(), horizon / 16.0);
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / h_target));
  const Vector origin(m, 0.0);
  return simulate_endpoints(sys, origin, horizon, steps, n, rng, Scheme::ExponentialMidpoint, threads);
}

}  // namespace ouc
