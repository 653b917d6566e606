#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <type_traits>
#include <utility>
#include <string>
#include <variant>
#include <vector>

#include "ouc/error.hpp"
#include "ouc/matrix.hpp"
#include "ouc/rng.hpp"

namespace ouc {

/// Standard Brownian motion in R^dim (unit covariance per unit time).
struct Brownian {
  std::size_t dim = 1;
};

/// Independent symmetric alpha-stable coordinates; alpha in (1, 2) keeps the first moment finite.
struct AlphaStable {
  std::size_t dim = 1;
  double alpha = 1.5;
  double scale = 1.0;
};

struct IsotropicGaussianJumps {
  double std = 1.0;
};

struct FixedAtoms {
  std::vector<Vector> points;
  Vector weights;
};

using JumpLaw = std::variant<IsotropicGaussianJumps, FixedAtoms>;

struct CompoundPoisson {
  std::size_t dim = 1;
  double rate = 1.0;  ///< jumps per unit time
  JumpLaw jumps = IsotropicGaussianJumps{};
};

/// Deterministic drift gamma * t.
struct Drift {
  Vector gamma;
};

struct NoiseSpec;

/// Independent sum of drivers of equal dimension.
struct NoiseSum {
  std::vector<NoiseSpec> parts;
};

struct NoiseSpec {
  std::variant<Brownian, AlphaStable, CompoundPoisson, Drift, NoiseSum> kind;

  NoiseSpec() : kind(Brownian{}) {}
  template <typename T>
    requires(!std::is_same_v<std::decay_t<T>, NoiseSpec>)
  NoiseSpec(T&& k) : kind(std::forward<T>(k)) {}  // NOLINT(google-explicit-constructor)
};

inline constexpr std::uint64_t kMaxJumpsPerIncrement = 1'000'000;

namespace detail {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;
}  // namespace detail

[[nodiscard]] inline std::size_t noise_dim(const NoiseSpec& spec) {
  return std::visit(detail::overloaded{
                        [](const Brownian& b) { return b.dim; },
                        [](const AlphaStable& a) { return a.dim; },
                        [](const CompoundPoisson& c) { return c.dim; },
                        [](const Drift& d) { return d.gamma.size(); },
                        [](const NoiseSum& s) { return s.parts.empty() ? 0 : noise_dim(s.parts.front()); },
                    },
                    spec.kind);
}

/// Throws Domain/Dimension on any violated invariant.
inline void validate(const NoiseSpec& spec) {
  std::visit(
      detail::overloaded{
          [](const Brownian& b) {
            if (b.dim == 0) throw Error(ErrorKind::Domain, "brownian dim must be >= 1");
          },
          [](const AlphaStable& a) {
            if (a.dim == 0) throw Error(ErrorKind::Domain, "alpha_stable dim must be >= 1");
            if (!(a.alpha > 1.0 && a.alpha < 2.0)) {
              throw Error(ErrorKind::Domain, "alpha must lie in (1, 2), got " + std::to_string(a.alpha));
            }
            if (!(a.scale > 0.0)) throw Error(ErrorKind::Domain, "alpha_stable scale must be > 0");
          },
          [](const CompoundPoisson& c) {
            if (c.dim == 0) throw Error(ErrorKind::Domain, "compound_poisson dim must be >= 1");
            if (!(c.rate >= 0.0) || !std::isfinite(c.rate)) {
              throw Error(ErrorKind::Domain, "compound_poisson rate must be finite and >= 0");
            }
            std::visit(detail::overloaded{
                           [](const IsotropicGaussianJumps& g) {
                             if (!(g.std >= 0.0)) throw Error(ErrorKind::Domain, "jump std must be >= 0");
                           },
                           [&c](const FixedAtoms& f) {
                             if (f.points.empty() || f.points.size() != f.weights.size()) {
                               throw Error(ErrorKind::Domain, "fixed atoms need matching points and weights");
                             }
                             double total = 0.0;
                             for (std::size_t i = 0; i < f.points.size(); ++i) {
                               if (f.points[i].size() != c.dim) {
                                 throw Error(ErrorKind::Dimension, "atom dimension mismatch");
                               }
                               if (!(f.weights[i] >= 0.0)) throw Error(ErrorKind::Domain, "negative atom weight");
                               total += f.weights[i];
                             }
                             if (std::abs(total - 1.0) > 1e-12) {
                               throw Error(ErrorKind::Domain, "atom weights must sum to 1");
                             }
                           },
                       },
                       c.jumps);
          },
          [](const Drift& d) {
            if (d.gamma.empty()) throw Error(ErrorKind::Domain, "drift vector is empty");
            for (double g : d.gamma)
              if (!std::isfinite(g)) throw Error(ErrorKind::Domain, "drift must be finite");
          },
          [](const NoiseSum& s) {
            if (s.parts.empty()) throw Error(ErrorKind::Domain, "empty noise sum");
            const std::size_t d = noise_dim(s.parts.front());
            for (const auto& p : s.parts) {
              validate(p);
              if (noise_dim(p) != d) throw Error(ErrorKind::Dimension, "noise sum parts differ in dimension");
            }
          },
      },
      spec.kind);
}

/// Exact E[L_1].
[[nodiscard]] inline Vector noise_mean(const NoiseSpec& spec) {
  const std::size_t n = noise_dim(spec);
  return std::visit(
      detail::overloaded{
          [n](const Brownian&) { return Vector(n, 0.0); },
          [n](const AlphaStable&) { return Vector(n, 0.0); },
          [n](const CompoundPoisson& c) {
            Vector m(n, 0.0);
            if (const auto* atoms = std::get_if<FixedAtoms>(&c.jumps)) {
              for (std::size_t i = 0; i < atoms->points.size(); ++i)
                for (std::size_t k = 0; k < n; ++k) m[k] += c.rate * atoms->weights[i] * atoms->points[i][k];
            }
            return m;
          },
          [](const Drift& d) { return d.gamma; },
          [n](const NoiseSum& s) {
            Vector m(n, 0.0);
            for (const auto& p : s.parts) m = add(m, noise_mean(p));
            return m;
          },
      },
      spec.kind);
}

/// True when the driver is a single standard Brownian motion.
[[nodiscard]] inline bool is_brownian(const NoiseSpec& spec) {
  return std::holds_alternative<Brownian>(spec.kind);
}

/// True when the driver has no random component.
[[nodiscard]] inline bool is_deterministic(const NoiseSpec& spec) {
  return std::visit(detail::overloaded{
                        [](const Brownian&) { return false; },
                        [](const AlphaStable&) { return false; },
                        [](const CompoundPoisson& c) {
                          if (c.rate == 0.0) return true;
                          if (const auto* g = std::get_if<IsotropicGaussianJumps>(&c.jumps)) {
                            return g->std == 0.0;
                          }
                          return false;
                        },
                        [](const Drift&) { return true; },
                        [](const NoiseSum& s) {
                          for (const auto& p : s.parts)
                            if (!is_deterministic(p)) return false;
                          return true;
                        },
                    },
                    spec.kind);
}

/// Sum of all Drift components (the part integrated exactly by exponential schemes).
[[nodiscard]] inline Vector drift_part(const NoiseSpec& spec) {
  const std::size_t n = noise_dim(spec);
  return std::visit(detail::overloaded{
                        [n](const Drift& d) { return d.gamma; },
                        [n](const NoiseSum& s) {
                          Vector g(n, 0.0);
                          for (const auto& p : s.parts) g = add(g, drift_part(p));
                          return g;
                        },
                        [n](const auto&) { return Vector(n, 0.0); },
                    },
                    spec.kind);
}

namespace detail {

/// Standard symmetric alpha-stable variate (Chambers-Mallows-Stuck); at alpha = 2
/// this is N(0, 2).
[[nodiscard]] inline double symmetric_stable(double alpha, RngStream& rng) {
  const double v = std::numbers::pi * (rng.uniform() - 0.5);
  const double w = rng.exponential();
  return std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
         std::pow(std::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
}

inline void add_increment(const NoiseSpec& spec, double dt, RngStream& rng, Vector& out,
                          bool include_drift) {
  std::visit(overloaded{
                 [&](const Brownian&) {
                   const double sd = std::sqrt(dt);
                   for (double& v : out) v += sd * rng.normal();
                 },
                 [&](const AlphaStable& a) {
                   const double s = a.scale * std::pow(dt, 1.0 / a.alpha);
                   for (double& v : out) v += s * symmetric_stable(a.alpha, rng);
                 },
                 [&](const CompoundPoisson& c) {
                   if (c.rate == 0.0) return;
                   const std::uint64_t jumps = rng.poisson(c.rate * dt);
                   if (jumps > kMaxJumpsPerIncrement) {
                     throw Error(ErrorKind::Domain, "compound Poisson increment exceeds 1e6 jumps; reduce dt");
                   }
                   for (std::uint64_t j = 0; j < jumps; ++j) {
                     std::visit(overloaded{
                                    [&](const IsotropicGaussianJumps& g) {
                                      for (double& v : out) v += g.std * rng.normal();
                                    },
                                    [&](const FixedAtoms& f) {
                                      const double u = rng.uniform();
                                      double cdf = 0.0;
                                      std::size_t pick = f.weights.size() - 1;
                                      for (std::size_t i = 0; i < f.weights.size(); ++i) {
                                        cdf += f.weights[i];
                                        if (u < cdf) {
                                          pick = i;
                                          break;
                                        }
                                      }
                                      for (std::size_t k = 0; k < out.size(); ++k) out[k] += f.points[pick][k];
                                    },
                                },
                                c.jumps);
                   }
                 },
                 [&](const Drift& d) {
                   if (!include_drift) return;
                   for (std::size_t k = 0; k < out.size(); ++k) out[k] += d.gamma[k] * dt;
                 },
                 [&](const NoiseSum& s) {
                   for (const auto& p : s.parts) add_increment(p, dt, rng, out, include_drift);
                 },
             },
             spec.kind);
}

}  // namespace detail

/// One increment L_{t+dt} - L_t.
[[nodiscard]] inline Vector sample_increment(const NoiseSpec& spec, double dt, RngStream& rng) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::Domain, "increment dt must be > 0");
  Vector out(noise_dim(spec), 0.0);
  detail::add_increment(spec, dt, rng, out, /*include_drift=*/true);
  return out;
}

/// Increment with every Drift component left out.
[[nodiscard]] inline Vector sample_random_increment(const NoiseSpec& spec, double dt, RngStream& rng) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::Domain, "increment dt must be > 0");
  Vector out(noise_dim(spec), 0.0);
  detail::add_increment(spec, dt, rng, out, /*include_drift=*/false);
  return out;
}

}  // namespace ouc
