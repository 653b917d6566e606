#include <gtest/gtest.h>

#include <cmath>

#include "ouc/cutoff.hpp"
#include "ouc/models.hpp"
#include "support.hpp"

using namespace ouc;
using namespace testing_support;

namespace {

void expect_kind(ErrorKind kind, auto&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected error " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

const Vector kEps{1e-1, 1e-2, 1e-3, 1e-4, 1e-5};

OUSystem diag12(NoiseSpec noise = Brownian{2}) {
  return build_system(Matrix::diagonal({1.0, 2.0}), Matrix::identity(2), std::move(noise));
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  // least squares slope of log y against log x
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::log(x[i]);
    const double b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Vector ratios_for(const CutoffReport& rep, double delta) {
  Vector out;
  for (const auto& c : rep.cells)
    if (c.delta == delta) out.push_back(c.estimate.upper / c.eps);
  return out;
}

}  // namespace

TEST(RateAnalysis, DiagonalExamples) {
  const auto sys = diag12();
  const auto a = rate_analysis(sys, Vector{0.0, 1.0});
  ASSERT_EQ(a.active.size(), 1u);
  EXPECT_NEAR(sys.spectral().values[a.active[0]].real(), 2.0, 1e-14);
  EXPECT_NEAR(a.rho_x, 2.0, 1e-14);
  const auto b = rate_analysis(sys, Vector{1.0, 1.0});
  EXPECT_EQ(b.active.size(), 2u);
  EXPECT_NEAR(b.rho_x, 1.0, 1e-14);
  EXPECT_EQ(b.resonant.size(), 1u);
  EXPECT_NEAR(b.rho_next, 2.0, 1e-14);
  // |e^{-At}(1,1)| e^t = sqrt(1 + e^{-2t}) sweeps (1, sqrt 2]
  EXPECT_NEAR(b.c2, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(b.c1, 1.0, 1e-7);
}

TEST(RateAnalysis, JacobiSlowestRate) {
  const auto sys = jacobi_system(JacobiParams{});
  Vector x(10, 0.0);
  x[0] = 1.0;
  const auto ra = rate_analysis(sys, x);
  EXPECT_NEAR(ra.rho_x, 0.0263377, 1e-4);
  EXPECT_EQ(ra.resonant.size(), 2u);  // conjugate pair
  EXPECT_GT(ra.c1, 0.0);
  EXPECT_LE(ra.c1, ra.c2);
}

TEST(RateAnalysis, OscillatorIsFullyResonant) {
  const auto sys = oscillator_system(OscillatorParams{});
  const auto ra = rate_analysis(sys, Vector{1.0, 0.0});
  EXPECT_NEAR(ra.rho_x, 0.05, 1e-12);
  EXPECT_EQ(ra.resonant.size(), 2u);
  EXPECT_TRUE(std::isnan(ra.rho_next));
  EXPECT_GT(ra.c1, 0.0);
}

TEST(RateAnalysis, EnvelopeHoldsAgainstMatrixExponential) {
  RngStream rng(21, 0);
  int checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(trial % 5);
    const auto sys = build_system(random_stable(rng, m), Matrix::identity(m), Brownian{m});
    if (!sys.generic()) continue;
    const Vector x = random_vector(rng, m);
    const auto ra = rate_analysis(sys, x);
    ASSERT_LE(ra.c1, ra.c2);
    ASSERT_GT(ra.c1, 0.0);
    for (std::size_t k = 0; k < ra.grid.size(); k += 7) {
      const double t = ra.grid[k];
      if (ra.rho_x * t > 300.0) break;  // squaring intermediates underflow past here; the modal form does not
      const double envelope = norm(propagate(sys, x, t)) * std::exp(ra.rho_x * t);
      // modal expansion and Pade exponential agree to rounding; the envelope is strict
      EXPECT_GE(envelope, ra.c1 * (1.0 - 1e-7)) << "trial " << trial << " t " << t;
      EXPECT_LE(envelope, ra.c2 * (1.0 + 1e-7)) << "trial " << trial << " t " << t;
      const double modal = scaled_envelope(sys, ra, t);
      EXPECT_GE(modal, ra.c1);
      EXPECT_LE(modal, ra.c2);
    }
    ++checked;
  }
  EXPECT_GE(checked, 45);
}

TEST(RateAnalysis, ScaleEquivariance) {
  RngStream rng(22, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(trial % 4);
    const auto sys = build_system(random_stable(rng, m), Matrix::identity(m), Brownian{m});
    if (!sys.generic()) continue;
    const Vector x = random_vector(rng, m);
    const double base = rate_analysis(sys, x).rho_x;
    for (double c : {-3.0, 1e-3, 1e5}) {
      Vector y = x;
      for (auto& v : y) v *= c;
      const auto ra = rate_analysis(sys, y);
      EXPECT_EQ(ra.rho_x, base);
      EXPECT_EQ(ra.active, rate_analysis(sys, x).active);
    }
  }
}

TEST(RateAnalysis, OrthogonalToSlowestMode) {
  // symmetric A with x orthogonal to v1: the rate is the next active eigenvalue (< 2 lambda_1)
  RngStream rng(23, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix q = random_orthogonal(rng, 3);
    const Matrix a = q * Matrix::diagonal({1.0, 1.5, 3.0}) * q.transpose();
    const auto sys = build_system(a, Matrix::identity(3), Brownian{3});
    Vector x(3);
    for (std::size_t i = 0; i < 3; ++i) x[i] = 0.7 * q(i, 1) - 0.2 * q(i, 2);
    EXPECT_NEAR(rate_analysis(sys, x).rho_x, 1.5, 1e-12);
    Vector y(3);
    for (std::size_t i = 0; i < 3; ++i) y[i] = q(i, 2);
    EXPECT_NEAR(rate_analysis(sys, y).rho_x, 3.0, 1e-12);
  }
}

TEST(RateAnalysis, Errors) {
  const auto repeated = build_system(Matrix::identity(2), Matrix::identity(2), Brownian{2});
  expect_kind(ErrorKind::NotGeneric, [&] { (void)rate_analysis(repeated, Vector{1.0, 0.0}); });
  const auto sys = diag12();
  expect_kind(ErrorKind::Domain, [&] { (void)rate_analysis(sys, Vector{0.0, 0.0}); });
  expect_kind(ErrorKind::Dimension, [&] { (void)rate_analysis(sys, Vector{1.0}); });
  expect_kind(ErrorKind::Inconsistency, [&] { (void)rate_analysis(sys, Vector{1.0, 1.0}, 10.0); });
}

TEST(CutoffTime, ExamplesAndMonotonicity) {
  EXPECT_NEAR(cutoff_time(1.0, std::exp(-1.0)), 1.0, 1e-15);
  EXPECT_NEAR(cutoff_time(2.0, 0.01), 2.302585092994046, 1e-14);
  EXPECT_NEAR(cutoff_time(0.0263377, 1e-3), 262.27, 0.01);
  EXPECT_GT(cutoff_time(1.0, 0.1), cutoff_time(1.1, 0.1));
  EXPECT_LT(cutoff_time(1.0, 0.1), cutoff_time(1.0, 0.01));
  expect_kind(ErrorKind::Domain, [] { (void)cutoff_time(1.0, 1.0); });
  expect_kind(ErrorKind::Domain, [] { (void)cutoff_time(1.0, 0.0); });
  expect_kind(ErrorKind::Domain, [] { (void)cutoff_time(0.0, 0.5); });
}

TEST(DichotomySweep, DiagonalBrownianExact) {
  const auto sys = diag12();
  const Vector x{1.0, 0.0};
  const Vector deltas{0.5, 2.0};
  const auto rep = dichotomy_sweep(sys, x, 2.0, kEps, deltas, 0, RngStream(24, 0));
  EXPECT_TRUE(rep.exact);
  EXPECT_NEAR(rep.rho_x, 1.0, 1e-14);
  ASSERT_EQ(rep.cells.size(), 10u);
  ASSERT_EQ(rep.verdicts.size(), 2u);
  EXPECT_EQ(rep.verdicts[0], Verdict::Diverging);
  EXPECT_EQ(rep.verdicts[1], Verdict::Vanishing);
  for (const auto& c : rep.cells) {
    // independent oracle: Gaussian marginal against the stationary law
    const double want = w2_gaussian(gaussian_marginal(sys, x, c.estimate.t), stationary_law(sys));
    EXPECT_NEAR(c.estimate.upper / want, 1.0, 1e-9);
    EXPECT_EQ(c.estimate.upper, c.estimate.lower);
    EXPECT_NEAR(c.estimate.t, c.delta * std::abs(std::log(c.eps)), 1e-12);
  }
  const Vector slow = ratios_for(rep, 0.5);
  const Vector fast = ratios_for(rep, 2.0);
  EXPECT_NEAR(loglog_slope(kEps, slow), -0.5, 0.05);
  EXPECT_NEAR(loglog_slope(kEps, fast), 1.0, 0.05);  // ratio ~ eps^{delta-1}
  for (std::size_t i = 1; i < fast.size(); ++i) EXPECT_LT(fast[i], fast[i - 1]);
  EXPECT_LT(fast.back(), 1e-2);
}

TEST(DichotomySweep, SymmetricDriftsGiveCutoff) {
  RngStream rng(25, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(trial % 4);
    const auto sys = build_system(random_spd(rng, m, 0.5), Matrix::identity(m), Brownian{m});
    // a finite grid needs a visible slow-mode component; a tiny <x, v1> only shows at smaller eps
    const auto se = sym_eig(sys.drift());
    Vector x = random_vector(rng, m, 0.5);
    for (std::size_t i = 0; i < m; ++i) x[i] += se.vectors(i, 0);
    const auto rep = dichotomy_sweep(sys, x, 2.0, kEps, Vector{0.5, 2.0}, 0, RngStream(25, 1));
    EXPECT_NEAR(rep.rho_x, sys.rho_min(), 1e-10);
    EXPECT_EQ(rep.verdicts[0], Verdict::Diverging) << trial;
    EXPECT_EQ(rep.verdicts[1], Verdict::Vanishing) << trial;
  }
}

TEST(DichotomySweep, MeanRouteForForcedNoise) {
  const auto sys =
      diag12(NoiseSum{{CompoundPoisson{2, 1.0, IsotropicGaussianJumps{1.0}}, Drift{{1.0, 1.0}}}});
  const Vector x{3.0, 0.0};
  const auto rep = dichotomy_sweep(sys, x, 1.0, Vector{1e-1, 1e-2, 1e-3, 1e-4}, Vector{0.5, 2.0}, 4000,
                                   RngStream(26, 0));
  EXPECT_FALSE(rep.exact);
  EXPECT_TRUE(rep.mean_condition);
  // z = x - A^{-1} sigma E[L_1] = (2, -0.5) keeps mode 1 active
  EXPECT_NEAR(rep.rho_lower, 1.0, 1e-12);
  EXPECT_FALSE(rep.rates_differ);
  for (const auto& c : rep.cells) {
    EXPECT_EQ(c.estimate.lower_route, Route::LowerMean);
    EXPECT_EQ(c.estimate.upper_route, Route::UpperDisintegration);
    EXPECT_EQ(c.estimate.lower_se, 0.0);
  }
  EXPECT_EQ(rep.verdicts[0], Verdict::Diverging);
  EXPECT_EQ(rep.verdicts[1], Verdict::Vanishing);
}

TEST(DichotomySweep, ReportsDifferingMeanRate) {
  const auto sys = diag12(NoiseSum{{Brownian{2}, Drift{{1.0, 1.0}}}});
  // stationary mean (1, 0.5); x - mean = (0, -0.5) has only the fast mode
  const auto rep = dichotomy_sweep(sys, Vector{1.0, 0.0}, 1.0, Vector{1e-1, 1e-2, 1e-3, 1e-4}, Vector{2.0}, 500,
                                   RngStream(27, 0));
  EXPECT_NEAR(rep.rho_x, 1.0, 1e-12);
  EXPECT_NEAR(rep.rho_lower, 2.0, 1e-12);
  EXPECT_TRUE(rep.rates_differ);
}

TEST(DichotomySweep, CenteredNoiseFallsBackToShift) {
  const auto sys = diag12(AlphaStable{2, 1.5, 1.0});
  const auto rep = dichotomy_sweep(sys, Vector{1.0, 0.0}, 1.0, Vector{1e-1, 1e-2, 1e-3}, Vector{0.5, 2.0}, 2000,
                                   RngStream(28, 0));
  for (const auto& c : rep.cells) {
    EXPECT_EQ(c.estimate.lower_route, Route::LowerShift);
    EXPECT_GE(c.estimate.lower, 0.0);
    EXPECT_LE(c.estimate.lower, c.estimate.upper + 5.0 * c.estimate.upper_se);
  }
}

TEST(DichotomySweep, ThreadCountDoesNotChangeResults) {
  const auto sys =
      diag12(NoiseSum{{CompoundPoisson{2, 2.0, IsotropicGaussianJumps{0.5}}, Drift{{0.5, 0.0}}}});
  const Vector eps{1e-1, 1e-2, 1e-3};
  const auto a = dichotomy_sweep(sys, Vector{1.0, 1.0}, 1.0, eps, Vector{0.5, 2.0}, 3000, RngStream(29, 0), 1);
  const auto b = dichotomy_sweep(sys, Vector{1.0, 1.0}, 1.0, eps, Vector{0.5, 2.0}, 3000, RngStream(29, 0), 8);
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(a.cells[i].estimate.upper, b.cells[i].estimate.upper);
    EXPECT_EQ(a.cells[i].estimate.upper_se, b.cells[i].estimate.upper_se);
    EXPECT_EQ(a.cells[i].estimate.lower, b.cells[i].estimate.lower);
  }
}

TEST(DichotomySweep, Errors) {
  const auto forced = diag12(NoiseSum{{Brownian{2}, Drift{{1.0, 1.0}}}});
  expect_kind(ErrorKind::DegenerateInitialState,
              [&] { (void)dichotomy_sweep(forced, Vector{1.0, 0.5}, 2.0, kEps, Vector{2.0}, 10, RngStream(1, 0)); });
  const auto sys = diag12();
  expect_kind(ErrorKind::DegenerateInitialState,
              [&] { (void)dichotomy_sweep(sys, Vector{0.0, 0.0}, 2.0, kEps, Vector{2.0}, 10, RngStream(1, 0)); });
  expect_kind(ErrorKind::Domain,
              [&] { (void)dichotomy_sweep(sys, Vector{1.0, 0.0}, 2.0, kEps, Vector{1.0}, 10, RngStream(1, 0)); });
  expect_kind(ErrorKind::Domain, [&] {
    (void)dichotomy_sweep(sys, Vector{1.0, 0.0}, 2.0, Vector{1e-2, 1e-1}, Vector{2.0}, 10, RngStream(1, 0));
  });
  expect_kind(ErrorKind::OutOfScope,
              [&] { (void)dichotomy_sweep(sys, Vector{1.0, 0.0}, 0.5, kEps, Vector{2.0}, 10, RngStream(1, 0)); });
}

TEST(WindowProfile, ExactProfileShape) {
  const auto sys = diag12();
  const Vector eps{1e-5, 1e-6, 1e-7, 1e-8};
  Vector r;
  for (int k = -10; k <= 10; ++k) r.push_back(static_cast<double>(k));
  const auto wp = window_profile(sys, Vector{1.0, 0.0}, 2.0, eps, r, 0, RngStream(30, 0));
  ASSERT_EQ(wp.cells.size(), eps.size() * r.size());
  ASSERT_EQ(wp.inf_lower.size(), r.size());
  for (std::size_t k = 1; k < r.size(); ++k) {
    EXPECT_LT(wp.inf_lower[k], wp.inf_lower[k - 1]);
    EXPECT_LT(wp.sup_upper[k], wp.sup_upper[k - 1]);
  }
  EXPECT_LT(wp.sup_upper.back(), 0.01);   // r = 10 / rho
  EXPECT_GT(wp.inf_lower.front(), 100.0);  // r = -10 / rho
  // the profile tends to e^{-rho r} as eps -> 0
  for (std::size_t k = 0; k < r.size(); ++k) {
    const auto& c = wp.cells[k * eps.size() + eps.size() - 1];
    EXPECT_NEAR(c.upper_ratio / std::exp(-r[k]), 1.0, 1e-3);
  }
}

TEST(ObservablePrecutoff, ScalarSecondMomentExact) {
  const double a = 1.3;
  const auto sys = build_system(Matrix{{a}}, Matrix{{1.0}}, Brownian{1});
  const auto rep = observable_precutoff(sys, Vector{0.0}, 2.0, kEps, 2.0, 0, RngStream(31, 0));
  EXPECT_NEAR(rep.rho, a, 1e-14);
  for (const auto& row : rep.rows) {
    EXPECT_TRUE(row.exact);
    EXPECT_NEAR(row.gap / (std::exp(-2.0 * a * row.t) / (2.0 * a)), 1.0, 1e-10);
  }
  EXPECT_EQ(rep.verdict, Verdict::Vanishing);
  const auto moved = observable_precutoff(sys, Vector{1.0}, 2.0, kEps, 2.0, 0, RngStream(31, 0));
  for (const auto& row : moved.rows) {
    const double f = std::exp(-a * row.t);
    EXPECT_NEAR(row.gap / std::abs(f * f - f * f / (2.0 * a)), 1.0, 1e-10);
  }
  EXPECT_EQ(moved.verdict, Verdict::Vanishing);
}

TEST(ObservablePrecutoff, StableFirstMomentMonteCarlo) {
  const auto sys = build_system(Matrix{{1.0}}, Matrix{{1.0}}, AlphaStable{1, 1.5, 1.0});
  const auto rep =
      observable_precutoff(sys, Vector{1.0}, 1.0, Vector{1e-1, 1e-2, 1e-3, 1e-4}, 2.0, 100000, RngStream(32, 0));
  ASSERT_EQ(rep.rows.size(), 4u);
  for (std::size_t i = 1; i < rep.rows.size(); ++i) EXPECT_LT(rep.rows[i].ratio, rep.rows[i - 1].ratio);
  EXPECT_EQ(rep.verdict, Verdict::Vanishing);
}

TEST(ObservablePrecutoff, Errors) {
  const auto sys = build_system(Matrix{{1.0}}, Matrix{{1.0}}, Brownian{1});
  expect_kind(ErrorKind::OutOfScope,
              [&] { (void)observable_precutoff(sys, Vector{1.0}, 2.0, kEps, 1.0, 10, RngStream(1, 0)); });
  expect_kind(ErrorKind::OutOfScope,
              [&] { (void)observable_precutoff(sys, Vector{1.0}, 2.0, kEps, 0.5, 10, RngStream(1, 0)); });
  expect_kind(ErrorKind::OutOfScope,
              [&] { (void)observable_precutoff(sys, Vector{1.0}, 0.5, kEps, 2.0, 10, RngStream(1, 0)); });
}

TEST(Verdicts, NamesAndRoutes) {
  EXPECT_STREQ(to_string(Verdict::Vanishing), "vanishing");
  EXPECT_STREQ(to_string(Verdict::Diverging), "diverging");
  EXPECT_STREQ(to_string(Verdict::Inconclusive), "inconclusive");
  EXPECT_STREQ(to_string(Route::LowerMean), "lower_mean");
  EXPECT_STREQ(to_string(Route::LowerShift), "lower_shift");
  // too few points is never decisive
  const auto rep = dichotomy_sweep(diag12(), Vector{1.0, 0.0}, 2.0, Vector{1e-1, 1e-2, 1e-3}, Vector{0.5, 2.0}, 0,
                                   RngStream(33, 0));
  EXPECT_EQ(rep.verdicts[0], Verdict::Inconclusive);
  EXPECT_EQ(rep.verdicts[1], Verdict::Inconclusive);
}
