#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ouc/io.hpp"
#include "ouc/linalg.hpp"
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

bool contains_value(const CVector& values, Complex want, double tol) {
  return std::any_of(values.begin(), values.end(), [&](const Complex& v) { return std::abs(v - want) <= tol; });
}

// Simpson's rule for int_0^T e^{-As} Q e^{-A^T s} ds.
Matrix covariance_quadrature(const Matrix& a, const Matrix& q, double t_end, int panels) {
  const double h = t_end / panels;
  const Matrix step = mat_exp(a, -h);
  Matrix f = Matrix::identity(a.rows());
  Matrix acc(a.rows(), a.rows());
  for (int k = 0; k <= panels; ++k) {
    const double w = (k == 0 || k == panels) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    acc += (f * q * f.transpose()) * (w * h / 3.0);
    f = step * f;
  }
  return acc;
}

}  // namespace

TEST(MatExp, ZeroTimeIsIdentity) {
  RngStream rng(1, 0);
  const Matrix m = random_matrix(rng, 3, 3);
  EXPECT_EQ(mat_exp(m, 0.0), Matrix::identity(3));
}

TEST(MatExp, DiagonalCase) {
  const Matrix e = mat_exp(Matrix::diagonal({-1.0, -2.0}), 1.0);
  EXPECT_NEAR(e(0, 0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(e(1, 1), std::exp(-2.0), 1e-15);
  EXPECT_EQ(e(0, 1), 0.0);
  EXPECT_EQ(e(1, 0), 0.0);
}

TEST(MatExp, NilpotentSeriesTruncates) {
  const Matrix e = mat_exp(Matrix{{0.0, 1.0}, {0.0, 0.0}}, 3.0);
  EXPECT_NEAR(rel_frob(e, Matrix{{1.0, 3.0}, {0.0, 1.0}}), 0.0, 1e-15);
}

TEST(MatExp, RotationGeneratorAtLargeNorm) {
  // exp of t [[0,-1],[1,0]] is the rotation by t; ||Mt|| = 100 stresses squaring.
  const double t = 100.0;
  const Matrix e = mat_exp(Matrix{{0.0, -1.0}, {1.0, 0.0}}, t);
  const Matrix want{{std::cos(t), -std::sin(t)}, {std::sin(t), std::cos(t)}};
  EXPECT_LE(rel_frob(e, want), 1e-12);
}

TEST(MatExp, SymmetricMatchesSpectralOracle) {
  RngStream rng(2, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(trial % 6);
    Matrix s = random_matrix(rng, m, m);
    s = symmetrize(s) * 3.0;
    const double t = 0.1 + 2.0 * rng.uniform();
    const auto se = sym_eig(s);
    Matrix d(m, m);
    for (std::size_t k = 0; k < m; ++k) d(k, k) = std::exp(se.values[k] * t);
    const Matrix want = se.vectors * d * se.vectors.transpose();
    EXPECT_LE(rel_frob(mat_exp(s, t), want), 1e-12) << "trial " << trial;
  }
}

TEST(MatExp, SemigroupProperty) {
  RngStream rng(3, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(trial % 5);
    Matrix g = random_matrix(rng, m, m);
    g *= 5.0 * rng.uniform() / frobenius_norm(g);
    const double s = 3.0 * rng.uniform();
    const double t = 3.0 * rng.uniform();
    const Matrix lhs = mat_exp(g, s + t);
    const Matrix rhs = mat_exp(g, s) * mat_exp(g, t);
    EXPECT_LE(frobenius_norm(lhs - rhs), 1e-10 * std::max(1.0, frobenius_norm(lhs)));
  }
}

TEST(MatExp, SimilarityInvariance) {
  RngStream rng(4, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 3 + static_cast<std::size_t>(trial % 4);
    const Matrix g = random_matrix(rng, m, m);
    // Well-conditioned P: identity plus a small perturbation.
    Matrix p = Matrix::identity(m) + random_matrix(rng, m, m, 0.2);
    const Matrix pinv = inverse(p);
    const double t = 0.5 + rng.uniform();
    const Matrix lhs = p * mat_exp(g, t) * pinv;
    const Matrix rhs = mat_exp(p * g * pinv, t);
    EXPECT_LE(frobenius_norm(lhs - rhs), 1e-9 * std::max(1.0, frobenius_norm(lhs)));
  }
}

TEST(MatExp, Errors) {
  expect_kind(ErrorKind::Dimension, [] { (void)mat_exp(Matrix(2, 3), 1.0); });
  expect_kind(ErrorKind::Domain, [] { (void)mat_exp(Matrix::identity(2), std::nan("")); });
  expect_kind(ErrorKind::Domain, [] { (void)mat_exp(Matrix::identity(2), INFINITY); });
}

TEST(Eig, DiagonalSpectrum) {
  const auto es = eig(Matrix::diagonal({1.0, 2.0, 3.0}));
  ASSERT_EQ(es.values.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(es.values[k].real(), k + 1.0, 1e-14);
    EXPECT_EQ(es.values[k].imag(), 0.0);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::abs(es.vectors(i, k)), i == k ? 1.0 : 0.0, 1e-14);
  }
  EXPECT_TRUE(es.distinct);
}

TEST(Eig, RotationGenerator) {
  const auto es = eig(Matrix{{0.0, -1.0}, {1.0, 0.0}});
  EXPECT_TRUE(contains_value(es.values, {0.0, 1.0}, 1e-14));
  EXPECT_TRUE(contains_value(es.values, {0.0, -1.0}, 1e-14));
  // conjugate pair adjacent, positive imaginary part first
  EXPECT_GT(es.values[0].imag(), 0.0);
  EXPECT_EQ(es.values[1], std::conj(es.values[0]));
}

TEST(Eig, RepeatedEigenvalueNotDistinct) {
  const auto es = eig(Matrix{{1.0, 1.0}, {0.0, 1.0}});
  EXPECT_FALSE(es.distinct);
  EXPECT_NEAR(es.values[0].real(), 1.0, 1e-7);
  EXPECT_NEAR(es.values[1].real(), 1.0, 1e-7);
}

TEST(Eig, ResidualsAndUnitVectors) {
  RngStream rng(5, 0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 1 + static_cast<std::size_t>(trial % 12);
    const Matrix g = random_matrix(rng, m, m);
    const auto es = eig(g);
    EXPECT_LE(eig_residual(g, es), 1e-9 * std::max(1.0, frobenius_norm(g))) << "m=" << m;
    for (std::size_t j = 0; j < m; ++j) {
      double n = 0.0;
      for (std::size_t i = 0; i < m; ++i) n += std::norm(es.vectors(i, j));
      EXPECT_NEAR(std::sqrt(n), 1.0, 1e-12);
    }
    // the spectrum of a real matrix is closed under conjugation
    for (const auto& v : es.values) EXPECT_TRUE(contains_value(es.values, std::conj(v), 1e-8));
  }
}

TEST(Eig, InvariantUnderOrthogonalSimilarity) {
  RngStream rng(6, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(trial % 7);
    const Matrix g = random_matrix(rng, m, m);
    const Matrix u = random_orthogonal(rng, m);
    const auto a = eig(g).values;
    const auto b = eig(u.transpose() * g * u).values;
    for (const auto& v : a) EXPECT_TRUE(contains_value(b, v, 1e-8)) << v;
  }
}

TEST(Eig, JacobiChainSlowestMode) {
  // m = 5 chain, kappa = varsigma = 1, gamma = 0.01.
  Matrix a(10, 10);
  a(0, 0) = 1.0;
  a(4, 4) = 1.0;
  for (std::size_t i = 0; i < 5; ++i) {
    a(i, 5 + i) = (i == 0 || i == 4) ? 1.01 : 2.01;
    if (i > 0) a(i, 5 + i - 1) = -1.0;
    if (i < 4) a(i, 5 + i + 1) = -1.0;
    a(5 + i, i) = -1.0;
  }
  const auto es = eig(a);
  EXPECT_NEAR(es.values[0].real(), 0.0263377, 1e-6);
  EXPECT_NEAR(std::abs(es.values[0].imag()), 1.88656, 1e-5);
  EXPECT_TRUE(es.distinct);
}

TEST(Eig, CapacityAndDomain) {
  expect_kind(ErrorKind::Capacity, [] { (void)eig(Matrix::identity(65)); });
  expect_kind(ErrorKind::Dimension, [] { (void)eig(Matrix(2, 3)); });
  expect_kind(ErrorKind::Domain, [] { (void)eig(Matrix{{NAN, 0.0}, {0.0, 1.0}}); });
}

TEST(SymEig, MatchesDefinition) {
  RngStream rng(7, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + static_cast<std::size_t>(trial % 9);
    const Matrix s = random_spd(rng, m);
    const auto se = sym_eig(s);
    EXPECT_TRUE(std::is_sorted(se.values.begin(), se.values.end()));
    Matrix d(m, m);
    for (std::size_t k = 0; k < m; ++k) d(k, k) = se.values[k];
    EXPECT_LE(rel_frob(se.vectors * d * se.vectors.transpose(), s), 1e-13);
    EXPECT_LE(frobenius_norm(se.vectors.transpose() * se.vectors - Matrix::identity(m)), 1e-13);
  }
}

TEST(PsdSqrt, TrivialCases) {
  EXPECT_LE(rel_frob(psd_sqrt(Matrix::identity(4)), Matrix::identity(4)), 1e-15);
  EXPECT_LE(rel_frob(psd_sqrt(Matrix::diagonal({4.0, 9.0})), Matrix::diagonal({2.0, 3.0})), 1e-15);
}

TEST(PsdSqrt, RecoversKnownRoot) {
  RngStream rng(8, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = 1 + static_cast<std::size_t>(trial % 8);
    const Matrix s0 = random_spd(rng, m, 0.0);  // possibly near-singular root
    const Matrix c = symmetrize(s0 * s0);
    const Matrix s = psd_sqrt(c);
    EXPECT_LE(frobenius_norm(s - s0), 1e-9 * std::max(1.0, frobenius_norm(s0))) << "trial " << trial;
    EXPECT_LE(frobenius_norm(s * s - c), 1e-9 * std::max(1.0, frobenius_norm(c)));
    EXPECT_LE(max_asymmetry(s), 0.0);
  }
}

TEST(PsdSqrt, CommutesWithOrthogonalConjugation) {
  RngStream rng(9, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(trial % 6);
    const Matrix c = random_spd(rng, m);
    const Matrix u = random_orthogonal(rng, m);
    const Matrix lhs = psd_sqrt(symmetrize(u.transpose() * c * u));
    const Matrix rhs = u.transpose() * psd_sqrt(c) * u;
    EXPECT_LE(frobenius_norm(lhs - rhs), 1e-9);
  }
}

TEST(PsdSqrt, ClampsRoundoffAndRejectsNegatives) {
  const Matrix tiny = Matrix::diagonal({1.0, -5e-11});
  const Matrix s = psd_sqrt(tiny);
  EXPECT_EQ(s(1, 1), 0.0);
  expect_kind(ErrorKind::NotPsd, [] { (void)psd_sqrt(Matrix::diagonal({1.0, -1e-6})); });
  expect_kind(ErrorKind::Domain, [] { (void)psd_sqrt(Matrix{{1.0, 0.5}, {0.0, 1.0}}); });
}

TEST(Lyapunov, TrivialCases) {
  EXPECT_LE(rel_frob(lyapunov_solve(Matrix::identity(3), Matrix::identity(3)), Matrix::identity(3) * 0.5), 1e-15);
  const Matrix sol = lyapunov_solve(Matrix::diagonal({2.0, 5.0}), Matrix::diagonal({3.0, 7.0}));
  EXPECT_NEAR(sol(0, 0), 3.0 / 4.0, 1e-15);
  EXPECT_NEAR(sol(1, 1), 7.0 / 10.0, 1e-15);
  EXPECT_NEAR(sol(0, 1), 0.0, 1e-15);
}

TEST(Lyapunov, ResidualAndQuadratureOracle) {
  RngStream rng(10, 0);
  const Matrix a = random_stable(rng, 5, 0.5);
  const Matrix sigma = random_matrix(rng, 5, 3);
  const Matrix q = sigma * sigma.transpose();
  const Matrix sol = lyapunov_solve(a, q);
  EXPECT_LE(frobenius_norm(a * sol + sol * a.transpose() - q), 1e-10 * std::max(1.0, frobenius_norm(q)));
  // e^{-2 rho T} ||Q|| <= 1e-12 with rho >= 0.5
  const double t_end = std::log(1e12 * std::max(1.0, frobenius_norm(q))) / (2.0 * 0.5);
  const Matrix quad = covariance_quadrature(a, q, t_end, 20000);
  EXPECT_LE(frobenius_norm(quad - sol), 1e-6);
}

TEST(Lyapunov, SymmetricPsdForPsdInput) {
  RngStream rng(11, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = 1 + static_cast<std::size_t>(trial % 8);
    const Matrix a = random_stable(rng, m);
    const Matrix sigma = random_matrix(rng, m, 1 + trial % 3);
    const Matrix q = sigma * sigma.transpose();
    const Matrix sol = lyapunov_solve(a, q);
    EXPECT_LE(max_asymmetry(sol), 1e-12 * std::max(1.0, frobenius_norm(sol)));
    EXPECT_GE(min_eigenvalue(sol), -1e-10);
  }
}

TEST(Lyapunov, RejectsUnstableDrift) {
  expect_kind(ErrorKind::NotHurwitz, [] { (void)lyapunov_solve(Matrix::diagonal({-1.0, 2.0}), Matrix::identity(2)); });
  expect_kind(ErrorKind::Dimension, [] { (void)lyapunov_solve(Matrix::identity(2), Matrix::identity(3)); });
}

TEST(LinearSolve, PivotedSolveAndSingular) {
  const Matrix a{{0.0, 2.0}, {3.0, 1.0}};
  const Vector x = solve(a, Vector{4.0, 5.0});
  EXPECT_NEAR(x[0], 1.0, 1e-15);
  EXPECT_NEAR(x[1], 2.0, 1e-15);
  expect_kind(ErrorKind::NumericalFailure, [] { (void)solve(Matrix{{1.0, 2.0}, {2.0, 4.0}}, Vector{1.0, 1.0}); });
}

TEST(MatrixCsv, RoundTripIsExact) {
  RngStream rng(12, 0);
  const Matrix m = random_matrix(rng, 4, 3, 1e3);
  EXPECT_EQ(matrix_from_csv(matrix_to_csv(m)), m);
  try {
    (void)matrix_from_csv("1,2\n3\n");
    ADD_FAILURE() << "ragged CSV accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
}
