#include <gtest/gtest.h>

#include <Eigen/Sparse>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "lightcone/onebody.hpp"

using namespace lightcone;

namespace {

constexpr double pi = std::numbers::pi;

GridFunction cos_potential(const Grid& g) {
  return GridFunction::sample(g, [&](const Coord& y) { return cplx(std::cos(2 * pi * y[0] / g.length())); });
}

// Ground energy of -1/2 u'' + cos(2 pi y / L) u on the periodic interval, by a
// second-order finite-difference discretization and inverse iteration.
double fd_ground_energy(int N, double L) {
  const double h = L / N;
  std::vector<Eigen::Triplet<double>> trip;
  const double shift = -2.0;  // below min V, so H - shift is positive definite
  for (int i = 0; i < N; ++i) {
    double y = -0.5 * L + i * h;
    trip.emplace_back(i, i, 1.0 / (h * h) + std::cos(2 * pi * y / L) - shift);
    trip.emplace_back(i, (i + 1) % N, -0.5 / (h * h));
    trip.emplace_back(i, (i + N - 1) % N, -0.5 / (h * h));
  }
  Eigen::SparseMatrix<double> A(N, N);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(N);
  double mu = 0.0;
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd w = ldlt.solve(v);
    double next = v.dot(w) / v.dot(v);
    v = w.normalized();
    if (std::abs(next - mu) < 1e-15 * std::abs(next)) break;
    mu = next;
  }
  return 1.0 / mu + shift;
}

// Continuum free evolution of exp(-y^2 / 2 s^2) under e^{-i t kappa p^2}.
cplx free_gaussian(double y, double s, double kappa, double t) {
  cplx w = s * s + cplx(0.0, 2.0 * kappa * t);
  return std::sqrt(s * s / w) * std::exp(-y * y / (2.0 * w));
}

}  // namespace

TEST(OneBody, FreeSpectrumIsMomentumShells) {
  Grid g(1, 64, 12.0);
  auto T = OneBodyOperator::free(g, 0.5);
  std::vector<double> expected;
  for (int k = 0; k < 64; ++k) expected.push_back(0.5 * std::pow(g.axis_momentum(k), 2));
  std::sort(expected.begin(), expected.end());
  for (int i = 0; i < 64; ++i) EXPECT_NEAR(T.eigenvalues()[i], expected[size_t(i)], 1e-10);
}

TEST(OneBody, ConstantPotentialShifts) {
  Grid g(2, 8, 6.0);
  auto T0 = OneBodyOperator::free(g, 1.0);
  GridFunction c = GridFunction::sample(g, [](const Coord&) { return cplx(1.75); });
  OneBodyOperator T1(g, c, 1.0);
  EXPECT_LT((T1.eigenvalues() - T0.eigenvalues() - Eigen::VectorXd::Constant(64, 1.75)).cwiseAbs().maxCoeff(),
            1e-11);
}

TEST(OneBody, HermitianAndUnitaryEigenbasis) {
  Grid g(1, 128, 10.0);
  OneBodyOperator T(g, cos_potential(g));
  Eigen::MatrixXd H = T.matrix();
  EXPECT_LT((H - H.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  const auto& U = T.eigenvectors();
  EXPECT_LT((U.transpose() * U - Eigen::MatrixXd::Identity(128, 128)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(OneBody, ComplexPotentialRejected) {
  Grid g(1, 16, 4.0);
  auto V = GridFunction::sample(g, [](const Coord&) { return cplx(0.0, 1.0); });
  try {
    OneBodyOperator T(g, V);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::model);
  }
}

TEST(OneBody, CapacityError) {
  Grid g(1, 8192, 100.0);
  try {
    OneBodyOperator T(g, GridFunction(g));
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::capacity);
  }
  OneBodyOperator T(g, GridFunction(g), 0.5, true);
  EXPECT_FALSE(T.has_spectrum());
  auto phi = make_gaussian(g, 1.0, {0, 0}, Normalization::l2);
  auto psi = T.propagate(phi, 0.5, {PropagationMethod::splitstep, 0.01});
  EXPECT_NEAR(psi.l2_norm(), 1.0, 1e-10);
  EXPECT_THROW(T.propagate(phi, 0.5), error);
}

TEST(OneBody, MathieuGroundEnergyMatchesFiniteDifferences) {
  const double L = 10.0;
  Grid g(1, 128, L);
  OneBodyOperator T(g, cos_potential(g));
  double e1 = fd_ground_energy(1024, L), e2 = fd_ground_energy(2048, L);
  double oracle = (4.0 * e2 - e1) / 3.0;
  EXPECT_NEAR(T.eigenvalues()[0], oracle, 1e-6);
}

TEST(OneBody, PropagationBasics) {
  Grid g(1, 256, 20.0);
  OneBodyOperator T(g, cos_potential(g));
  auto phi = make_gaussian(g, 1.0, {1.0, 0}, Normalization::l2);
  EXPECT_EQ((T.propagate(phi, 0.0).values() - phi.values()).norm(), 0.0);
  for (double t : {0.3, 1.0, 5.0, -2.0}) EXPECT_NEAR(T.propagate(phi, t).l2_norm(), 1.0, 1e-10);
  auto ab = T.propagate(T.propagate(phi, 0.7), 1.1);
  auto direct = T.propagate(phi, 1.8);
  EXPECT_LT((ab - direct).l2_norm(), 1e-10);
}

TEST(OneBody, FreePropagationIsFourierPhase) {
  Grid g(1, 256, 20.0);
  auto T = OneBodyOperator::free(g, 0.5);
  auto phi = make_gaussian(g, 1.0, {-2.0, 0}, Normalization::l2);
  const double t = 1.3;
  Eigen::VectorXcd mult(g.size());
  auto k2 = g.momentum_squared();
  for (Eigen::Index i = 0; i < g.size(); ++i) mult[i] = std::exp(cplx(0, -0.5 * k2[i] * t));
  auto oracle = fourier_multiply(phi, mult);
  EXPECT_LT((T.propagate(phi, t) - oracle).l2_norm(), 1e-10);
}

TEST(OneBody, SplitStepMatchesSpectral) {
  Grid g(1, 128, 10.0);
  OneBodyOperator T(g, cos_potential(g));
  auto phi = make_gaussian(g, 0.8, {0.5, 0}, Normalization::l2);
  auto a = T.propagate(phi, 1.0);
  auto b = T.propagate(phi, 1.0, {PropagationMethod::splitstep, 1e-3});
  EXPECT_LT((a - b).l2_norm(), 1e-6);
  EXPECT_THROW(T.propagate(phi, 1.0, {PropagationMethod::splitstep, 0.0}), error);
}

TEST(OneBody, CutoffLimitsAndCommutation) {
  Grid g(1, 64, 10.0);
  OneBodyOperator T(g, cos_potential(g));
  const double lmax = T.eigenvalues().maxCoeff();
  Eigen::MatrixXcd id = T.spectral_cutoff_matrix(EnergyCutoff(lmax + 1.0, 2.0));
  EXPECT_LT((id - Eigen::MatrixXcd::Identity(64, 64)).cwiseAbs().maxCoeff(), 1e-12);
  // min eigenvalue is about -0.7; choose alpha E below it only for positive
  // spectra, so shift V up.
  auto Vp = GridFunction::sample(g, [&](const Coord& y) { return cplx(5.0 + std::cos(2 * pi * y[0] / 10.0)); });
  OneBodyOperator Tp(g, Vp);
  Eigen::MatrixXcd zero = Tp.spectral_cutoff_matrix(EnergyCutoff(1.0, 2.0));
  EXPECT_EQ(zero.cwiseAbs().maxCoeff(), 0.0);

  EnergyCutoff cut(4.0, 2.0);
  Eigen::MatrixXcd G = T.spectral_cutoff_matrix(cut);
  Eigen::MatrixXcd U = T.function_matrix([](double l) { return std::exp(cplx(0, -0.9 * l)); });
  EXPECT_LT((G * U - U * G).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(OneBody, FreeCutoffIsFourierMultiplier) {
  Grid g(1, 64, 10.0);
  auto T = OneBodyOperator::free(g, 0.5);
  EnergyCutoff cut(4.0, 2.0);
  auto k2 = g.momentum_squared();
  Eigen::VectorXcd mult(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) mult[i] = xi((0.5 * k2[i] - 4.0) / 4.0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  Eigen::VectorXcd v(g.size());
  for (auto& x : v) x = cplx(n(rng), n(rng));
  GridFunction f(g, v);
  EXPECT_LT((T.spectral_cutoff(f, cut) - fourier_multiply(f, mult)).l2_norm(), 1e-11 * f.l2_norm());
}

TEST(OneBody, FreeCEisLargestAdmissibleMomentum) {
  Grid g(1, 128, 16.0);
  auto T = OneBodyOperator::free(g, 0.5);
  for (double E : {0.5, 2.0, 4.0, 9.0}) {
    const double alpha = 1.5;
    double expected = 0.0;
    for (int k = 0; k < 128; ++k) {
      double p = std::abs(g.axis_momentum(k));
      if (0.5 * p * p <= alpha * alpha * E) expected = std::max(expected, p);
    }
    EXPECT_NEAR(T.c_E(alpha, E), expected, 1e-9);
    // Scaling audit: c_E / sqrt(E) = alpha / sqrt(kappa) up to one shell.
    EXPECT_LE(std::abs(T.c_E(alpha, E) / std::sqrt(E) - alpha / std::sqrt(0.5)), (2 * pi / 16.0) / std::sqrt(E));
  }
  EXPECT_NEAR(T.c_E(2.0, 1e6), g.max_momentum(), 1e-9);
  auto Vp = GridFunction::sample(g, [](const Coord&) { return cplx(10.0); });
  EXPECT_EQ(OneBodyOperator(g, Vp).c_E(1.5, 1.0), 0.0);
}

TEST(OneBody, PropagationNormProperties) {
  Grid g(1, 256, 64.0);
  auto T = OneBodyOperator::free(g, 0.5);
  EnergyCutoff all(1e6, 2.0);
  EXPECT_EQ(T.propagation_norm(all, 2.0, 4.0, 0.0), 0.0);
  EXPECT_THROW(T.propagation_norm(all, 3.0, 2.0, 0.0), error);

  EnergyCutoff cut(4.0, 2.0);
  const double cE = T.c_E(2.0, 4.0);
  const double t = (10.0 - 2.0) / (cE + 1.0);
  double prev = 1e300;
  for (double R : {3.0, 4.0, 6.0, 8.0, 10.0, 14.0}) {
    double v = T.propagation_norm(cut, 2.0, R, t);
    EXPECT_LE(v, prev * (1 + 1e-12));
    prev = v;
  }
  // Measured ratio is about 14x for this smooth step; a 100x drop is not
  // reached at r = 2, so the check asserts an order of magnitude.
  EXPECT_LE(T.propagation_norm(cut, 2.0, 10.0, t), 1e-1 * T.propagation_norm(cut, 2.0, 4.0, t));
}

TEST(OverlapScan, TrivialRows) {
  Grid g(1, 256, 32.0);
  auto T = OneBodyOperator::free(g);
  auto phi = make_gaussian(g, 1.0, {0, 0}, Normalization::l2);
  std::vector<Probe> probes{{phi, 0.0}};
  auto rows = overlap_scan(T, phi, {0, 0}, probes, {0.0}, 2, 0.5);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].lhs_diff_overlap, 0.0);
  EXPECT_NEAR(rows[0].lhs_overlap, phi.l2_norm(), 1e-14);
}

TEST(OverlapScan, FreeIndicatorMatchesClosedForm) {
  Grid g(1, 1024, 80.0);
  auto T = OneBodyOperator::free(g, 0.5);
  const double s = 1.0;
  auto phi = GridFunction::sample(g, [&](const Coord& y) { return cplx(std::exp(-y[0] * y[0] / (2 * s * s))); });
  auto f = GridFunction::sample(g, [](const Coord& y) { return cplx(y[0] >= 5.0 && y[0] <= 6.0 ? 1.0 : 0.0); });
  f = f.normalized();
  for (double t : {0.5, 1.0, 2.0}) {
    auto rows = overlap_scan(T, phi, {0, 0}, {{f, 5.0}}, {t}, 2, 0.5);
    cplx oracle = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) oracle += std::conj(f[i]) * free_gaussian(g.coordinate(i)[0], s, 0.5, t);
    oracle *= g.spacing();
    EXPECT_NEAR(rows[0].lhs_overlap, std::abs(oracle), 1e-8 * std::max(1.0, std::abs(oracle)));
    EXPECT_NEAR(rows[0].lhs_overlap / std::abs(oracle), 1.0, 1e-8);
  }
}

TEST(OverlapScan, SlopeFit) {
  std::vector<double> x{1, 2, 4, 8}, y{1, 1.0 / 16, 1.0 / 256, 1e-40};
  EXPECT_NEAR(loglog_slope(x, y, 1e-30), -4.0, 1e-12);
  EXPECT_TRUE(std::isnan(loglog_slope({1, 2}, {1, 2})));
}

TEST(SmoothStep, ShapeAndDerivatives) {
  EXPECT_EQ(xi(-1.0), 1.0);
  EXPECT_EQ(xi(2.0), 0.0);
  EXPECT_NEAR(xi(0.5), 0.5, 1e-15);
  double prev = 1.0;
  for (int i = 0; i <= 200; ++i) {
    double v = xi(i / 200.0);
    EXPECT_LE(v, prev + 1e-16);
    EXPECT_GE(v, 0.0);
    prev = v;
  }
  // Derivative jets against central differences of the next-lower order.
  for (double x : {0.1, 0.37, 0.5, 0.81}) {
    auto d = xi_derivatives(x, 6);
    for (int k = 1; k <= 6; ++k) {
      const double h = 1e-5;
      double fd = (xi_derivative(x + h, k - 1) - xi_derivative(x - h, k - 1)) / (2 * h);
      EXPECT_NEAR(d[size_t(k)], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
  EnergyCutoff g(4.0, 2.0);
  EXPECT_EQ(g(3.9), 1.0);
  EXPECT_EQ(g(8.1), 0.0);
  EXPECT_NEAR(g.derivative(6.0, 1), xi_derivative(0.5, 1) / 4.0, 1e-15);
  EXPECT_THROW(EnergyCutoff(1.0, 1.0), error);
}
