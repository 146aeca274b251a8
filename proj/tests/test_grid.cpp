#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "lightcone/grid.hpp"

using namespace lightcone;

namespace {

GridFunction random_function(const Grid& grid, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Eigen::VectorXcd v(grid.size());
  for (auto& x : v) x = cplx(n(rng), n(rng));
  return GridFunction(grid, v);
}

}  // namespace

TEST(Grid, CoordinatesAndPeriodicMetric) {
  Grid g(1, 16, 8.0);
  EXPECT_DOUBLE_EQ(g.spacing(), 0.5);
  EXPECT_DOUBLE_EQ(g.axis_coordinate(0), -4.0);
  EXPECT_DOUBLE_EQ(g.axis_coordinate(8), 0.0);
  EXPECT_NEAR(g.distance({-3.5, 0}, {3.5, 0}), 1.0, 1e-15);
  Grid g2(2, 8, 4.0);
  EXPECT_EQ(g2.size(), 64);
  auto c = g2.coordinate(g2.flat_index(4, 6));
  EXPECT_DOUBLE_EQ(c[0], 0.0);
  EXPECT_DOUBLE_EQ(c[1], 1.0);
  EXPECT_THROW(Grid(1, 12, 1.0), error);
  EXPECT_THROW(Grid(3, 8, 1.0), error);
  EXPECT_THROW(Grid(1, 4, 1.0), error);
}

TEST(Grid, Parseval) {
  for (int d : {1, 2}) {
    Grid g(d, d == 1 ? 256 : 32, 10.0);
    auto f = random_function(g, 7);
    Eigen::VectorXcd k = dft(g, f.values());
    double spectral = k.squaredNorm() * g.cell_volume() / double(g.size());
    EXPECT_NEAR(spectral, f.l2_norm() * f.l2_norm(), 1e-12 * spectral);
    EXPECT_LT((idft(g, k) - f.values()).norm(), 1e-12 * f.values().norm());
  }
}

TEST(Gaussian, L1NormalizedIntegratesToOne) {
  Grid g(1, 512, 40.0);
  auto phi = make_gaussian(g, 1.0, {0.0, 0.0});
  EXPECT_NEAR(phi.integral().real(), 1.0, 1e-8);
  Grid g2(2, 64, 16.0);
  auto phi2 = make_gaussian(g2, 1.0, {0.5, -1.0});
  EXPECT_NEAR(phi2.integral().real(), 1.0, 1e-8);
}

TEST(Gaussian, AsPrintedIntegratesToSqrtTwo) {
  Grid g(1, 1024, 40.0);
  auto phi = make_gaussian(g, 1.0, {0.0, 0.0}, Normalization::as_printed);
  // Independent oracle: Gauss-Kronrod quadrature of pi^{-1/2} exp(-y^2/2).
  double oracle = 2.0 * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
                            [](double y) { return std::exp(-0.5 * y * y) / std::sqrt(std::numbers::pi); },
                            0.0, 20.0, 15, 1e-14);
  EXPECT_NEAR(oracle, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(phi.integral().real(), oracle, 1e-6);
}

TEST(Gaussian, L2NormalizedAndEven) {
  Grid g(1, 256, 20.0);
  auto phi = make_gaussian(g, 1.0, {0.0, 0.0}, Normalization::l2);
  EXPECT_NEAR(phi.l2_norm(), 1.0, 1e-14);
  auto r = phi.reflected();
  EXPECT_LT((r.values() - phi.values()).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(Gaussian, ShiftMatchesTranslation) {
  Grid g(1, 256, 32.0);
  auto phi0 = make_gaussian(g, 1.0, {0.0, 0.0});
  auto phi3 = make_gaussian(g, 1.0, {3.0, 0.0});
  // 3.0 is 24 grid cells.
  for (int i = 0; i < 256; ++i) EXPECT_NEAR(std::abs(phi3[g.flat_index(i + 24)] - phi0[i]), 0.0, 1e-15);
}

TEST(Gaussian, Errors) {
  Grid g(1, 64, 64.0);
  EXPECT_THROW(make_gaussian(g, 1.5, {0, 0}), error);
  try {
    make_gaussian(g, 1.5, {0, 0});
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::resolution);
  }
  EXPECT_THROW(parse_normalization("l3"), error);
  EXPECT_THROW(make_gaussian(g, 4.0, {40.0, 0}), error);
}

TEST(Envelope, Examples) {
  EXPECT_DOUBLE_EQ(decay_envelope(2, 0.0, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(decay_envelope(2, 0.0, 2.0), 0.25);
  EXPECT_NEAR(decay_envelope(4, std::sqrt(3.0), 4.0), 0.0625, 1e-15);
  EXPECT_THROW(decay_envelope(0, 0.0, 1.0), error);
  EXPECT_THROW(decay_envelope(2, 0.0, -1.0), error);
}

TEST(Envelope, Monotonicity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int i = 0; i < 500; ++i) {
    int n = 1 + int(u(rng)) % 6;
    double t = u(rng) / 4, r = u(rng), dr = u(rng) / 10, dt = u(rng) / 10;
    double v = decay_envelope(n, t, r);
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_LE(decay_envelope(n, t, r + dr), v);
    EXPECT_GE(decay_envelope(n, t + dt, r), v);
    if (r > japanese_bracket(t) && dr > 0) {
      EXPECT_LT(decay_envelope(n, t, r + dr), v);
    }
  }
}

TEST(Dyadic, IndicatorHasOnlyInnerPiece) {
  Grid g(1, 256, 32.0);
  Coord x{1.0, 0.0};
  auto f = GridFunction::sample(g, [&](const Coord& y) { return cplx(g.distance(y, x) <= 1.0 ? 1.0 : 0.0); });
  auto pieces = dyadic_decompose(f, x);
  ASSERT_FALSE(pieces.empty());
  EXPECT_GT(pieces[0].l2_norm(), 0.0);
  for (size_t k = 1; k < pieces.size(); ++k) EXPECT_EQ(pieces[k].l2_norm(), 0.0);
}

TEST(Dyadic, ReassemblesAndDisjoint) {
  for (int d : {1, 2}) {
    Grid g(d, d == 1 ? 512 : 64, 40.0);
    auto f = random_function(g, 11);
    auto pieces = dyadic_decompose(f, {0.3, -2.0});
    Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(g.size());
    double norms = 0.0;
    std::vector<int> owners(size_t(g.size()), 0);
    for (auto& p : pieces) {
      sum += p.values();
      norms += p.l2_norm() * p.l2_norm();
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (p[i] != 0.0) ++owners[size_t(i)];
      }
    }
    EXPECT_EQ((sum - f.values()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_NEAR(norms, f.l2_norm() * f.l2_norm(), 1e-12 * norms);
    for (int o : owners) EXPECT_LE(o, 1);
  }
}

TEST(Dyadic, GaussianTailMatchesQuadrature) {
  Grid g(1, 16384, 32.0);
  auto f = make_gaussian(g, 1.0, {0.0, 0.0});
  auto pieces = dyadic_decompose(f, {0.0, 0.0});
  ASSERT_GE(pieces.size(), 4u);
  double ratio = std::pow(pieces[3].l2_norm() / f.l2_norm(), 2);
  // |f|^2 is proportional to exp(-y^2); tail mass over 4 < |y| <= 8.
  using gk = boost::math::quadrature::gauss_kronrod<double, 61>;
  auto w = [](double y) { return std::exp(-y * y); };
  double tail = 2.0 * gk::integrate(w, 4.0, 8.0, 15, 1e-14);
  double total = 2.0 * gk::integrate(w, 0.0, 16.0, 15, 1e-14);
  // Riemann sum vs integral across a hard annulus edge: error ~ 4h relative.
  EXPECT_NEAR(ratio / (tail / total), 1.0, 8.0 * g.spacing());
}

TEST(Convolution, DeltaIsIdentityAndCommutes) {
  for (int d : {1, 2}) {
    Grid g(d, d == 1 ? 128 : 16, 12.0);
    auto f = random_function(g, 5);
    auto h = random_function(g, 6);
    GridFunction delta(g);
    Eigen::VectorXcd dv = Eigen::VectorXcd::Zero(g.size());
    dv[g.flat_index(g.points() / 2, d == 2 ? g.points() / 2 : 0)] = 1.0 / g.cell_volume();
    delta = GridFunction(g, dv);
    auto fd = periodic_convolve(f, delta);
    EXPECT_LT((fd.values() - f.values()).cwiseAbs().maxCoeff(), 1e-12 * f.sup_norm());
    auto a = periodic_convolve(f, h), b = periodic_convolve(h, f);
    EXPECT_LT((a.values() - b.values()).cwiseAbs().maxCoeff(), 1e-12 * a.sup_norm());
  }
}

TEST(Convolution, MatchesDirectSum) {
  Grid g(2, 8, 5.0);
  auto f = random_function(g, 1);
  auto h = random_function(g, 2);
  auto c = periodic_convolve(f, h);
  for (Eigen::Index x = 0; x < g.size(); ++x) {
    cplx acc = 0.0;
    auto [x0, x1] = g.axis_indices(x);
    for (Eigen::Index y = 0; y < g.size(); ++y) {
      auto [y0, y1] = g.axis_indices(y);
      // x - y in coordinates maps to index (x - y + P/2).
      acc += f[y] * h[g.flat_index(x0 - y0 + 4, x1 - y1 + 4)];
    }
    EXPECT_NEAR(std::abs(acc * g.cell_volume() - c[x]), 0.0, 1e-12);
  }
}

TEST(Convolution, EnvelopeSquaredIntegral) {
  Grid g(1, 1 << 16, 2000.0);
  auto G = envelope_profile(g, 2, 0.0);
  auto c = periodic_convolve(G, G);
  using gk = boost::math::quadrature::gauss_kronrod<double, 61>;
  double oracle = 2.0 * (gk::integrate([](double) { return 1.0; }, 0.0, 1.0) +
                         gk::integrate([](double y) { return std::pow(y, -4); }, 1.0, 1000.0, 20, 1e-14));
  EXPECT_NEAR(oracle, 8.0 / 3.0, 1e-8);
  EXPECT_NEAR(c[g.flat_index(g.points() / 2)].real(), oracle, 1e-3);
}

TEST(Convolution, GridMismatch) {
  Grid a(1, 16, 1.0), b(1, 32, 1.0);
  EXPECT_THROW(periodic_convolve(GridFunction(a), GridFunction(b)), error);
}

TEST(GridFunction, SupportAndInner) {
  Grid g(1, 64, 16.0);
  auto f = make_gaussian(g, 0.5, {0, 0}, Normalization::l2);
  auto s = f.support();
  int count = 0;
  for (bool b : s) count += b;
  EXPECT_GT(count, 0);
  EXPECT_LT(count, 64);
  auto h = random_function(g, 9);
  EXPECT_NEAR(std::abs(inner(cplx(0, 1) * f, h) - cplx(0, -1) * inner(f, h)), 0.0, 1e-12);
}

TEST(GridFunction, CsvRoundTrip) {
  for (int d : {1, 2}) {
    Grid g(d, d == 1 ? 32 : 8, 3.0);
    auto f = random_function(g, 4);
    std::stringstream ss;
    write_csv(ss, f);
    auto back = read_csv(ss, g);
    EXPECT_LE((back.values() - f.values()).cwiseAbs().maxCoeff(), 1e-15 * f.sup_norm());
  }
  Grid g(1, 8, 1.0);
  std::stringstream bad("x,re,im\n");
  EXPECT_THROW(read_csv(bad, g), error);
}
