#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

namespace bosonic {
namespace {

using testing::kPi;

ScalarField sample(const SurfaceGrid& g, double (*f)(double, double)) {
  ScalarField out(g.size());
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) out[g.index(i, j)] = f(g.x(i), g.y(j));
  return out;
}

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) m = std::max(m, std::abs(a[n] - b[n]));
  return m;
}

TEST(SurfaceGrid, FlatVolumeIsFourPiSquared) {
  const auto g = SurfaceGrid::flat(64, 64);
  EXPECT_NEAR(g.total_volume(), 4.0 * kPi * kPi, 1e-12);
  EXPECT_TRUE(g.is_flat());
}

TEST(SurfaceGrid, ConformalVolumeMatchesBesselIntegral) {
  // integral of e^{0.2 sin x} over the torus = 4 pi^2 I_0(0.2); the periodic
  // rectangle rule is spectrally accurate here.
  const auto g = SurfaceGrid::build(64, 64, kTwoPi, kTwoPi, [](double x, double) { return 0.1 * std::sin(x); });
  EXPECT_NEAR(g.total_volume(), 4.0 * kPi * kPi * std::cyl_bessel_i(0.0, 0.2), 1e-12);
  EXPECT_FALSE(g.is_flat());
}

TEST(SurfaceGrid, RejectsTooFewNodes) {
  EXPECT_THROW(SurfaceGrid::flat(4, 64), InvalidArgument);
  EXPECT_THROW(SurfaceGrid::flat(64, 7), InvalidArgument);
  EXPECT_THROW(SurfaceGrid::flat(8, 8, -1.0), InvalidArgument);
  EXPECT_THROW(SurfaceGrid::from_lambda(8, 8, 1.0, 1.0, std::vector<double>(10)), InvalidArgument);
}

TEST(SurfaceGrid, PeriodicIndexing) {
  const auto g = SurfaceGrid::flat(16, 8);
  EXPECT_EQ(g.index(-1, 0), g.index(15, 0));
  EXPECT_EQ(g.index(16, 8), g.index(0, 0));
  for (std::size_t n = 0; n < g.size(); ++n) {
    const auto p = g.node(n);
    EXPECT_EQ(g.east(n), g.index(p.ix + 1, p.iy));
    EXPECT_EQ(g.west(n), g.index(p.ix - 1, p.iy));
    EXPECT_EQ(g.north(n), g.index(p.ix, p.iy + 1));
    EXPECT_EQ(g.south(n), g.index(p.ix, p.iy - 1));
  }
}

TEST(Laplacian, SinIsSecondOrderAccurate) {
  double prev = 0.0;
  for (int n : {32, 64, 128}) {
    const auto g = SurfaceGrid::flat(n, n);
    const auto f = sample(g, [](double x, double) { return std::sin(x); });
    const auto lap = laplace_beltrami(f, g);
    ScalarField exact(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) exact[k] = -f[k];
    const double err = max_abs_diff(lap, exact);
    EXPECT_LE(err, g.dx() * g.dx() / 12.0 * 1.0001);
    if (prev > 0.0) {
      EXPECT_GT(prev / err, 3.9);
    }
    prev = err;
  }
}

TEST(Laplacian, ConformalFactorScalesFlatLaplacian) {
  double prev = 0.0;
  for (int n : {32, 64, 128}) {
    const auto g = SurfaceGrid::build(n, n, kTwoPi, kTwoPi, [](double x, double) { return 0.1 * std::sin(x); });
    const auto f = sample(g, [](double, double y) { return std::sin(y); });
    const auto lap = laplace_beltrami(f, g);
    ScalarField exact(f.size());
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        exact[g.index(i, j)] = -std::exp(-0.2 * std::sin(g.x(i))) * std::sin(g.y(j));
    const double err = max_abs_diff(lap, exact);
    if (prev > 0.0) {
      EXPECT_GT(prev / err, 3.9);
    }
    prev = err;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(Laplacian, SelfAdjointInWeightedInnerProduct) {
  const auto g = SurfaceGrid::build(48, 40, kTwoPi, 5.0, [](double x, double y) { return 0.2 * std::sin(x + y); });
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  ScalarField f(g.size()), h(g.size());
  for (auto& v : f) v = gauss(rng);
  for (auto& v : h) v = gauss(rng);
  const double a = l2_inner(laplace_beltrami(f, g), h, g);
  const double b = l2_inner(f, laplace_beltrami(h, g), g);
  EXPECT_NEAR(a, b, 1e-10 * std::abs(a));
}

TEST(Laplacian, CommutesWithPeriodicShift) {
  const auto g = SurfaceGrid::flat(32, 32);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  ScalarField f(g.size());
  for (auto& v : f) v = gauss(rng);
  ScalarField shifted(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    const auto p = g.node(n);
    shifted[g.index(p.ix + 3, p.iy - 5)] = f[n];
  }
  const auto lf = flat_laplacian(f, g);
  const auto ls = flat_laplacian(shifted, g);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const auto p = g.node(n);
    EXPECT_EQ(ls[g.index(p.ix + 3, p.iy - 5)], lf[n]);
  }
}

TEST(FrameDerivatives, WrapHasUnitSpeedInE1) {
  const auto p = testing::plain_problem(64);
  const auto u = testing::wrap_map(p);
  const auto du = frame_derivatives(u.values(), p.grid);
  const double h = p.grid.dx();
  const double speed = std::sin(h) / h;  // centered difference of a unit circle
  for (std::size_t n = 0; n < p.grid.size(); ++n) {
    EXPECT_NEAR(norm(du.e1[n]), speed, 1e-13);
    EXPECT_NEAR(norm(du.e2[n]), 0.0, 1e-13);
  }
}

TEST(FrameDerivatives, RejectsShapeMismatch) {
  const auto g = SurfaceGrid::flat(16, 16);
  VectorField<4> f(10, zero_point<4>());
  EXPECT_THROW(frame_derivatives(f, g), InvalidArgument);
}

TEST(Inner, SinSquaredIntegral) {
  const auto g = SurfaceGrid::flat(64, 64);
  const auto f = sample(g, [](double x, double) { return std::sin(x); });
  EXPECT_NEAR(l2_inner(f, f, g), 2.0 * kPi * kPi, 1e-11);
  ScalarField bad(5);
  EXPECT_THROW(l2_inner(f, bad, g), InvalidArgument);
}

TEST(Inner, Bilinear) {
  const auto g = SurfaceGrid::build(16, 16, 1.0, 1.0, [](double x, double) { return x; });
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  ScalarField a(g.size()), b(g.size()), c(g.size()), ab(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    a[n] = gauss(rng);
    b[n] = gauss(rng);
    c[n] = gauss(rng);
    ab[n] = 2.0 * a[n] - 3.0 * b[n];
  }
  EXPECT_NEAR(l2_inner(ab, c, g), 2.0 * l2_inner(a, c, g) - 3.0 * l2_inner(b, c, g), 1e-12);
  EXPECT_DOUBLE_EQ(l2_inner(a, c, g), l2_inner(c, a, g));
}

TEST(ConformalRescale, IdentityAndVolumeScaling) {
  const auto g = SurfaceGrid::build(32, 32, kTwoPi, kTwoPi, [](double x, double) { return 0.1 * std::sin(x); });
  EXPECT_TRUE(g.conformal_rescale(1.0) == g);
  const auto g4 = g.conformal_rescale(4.0);
  for (std::size_t n = 0; n < g.size(); ++n) EXPECT_EQ(g4.weights()[n], 4.0 * g.weights()[n]);
  EXPECT_NEAR(g4.total_volume(), 4.0 * g.total_volume(), 1e-12 * g.total_volume());
  EXPECT_THROW(g.conformal_rescale(0.0), InvalidArgument);
  EXPECT_THROW(g.conformal_rescale(-2.0), InvalidArgument);
}

TEST(ScalarCurvature, FlatIsZero) {
  const auto s = SurfaceGrid::flat(16, 16).scalar_curvature();
  for (double v : s) EXPECT_EQ(v, 0.0);
}

TEST(ScalarCurvature, SineConformalFactor) {
  // lambda = a sin x: Scal = 2 a e^{-2 lambda} sin x.
  const double a = 0.1;
  const auto g = SurfaceGrid::build(128, 16, kTwoPi, kTwoPi, [=](double x, double) { return a * std::sin(x); });
  const auto s = g.scalar_curvature();
  for (int i = 0; i < g.nx(); ++i) {
    const double x = g.x(i);
    EXPECT_NEAR(s[g.index(i, 3)], 2.0 * a * std::exp(-2.0 * a * std::sin(x)) * std::sin(x), 1e-4);
  }
  // Gauss-Bonnet on the torus: the total curvature vanishes.
  EXPECT_NEAR(integrate(s, g), 0.0, 1e-12);
}

TEST(RicciIdentity, IntegratedLaplacianEqualsHessian) {
  const auto p = testing::plain_problem(48);
  const auto u = testing::smooth_map(p, 21);
  const auto r = ricci_identity_check(u.values(), p.grid);
  EXPECT_NEAR(r.lhs, r.rhs, 1e-11 * r.lhs);
  // Constant field: both sides vanish.
  const auto c = ricci_identity_check(VectorField<4>(p.grid.size(), unit_vector<4>(0)), p.grid);
  EXPECT_EQ(c.lhs, 0.0);
  EXPECT_EQ(c.rhs, 0.0);
}

TEST(RicciIdentity, RejectsCurvedGrid) {
  const auto g = SurfaceGrid::build(16, 16, kTwoPi, kTwoPi, [](double x, double) { return 0.1 * std::sin(x); });
  EXPECT_THROW(ricci_identity_check(ScalarField(g.size(), 0.0), g), UnsupportedConfiguration);
}

TEST(BallMask, SmallBallIsFivePointStar) {
  const auto g = SurfaceGrid::flat(32, 32);
  const auto nodes = ball_mask(g, {0, 0}, g.dx() * 1.01);
  EXPECT_EQ(nodes.size(), 5u);
  EXPECT_THROW(ball_mask(g, {0, 0}, 0.0), InvalidArgument);
  EXPECT_THROW(ball_mask(g, {0, 0}, kPi), InvalidArgument);
}

TEST(BallMask, AreaApproachesDisc) {
  const auto g = SurfaceGrid::flat(256, 256);
  const double r = 1.0;
  const auto nodes = ball_mask(g, {10, 250}, r);
  const double area = nodes.size() * g.cell_area();
  EXPECT_NEAR(area, kPi * r * r, 4.0 * kTwoPi * r * g.dx());
}

TEST(Determinism, ThreadCountDoesNotChangeBits) {
  const auto p = testing::full_problem(96);
  const auto u = testing::smooth_map(p, 4);
  set_num_threads(1);
  const auto a = flow_rhs(u, p);
  const auto ea = energies(u, p);
  set_num_threads(4);
  const auto b = flow_rhs(u, p);
  const auto eb = energies(u, p);
  set_num_threads(1);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(a[0])), 0);
  EXPECT_EQ(ea.S_tilde, eb.S_tilde);
}

TEST(PairwiseSum, MatchesExactSum) {
  std::vector<double> v(1000);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<double>(k);
  EXPECT_EQ(pairwise_sum(v), 499500.0);
  EXPECT_EQ(pairwise_sum(std::span<const double>{}), 0.0);
}

}  // namespace
}  // namespace bosonic
