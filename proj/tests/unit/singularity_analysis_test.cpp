#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

namespace bosonic {
namespace {

using testing::kPi;

MapField<4> bump_map(const FlowProblem<4>& p, double scale_cells, Node c) {
  return MapField<4>::projected(bump_field<4>(p.grid, scale_cells * p.grid.dx(), c), p.target);
}

TEST(ConcentrationScan, ConstantMapHasNoClusters) {
  const auto p = testing::plain_problem(32);
  EXPECT_TRUE(concentration_scan(testing::constant_map(p, unit_vector<4>(0)), p, 0.5, 0.5).empty());
}

TEST(ConcentrationScan, SingleBumpGivesOneCluster) {
  const auto p = testing::plain_problem(64);
  const auto c = concentration_scan(bump_map(p, 3.0, {20, 40}), p, 0.5, 0.5);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_LE(std::abs(c[0].node.ix - 20), 1);
  EXPECT_LE(std::abs(c[0].node.iy - 40), 1);
  EXPECT_GE(c[0].local_energy, 0.5);
  EXPECT_GE(c[0].members, 1u);
}

TEST(ConcentrationScan, ClustersMatchBruteForce) {
  // Every node whose ball energy reaches delta1 lies in exactly one cluster,
  // and the representative carries the cluster maximum.
  const auto p = testing::plain_problem(32);
  const auto u = bump_map(p, 2.0, {8, 8});
  const double d1 = 0.3, r = 0.5;
  const auto clusters = concentration_scan(u, p, d1, r);
  const BallStencil ball(p.grid, r);
  const auto dens = local_densities(u, p).energy;
  std::size_t flagged = 0;
  double best = 0.0;
  for (int j = 0; j < 32; ++j)
    for (int i = 0; i < 32; ++i) {
      const double e = ball.integrate(p.grid, {i, j}, dens);
      if (e >= d1) ++flagged;
      best = std::max(best, e);
    }
  std::size_t members = 0;
  double top = 0.0;
  for (const auto& c : clusters) {
    members += c.members;
    top = std::max(top, c.local_energy);
  }
  EXPECT_EQ(members, flagged);
  EXPECT_EQ(top, best);
}

TEST(ConcentrationScan, SeparatedBumpsGiveSeparateClusters) {
  const auto p = testing::plain_problem(96);
  auto a = bump_field<4>(p.grid, 2.0 * p.grid.dx(), {24, 48});
  const auto b = bump_field<4>(p.grid, 2.0 * p.grid.dx(), {72, 48});
  // Both bubbles sit in the south-pole background; splice the right half.
  for (int j = 0; j < 96; ++j)
    for (int i = 48; i < 96; ++i) a[p.grid.index(i, j)] = b[p.grid.index(i, j)];
  const auto c = concentration_scan(MapField<4>::projected(a, p.target), p, 0.5, 0.4);
  EXPECT_EQ(c.size(), 2u);
}

TEST(ConcentrationScan, StrideSamplesSubgrid) {
  const auto p = testing::plain_problem(64);
  const auto c = concentration_scan(bump_map(p, 3.0, {32, 32}), p, 0.5, 0.5, 2);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].node.ix % 2, 0);
  EXPECT_EQ(c[0].node.iy % 2, 0);
}

TEST(KBound, Examples) {
  EXPECT_EQ(k_bound(10.0, 0.5, 2.0), 80);
  EXPECT_EQ(k_bound(0.0, 0.5, 2.0), 0);
  EXPECT_EQ(k_bound(1.0, 0.25, 2.0), 16);
  EXPECT_THROW(k_bound(1.0, 0.0, 2.0), InvalidArgument);
  EXPECT_THROW(k_bound(1.0, 0.5, 1.0), InvalidArgument);
  EXPECT_THROW(k_bound(-1.0, 0.5, 2.0), InvalidArgument);
}

TEST(SmallEnergyScales, ConstantMapTakesLargestRadius) {
  const auto p = testing::full_problem(32, 0.0, 1e-4);
  const auto u = testing::constant_map(p, unit_vector<4>(1));
  const auto s = choose_R1_T1(u, p, 0.5, 2.0);
  const auto cands = radius_candidates(p.grid);
  EXPECT_TRUE(s.admissible);
  EXPECT_EQ(s.R1, cands.back());
  const double s0 = energies(u, p).S_tilde;
  EXPECT_NEAR(s.T1, 0.5 * s.R1 * s.R1 / (2.0 * 4.0 * s0), 1e-12 * s.T1);
}

TEST(SmallEnergyScales, WrapRadiusMatchesBallArea) {
  // Local action on the wrap is about |du|^2/2 * pi (2R)^2 = 2 pi R^2.
  const auto p = testing::plain_problem(128);
  const auto s = choose_R1_T1(testing::wrap_map(p), p, 0.5, 2.0);
  EXPECT_LT(s.sup_local_action, s.threshold);
  const double estimate = std::sqrt(s.threshold / (2.0 * kPi));
  EXPECT_NEAR(s.R1, estimate, 0.1 * estimate);
  EXPECT_THROW(choose_R1_T1(testing::constant_map(p, unit_vector<4>(0)), p, 0.5, 2.0), InvalidArgument);
}

TEST(SmallEnergyScales, RadiusGrowsWithDelta1) {
  const auto p = testing::plain_problem(64);
  const auto u = testing::smooth_map(p, 3);
  double prev = 0.0;
  for (double d1 : {0.1, 0.2, 0.4, 0.8}) {
    const auto s = choose_R1_T1(u, p, d1, 2.0);
    EXPECT_GE(s.R1, prev);
    prev = s.R1;
  }
}

TEST(Convergence, WrapConvergedAndMidFlowNot) {
  const auto p = testing::plain_problem(32);
  EnergyLedger l(2);
  l[1].kinetic = 0.0;
  EXPECT_TRUE(convergence_probe(l, testing::wrap_map(p), p, 1e-6).converged);
  const auto u = testing::smooth_map(p, 1);
  l[1].kinetic = 1.0;
  EXPECT_FALSE(convergence_probe(l, u, p, 1e-6).converged);
  EXPECT_THROW(convergence_probe(EnergyLedger(1), u, p, 1e-6), InvalidArgument);
}

TEST(SnapshotRing, ThinsOlderHalf) {
  SnapshotRing<4> ring(8);
  for (int k = 0; k < 100; ++k) ring.push(k, {});
  EXPECT_LE(ring.size(), 8u);
  EXPECT_EQ(ring.items().front().t, 0.0);
  EXPECT_EQ(ring.items().back().t, 99.0);
  for (std::size_t k = 1; k < ring.size(); ++k) EXPECT_LT(ring.items()[k - 1].t, ring.items()[k].t);
}

TEST(Interpolation, ExactOnNodesAndLinearInBetween) {
  const auto g = SurfaceGrid::flat(16, 16, 16.0, 16.0);
  VectorField<4> f(g.size());
  for (int j = 0; j < 16; ++j)
    for (int i = 0; i < 16; ++i) f[g.index(i, j)] = {double(i), double(j), double(i * j), 1.0};
  EXPECT_EQ(interpolate_bilinear(f, g, 3.0, 5.0), (Point<4>{3.0, 5.0, 15.0, 1.0}));
  const auto mid = interpolate_bilinear(f, g, 3.5, 5.25);
  EXPECT_DOUBLE_EQ(mid[0], 3.5);
  EXPECT_DOUBLE_EQ(mid[1], 5.25);
  EXPECT_DOUBLE_EQ(mid[2], 3.5 * 5.25);
  // Periodic wrap: x = -1 is node 15.
  EXPECT_EQ(interpolate_bilinear(f, g, -1.0, 0.0)[0], 15.0);
}

std::vector<Snapshot<4>> history(const MapField<4>& u, std::initializer_list<double> times) {
  std::vector<Snapshot<4>> out;
  for (double t : times) out.push_back({t, u.values()});
  return out;
}

TEST(ParabolicRescale, UnitScaleReproducesSamples) {
  const auto p = testing::plain_problem(64);
  const auto u = testing::smooth_map(p, 4);
  const double h = p.grid.dx();
  // r = 2h with out spacing 1/2 hits source nodes exactly.
  const double r = 2.0 * h;
  const auto out = SurfaceGrid::flat(32, 32, 16.0, 16.0);
  const auto res = parabolic_rescale(history(u, {0.0, 1.0}), p.grid, p.target, {5, 7}, 1.0, r, out);
  ASSERT_EQ(res.slices.size(), 1u);  // only t in [1 - r^2, 1]
  const auto& v = res.slices[0].v;
  for (int j = -4; j < 4; ++j)
    for (int i = -4; i < 4; ++i) {
      const auto& a = v[out.index(i, j)];
      const auto& b = u[p.grid.index(5 + i, 7 + j)];
      EXPECT_LE(norm(a - b), 1e-14);
    }
  EXPECT_DOUBLE_EQ(res.potential_factor, 1.0 / (r * r));
  EXPECT_EQ(res.slices[0].tau, 0.0);
}

TEST(ParabolicRescale, ChecksInputs) {
  const auto p = testing::plain_problem(32);
  const auto u = testing::smooth_map(p, 4);
  const auto out = SurfaceGrid::flat(16, 16, 4.0, 4.0);
  const double h = p.grid.dx();
  EXPECT_THROW(parabolic_rescale(history(u, {0.0, 1.0}), p.grid, p.target, {0, 0}, 1.0, h, out), InvalidArgument);
  EXPECT_THROW(parabolic_rescale(history(u, {0.9, 1.0}), p.grid, p.target, {0, 0}, 1.0, 4.0 * h, out),
               InvalidArgument);
  EXPECT_THROW(parabolic_rescale({}, p.grid, p.target, {0, 0}, 1.0, 4.0 * h, out), InvalidArgument);
}

TEST(ParabolicRescale, PreservesBallEnergyAtMatchedResolution) {
  const auto p = testing::plain_problem(64);
  const auto u = MapField<4>::projected(bump_field<4>(p.grid, 3.0 * p.grid.dx(), {32, 32}), p.target);
  const double h = p.grid.dx();
  for (double cells : {4.0, 8.0}) {
    const double r = cells * h;
    const int n_out = static_cast<int>(std::lround(4.0 * cells));
    const auto out = SurfaceGrid::flat(n_out, n_out, 4.0, 4.0);
    const auto res = parabolic_rescale(history(u, {-1.0, 0.0}), p.grid, p.target, {32, 32}, 0.0, r, out);
    const FlowProblem<4> vp{out, p.target, {}};
    const double ev = local_energy(res.slices.back().v, vp, {0, 0}, 1.0);
    const double eu = local_energy(u, p, {32, 32}, r);
    EXPECT_NEAR(ev, eu, 1e-12 * eu);
  }
}

TEST(Ladyzhenskaya, ConstantIsZeroAndScaleInvariant) {
  const auto g = SurfaceGrid::flat(64, 64);
  EXPECT_EQ(ladyzhenskaya_ratio(VectorField<4>(g.size(), unit_vector<4>(0)), g, 0.5), 0.0);
  auto v = smooth_random_field<4>(g, 2, 6);
  const double a = ladyzhenskaya_ratio(v, g, 0.5);
  for (auto& x : v) x = 2.0 * x;
  EXPECT_NEAR(ladyzhenskaya_ratio(v, g, 0.5), a, 1e-12 * a);
  EXPECT_GT(a, 0.0);
}

TEST(Ladyzhenskaya, WrapClosedForm) {
  // |dv|^2 = c constant: integral c^2 A / [c |B_R| (0 + c A / R^2)] = R^2 / |B_R| on the grid.
  const auto p = testing::plain_problem(64);
  const auto u = testing::wrap_map(p);
  const double r = 0.5;
  const double ball = ball_mask(p.grid, {0, 0}, r).size() * p.grid.cell_area();
  const double ratio = ladyzhenskaya_ratio(u.values(), p.grid, r);
  const double hess = integrate_flat(hessian_density(u.values(), p.grid), p.grid);
  const double e = energies(u, p).E;
  const double expected = (e * e / (4.0 * kPi * kPi)) / ((e / (4.0 * kPi * kPi)) * ball * (hess + e / (r * r)));
  EXPECT_NEAR(ratio, expected, 1e-12 * expected);
  const auto curved = SurfaceGrid::build(64, 64, kTwoPi, kTwoPi, [](double x, double) { return 0.1 * std::sin(x); });
  EXPECT_THROW(ladyzhenskaya_ratio(u.values(), curved, r), UnsupportedConfiguration);
}

}  // namespace
}  // namespace bosonic
