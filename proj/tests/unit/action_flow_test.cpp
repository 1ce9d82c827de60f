#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "support.hpp"

namespace bosonic {
namespace {

using testing::kPi;

TEST(MapField, ConstructorRejectsOffManifoldValues) {
  auto t = testing::sphere4();
  EXPECT_THROW(MapField<4>(VectorField<4>(4, Point<4>{0.5, 0.0, 0.0, 0.0}), t), OffManifold);
  EXPECT_NO_THROW(MapField<4>(VectorField<4>(4, unit_vector<4>(2)), t));
  const auto m = MapField<4>::projected(VectorField<4>(4, Point<4>{0.0, 3.0, 0.0, 0.0}), t);
  EXPECT_LE(m.max_distance(), 1e-15);
}

TEST(Energies, ConstantMapHasOnlyPotential) {
  const auto p = testing::full_problem(16, 0.2, 0.01);
  const auto u = testing::constant_map(p, unit_vector<4>(1));
  const auto e = energies(u, p);
  EXPECT_EQ(e.E, 0.0);
  EXPECT_EQ(e.B_term, 0.0);
  EXPECT_NEAR(e.V_term, 0.01 * 4.0 * kPi * kPi, 1e-14);
  EXPECT_NEAR(e.S_raw, 0.0, 1e-14);
}

TEST(Energies, WrapDirichletClosedForm) {
  const auto p = testing::plain_problem(64);
  const auto e = energies(testing::wrap_map(p), p);
  const double h = p.grid.dx();
  const double exact = 4.0 * kPi * kPi * 4.0 * std::sin(0.5 * h) * std::sin(0.5 * h) / (h * h);
  EXPECT_NEAR(e.E, exact, 1e-12 * exact);
  EXPECT_NEAR(e.E, 4.0 * kPi * kPi, 4.0 * kPi * kPi * h * h / 12.0 * 1.01);
  EXPECT_DOUBLE_EQ(e.dirichlet, 0.5 * e.E);
}

TEST(Energies, ShiftedActionIsNonnegativeForSmallB) {
  // |u^*B| <= |B| |du|^2 / 2 < |du|^2 / 2 when |B| < 1/2.
  auto p = testing::full_problem(24, 0.45, 0.05);
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto u = testing::smooth_map(p, seed, 1.0);
    const auto e = energies(u, p);
    EXPECT_GE(e.S_tilde, 0.0) << "seed " << seed;
    EXPECT_GE(e.V_term, 0.0);
    EXPECT_LE(std::abs(e.B_term), 0.45 * e.E);
  }
}

TEST(Energies, DirichletAndBAreConformallyInvariant) {
  auto p = testing::full_problem(32, 0.2, 0.01);
  p.grid = SurfaceGrid::build(32, 32, kTwoPi, kTwoPi, [](double x, double y) { return 0.1 * std::sin(x - y); });
  const auto u = testing::smooth_map(p, 3);
  auto p4 = p;
  p4.grid = p.grid.conformal_rescale(4.0);
  const auto a = energies(u, p), b = energies(u, p4);
  EXPECT_EQ(a.E, b.E);
  EXPECT_EQ(a.B_term, b.B_term);
  EXPECT_NEAR(b.V_term, 4.0 * a.V_term, 1e-12 * b.V_term);
}

TEST(LocalEnergy, ConstantIsZeroAndWrapIsBallArea) {
  const auto p = testing::plain_problem(128);
  EXPECT_EQ(local_energy(testing::constant_map(p, unit_vector<4>(0)), p, {3, 4}, 0.5), 0.0);
  const auto u = testing::wrap_map(p);
  const double r = 0.5;
  const double e = local_energy(u, p, {10, 20}, r);
  const auto count = ball_mask(p.grid, {10, 20}, r).size();
  const double density = 4.0 * std::pow(std::sin(0.5 * p.grid.dx()) / p.grid.dx(), 2);
  EXPECT_NEAR(e, density * count * p.grid.cell_area(), 1e-12);
  EXPECT_LE(e, energies(u, p).E);
}

TEST(FlowRhs, ConstantMapFeelsOnlyPotential) {
  const auto p = testing::full_problem(16, 0.3, 0.02);
  const Point<4> c{0.0, 0.6, 0.8, 0.0};
  const auto rhs = flow_rhs(testing::constant_map(p, c), p);
  const auto expected = -1.0 * tangential_grad_V(*p.target, *p.fields.potential, c);
  for (const auto& v : rhs) EXPECT_LE(norm(v - expected), 1e-15);
}

TEST(FlowRhs, WrapIsStationaryUpToNormalTruncation) {
  const auto p = testing::plain_problem(64);
  const auto u = testing::wrap_map(p);
  const auto rhs = flow_rhs(u, p);
  const double h = p.grid.dx();
  const double normal = (2.0 * std::cos(h) - 2.0 + std::sin(h) * std::sin(h)) / (h * h);
  for (std::size_t n = 0; n < u.size(); ++n) {
    EXPECT_LE(norm(p.target->tangent_part(u[n], rhs[n])), 1e-12);
    EXPECT_NEAR(dot(rhs[n], u[n]), normal, 1e-12);
  }
  EXPECT_LE(el_residual(u, p).l2, 1e-11);
}

TEST(FlowRhs, NormalPartIsSecondOrder) {
  double prev = 0.0;
  for (int n : {64, 128, 256}) {
    const auto p = testing::full_problem(n);
    const auto u = testing::analytic_map(p);
    const auto r = el_residual(u, p);
    if (prev > 0.0) {
      EXPECT_GT(prev / r.normal_l2, 3.5);
    }
    prev = r.normal_l2;
  }
}

TEST(FlowRhs, DiscreteBForceApproachesPointwiseZ) {
  double prev = 0.0;
  for (int n : {64, 128, 256}) {
    const auto p = testing::full_problem(n, 0.3, 0.0);
    const auto u = testing::analytic_map(p);
    const auto a = discrete_bforce(u.values(), p);
    const auto b = pointwise_bforce(u.values(), p);
    VectorField<4> d(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) d[k] = a[k] - b[k];
    const double err = std::sqrt(l2_inner(d, d, p.grid));
    if (prev > 0.0) {
      EXPECT_GT(prev / err, 3.5);
    }
    prev = err;
  }
}

TEST(Consistency, GradientMatchesActionDerivative) {
  const auto p = testing::full_problem(48, 0.2, 0.01);
  const auto u = testing::smooth_map(p, 17);
  const auto dir = smooth_random_field<4>(p.grid, 3, 99);
  const auto r = gradient_consistency_check(u, dir, {1e-3, 1e-4, 1e-5}, p);
  ASSERT_EQ(r.entries.size(), 3u);
  EXPECT_GT(std::abs(r.directional), 1e-3);
  EXPECT_LE(r.min_rel_error, 1e-6);
  // Central differences: error falls like eps^2 until roundoff.
  EXPECT_GT(r.entries[0].rel_error / std::max(r.entries[1].rel_error, 1e-16), 50.0);
}

TEST(Consistency, HoldsOnCurvedDomain) {
  auto p = testing::full_problem(40, 0.2, 0.01);
  p.grid = SurfaceGrid::build(40, 40, kTwoPi, kTwoPi, [](double x, double y) { return 0.2 * std::cos(x + 2 * y); });
  const auto u = testing::smooth_map(p, 5);
  const auto r = gradient_consistency_check(u, smooth_random_field<4>(p.grid, 3, 8), {1e-4}, p);
  EXPECT_LE(r.min_rel_error, 1e-6);
}

TEST(ElResidual, ConstantAtPotentialMinimumIsCritical) {
  const auto p = testing::full_problem(16, 0.0, 0.1);
  const auto u = testing::constant_map(p, -1.0 * unit_vector<4>(0));
  EXPECT_EQ(el_residual(u, p).l2, 0.0);
}

FlowConfig quick_config(double t_end) {
  FlowConfig c;
  c.t_end = t_end;
  c.record_every = 5;
  return c;
}

TEST(Step, ConstantMapWithoutFieldsStaysPut) {
  const auto p = testing::plain_problem(16);
  const auto u0 = testing::constant_map(p, Point<4>{0.0, 0.0, 0.6, 0.8});
  auto s = initial_state(u0, p, quick_config(0.1));
  const auto rep = step(s, p, quick_config(0.1));
  EXPECT_EQ(rep.halvings, 0);
  EXPECT_FALSE(rep.floor_hit);
  for (std::size_t n = 0; n < u0.size(); ++n) EXPECT_LE(norm(s.u[n] - u0[n]), 1e-15);
  EXPECT_GT(s.t, 0.0);
}

TEST(Step, PotentialDescendsTowardMinimum) {
  const auto p = testing::full_problem(16, 0.0, 0.05);
  const auto u0 = testing::constant_map(p, unit_vector<4>(1));
  auto s = initial_state(u0, p, quick_config(5.0));
  run(s, p, quick_config(5.0));
  EXPECT_LT(s.u[0][0], -0.1);
  for (std::size_t k = 1; k < s.ledger.size(); ++k) EXPECT_LE(s.ledger[k].S_tilde, s.ledger[k - 1].S_tilde);
}

TEST(Step, ConstraintHoldsAfterEveryStep) {
  const auto p = testing::full_problem(32, 0.2, 0.01);
  auto s = initial_state(testing::smooth_map(p, 1), p, quick_config(0.05));
  double worst = 0.0;
  run<4>(s, p, quick_config(0.05), [&](const FlowState<4>& st, const StepReport&) {
    worst = std::max(worst, st.u.max_distance());
    return true;
  });
  EXPECT_LE(worst, 1e-12);
}

TEST(Run, ConstantMapKeepsZeroEnergy) {
  const auto p = testing::plain_problem(16);
  auto s = initial_state(testing::constant_map(p, unit_vector<4>(3)), p, quick_config(0.2));
  const auto sum = run(s, p, quick_config(0.2));
  EXPECT_TRUE(sum.reached_t_end);
  for (const auto& row : s.ledger) EXPECT_EQ(row.E, 0.0);
}

TEST(Run, RecordsAtStartEveryKAndEnd) {
  const auto p = testing::plain_problem(16);
  auto cfg = quick_config(1.0);
  cfg.max_steps = 23;
  cfg.record_every = 10;
  auto s = initial_state(testing::smooth_map(p, 2), p, cfg);
  const auto sum = run(s, p, cfg);
  EXPECT_EQ(sum.steps, 23);
  EXPECT_FALSE(sum.reached_t_end);
  ASSERT_EQ(s.ledger.size(), 4u);  // steps 0, 10, 20, 23
  EXPECT_EQ(s.ledger.front().t, 0.0);
  EXPECT_EQ(s.ledger.back().t, s.t);
}

TEST(Run, ObserverCanStop) {
  const auto p = testing::plain_problem(16);
  auto s = initial_state(testing::smooth_map(p, 2), p, quick_config(1.0));
  run<4>(s, p, quick_config(1.0), [](const FlowState<4>& st, const StepReport&) { return st.steps < 7; });
  EXPECT_EQ(s.steps, 7);
}

TEST(Run, IsDeterministic) {
  const auto p = testing::full_problem(32, 0.2, 0.01);
  auto a = initial_state(testing::smooth_map(p, 5), p, quick_config(0.05));
  auto b = a;
  run(a, p, quick_config(0.05));
  set_num_threads(3);
  run(b, p, quick_config(0.05));
  set_num_threads(1);
  ASSERT_EQ(a.ledger.size(), b.ledger.size());
  for (std::size_t k = 0; k < a.ledger.size(); ++k) {
    const auto x = a.ledger[k].as_array(), y = b.ledger[k].as_array();
    EXPECT_EQ(std::memcmp(x.data(), y.data(), sizeof x), 0);
  }
  EXPECT_EQ(std::memcmp(a.u.values().data(), b.u.values().data(), a.u.size() * sizeof(Point<4>)), 0);
}

TEST(Run, ConvergesOnWrap) {
  const auto p = testing::plain_problem(32);
  auto cfg = quick_config(1.0);
  cfg.conv_tol = 1e-6;
  auto s = initial_state(testing::wrap_map(p), p, cfg);
  EXPECT_TRUE(run(s, p, cfg).converged);
}

TEST(Run, SnapshotHistoryKeepsFirstAndLast) {
  const auto p = testing::plain_problem(16);
  auto cfg = quick_config(1.0);
  cfg.max_steps = 200;
  cfg.snapshot_every = 1;
  cfg.snapshot_capacity = 8;
  auto s = initial_state(testing::smooth_map(p, 2), p, cfg);
  run(s, p, cfg);
  EXPECT_LE(s.snapshots.size(), 8u);
  EXPECT_EQ(s.snapshots.items().front().t, 0.0);
  EXPECT_EQ(s.snapshots.items().back().t, s.t);
}

TEST(FloorHit, ClassifiesConcentrationAndStiffness) {
  auto p = testing::plain_problem(64);
  FlowConfig cfg;
  cfg.delta1 = 1.0;
  const auto wrap = initial_state(testing::wrap_map(p), p, cfg);
  auto ev = classify_floor_hit(wrap, p, cfg);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].kind, EventKind::stiffness);

  const auto bump = MapField<4>::projected(bump_field<4>(p.grid, 4.0 * p.grid.dx(), {32, 32}), p.target);
  const auto bs = initial_state(bump, p, cfg);
  ev = classify_floor_hit(bs, p, cfg);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].kind, EventKind::concentration);
  EXPECT_LE(std::abs(ev[0].ix - 32), 1);
  EXPECT_LE(std::abs(ev[0].iy - 32), 1);
}

TEST(Monotonicity, DetectsViolations) {
  EnergyLedger l(3);
  l[0] = {0.0, 1.0, 0.5, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.1};
  l[1] = {0.1, 0.8, 0.4, 0.0, 0.0, 0.4, 1.0, 0.1, 0.0, 0.0, 0.1};
  l[2] = {0.2, 0.6, 0.3, 0.0, 0.0, 0.3, 1.0, 0.2, 0.0, 0.0, 0.1};
  auto r = monotonicity_check(l, 2.0, 0.5);
  EXPECT_TRUE(r.passes());
  EXPECT_DOUBLE_EQ(r.max_energy_ratio, 1.0);
  l[2].S_tilde = 0.45;
  r = monotonicity_check(l, 2.0, 0.5);
  EXPECT_FALSE(r.action_monotone);
  l[2].S_tilde = 0.3;
  l[2].E = 1.5;
  EXPECT_FALSE(monotonicity_check(l, 2.0, 0.5).energy_bound_ok);
  l[2].E = 0.6;
  l[2].cum_dissipation = 0.1;
  EXPECT_FALSE(monotonicity_check(l, 2.0, 0.5).identity_ok);
  EXPECT_THROW(monotonicity_check({}, 2.0, 0.5), InvalidArgument);
}

TEST(FlowConfig, ValidationRejectsBadValues) {
  FlowConfig c;
  EXPECT_NO_THROW(c.validate());
  c.dt_init = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.cfl = 1.5;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.record_every = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

}  // namespace
}  // namespace bosonic
