#ifndef BOSONIC_TEST_SUPPORT_HPP
#define BOSONIC_TEST_SUPPORT_HPP

#include <cmath>
#include <memory>
#include <numbers>

#include "bosonic/bosonic.hpp"

namespace bosonic::testing {

inline constexpr double kPi = std::numbers::pi;

inline std::shared_ptr<const SphereTarget<4>> sphere4() { return std::make_shared<SphereTarget<4>>(); }

inline FlowProblem<4> plain_problem(int n = 64) { return {SurfaceGrid::flat(n, n), sphere4(), {}}; }

/// B = beta y^4 dy^1 ^ dy^2 and V = epsilon y^1 with the exact shift.
inline FlowProblem<4> full_problem(int n = 64, double beta = 0.2, double eps = 5e-3) {
  FlowProblem<4> p{SurfaceGrid::flat(n, n), sphere4(), {}};
  p.fields.bfield = std::make_shared<HeightTwoForm<4>>(beta);
  p.fields.potential = std::make_shared<HeightPotential<4>>(eps);
  p.fields.shift = potential_shift(*p.fields.potential, *p.target);
  return p;
}

inline MapField<4> wrap_map(const FlowProblem<4>& p) { return p.make_map(wrap_field<4>(p.grid)); }

/// Generic smooth map: projected base point plus smooth noise.
inline MapField<4> smooth_map(const FlowProblem<4>& p, std::uint64_t seed, double amp = 0.5) {
  const auto noise = smooth_random_field<4>(p.grid, 2, seed);
  VectorField<4> f(p.grid.size());
  const Point<4> base{0.3, -0.5, 0.6, 0.55};
  for (std::size_t n = 0; n < f.size(); ++n) f[n] = base + amp * noise[n];
  return p.make_map(f);
}

/// Same smooth map sampled on grids of different resolution (analytic formula).
inline MapField<4> analytic_map(const FlowProblem<4>& p) {
  VectorField<4> f(p.grid.size());
  for (int j = 0; j < p.grid.ny(); ++j)
    for (int i = 0; i < p.grid.nx(); ++i) {
      const double x = p.grid.x(i), y = p.grid.y(j);
      f[p.grid.index(i, j)] = {std::cos(x) + 0.3 * std::sin(y), std::sin(x) * std::cos(y), 0.5 + 0.2 * std::cos(x + y),
                               0.4 * std::sin(2.0 * y) + 0.3};
    }
  return p.make_map(f);
}

inline MapField<4> constant_map(const FlowProblem<4>& p, Point<4> v) {
  return p.make_map(VectorField<4>(p.grid.size(), v));
}

}  // namespace bosonic::testing

#endif  // BOSONIC_TEST_SUPPORT_HPP
