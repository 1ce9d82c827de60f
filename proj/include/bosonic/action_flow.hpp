#ifndef BOSONIC_ACTION_FLOW_HPP
#define BOSONIC_ACTION_FLOW_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "bosonic/background_fields.hpp"
#include "bosonic/core.hpp"
#include "bosonic/surface_grid.hpp"
#include "bosonic/target_manifold.hpp"

namespace bosonic {

/// Node values of a map u: M -> N in R^Q. Every public constructor leaves
/// all nodes within kOnManifoldTol of N.
template <std::size_t Q>
class MapField {
 public:
  MapField() = default;

  /// Accepts values already on N; throws OffManifold otherwise.
  MapField(VectorField<Q> values, std::shared_ptr<const TargetManifold<Q>> target)
      : values_(std::move(values)), target_(std::move(target)) {
    for (const auto& v : values_) target_->require_on_manifold(v);
  }

  /// Projects raw ambient values onto N.
  static MapField projected(const VectorField<Q>& raw, std::shared_ptr<const TargetManifold<Q>> target) {
    MapField m;
    m.target_ = std::move(target);
    m.values_.resize(raw.size());
    for (std::size_t n = 0; n < raw.size(); ++n) m.values_[n] = m.target_->project(raw[n]);
    return m;
  }

  const VectorField<Q>& values() const { return values_; }
  const Point<Q>& operator[](std::size_t n) const { return values_[n]; }
  std::size_t size() const { return values_.size(); }
  const TargetManifold<Q>& target() const { return *target_; }
  const std::shared_ptr<const TargetManifold<Q>>& target_ptr() const { return target_; }

  double max_distance() const {
    double d = 0.0;
    for (const auto& v : values_) d = std::max(d, target_->distance(v));
    return d;
  }

 private:
  VectorField<Q> values_;
  std::shared_ptr<const TargetManifold<Q>> target_;
};

/// Domain, target and background fields of one flow problem.
template <std::size_t Q>
struct FlowProblem {
  SurfaceGrid grid;
  std::shared_ptr<const TargetManifold<Q>> target;
  FieldBackground<Q> fields;

  MapField<Q> make_map(const VectorField<Q>& raw) const { return MapField<Q>::projected(raw, target); }
};

// ---------------------------------------------------------------------------
// Action
// ---------------------------------------------------------------------------

struct EnergyRecord {
  double E = 0.0;          ///< integral |du|^2 dvol
  double dirichlet = 0.0;  ///< E / 2
  double B_term = 0.0;     ///< integral u^*B
  double V_term = 0.0;     ///< integral V~(u) dvol
  double S_tilde = 0.0;    ///< dirichlet + B_term + V_term
  double S_raw = 0.0;      ///< S_tilde - A1 vol(M)
};

/// Node density of u^*B: (d/dx u)^T b(u) (d/dy u), centered differences.
template <std::size_t Q>
ScalarField pullback_density(const VectorField<Q>& u, const TwoFormField<Q>& b, const SurfaceGrid& g) {
  if (u.size() != g.size()) throw InvalidArgument("pullback_density: field size does not match grid");
  ScalarField d(g.size(), 0.0);
  if (b.is_zero()) return d;
  const auto [ux, uy] = centered_derivatives(u, g);
  parallel_for(g.size(), [&](std::size_t n) { d[n] = bilinear(b.coefficients(u[n]), ux[n], uy[n]); });
  return d;
}

/// Integral of u^*B; metric independent.
template <std::size_t Q>
double pullback_integral(const VectorField<Q>& u, const TwoFormField<Q>& b, const SurfaceGrid& g) {
  return integrate_flat(pullback_density(u, b, g), g);
}

template <std::size_t Q>
EnergyRecord energies(const MapField<Q>& u, const FlowProblem<Q>& p) {
  const auto& g = p.grid;
  EnergyRecord r;
  // The Dirichlet and B integrals are formed from flat quantities only, so
  // they are bitwise invariant under conformal changes of the metric.
  r.E = integrate_flat(flat_energy_density(u.values(), g), g);
  r.dirichlet = 0.5 * r.E;
  r.B_term = pullback_integral(u.values(), *p.fields.bfield, g);
  ScalarField vt(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) vt[n] = p.fields.shifted_potential(u[n]);
  r.V_term = integrate(vt, g);
  r.S_tilde = r.dirichlet + r.B_term + r.V_term;
  r.S_raw = r.S_tilde - p.fields.shift * g.total_volume();
  return r;
}

/// Weighted node densities (value * dvol) of |du|^2 and of the shifted
/// action integrand; ball sums of these give local energies.
template <std::size_t Q>
struct LocalDensities {
  ScalarField energy;  ///< |du|^2 dvol
  ScalarField action;  ///< (|du|^2/2 + u^*B + V~) dvol
};

template <std::size_t Q>
LocalDensities<Q> local_densities(const MapField<Q>& u, const FlowProblem<Q>& p) {
  const auto& g = p.grid;
  LocalDensities<Q> d;
  d.energy = flat_energy_density(u.values(), g);
  const auto b = pullback_density(u.values(), *p.fields.bfield, g);
  d.action.resize(g.size());
  const double cell = g.cell_area();
  for (std::size_t n = 0; n < g.size(); ++n) {
    d.energy[n] *= cell;
    d.action[n] = 0.5 * d.energy[n] + b[n] * cell + p.fields.shifted_potential(u[n]) * g.weights()[n];
  }
  return d;
}

/// E(u, B_R(x0)) = integral over the coordinate ball of |du|^2 dvol.
template <std::size_t Q>
double local_energy(const MapField<Q>& u, const FlowProblem<Q>& p, Node x0, double radius) {
  const BallStencil ball(p.grid, radius);
  return ball.integrate(p.grid, x0, local_densities(u, p).energy);
}

/// sup over nodes of the ball energy.
inline double sup_ball_integral(const SurfaceGrid& g, const BallStencil& ball, const ScalarField& weighted) {
  double best = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) best = std::max(best, ball.integrate(g, {i, j}, weighted));
  return best;
}

// ---------------------------------------------------------------------------
// Flow right-hand side
// ---------------------------------------------------------------------------

/// Pieces of the flow right-hand side, kept separate for diagnostics.
template <std::size_t Q>
struct FlowTerms {
  VectorField<Q> laplacian;  ///< Delta_h u
  VectorField<Q> sff;        ///< II(du(e1),du(e1)) + II(du(e2),du(e2))
  VectorField<Q> bforce;     ///< discrete Z(du(e1) ^ du(e2)), tangent
  VectorField<Q> potential;  ///< P grad V
  VectorField<Q> total;      ///< Delta u - II - Z - P grad V
};

/// Exact variational derivative of the discrete B-term sum_n b(u_n)(X_n, Y_n)
/// dx dy (X, Y centered differences), divided by the volume weight and
/// projected to T_uN. It agrees with the pointwise Z(du(e1) ^ du(e2)) up to
/// O(dx^2) and makes the discrete flow an exact gradient flow.
template <std::size_t Q>
VectorField<Q> discrete_bforce(const VectorField<Q>& u, const FlowProblem<Q>& p) {
  const auto& g = p.grid;
  const auto& b = *p.fields.bfield;
  VectorField<Q> out(g.size(), zero_point<Q>());
  if (b.is_zero()) return out;
  const auto [ux, uy] = centered_derivatives(u, g);
  VectorField<Q> by(g.size()), bx(g.size()), local(g.size());
  parallel_for(g.size(), [&](std::size_t n) {
    const auto bn = b.coefficients(u[n]);
    by[n] = mat_vec(bn, uy[n]);
    bx[n] = mat_vec(bn, ux[n]);
    const auto db = b.derivatives(u[n]);
    for (std::size_t k = 0; k < Q; ++k) local[n][k] = bilinear(db[k], ux[n], uy[n]);
  });
  const auto [byx, byy] = centered_derivatives(by, g);
  const auto [bxx, bxy] = centered_derivatives(bx, g);
  const auto& em2l = g.inverse_conformal_factor();
  parallel_for(g.size(), [&](std::size_t n) {
    const Point<Q> grad = local[n] - byx[n] + bxy[n];
    out[n] = em2l[n] * p.target->tangent_part(u[n], grad);
  });
  return out;
}

/// Pointwise Z(du(e1) ^ du(e2)) = e^{-2 lambda} P Omega(., u_x, u_y).
template <std::size_t Q>
VectorField<Q> pointwise_bforce(const VectorField<Q>& u, const FlowProblem<Q>& p) {
  const auto& g = p.grid;
  VectorField<Q> out(g.size(), zero_point<Q>());
  if (p.fields.bfield->is_zero()) return out;
  const auto [ux, uy] = centered_derivatives(u, g);
  const auto& em2l = g.inverse_conformal_factor();
  parallel_for(g.size(), [&](std::size_t n) {
    out[n] = em2l[n] * p.target->tangent_part(u[n], z_ambient(*p.fields.bfield, u[n], ux[n], uy[n]));
  });
  return out;
}

template <std::size_t Q>
FlowTerms<Q> flow_terms(const MapField<Q>& u, const FlowProblem<Q>& p) {
  const auto& g = p.grid;
  if (u.size() != g.size()) throw InvalidArgument("flow_rhs: field size does not match grid");
  for (std::size_t n = 0; n < u.size(); ++n) p.target->require_on_manifold(u[n]);
  FlowTerms<Q> t;
  t.laplacian = laplace_beltrami(u.values(), g);
  const auto du = frame_derivatives(u.values(), g);
  t.sff.resize(g.size());
  t.potential.resize(g.size());
  parallel_for(g.size(), [&](std::size_t n) {
    t.sff[n] = p.target->second_fundamental_form_extended(u[n], du.e1[n], du.e1[n]) +
               p.target->second_fundamental_form_extended(u[n], du.e2[n], du.e2[n]);
    t.potential[n] = tangential_grad_V(*p.target, *p.fields.potential, u[n]);
  });
  t.bforce = discrete_bforce(u.values(), p);
  t.total.resize(g.size());
  for (std::size_t n = 0; n < g.size(); ++n)
    t.total[n] = t.laplacian[n] - t.sff[n] - t.bforce[n] - t.potential[n];
  return t;
}

/// Delta_h u - II(du,du) - Z(du(e1) ^ du(e2)) - P grad V(u).
template <std::size_t Q>
VectorField<Q> flow_rhs(const MapField<Q>& u, const FlowProblem<Q>& p) {
  return flow_terms(u, p).total;
}

// ---------------------------------------------------------------------------
// Variational consistency
// ---------------------------------------------------------------------------

struct ConsistencyEntry {
  double eps = 0.0;
  double finite_difference = 0.0;
  double rel_error = 0.0;
};

struct ConsistencyReport {
  double directional = 0.0;  ///< -<flow_rhs(u), v>
  std::vector<ConsistencyEntry> entries;
  double min_rel_error = std::numeric_limits<double>::infinity();
};

/// Compares the central difference of S~ along the projected curve
/// pi(u +- eps v) with -<flow_rhs(u), v>_{L^2(h)}.
template <std::size_t Q>
ConsistencyReport gradient_consistency_check(const MapField<Q>& u, const VectorField<Q>& raw_direction,
                                             const std::vector<double>& eps_list, const FlowProblem<Q>& p) {
  if (raw_direction.size() != u.size()) throw InvalidArgument("gradient_consistency_check: shape mismatch");
  VectorField<Q> v(u.size());
  for (std::size_t n = 0; n < u.size(); ++n) v[n] = p.target->tangent_part(u[n], raw_direction[n]);
  ConsistencyReport rep;
  rep.directional = -l2_inner(flow_rhs(u, p), v, p.grid);
  for (double eps : eps_list) {
    VectorField<Q> plus(u.size()), minus(u.size());
    for (std::size_t n = 0; n < u.size(); ++n) {
      plus[n] = u[n] + eps * v[n];
      minus[n] = u[n] - eps * v[n];
    }
    const double sp = energies(p.make_map(plus), p).S_tilde;
    const double sm = energies(p.make_map(minus), p).S_tilde;
    ConsistencyEntry e;
    e.eps = eps;
    e.finite_difference = (sp - sm) / (2.0 * eps);
    const double scale = std::max(std::abs(rep.directional), std::abs(e.finite_difference));
    e.rel_error = scale == 0.0 ? 0.0 : std::abs(e.finite_difference - rep.directional) / scale;
    rep.min_rel_error = std::min(rep.min_rel_error, e.rel_error);
    rep.entries.push_back(e);
  }
  if (rep.entries.empty()) rep.min_rel_error = 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Euler-Lagrange residual
// ---------------------------------------------------------------------------

template <std::size_t Q>
struct ElResidual {
  VectorField<Q> field;  ///< P(u) flow_rhs(u)
  double l2 = 0.0;
  double linf = 0.0;
  double normal_l2 = 0.0;  ///< size of the discarded normal part (truncation error)
};

/// The tangential part of the flow right-hand side; zero exactly at critical
/// points of the discrete action.
template <std::size_t Q>
ElResidual<Q> el_residual(const MapField<Q>& u, const FlowProblem<Q>& p) {
  const auto rhs = flow_rhs(u, p);
  ElResidual<Q> r;
  r.field.resize(rhs.size());
  VectorField<Q> normal(rhs.size());
  for (std::size_t n = 0; n < rhs.size(); ++n) {
    r.field[n] = p.target->tangent_part(u[n], rhs[n]);
    normal[n] = rhs[n] - r.field[n];
    r.linf = std::max(r.linf, norm(r.field[n]));
  }
  r.l2 = std::sqrt(l2_inner(r.field, r.field, p.grid));
  r.normal_l2 = std::sqrt(l2_inner(normal, normal, p.grid));
  return r;
}

}  // namespace bosonic

#endif  // BOSONIC_ACTION_FLOW_HPP
