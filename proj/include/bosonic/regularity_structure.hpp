#ifndef BOSONIC_REGULARITY_STRUCTURE_HPP
#define BOSONIC_REGULARITY_STRUCTURE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "bosonic/action_flow.hpp"

namespace bosonic {

/// Per-node pair (F, G) of skew matrices with Delta u = -(F u_x + G u_y) + P grad V
/// at critical points of the action (flat domain).
template <std::size_t Q>
struct AntisymmetricPotential {
  std::vector<Matrix<Q>> F;
  std::vector<Matrix<Q>> G;
};

struct AssembleOptions {
  bool ablate_F = false;  ///< zero the F slot (negative control)
  double frame_step = 1e-5;
};

namespace detail {

/// Geometric part: M^m_i = sum_l s^l_i nu_l^m - s^l_m nu_l^i with
/// s^l_i = (d nu_l^i / d y^j) X^j. M X = -II(X, X) for tangent X.
template <std::size_t Q>
Matrix<Q> frame_rotation(const std::vector<Point<Q>>& nu, const std::vector<std::array<Point<Q>, Q>>& dnu,
                         const Point<Q>& x) {
  Matrix<Q> m = zero_matrix<Q>();
  for (std::size_t l = 0; l < nu.size(); ++l) {
    Point<Q> s = zero_point<Q>();
    for (std::size_t j = 0; j < Q; ++j) s += x[j] * dnu[l][j];
    for (std::size_t a = 0; a < Q; ++a)
      for (std::size_t i = 0; i < Q; ++i) m[a][i] += s[i] * nu[l][a] - s[a] * nu[l][i];
  }
  return m;
}

/// Tangential part of Omega(., ., W): (P K P) with K_ab = Omega_abc W^c,
/// antisymmetrized so it is skew to the last bit.
template <std::size_t Q>
Matrix<Q> three_form_slot(const Tensor3<Q>& omega, const Matrix<Q>& proj, const Point<Q>& w) {
  Matrix<Q> k = zero_matrix<Q>();
  for (std::size_t a = 0; a < Q; ++a)
    for (std::size_t b = 0; b < Q; ++b)
      for (std::size_t c = 0; c < Q; ++c) k[a][b] += omega[a][b][c] * w[c];
  const auto pkp = mat_mul(proj, mat_mul(k, proj));
  Matrix<Q> out{};
  for (std::size_t a = 0; a < Q; ++a)
    for (std::size_t b = 0; b < Q; ++b) out[a][b] = 0.5 * (pkp[a][b] - pkp[b][a]);
  return out;
}

template <class T>
T mixed_derivative(const std::vector<T>& f, const SurfaceGrid& g, std::size_t n) {
  const double s = 0.25 / (g.dx() * g.dy());
  const auto e = g.east(n), w = g.west(n);
  return s * (f[g.north(e)] - f[g.north(w)] - (f[g.south(e)] - f[g.south(w)]));
}

inline void require_flat(const SurfaceGrid& g, const char* who) {
  if (!g.is_flat()) throw UnsupportedConfiguration(std::string(who) + " requires a flat grid (lambda == 0)");
}

}  // namespace detail

/// F = M(u_x) - 1/2 P Omega(., ., P u_y) P and G = M(u_y) + 1/2 P Omega(., ., P u_x) P,
/// so that F u_x + G u_y = -II(du, du) - Z(u_x ^ u_y).
template <std::size_t Q>
AntisymmetricPotential<Q> assemble_A(const MapField<Q>& u, const FlowProblem<Q>& p, const AssembleOptions& opt = {}) {
  const auto& g = p.grid;
  detail::require_flat(g, "assemble_A");
  if (u.size() != g.size()) throw InvalidArgument("assemble_A: field size does not match grid");
  const auto [ux, uy] = centered_derivatives(u.values(), g);
  const auto& target = *p.target;
  const auto& b = *p.fields.bfield;
  AntisymmetricPotential<Q> a;
  a.F.assign(g.size(), zero_matrix<Q>());
  a.G.assign(g.size(), zero_matrix<Q>());
  std::atomic<bool> frame_ok{true};
  parallel_for(g.size(), [&](std::size_t n) {
    const auto& un = u[n];
    const auto nu = target.normal_frame(un);
    const auto dnu = target.normal_frame_derivative(un, opt.frame_step);
    for (const auto& d : dnu)
      for (const auto& v : d)
        if (!all_finite(v)) frame_ok = false;
    Matrix<Q> f = detail::frame_rotation(nu, dnu, ux[n]);
    Matrix<Q> gm = detail::frame_rotation(nu, dnu, uy[n]);
    if (!b.is_zero()) {
      const auto proj = target.tangent_projector(un);
      const auto omega = three_form(b, un);
      const auto zf = detail::three_form_slot(omega, proj, mat_vec(proj, uy[n]));
      const auto zg = detail::three_form_slot(omega, proj, mat_vec(proj, ux[n]));
      for (std::size_t i = 0; i < Q; ++i)
        for (std::size_t j = 0; j < Q; ++j) {
          f[i][j] += -0.5 * zf[i][j];
          gm[i][j] += 0.5 * zg[i][j];
        }
    }
    a.F[n] = opt.ablate_F ? zero_matrix<Q>() : f;
    a.G[n] = gm;
  });
  if (!frame_ok) throw Error("assemble_A: normal frame derivative is not finite");
  return a;
}

struct SkewDefect {
  double F = 0.0;  ///< max |F + F^T| / max(1, max |F|)
  double G = 0.0;
  double max() const { return std::max(F, G); }
};

template <std::size_t Q>
SkewDefect skew_defect(const AntisymmetricPotential<Q>& a) {
  auto one = [](const std::vector<Matrix<Q>>& ms) {
    double defect = 0.0, scale = 0.0;
    for (const auto& m : ms)
      for (std::size_t i = 0; i < Q; ++i)
        for (std::size_t j = 0; j < Q; ++j) {
          defect = std::max(defect, std::abs(m[i][j] + m[j][i]));
          scale = std::max(scale, std::abs(m[i][j]));
        }
    return defect / std::max(1.0, scale);
  };
  return {one(a.F), one(a.G)};
}

/// sqrt(integral |F|^2 + |G|^2) with Frobenius norms.
template <std::size_t Q>
double potential_l2_norm(const AntisymmetricPotential<Q>& a, const SurfaceGrid& g) {
  ScalarField d(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    double s = 0.0;
    for (std::size_t i = 0; i < Q; ++i)
      for (std::size_t j = 0; j < Q; ++j) s += a.F[n][i][j] * a.F[n][i][j] + a.G[n][i][j] * a.G[n][i][j];
    d[n] = s;
  }
  return std::sqrt(integrate(d, g));
}

/// A grad u at each node: F u_x + G u_y (centered derivatives).
template <std::size_t Q>
VectorField<Q> apply_A(const AntisymmetricPotential<Q>& a, const MapField<Q>& u, const SurfaceGrid& g) {
  const auto [ux, uy] = centered_derivatives(u.values(), g);
  VectorField<Q> out(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) out[n] = mat_vec(a.F[n], ux[n]) + mat_vec(a.G[n], uy[n]);
  return out;
}

/// L2 norm of Delta u + F u_x + G u_y - P grad V(u); vanishes up to truncation
/// error at critical points.
template <std::size_t Q>
double rewrite_residual(const MapField<Q>& u, const AntisymmetricPotential<Q>& a, const FlowProblem<Q>& p) {
  const auto& g = p.grid;
  detail::require_flat(g, "rewrite_residual");
  const auto lap = flat_laplacian(u.values(), g);
  const auto agu = apply_A(a, u, g);
  VectorField<Q> r(g.size());
  for (std::size_t n = 0; n < g.size(); ++n)
    r[n] = lap[n] + agu[n] - tangential_grad_V(*p.target, *p.fields.potential, u[n]);
  return std::sqrt(l2_inner(r, r, g));
}

/// L2 norm of F u_x + G u_y + II(du, du) + Z(u_x ^ u_y) for any u: the
/// algebraic identity behind the rewriting, O(dx^2) for smooth u.
template <std::size_t Q>
double rewrite_identity_defect(const MapField<Q>& u, const AntisymmetricPotential<Q>& a, const FlowProblem<Q>& p) {
  const auto& g = p.grid;
  detail::require_flat(g, "rewrite_identity_defect");
  const auto [ux, uy] = centered_derivatives(u.values(), g);
  const auto agu = apply_A(a, u, g);
  const auto z = pointwise_bforce(u.values(), p);
  VectorField<Q> r(g.size());
  for (std::size_t n = 0; n < g.size(); ++n)
    r[n] = agu[n] + p.target->second_fundamental_form_extended(u[n], ux[n], ux[n]) +
           p.target->second_fundamental_form_extended(u[n], uy[n], uy[n]) + z[n];
  return std::sqrt(l2_inner(r, r, g));
}

/// |<Z(xi1 ^ xi2), eta> + <Z(eta ^ xi2), xi1>|, zero for a three-form.
template <std::size_t Q>
double z_skew_defect(const TargetManifold<Q>& target, const TwoFormField<Q>& b, const Point<Q>& u,
                     const Point<Q>& xi1, const Point<Q>& xi2, const Point<Q>& eta) {
  return std::abs(dot(z_operator(target, b, u, xi1, xi2), eta) + dot(z_operator(target, b, u, eta, xi2), xi1));
}

/// max over nodes and normal vectors of |<P u_alpha, nu_l>|.
template <std::size_t Q>
double orthogonality_defect(const MapField<Q>& u, const SurfaceGrid& g) {
  const auto [ux, uy] = centered_derivatives(u.values(), g);
  double d = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const auto px = u.target().tangent_part(u[n], ux[n]);
    const auto py = u.target().tangent_part(u[n], uy[n]);
    for (const auto& nu : u.target().normal_frame(u[n]))
      d = std::max({d, std::abs(dot(px, nu)), std::abs(dot(py, nu))});
  }
  return d;
}

// ---------------------------------------------------------------------------
// Gap and triviality
// ---------------------------------------------------------------------------

struct GapReport {
  double du_l2 = 0.0;           ///< ||du||_{L^2}
  double w24_seminorm = 0.0;    ///< (integral |D^2 (u - mean u)|^{4/3})^{3/4}
  double gradV_l43 = 0.0;       ///< ||P grad V(u)||_{L^{4/3}}
  double ratio = 0.0;           ///< w24_seminorm / gradV_l43, 0 when undefined
  double el_residual_l2 = 0.0;
  bool applicable = false;      ///< ||du|| < eps_energy
  bool expect_constant = false; ///< applicable and grad V == 0
  bool confirmed = false;       ///< expect_constant and the seminorm is below const_tol
};

template <std::size_t Q>
GapReport gap_check(const MapField<Q>& u, const FlowProblem<Q>& p, double eps_energy, double const_tol = 1e-3) {
  const auto& g = p.grid;
  GapReport r;
  r.du_l2 = std::sqrt(energies(u, p).E);
  Point<Q> mean = zero_point<Q>();
  for (std::size_t n = 0; n < g.size(); ++n) mean += g.weights()[n] * u[n];
  mean = (1.0 / g.total_volume()) * mean;
  VectorField<Q> centered(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) centered[n] = u[n] - mean;
  const auto hd = hessian_density(centered, g);
  ScalarField d2(g.size()), dv(g.size());
  bool potential_vanishes = true;
  for (std::size_t n = 0; n < g.size(); ++n) {
    d2[n] = std::pow(hd[n], 2.0 / 3.0);
    const double gv = norm(tangential_grad_V(*p.target, *p.fields.potential, u[n]));
    if (gv != 0.0) potential_vanishes = false;
    dv[n] = std::pow(gv, 4.0 / 3.0);
  }
  r.w24_seminorm = std::pow(integrate(d2, g), 0.75);
  r.gradV_l43 = std::pow(integrate(dv, g), 0.75);
  r.ratio = r.gradV_l43 > 0.0 ? r.w24_seminorm / r.gradV_l43 : 0.0;
  r.el_residual_l2 = el_residual(u, p).l2;
  r.applicable = r.du_l2 < eps_energy;
  r.expect_constant = r.applicable && potential_vanishes;
  r.confirmed = r.expect_constant && r.w24_seminorm <= const_tol;
  return r;
}

struct TrivialityReport {
  ScalarField margin;  ///< Scal/2 - (|Z|^2 + kappa)|du|^2_h - |Hess V|
  bool condition_holds_everywhere = false;
  double min_margin = 0.0;
  double energy_density_spread = 0.0;  ///< max - min of |du|^2_h
  bool energy_density_constant = false;
};

template <std::size_t Q>
TrivialityReport triviality_condition(const MapField<Q>& u, const FlowProblem<Q>& p, double kappa, double z_inf,
                                      double hessv_inf, double spread_tol = 1e-6) {
  const auto& g = p.grid;
  const auto scal = g.scalar_curvature();
  const auto flat = flat_energy_density(u.values(), g);
  const auto& em2l = g.inverse_conformal_factor();
  TrivialityReport r;
  r.margin.resize(g.size());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  r.min_margin = lo;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double dens = em2l[n] * flat[n];
    lo = std::min(lo, dens);
    hi = std::max(hi, dens);
    r.margin[n] = 0.5 * scal[n] - (z_inf * z_inf + kappa) * dens - hessv_inf;
    r.min_margin = std::min(r.min_margin, r.margin[n]);
  }
  r.condition_holds_everywhere = r.min_margin >= 0.0;
  r.energy_density_spread = hi - lo;
  r.energy_density_constant = r.energy_density_spread <= spread_tol;
  return r;
}

/// Delta(|du|^2/2) - [|nabla du|^2 + Scal/2 |du|^2 - kappa |du|^4
///   - |Z| |du|^2 |tau| - |Hess V| |du|^2] - <nabla r, du>,
/// with the covariant Hessian P D^2 u, tension tau = P Delta u and
/// r = tau - Z - P grad V the Euler-Lagrange residual. Nonnegative up to
/// truncation error when Z and V vanish; r = 0 at critical points.
template <std::size_t Q>
ScalarField bochner_density(const MapField<Q>& u, const FlowProblem<Q>& p, double z_inf, double hessv_inf) {
  const auto& g = p.grid;
  detail::require_flat(g, "bochner_density");
  const double kappa = p.target->curvature_bound();
  const auto& vals = u.values();
  const auto [ux, uy] = centered_derivatives(vals, g);
  const auto lap = flat_laplacian(vals, g);
  const auto zf = pointwise_bforce(vals, p);
  ScalarField e(g.size());
  VectorField<Q> resid(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    e[n] = 0.5 * (norm2(ux[n]) + norm2(uy[n]));
    resid[n] = p.target->tangent_part(vals[n], lap[n]) - zf[n] -
               tangential_grad_V(*p.target, *p.fields.potential, vals[n]);
  }
  const auto lap_e = flat_laplacian(e, g);
  const auto [rx, ry] = centered_derivatives(resid, g);
  const auto scal = g.scalar_curvature();
  const double ix2 = 1.0 / (g.dx() * g.dx());
  const double iy2 = 1.0 / (g.dy() * g.dy());
  ScalarField out(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    const auto& c = vals[n];
    const Point<Q> uxx = ix2 * (vals[g.east(n)] - c - (c - vals[g.west(n)]));
    const Point<Q> uyy = iy2 * (vals[g.north(n)] - c - (c - vals[g.south(n)]));
    const Point<Q> uxy = detail::mixed_derivative(vals, g, n);
    const double hess2 = norm2(p.target->tangent_part(c, uxx)) + 2.0 * norm2(p.target->tangent_part(c, uxy)) +
                         norm2(p.target->tangent_part(c, uyy));
    const double du2 = 2.0 * e[n];
    const double tau = norm(p.target->tangent_part(c, lap[n]));
    const double bracket = hess2 + 0.5 * scal[n] * du2 - kappa * du2 * du2 - z_inf * du2 * tau - hessv_inf * du2;
    const double correction = dot(rx[n], ux[n]) + dot(ry[n], uy[n]);
    out[n] = lap_e[n] - bracket - correction;
  }
  return out;
}

}  // namespace bosonic

#endif  // BOSONIC_REGULARITY_STRUCTURE_HPP
