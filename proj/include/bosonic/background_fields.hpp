#ifndef BOSONIC_BACKGROUND_FIELDS_HPP
#define BOSONIC_BACKGROUND_FIELDS_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>

#include "bosonic/core.hpp"
#include "bosonic/surface_grid.hpp"
#include "bosonic/target_manifold.hpp"

namespace bosonic {

// ---------------------------------------------------------------------------
// B-field
// ---------------------------------------------------------------------------

/// Two-form B(xi, eta) = xi^T b(y) eta given by an ambient skew matrix field.
template <std::size_t Q>
class TwoFormField {
 public:
  virtual ~TwoFormField() = default;
  virtual std::string kind() const = 0;
  virtual double parameter() const { return 0.0; }
  virtual bool is_zero() const { return false; }

  virtual Matrix<Q> coefficients(const Point<Q>& y) const = 0;

  /// d[k][i][j] = d b_ij / d y^k. Default: central differences, step 1e-5.
  virtual Tensor3<Q> derivatives(const Point<Q>& y) const { return numeric_derivatives(y); }

  Tensor3<Q> numeric_derivatives(const Point<Q>& y, double h = 1e-5) const {
    Tensor3<Q> d{};
    for (std::size_t k = 0; k < Q; ++k) {
      Point<Q> p = y, m = y;
      p[k] += h;
      m[k] -= h;
      const auto bp = coefficients(p);
      const auto bm = coefficients(m);
      for (std::size_t i = 0; i < Q; ++i)
        for (std::size_t j = 0; j < Q; ++j) d[k][i][j] = (bp[i][j] - bm[i][j]) / (2.0 * h);
    }
    return d;
  }
};

template <std::size_t Q>
class ZeroTwoForm final : public TwoFormField<Q> {
 public:
  std::string kind() const override { return "none"; }
  bool is_zero() const override { return true; }
  Matrix<Q> coefficients(const Point<Q>&) const override { return zero_matrix<Q>(); }
  Tensor3<Q> derivatives(const Point<Q>&) const override {
    Tensor3<Q> d{};
    for (auto& m : d) m = zero_matrix<Q>();
    return d;
  }
};

/// b_12 = beta * y^4 (1-based indices), i.e. B = beta y^4 dy^1 ^ dy^2 and
/// dB = beta dy^4 ^ dy^1 ^ dy^2.
template <std::size_t Q>
class HeightTwoForm final : public TwoFormField<Q> {
  static_assert(Q >= 4, "height two-form needs ambient dimension >= 4");

 public:
  explicit HeightTwoForm(double beta) : beta_(beta) {}
  std::string kind() const override { return "height"; }
  double parameter() const override { return beta_; }
  bool is_zero() const override { return beta_ == 0.0; }

  Matrix<Q> coefficients(const Point<Q>& y) const override {
    Matrix<Q> b = zero_matrix<Q>();
    b[0][1] = beta_ * y[3];
    b[1][0] = -beta_ * y[3];
    return b;
  }

  Tensor3<Q> derivatives(const Point<Q>&) const override {
    Tensor3<Q> d{};
    for (auto& m : d) m = zero_matrix<Q>();
    d[3][0][1] = beta_;
    d[3][1][0] = -beta_;
    return d;
  }

 private:
  double beta_;
};

/// Omega = dB: Omega_kij = d_k b_ij + d_i b_jk + d_j b_ki, so that
/// Omega(X, Y, W) = Omega_kij X^k Y^i W^j.
template <std::size_t Q>
Tensor3<Q> three_form(const Tensor3<Q>& db) {
  Tensor3<Q> om{};
  for (std::size_t k = 0; k < Q; ++k)
    for (std::size_t i = 0; i < Q; ++i)
      for (std::size_t j = 0; j < Q; ++j) om[k][i][j] = db[k][i][j] + db[i][j][k] + db[j][k][i];
  return om;
}

template <std::size_t Q>
Tensor3<Q> three_form(const TwoFormField<Q>& b, const Point<Q>& y) {
  return three_form(b.derivatives(y));
}

/// Z before tangential projection: w^k = Omega_kij xi1^i xi2^j.
template <std::size_t Q>
Point<Q> z_ambient(const TwoFormField<Q>& b, const Point<Q>& u, const Point<Q>& xi1, const Point<Q>& xi2) {
  return contract_last_two(three_form(b, u), xi1, xi2);
}

/// <Z(xi1 ^ xi2), eta> = Omega(eta, xi1, xi2) with Z tangent-valued.
template <std::size_t Q>
Point<Q> z_operator(const TargetManifold<Q>& target, const TwoFormField<Q>& b, const Point<Q>& u,
                    const Point<Q>& xi1, const Point<Q>& xi2) {
  target.require_on_manifold(u);
  target.require_tangent(u, xi1);
  target.require_tangent(u, xi2);
  return target.tangent_part(u, z_ambient(b, u, xi1, xi2));
}

// ---------------------------------------------------------------------------
// Scalar potential
// ---------------------------------------------------------------------------

template <std::size_t Q>
class ScalarPotential {
 public:
  virtual ~ScalarPotential() = default;
  virtual std::string kind() const = 0;
  virtual double parameter() const { return 0.0; }
  virtual bool is_zero() const { return false; }

  virtual double value(const Point<Q>& y) const = 0;
  /// Ambient gradient of V.
  virtual Point<Q> gradient(const Point<Q>& y) const = 0;
  /// Ambient Hessian of V.
  virtual Matrix<Q> hessian(const Point<Q>& y) const = 0;
  /// min over N when known in closed form.
  virtual std::optional<double> exact_minimum(const TargetManifold<Q>&) const { return std::nullopt; }
};

template <std::size_t Q>
class ZeroPotential final : public ScalarPotential<Q> {
 public:
  std::string kind() const override { return "none"; }
  bool is_zero() const override { return true; }
  double value(const Point<Q>&) const override { return 0.0; }
  Point<Q> gradient(const Point<Q>&) const override { return zero_point<Q>(); }
  Matrix<Q> hessian(const Point<Q>&) const override { return zero_matrix<Q>(); }
  std::optional<double> exact_minimum(const TargetManifold<Q>&) const override { return 0.0; }
};

/// V = epsilon * y^1 (first ambient coordinate).
template <std::size_t Q>
class HeightPotential final : public ScalarPotential<Q> {
 public:
  explicit HeightPotential(double epsilon) : eps_(epsilon) {}
  std::string kind() const override { return "height"; }
  double parameter() const override { return eps_; }
  bool is_zero() const override { return eps_ == 0.0; }
  double value(const Point<Q>& y) const override { return eps_ * y[0]; }
  Point<Q> gradient(const Point<Q>&) const override { return eps_ * unit_vector<Q>(0); }
  Matrix<Q> hessian(const Point<Q>&) const override { return zero_matrix<Q>(); }
  std::optional<double> exact_minimum(const TargetManifold<Q>& target) const override {
    if (target.kind() == "sphere") return -std::abs(eps_);
    return std::nullopt;
  }

 private:
  double eps_;
};

/// P(u) grad V(u).
template <std::size_t Q>
Point<Q> tangential_grad_V(const TargetManifold<Q>& target, const ScalarPotential<Q>& v, const Point<Q>& u) {
  return target.tangent_part(u, v.gradient(u));
}

/// Intrinsic Hessian on N: Hess V(X,X) = D^2 V(X,X) + <grad V, II(X,X)>.
template <std::size_t Q>
double intrinsic_hessian(const TargetManifold<Q>& target, const ScalarPotential<Q>& v, const Point<Q>& u,
                         const Point<Q>& x) {
  return bilinear(v.hessian(u), x, x) + dot(v.gradient(u), target.second_fundamental_form_extended(u, x, x));
}

/// Everything the action needs about B and V, including the shift A1 that
/// makes V~ = V + A1 nonnegative on N.
template <std::size_t Q>
struct FieldBackground {
  std::shared_ptr<const TwoFormField<Q>> bfield = std::make_shared<ZeroTwoForm<Q>>();
  std::shared_ptr<const ScalarPotential<Q>> potential = std::make_shared<ZeroPotential<Q>>();
  double shift = 0.0;  ///< A1

  double shifted_potential(const Point<Q>& y) const { return potential->value(y) + shift; }
};

// ---------------------------------------------------------------------------
// Sup-norm estimates
// ---------------------------------------------------------------------------

struct SupNorms {
  double B_inf = 0.0;      ///< comass estimate of B
  double Z_inf = 0.0;      ///< sup |Z(xi1 ^ xi2)| over orthonormal tangent pairs
  double gradV_inf = 0.0;  ///< sup |P grad V|
  double hessV_inf = 0.0;  ///< sup |Hess V(X,X)| over unit tangent X
  double A1 = 0.0;         ///< -min sampled V
  double A2 = 0.0;         ///< max sampled V
  int n_samples = 0;
  int pairs_per_sample = 0;
};

/// Quasi-random (fixed-seed) sampling of N. All values are lower bounds of
/// the true suprema.
template <std::size_t Q>
SupNorms sup_norms(const TwoFormField<Q>& b, const ScalarPotential<Q>& v, const TargetManifold<Q>& target,
                   int n_samples, std::uint64_t seed = 0x5eed, int pairs_per_sample = 4) {
  if (n_samples < 1000) throw InvalidArgument("sup_norms needs at least 1000 samples");
  std::mt19937_64 rng(seed);
  SupNorms s;
  s.n_samples = n_samples;
  s.pairs_per_sample = pairs_per_sample;
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_samples; ++k) {
    const auto u = target.sample(rng);
    const double val = v.value(u);
    vmin = std::min(vmin, val);
    vmax = std::max(vmax, val);
    s.gradV_inf = std::max(s.gradV_inf, norm(tangential_grad_V(target, v, u)));
    const auto bu = b.coefficients(u);
    const auto om = three_form(b, u);
    for (int p = 0; p < pairs_per_sample; ++p) {
      const auto [x1, x2] = random_orthonormal_tangent_pair(target, u, rng);
      s.B_inf = std::max(s.B_inf, std::abs(bilinear(bu, x1, x2)));
      s.Z_inf = std::max(s.Z_inf, norm(target.tangent_part(u, contract_last_two(om, x1, x2))));
      s.hessV_inf = std::max(s.hessV_inf, std::abs(intrinsic_hessian(target, v, u, x1)));
    }
  }
  s.A1 = std::max(0.0, -vmin);
  s.A2 = vmax;
  return s;
}

/// Shift A1 = -min_N V: closed form when the potential provides one,
/// otherwise the sampled estimate.
template <std::size_t Q>
double potential_shift(const ScalarPotential<Q>& v, const TargetManifold<Q>& target, int n_samples = 4096) {
  if (auto m = v.exact_minimum(target)) return std::max(0.0, -*m);
  std::mt19937_64 rng(0x5eed);
  double vmin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_samples; ++k) vmin = std::min(vmin, v.value(target.sample(rng)));
  return std::max(0.0, -vmin);
}

// ---------------------------------------------------------------------------
// Constants of the energy monotonicity and the smallness hypotheses
// ---------------------------------------------------------------------------

struct DeltaConstants {
  double delta2 = 0.0;
  double delta3 = 0.0;
};

/// delta2 = 1/(1/2 - |B|), delta3 = (1/2 + |B|)/(1/2 - |B|).
inline DeltaConstants delta_constants(double b_inf) {
  if (!(b_inf >= 0.0)) throw InvalidArgument("delta_constants: |B|_inf must be nonnegative");
  if (!(b_inf < 0.5)) throw HypothesisViolation("delta_constants: |B|_inf = " + std::to_string(b_inf) + " >= 1/2");
  const double gap = 0.5 - b_inf;
  return {1.0 / gap, (0.5 + b_inf) / gap};
}

struct SmallnessReport {
  double integral_tilde_V = 0.0;
  double B_inf = 0.0;
  double delta1 = 0.0;
  double delta2 = std::numeric_limits<double>::infinity();
  double potential_bound = 0.0;  ///< delta1 / delta2
  bool bfield_ok = false;        ///< |B|_inf < 1/2
  bool potential_ok = false;     ///< integral V~ <= delta1/delta2
  bool passes() const { return bfield_ok && potential_ok; }
};

/// Checks both flow hypotheses on the initial map u0 (node values on the grid).
template <std::size_t Q>
SmallnessReport smallness_report(const FieldBackground<Q>& fields, const VectorField<Q>& u0, const SurfaceGrid& grid,
                                 double delta1, double b_inf) {
  if (u0.size() != grid.size()) throw InvalidArgument("smallness_report: field size does not match grid");
  SmallnessReport r;
  r.delta1 = delta1;
  r.B_inf = b_inf;
  ScalarField vt(u0.size());
  for (std::size_t n = 0; n < u0.size(); ++n) vt[n] = fields.shifted_potential(u0[n]);
  r.integral_tilde_V = integrate(vt, grid);
  r.bfield_ok = b_inf < 0.5;
  if (r.bfield_ok) {
    r.delta2 = delta_constants(b_inf).delta2;
    r.potential_bound = delta1 / r.delta2;
    r.potential_ok = r.integral_tilde_V <= r.potential_bound;
  }
  return r;
}

}  // namespace bosonic

#endif  // BOSONIC_BACKGROUND_FIELDS_HPP
