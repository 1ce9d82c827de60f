#ifndef BOSONIC_TARGET_MANIFOLD_HPP
#define BOSONIC_TARGET_MANIFOLD_HPP

#include <cmath>
#include <cstddef>
#include <memory>
#include <random>
#include <utility>
#include <string>
#include <vector>

#include "bosonic/core.hpp"

namespace bosonic {

/// Points within this distance of N are accepted as lying on N.
inline constexpr double kOnManifoldTol = 1e-9;
/// Relative tolerance for |X - P X| when a tangent vector is required.
inline constexpr double kTangentTol = 1e-9;

/// A compact submanifold N of R^Q seen through its nearest-point projection.
template <std::size_t Q>
class TargetManifold {
 public:
  static constexpr std::size_t ambient_dim = Q;

  virtual ~TargetManifold() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t intrinsic_dim() const = 0;
  virtual double tubular_radius() const = 0;
  /// Upper bound |kappa^N| on the sectional curvature.
  virtual double curvature_bound() const = 0;

  virtual double distance(const Point<Q>& y) const = 0;
  /// Nearest point on N. Throws ProjectionFailure where it is not single-valued.
  virtual Point<Q> project(const Point<Q>& y) const = 0;
  virtual Matrix<Q> tangent_projector(const Point<Q>& u) const = 0;
  /// P(u) v without forming the matrix.
  virtual Point<Q> tangent_part(const Point<Q>& u, const Point<Q>& v) const {
    return mat_vec(tangent_projector(u), v);
  }
  virtual std::vector<Point<Q>> normal_frame(const Point<Q>& u) const = 0;

  /// Second fundamental form extended bilinearly to arbitrary ambient
  /// vectors; agrees with II on tangent inputs. Used on discrete derivatives,
  /// which are tangent only up to truncation error.
  virtual Point<Q> second_fundamental_form_extended(const Point<Q>& u, const Point<Q>& x,
                                                    const Point<Q>& y) const = 0;

  /// Uniform-ish sample of N.
  virtual Point<Q> sample(std::mt19937_64& rng) const = 0;

  // ---- checked entry points --------------------------------------------

  void require_on_manifold(const Point<Q>& u) const {
    const double d = distance(u);
    if (!(d <= kOnManifoldTol))
      throw OffManifold(kind() + ": point is " + std::to_string(d) + " away from the manifold");
  }

  void require_tangent(const Point<Q>& u, const Point<Q>& x) const {
    const double defect = norm(x - tangent_part(u, x));
    if (!(defect <= kTangentTol * (1.0 + norm(x))))
      throw InvalidArgument(kind() + ": vector is not tangent (normal part " + std::to_string(defect) + ")");
  }

  Matrix<Q> checked_tangent_projector(const Point<Q>& u) const {
    require_on_manifold(u);
    return tangent_projector(u);
  }

  std::vector<Point<Q>> checked_normal_frame(const Point<Q>& u) const {
    require_on_manifold(u);
    return normal_frame(u);
  }

  Point<Q> second_fundamental_form(const Point<Q>& u, const Point<Q>& x, const Point<Q>& y) const {
    require_on_manifold(u);
    require_tangent(u, x);
    require_tangent(u, y);
    return second_fundamental_form_extended(u, x, y);
  }

  /// Normal frame extended off N by nu(y) = frame(project(y)).
  std::vector<Point<Q>> extended_normal_frame(const Point<Q>& y) const { return normal_frame(project(y)); }

  /// d nu_l / d y^j by central differences of the extended frame.
  /// Result[l][j] is the ambient vector d nu_l / d y^j.
  std::vector<std::array<Point<Q>, Q>> normal_frame_derivative(const Point<Q>& u, double h = 1e-5) const {
    const std::size_t codim = Q - intrinsic_dim();
    std::vector<std::array<Point<Q>, Q>> out(codim);
    for (std::size_t j = 0; j < Q; ++j) {
      Point<Q> plus = u, minus = u;
      plus[j] += h;
      minus[j] -= h;
      const auto fp = extended_normal_frame(plus);
      const auto fm = extended_normal_frame(minus);
      for (std::size_t l = 0; l < codim; ++l) out[l][j] = (0.5 / h) * (fp[l] - fm[l]);
    }
    return out;
  }
};

/// Unit sphere S^{Q-1} in R^Q.
template <std::size_t Q>
class SphereTarget final : public TargetManifold<Q> {
  static_assert(Q >= 2, "sphere needs ambient dimension >= 2");
  static constexpr double kMinRadius = 1e-8;

 public:
  std::string kind() const override { return "sphere"; }
  std::size_t intrinsic_dim() const override { return Q - 1; }
  double tubular_radius() const override { return 1.0; }
  double curvature_bound() const override { return 1.0; }

  double distance(const Point<Q>& y) const override { return std::abs(norm(y) - 1.0); }

  /// Radial projection is single-valued on R^Q minus the origin, so only
  /// points near the origin (or non-finite ones) fail.
  Point<Q> project(const Point<Q>& y) const override {
    const double r = norm(y);
    if (!std::isfinite(r) || !(r > kMinRadius))
      throw ProjectionFailure("sphere: cannot project point at radius " + std::to_string(r));
    return (1.0 / r) * y;
  }

  Matrix<Q> tangent_projector(const Point<Q>& u) const override {
    Matrix<Q> p{};
    for (std::size_t i = 0; i < Q; ++i)
      for (std::size_t j = 0; j < Q; ++j) p[i][j] = (i == j ? 1.0 : 0.0) - u[i] * u[j];
    return p;
  }

  Point<Q> tangent_part(const Point<Q>& u, const Point<Q>& v) const override {
    return v - dot(u, v) * u;
  }

  std::vector<Point<Q>> normal_frame(const Point<Q>& u) const override { return {u}; }

  /// II(X, Y) = -<X, Y> u.
  Point<Q> second_fundamental_form_extended(const Point<Q>& u, const Point<Q>& x,
                                            const Point<Q>& y) const override {
    return -dot(x, y) * u;
  }

  Point<Q> sample(std::mt19937_64& rng) const override {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Point<Q> p{};
    do {
      for (auto& c : p) c = gauss(rng);
    } while (norm(p) < 1e-6);
    return (1.0 / norm(p)) * p;
  }
};

/// Second fundamental form by polarized second differences of the projection:
/// II(X,X) ~ (pi(u+hX) + pi(u-hX) - 2u)/h^2, Richardson-extrapolated in h.
template <std::size_t Q>
Point<Q> second_fundamental_form_fd(const TargetManifold<Q>& target, const Point<Q>& u, const Point<Q>& x,
                                    const Point<Q>& y, double h = 0.0) {
  target.require_on_manifold(u);
  target.require_tangent(u, x);
  target.require_tangent(u, y);
  if (h <= 0.0) h = 1e-4 * target.tubular_radius();
  auto quad = [&](const Point<Q>& v, double step) {
    return (1.0 / (step * step)) * (target.project(u + step * v) + target.project(u - step * v) - 2.0 * u);
  };
  auto richardson = [&](const Point<Q>& v) {
    const auto coarse = quad(v, h);
    const auto fine = quad(v, 0.5 * h);
    return (1.0 / 3.0) * (4.0 * fine - coarse);
  };
  // II(x,y) = (II(x+y,x+y) - II(x-y,x-y)) / 4
  return 0.25 * (richardson(x + y) - richardson(x - y));
}

/// Unrichardsoned second difference at a single step, for convergence studies.
template <std::size_t Q>
Point<Q> second_fundamental_form_fd_raw(const TargetManifold<Q>& target, const Point<Q>& u, const Point<Q>& x,
                                        double h) {
  return (1.0 / (h * h)) * (target.project(u + h * x) + target.project(u - h * x) - 2.0 * u);
}

/// Random tangent vector at u with Gaussian ambient components.
template <std::size_t Q>
Point<Q> random_tangent(const TargetManifold<Q>& target, const Point<Q>& u, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Point<Q> v{};
  for (auto& c : v) c = gauss(rng);
  return target.tangent_part(u, v);
}

/// Orthonormal pair of tangent vectors at u.
template <std::size_t Q>
std::pair<Point<Q>, Point<Q>> random_orthonormal_tangent_pair(const TargetManifold<Q>& target, const Point<Q>& u,
                                                               std::mt19937_64& rng) {
  Point<Q> a, b;
  do {
    a = random_tangent(target, u, rng);
  } while (norm(a) < 1e-6);
  a = (1.0 / norm(a)) * a;
  do {
    b = random_tangent(target, u, rng);
    b = b - dot(a, b) * a;
  } while (norm(b) < 1e-6);
  b = (1.0 / norm(b)) * b;
  return {a, b};
}

}  // namespace bosonic

#endif  // BOSONIC_TARGET_MANIFOLD_HPP
