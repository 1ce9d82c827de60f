#ifndef BOSONIC_SURFACE_GRID_HPP
#define BOSONIC_SURFACE_GRID_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bosonic/core.hpp"

namespace bosonic {

template <std::size_t Q>
using VectorField = std::vector<Point<Q>>;

using ScalarField = std::vector<double>;

/// Grid node, addressed by its column ix and row iy.
struct Node {
  int ix = 0;
  int iy = 0;
  friend bool operator==(const Node&, const Node&) = default;
};

/// Periodic rectangular grid on the torus [0,Lx) x [0,Ly) carrying the
/// conformal metric h = e^{2 lambda} (dx^2 + dy^2).
///
/// Nodes are stored row-major: index = iy * nx + ix. The orthonormal frame is
/// e1 = e^{-lambda} d/dx, e2 = e^{-lambda} d/dy, and the volume weight of a
/// node is e^{2 lambda} dx dy.
class SurfaceGrid {
 public:
  static constexpr int kMinNodes = 8;

  static SurfaceGrid build(int nx, int ny, double lx, double ly,
                           const std::function<double(double, double)>& lambda) {
    check_shape(nx, ny, lx, ly);
    std::vector<double> values(static_cast<std::size_t>(nx) * ny);
    const double dx = lx / nx;
    const double dy = ly / ny;
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        values[static_cast<std::size_t>(j) * nx + i] = lambda ? lambda(i * dx, j * dy) : 0.0;
    return SurfaceGrid(nx, ny, lx, ly, std::move(values));
  }

  static SurfaceGrid flat(int nx, int ny, double lx = kTwoPi, double ly = kTwoPi) {
    return build(nx, ny, lx, ly, nullptr);
  }

  static SurfaceGrid from_lambda(int nx, int ny, double lx, double ly, std::vector<double> lambda) {
    check_shape(nx, ny, lx, ly);
    if (lambda.size() != static_cast<std::size_t>(nx) * ny)
      throw InvalidArgument("lambda has " + std::to_string(lambda.size()) + " values, expected " +
                            std::to_string(static_cast<std::size_t>(nx) * ny));
    return SurfaceGrid(nx, ny, lx, ly, std::move(lambda));
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double dx() const { return lx_ / nx_; }
  double dy() const { return ly_ / ny_; }
  double cell_area() const { return dx() * dy(); }
  std::size_t size() const { return lambda_.size(); }

  double x(int ix) const { return ix * dx(); }
  double y(int iy) const { return iy * dy(); }

  static int wrap(int i, int n) {
    const int r = i % n;
    return r < 0 ? r + n : r;
  }

  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(wrap(iy, ny_)) * nx_ + wrap(ix, nx_);
  }
  std::size_t index(Node n) const { return index(n.ix, n.iy); }
  Node node(std::size_t idx) const {
    return {static_cast<int>(idx % nx_), static_cast<int>(idx / nx_)};
  }

  std::size_t east(std::size_t n) const { return n % nx_ + 1 == static_cast<std::size_t>(nx_) ? n + 1 - nx_ : n + 1; }
  std::size_t west(std::size_t n) const { return n % nx_ == 0 ? n + nx_ - 1 : n - 1; }
  std::size_t north(std::size_t n) const { return n + nx_ >= size() ? n + nx_ - size() : n + nx_; }
  std::size_t south(std::size_t n) const { return n < static_cast<std::size_t>(nx_) ? n + size() - nx_ : n - nx_; }

  const std::vector<double>& lambda() const { return lambda_; }
  /// e^{2 lambda}
  const std::vector<double>& conformal_factor() const { return e2l_; }
  /// e^{-2 lambda}
  const std::vector<double>& inverse_conformal_factor() const { return em2l_; }
  /// e^{-lambda}
  const std::vector<double>& frame_scale() const { return eml_; }
  /// Volume weights e^{2 lambda} dx dy.
  const std::vector<double>& weights() const { return weights_; }

  double total_volume() const { return pairwise_sum(weights_); }
  bool is_flat() const { return flat_; }
  double min_lambda() const { return *std::min_element(lambda_.begin(), lambda_.end()); }

  /// Flat-torus value min(Lx, Ly)/2; bounds admissible ball radii.
  double injectivity_radius() const { return 0.5 * std::min(lx_, ly_); }

  /// Largest explicit step: cfl * min(dx,dy)^2 * e^{2 min lambda} / 4.
  double cfl_dt_bound(double cfl) const {
    const double h = std::min(dx(), dy());
    return cfl * h * h * std::exp(2.0 * min_lambda()) / 4.0;
  }

  /// Metric h~ = a h, i.e. lambda~ = lambda + ln(a)/2.
  SurfaceGrid conformal_rescale(double a) const {
    if (!(a > 0.0) || !std::isfinite(a)) throw InvalidArgument("conformal_rescale: factor must be positive");
    if (a == 1.0) return *this;
    std::vector<double> l = lambda_;
    const double shift = 0.5 * std::log(a);
    for (auto& v : l) v += shift;
    SurfaceGrid g(nx_, ny_, lx_, ly_, std::move(l));
    // Weights scale exactly by a; keep the volume factor free of exp/log roundoff.
    for (std::size_t n = 0; n < g.size(); ++n) g.weights_[n] = a * weights_[n];
    return g;
  }

  /// Scal = -2 e^{-2 lambda} Delta_flat(lambda), five-point stencil.
  ScalarField scalar_curvature() const {
    ScalarField s(size());
    const double ix2 = 1.0 / (dx() * dx());
    const double iy2 = 1.0 / (dy() * dy());
    for (std::size_t n = 0; n < size(); ++n) {
      const double lap = (lambda_[east(n)] - 2.0 * lambda_[n] + lambda_[west(n)]) * ix2 +
                         (lambda_[north(n)] - 2.0 * lambda_[n] + lambda_[south(n)]) * iy2;
      s[n] = -2.0 * em2l_[n] * lap;
    }
    return s;
  }

  friend bool operator==(const SurfaceGrid& a, const SurfaceGrid& b) {
    return a.nx_ == b.nx_ && a.ny_ == b.ny_ && a.lx_ == b.lx_ && a.ly_ == b.ly_ && a.lambda_ == b.lambda_;
  }

 private:
  SurfaceGrid(int nx, int ny, double lx, double ly, std::vector<double> lambda)
      : nx_(nx), ny_(ny), lx_(lx), ly_(ly), lambda_(std::move(lambda)) {
    const std::size_t n = lambda_.size();
    e2l_.resize(n);
    em2l_.resize(n);
    eml_.resize(n);
    weights_.resize(n);
    flat_ = true;
    for (std::size_t k = 0; k < n; ++k) {
      const double l = lambda_[k];
      if (!std::isfinite(l)) throw InvalidArgument("lambda is not finite at node " + std::to_string(k));
      if (l != 0.0) flat_ = false;
      e2l_[k] = std::exp(2.0 * l);
      em2l_[k] = std::exp(-2.0 * l);
      eml_[k] = std::exp(-l);
      weights_[k] = e2l_[k] * dx() * dy();
    }
  }

  static void check_shape(int nx, int ny, double lx, double ly) {
    if (nx < kMinNodes || ny < kMinNodes)
      throw InvalidArgument("grid needs at least " + std::to_string(kMinNodes) + " nodes per direction, got " +
                            std::to_string(nx) + "x" + std::to_string(ny));
    if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly))
      throw InvalidArgument("grid periods must be positive and finite");
  }

  int nx_;
  int ny_;
  double lx_;
  double ly_;
  std::vector<double> lambda_;
  std::vector<double> e2l_;
  std::vector<double> em2l_;
  std::vector<double> eml_;
  std::vector<double> weights_;
  bool flat_ = true;
};

// ---------------------------------------------------------------------------
// Stencils. Fields are node-major; element type is Point<Q> or double.
// ---------------------------------------------------------------------------

namespace detail {
inline double sq(double x) { return x * x; }
template <std::size_t Q>
inline double sq(const Point<Q>& p) { return norm2(p); }
}  // namespace detail

/// Five-point flat Laplacian f_xx + f_yy.
template <class T>
std::vector<T> flat_laplacian(const std::vector<T>& f, const SurfaceGrid& g) {
  std::vector<T> out(f.size());
  const double ix2 = 1.0 / (g.dx() * g.dx());
  const double iy2 = 1.0 / (g.dy() * g.dy());
  parallel_for(g.size(), [&](std::size_t n) {
    const T& c = f[n];
    out[n] = ix2 * (f[g.east(n)] - c - (c - f[g.west(n)])) + iy2 * (f[g.north(n)] - c - (c - f[g.south(n)]));
  });
  return out;
}

/// Laplace-Beltrami of the conformal metric, e^{-2 lambda}(f_xx + f_yy).
/// Self-adjoint with respect to the volume weights.
template <class T>
std::vector<T> laplace_beltrami(const std::vector<T>& f, const SurfaceGrid& g) {
  if (f.size() != g.size()) throw InvalidArgument("laplace_beltrami: field size does not match grid");
  auto out = flat_laplacian(f, g);
  const auto& em2l = g.inverse_conformal_factor();
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = em2l[n] * out[n];
  return out;
}

/// Centered coordinate derivatives (d/dx f, d/dy f).
template <class T>
std::pair<std::vector<T>, std::vector<T>> centered_derivatives(const std::vector<T>& f, const SurfaceGrid& g) {
  std::vector<T> fx(f.size()), fy(f.size());
  const double hx = 0.5 / g.dx();
  const double hy = 0.5 / g.dy();
  parallel_for(g.size(), [&](std::size_t n) {
    fx[n] = hx * (f[g.east(n)] - f[g.west(n)]);
    fy[n] = hy * (f[g.north(n)] - f[g.south(n)]);
  });
  return {std::move(fx), std::move(fy)};
}

template <std::size_t Q>
struct FrameDerivatives {
  VectorField<Q> e1;
  VectorField<Q> e2;
};

/// du(e1) = e^{-lambda} centered d/dx u, du(e2) = e^{-lambda} centered d/dy u.
template <std::size_t Q>
FrameDerivatives<Q> frame_derivatives(const VectorField<Q>& u, const SurfaceGrid& g) {
  if (u.size() != g.size()) throw InvalidArgument("frame_derivatives: field size does not match grid");
  auto [ux, uy] = centered_derivatives(u, g);
  const auto& s = g.frame_scale();
  for (std::size_t n = 0; n < g.size(); ++n) {
    ux[n] = s[n] * ux[n];
    uy[n] = s[n] * uy[n];
  }
  return {std::move(ux), std::move(uy)};
}

/// Node density of the flat Dirichlet integrand, averaged over the forward and
/// backward edges: sum over nodes times dx dy is exactly sum over edges of
/// |forward difference|^2 dx dy, whose gradient is the five-point Laplacian.
template <class T>
ScalarField flat_energy_density(const std::vector<T>& u, const SurfaceGrid& g) {
  ScalarField d(g.size());
  const double ix2 = 1.0 / (g.dx() * g.dx());
  const double iy2 = 1.0 / (g.dy() * g.dy());
  parallel_for(g.size(), [&](std::size_t n) {
    const T& c = u[n];
    d[n] = 0.5 * ix2 * (detail::sq(u[g.east(n)] - c) + detail::sq(c - u[g.west(n)])) +
           0.5 * iy2 * (detail::sq(u[g.north(n)] - c) + detail::sq(c - u[g.south(n)]));
  });
  return d;
}

/// Sum of |second differences|^2 at each node on the flat metric:
/// |u_xx|^2 + |u_yy|^2 + 2|u_xy|^2, with |u_xy|^2 averaged over the four
/// one-sided mixed differences around the node. With this choice the sum over
/// the grid satisfies the summation-by-parts identity
/// sum |Delta u|^2 = sum |Hess u|^2 exactly on the flat torus.
template <class T>
ScalarField hessian_density(const std::vector<T>& u, const SurfaceGrid& g) {
  ScalarField d(g.size());
  const double ix2 = 1.0 / (g.dx() * g.dx());
  const double iy2 = 1.0 / (g.dy() * g.dy());
  const double ixy = 1.0 / (g.dx() * g.dy());
  parallel_for(g.size(), [&](std::size_t n) {
    const T& c = u[n];
    const std::size_t e = g.east(n), w = g.west(n), no = g.north(n), s = g.south(n);
    const T uxx = ix2 * (u[e] - c - (c - u[w]));
    const T uyy = iy2 * (u[no] - c - (c - u[s]));
    const double ne = detail::sq(ixy * (u[g.north(e)] - u[e] - (u[no] - c)));
    const double nw = detail::sq(ixy * (u[no] - c - (u[g.north(w)] - u[w])));
    const double se = detail::sq(ixy * (u[e] - c - (u[g.south(e)] - u[s])));
    const double sw = detail::sq(ixy * (c - u[w] - (u[s] - u[g.south(w)])));
    d[n] = detail::sq(uxx) + detail::sq(uyy) + 0.5 * (ne + nw + se + sw);
  });
  return d;
}

/// Discretization of the integral of <f, g> dvol_h.
template <std::size_t Q>
double l2_inner(const VectorField<Q>& f, const VectorField<Q>& h, const SurfaceGrid& g) {
  if (f.size() != h.size() || f.size() != g.size())
    throw InvalidArgument("l2_inner: shape mismatch (" + std::to_string(f.size()) + " vs " +
                          std::to_string(h.size()) + " on a grid of " + std::to_string(g.size()) + ")");
  ScalarField terms(f.size());
  const auto& w = g.weights();
  for (std::size_t n = 0; n < f.size(); ++n) terms[n] = dot(f[n], h[n]) * w[n];
  return pairwise_sum(terms);
}

inline double l2_inner(const ScalarField& f, const ScalarField& h, const SurfaceGrid& g) {
  if (f.size() != h.size() || f.size() != g.size()) throw InvalidArgument("l2_inner: shape mismatch");
  ScalarField terms(f.size());
  const auto& w = g.weights();
  for (std::size_t n = 0; n < f.size(); ++n) terms[n] = f[n] * h[n] * w[n];
  return pairwise_sum(terms);
}

/// Integral of a node density against the volume weights.
inline double integrate(const ScalarField& density, const SurfaceGrid& g) {
  ScalarField terms(density.size());
  const auto& w = g.weights();
  for (std::size_t n = 0; n < density.size(); ++n) terms[n] = density[n] * w[n];
  return pairwise_sum(terms);
}

/// Integral of a node density against the flat cell area (metric-independent).
inline double integrate_flat(const ScalarField& density, const SurfaceGrid& g) {
  return pairwise_sum(density) * g.cell_area();
}

struct RicciIdentity {
  double lhs = 0.0;  ///< integral of |Delta v|^2
  double rhs = 0.0;  ///< integral of |Hess v|^2
};

/// Flat-torus form of the Ricci identity, where the curvature term vanishes.
template <class T>
RicciIdentity ricci_identity_check(const std::vector<T>& v, const SurfaceGrid& g) {
  if (!g.is_flat())
    throw UnsupportedConfiguration("ricci_identity_check requires a flat grid (lambda == 0)");
  if (v.size() != g.size()) throw InvalidArgument("ricci_identity_check: field size does not match grid");
  const auto lap = flat_laplacian(v, g);
  ScalarField lap2(lap.size());
  for (std::size_t n = 0; n < lap.size(); ++n) lap2[n] = detail::sq(lap[n]);
  return {integrate_flat(lap2, g), integrate_flat(hessian_density(v, g), g)};
}

/// Coordinate ball around a node. Offsets are translation invariant on the
/// uniform grid, so one stencil serves every center.
class BallStencil {
 public:
  BallStencil(const SurfaceGrid& g, double radius) : radius_(radius) {
    if (!(radius > 0.0) || !(radius < g.injectivity_radius()))
      throw InvalidArgument("ball radius " + std::to_string(radius) + " outside (0, " +
                            std::to_string(g.injectivity_radius()) + ")");
    const int rx = static_cast<int>(std::floor(radius / g.dx()));
    const int ry = static_cast<int>(std::floor(radius / g.dy()));
    const double r2 = radius * radius;
    for (int dj = -ry; dj <= ry; ++dj)
      for (int di = -rx; di <= rx; ++di) {
        const double px = di * g.dx();
        const double py = dj * g.dy();
        if (px * px + py * py <= r2) offsets_.push_back({di, dj});
      }
  }

  double radius() const { return radius_; }
  const std::vector<Node>& offsets() const { return offsets_; }
  std::size_t size() const { return offsets_.size(); }

  std::vector<std::size_t> nodes(const SurfaceGrid& g, Node center) const {
    std::vector<std::size_t> out;
    out.reserve(offsets_.size());
    for (const auto& o : offsets_) out.push_back(g.index(center.ix + o.ix, center.iy + o.iy));
    return out;
  }

  /// Sum of density * weight over the ball, accumulated in stencil order.
  double integrate(const SurfaceGrid& g, Node center, const ScalarField& weighted_density) const {
    double s = 0.0;
    for (const auto& o : offsets_) s += weighted_density[g.index(center.ix + o.ix, center.iy + o.iy)];
    return s;
  }

 private:
  double radius_;
  std::vector<Node> offsets_;
};

/// Indices of nodes within flat periodic coordinate distance R of x0.
inline std::vector<std::size_t> ball_mask(const SurfaceGrid& g, Node x0, double radius) {
  return BallStencil(g, radius).nodes(g, x0);
}

}  // namespace bosonic

#endif  // BOSONIC_SURFACE_GRID_HPP
