#ifndef BOSONIC_SINGULARITY_ANALYSIS_HPP
#define BOSONIC_SINGULARITY_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <numeric>
#include <string>
#include <vector>

#include "bosonic/action_flow.hpp"
#include "bosonic/ledger.hpp"
#include "bosonic/surface_grid.hpp"

namespace bosonic {

// ---------------------------------------------------------------------------
// Energy concentration
// ---------------------------------------------------------------------------

struct ConcentrationCluster {
  Node node;                 ///< node of maximal ball energy in the cluster
  double local_energy = 0.0;
  std::size_t members = 0;   ///< number of flagged nodes in the cluster
};

/// Ball energies at every node (stride 1) or every stride-th node per axis.
inline ScalarField ball_energies(const SurfaceGrid& g, const BallStencil& ball, const ScalarField& weighted,
                                 int stride = 1) {
  ScalarField e(g.size(), 0.0);
  stride = std::max(1, stride);
  for (int j = 0; j < g.ny(); j += stride)
    for (int i = 0; i < g.nx(); i += stride) e[g.index(i, j)] = ball.integrate(g, {i, j}, weighted);
  return e;
}

namespace detail {
struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

inline double periodic_distance(const SurfaceGrid& g, Node a, Node b) {
  int di = std::abs(a.ix - b.ix);
  int dj = std::abs(a.iy - b.iy);
  di = std::min(di, g.nx() - di);
  dj = std::min(dj, g.ny() - dj);
  return std::hypot(di * g.dx(), dj * g.dy());
}
}  // namespace detail

/// Nodes whose ball energy reaches delta1, grouped into clusters of mutually
/// overlapping balls (centers closer than 2R). One representative per cluster.
template <std::size_t Q>
std::vector<ConcentrationCluster> concentration_scan(const MapField<Q>& u, const FlowProblem<Q>& p, double delta1,
                                                     double radius, int stride = 1) {
  const auto& g = p.grid;
  const BallStencil ball(g, radius);
  const auto energies_at = ball_energies(g, ball, local_densities(u, p).energy, stride);
  std::vector<std::size_t> flagged;
  stride = std::max(1, stride);
  for (int j = 0; j < g.ny(); j += stride)
    for (int i = 0; i < g.nx(); i += stride)
      if (energies_at[g.index(i, j)] >= delta1) flagged.push_back(g.index(i, j));

  detail::DisjointSets sets(flagged.size());
  for (std::size_t a = 0; a < flagged.size(); ++a)
    for (std::size_t b = a + 1; b < flagged.size(); ++b)
      if (detail::periodic_distance(g, g.node(flagged[a]), g.node(flagged[b])) < 2.0 * radius) sets.unite(a, b);

  std::vector<ConcentrationCluster> clusters;
  std::vector<std::size_t> slot(flagged.size(), static_cast<std::size_t>(-1));
  for (std::size_t a = 0; a < flagged.size(); ++a) {
    const std::size_t root = sets.find(a);
    if (slot[root] == static_cast<std::size_t>(-1)) {
      slot[root] = clusters.size();
      clusters.push_back({g.node(flagged[a]), energies_at[flagged[a]], 0});
    }
    auto& c = clusters[slot[root]];
    ++c.members;
    if (energies_at[flagged[a]] > c.local_energy) {
      c.local_energy = energies_at[flagged[a]];
      c.node = g.node(flagged[a]);
    }
  }
  return clusters;
}

/// Upper bound floor(2 delta2 S~(u0) / delta1) on the number of singular points.
inline long k_bound(double s_tilde0, double delta1, double delta2) {
  if (!(delta1 > 0.0)) throw InvalidArgument("k_bound: delta1 must be positive");
  if (!(delta2 >= 2.0)) throw InvalidArgument("k_bound: delta2 must be at least 2");
  if (!(s_tilde0 >= 0.0)) throw InvalidArgument("k_bound: S~(u0) must be nonnegative");
  return static_cast<long>(std::floor(2.0 * delta2 * s_tilde0 / delta1));
}

// ---------------------------------------------------------------------------
// Small-energy radius and time
// ---------------------------------------------------------------------------

struct SmallEnergyScales {
  double R1 = 0.0;
  double T1 = 0.0;
  double sup_local_action = 0.0;  ///< sup_x S~(u0, B_{2 R1}(x))
  double threshold = 0.0;         ///< delta1 / (2 delta2)
  bool admissible = true;         ///< false when even the smallest radius fails
};

/// Candidate radii: quarter grid spacings with 2R inside the injectivity radius.
inline std::vector<double> radius_candidates(const SurfaceGrid& g) {
  std::vector<double> r;
  const double h = 0.25 * std::min(g.dx(), g.dy());
  for (int k = 1; 2.0 * k * h < g.injectivity_radius(); ++k) r.push_back(k * h);
  return r;
}

/// R1: largest candidate radius with sup_x S~(u0, B_{2 R1}(x)) < delta1/(2 delta2),
/// found by bisection (the local action is nondecreasing in R when |B| < 1/2).
/// T1 = delta1 R1^2 / (2 c_hat delta2^2 S~(u0)).
template <std::size_t Q>
SmallEnergyScales choose_R1_T1(const MapField<Q>& u0, const FlowProblem<Q>& p, double delta1, double delta2,
                               double c_hat = 1.0) {
  const double s0 = energies(u0, p).S_tilde;
  if (!(s0 > 0.0)) throw InvalidArgument("choose_R1_T1: S~(u0) must be positive");
  const auto& g = p.grid;
  const auto candidates = radius_candidates(g);
  if (candidates.empty()) throw InvalidArgument("choose_R1_T1: grid admits no radius");
  const auto action = local_densities(u0, p).action;
  auto sup_at = [&](std::size_t k) { return sup_ball_integral(g, BallStencil(g, 2.0 * candidates[k]), action); };

  SmallEnergyScales out;
  out.threshold = delta1 / (2.0 * delta2);
  std::size_t chosen = 0;
  double chosen_sup = sup_at(0);
  if (chosen_sup >= out.threshold) {
    out.admissible = false;
  } else {
    std::size_t lo = 0, hi = candidates.size();  // f(lo) < threshold; hi is one past the search range
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      const double s = sup_at(mid);
      if (s < out.threshold) {
        lo = mid;
        chosen_sup = s;
      } else {
        hi = mid;
      }
    }
    chosen = lo;
  }
  out.R1 = candidates[chosen];
  out.sup_local_action = chosen_sup;
  out.T1 = delta1 * out.R1 * out.R1 / (2.0 * c_hat * delta2 * delta2 * s0);
  return out;
}

// ---------------------------------------------------------------------------
// Convergence
// ---------------------------------------------------------------------------

struct ConvergenceReport {
  bool converged = false;
  double kinetic_norm = 0.0;
  double el_residual_norm = 0.0;
};

/// Converged when integral |du/dt|^2 <= tol^2 and the EL residual L2 <= 10 tol.
template <std::size_t Q>
ConvergenceReport convergence_probe(const EnergyLedger& ledger, const MapField<Q>& u, const FlowProblem<Q>& p,
                                    double conv_tol) {
  if (ledger.size() < 2) throw InvalidArgument("convergence_probe needs at least two ledger records");
  ConvergenceReport r;
  r.kinetic_norm = ledger.back().kinetic;
  r.el_residual_norm = el_residual(u, p).l2;
  r.converged = r.kinetic_norm <= conv_tol * conv_tol && r.el_residual_norm <= 10.0 * conv_tol;
  return r;
}

// ---------------------------------------------------------------------------
// Snapshots and parabolic rescaling
// ---------------------------------------------------------------------------

template <std::size_t Q>
struct Snapshot {
  double t = 0.0;
  VectorField<Q> values;
};

/// Bounded history of snapshots. When full, the older half is thinned by a
/// factor of two, so spacing grows geometrically into the past.
template <std::size_t Q>
class SnapshotRing {
 public:
  explicit SnapshotRing(std::size_t capacity = 32) : capacity_(std::max<std::size_t>(capacity, 4)) {}

  void push(double t, const VectorField<Q>& values) {
    if (items_.size() == capacity_) thin();
    items_.push_back({t, values});
  }

  const std::deque<Snapshot<Q>>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::vector<Snapshot<Q>> to_vector() const { return {items_.begin(), items_.end()}; }

 private:
  void thin() {
    const std::size_t old_half = items_.size() / 2;
    std::deque<Snapshot<Q>> kept;
    for (std::size_t k = 0; k < items_.size(); ++k)
      if (k >= old_half || k % 2 == 0) kept.push_back(std::move(items_[k]));
    items_ = std::move(kept);
  }

  std::size_t capacity_;
  std::deque<Snapshot<Q>> items_;
};

/// Bilinear periodic interpolation of node values at coordinates (x, y).
template <std::size_t Q>
Point<Q> interpolate_bilinear(const VectorField<Q>& f, const SurfaceGrid& g, double x, double y) {
  const double fx = x / g.dx();
  const double fy = y / g.dy();
  const double ix = std::floor(fx);
  const double iy = std::floor(fy);
  const double a = fx - ix;
  const double b = fy - iy;
  const int i = static_cast<int>(ix);
  const int j = static_cast<int>(iy);
  return ((1.0 - a) * (1.0 - b)) * f[g.index(i, j)] + (a * (1.0 - b)) * f[g.index(i + 1, j)] +
         ((1.0 - a) * b) * f[g.index(i, j + 1)] + (a * b) * f[g.index(i + 1, j + 1)];
}

template <std::size_t Q>
struct RescaledSlice {
  double tau = 0.0;  ///< rescaled time (t - t0) / r^2 in [-1, 0]
  double t = 0.0;    ///< source time
  MapField<Q> v;
};

template <std::size_t Q>
struct RescaleResult {
  std::vector<RescaledSlice<Q>> slices;
  double r = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;
  double t0 = 0.0;
  /// Factor multiplying grad V in the equation satisfied by v.
  double potential_factor = 0.0;
};

/// v(x, tau) = u(x0 + r x, t0 + r^2 tau) on out_grid, for every snapshot with
/// t in [t0 - r^2, t0]. Out-grid node (i, j) sits at the centered coordinate
/// ((i < nx/2 ? i : i - nx) dx', same in y), so B_1(0) is the ball around
/// node (0, 0). Interpolated values are projected back to N. v is not evolved.
template <std::size_t Q>
RescaleResult<Q> parabolic_rescale(const std::vector<Snapshot<Q>>& snapshots, const SurfaceGrid& src,
                                   std::shared_ptr<const TargetManifold<Q>> target, Node x0, double t0, double r,
                                   const SurfaceGrid& out_grid) {
  if (!(r >= 2.0 * std::max(src.dx(), src.dy()) * (1.0 - 1e-12)))
    throw InvalidArgument("parabolic_rescale: r must be at least two grid spacings");
  if (snapshots.empty()) throw InvalidArgument("parabolic_rescale: no snapshots");
  const double window = r * r;
  const double tol = 1e-9 * std::max(1.0, std::abs(t0));
  double earliest = snapshots.front().t, latest = snapshots.front().t;
  for (const auto& s : snapshots) {
    earliest = std::min(earliest, s.t);
    latest = std::max(latest, s.t);
  }
  if (earliest > t0 - window + tol || latest < t0 - tol)
    throw InvalidArgument("parabolic_rescale: snapshots cover [" + std::to_string(earliest) + ", " +
                          std::to_string(latest) + "], need [" + std::to_string(t0 - window) + ", " +
                          std::to_string(t0) + "]");
  RescaleResult<Q> res;
  res.r = r;
  res.x0 = src.x(x0.ix);
  res.y0 = src.y(x0.iy);
  res.t0 = t0;
  res.potential_factor = 1.0 / window;
  for (const auto& s : snapshots) {
    if (s.values.size() != src.size()) throw InvalidArgument("parabolic_rescale: snapshot does not match grid");
    if (s.t < t0 - window - tol || s.t > t0 + tol) continue;
    VectorField<Q> raw(out_grid.size());
    for (int j = 0; j < out_grid.ny(); ++j) {
      const double vy = (j < out_grid.ny() / 2 ? j : j - out_grid.ny()) * out_grid.dy();
      for (int i = 0; i < out_grid.nx(); ++i) {
        const double vx = (i < out_grid.nx() / 2 ? i : i - out_grid.nx()) * out_grid.dx();
        raw[out_grid.index(i, j)] = interpolate_bilinear(s.values, src, res.x0 + r * vx, res.y0 + r * vy);
      }
    }
    res.slices.push_back({(s.t - t0) / window, s.t, MapField<Q>::projected(raw, target)});
  }
  return res;
}

// ---------------------------------------------------------------------------
// Local Ladyzhenskaya diagnostic
// ---------------------------------------------------------------------------

/// integral |dv|^4 / [sup_x E(v, B_R(x)) (integral |Hess v|^2 + R^{-2} integral |dv|^2)];
/// zero when the denominator vanishes.
template <class T>
double ladyzhenskaya_ratio(const std::vector<T>& v, const SurfaceGrid& g, double radius) {
  if (!g.is_flat()) throw UnsupportedConfiguration("ladyzhenskaya_ratio requires a flat grid");
  if (v.size() != g.size()) throw InvalidArgument("ladyzhenskaya_ratio: field size does not match grid");
  auto d = flat_energy_density(v, g);
  ScalarField d2(d.size());
  for (std::size_t n = 0; n < d.size(); ++n) d2[n] = d[n] * d[n];
  const double l4 = integrate_flat(d2, g);
  const double e = integrate_flat(d, g);
  const double hess = integrate_flat(hessian_density(v, g), g);
  for (auto& x : d) x *= g.cell_area();
  const double sup_local = sup_ball_integral(g, BallStencil(g, radius), d);
  const double denom = sup_local * (hess + e / (radius * radius));
  return denom == 0.0 ? 0.0 : l4 / denom;
}

}  // namespace bosonic

#endif  // BOSONIC_SINGULARITY_ANALYSIS_HPP
