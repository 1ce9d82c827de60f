#ifndef BOSONIC_FLOW_HPP
#define BOSONIC_FLOW_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "bosonic/action_flow.hpp"
#include "bosonic/ledger.hpp"
#include "bosonic/singularity_analysis.hpp"

namespace bosonic {

/// Non-finite energies or fields during time stepping.
class NumericFailure : public Error {
 public:
  using Error::Error;
};

struct FlowConfig {
  double dt_init = 1e-3;
  double cfl = 0.2;
  double t_end = 1.0;
  double delta1 = 0.5;
  double ball_radius = 0.5;
  double dt_min = 1e-9;
  double conv_tol = 0.0;  ///< <= 0 disables the convergence stop
  int record_every = 10;
  long max_steps = 0;      ///< 0 = unlimited
  int snapshot_every = 0;  ///< 0 = no snapshot history
  int snapshot_capacity = 32;
  int grow_after = 50;
  double grow_factor = 1.1;

  void validate() const {
    auto bad = [](const std::string& what) { throw InvalidArgument("flow config: " + what); };
    if (!(dt_init > 0.0)) bad("dt_init must be positive");
    if (!(dt_min > 0.0) || !(dt_min < dt_init)) bad("dt_min must lie in (0, dt_init)");
    if (!(cfl > 0.0 && cfl <= 1.0)) bad("cfl must lie in (0, 1]");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) bad("t_end must be finite and nonnegative");
    if (!(delta1 > 0.0)) bad("delta1 must be positive");
    if (!(ball_radius > 0.0)) bad("ball_radius must be positive");
    if (record_every < 1) bad("record_every must be at least 1");
    if (max_steps < 0) bad("max_steps must be nonnegative");
    if (snapshot_every < 0) bad("snapshot_every must be nonnegative");
    if (snapshot_capacity < 4) bad("snapshot_capacity must be at least 4");
    if (grow_after < 1 || !(grow_factor >= 1.0)) bad("grow_after >= 1 and grow_factor >= 1 required");
  }
};

template <std::size_t Q>
struct FlowState {
  double t = 0.0;
  MapField<Q> u;
  double dt = 0.0;
  EnergyLedger ledger;
  std::vector<SingularEvent> events;

  long steps = 0;
  long stable_steps = 0;  ///< accepted steps since the last halving
  double cum_dissipation = 0.0;
  double last_kinetic = 0.0;
  double S_tilde = 0.0;   ///< S~ of the current u
  double S_tilde0 = 0.0;  ///< S~ of the initial data
  long floor_hits = 0;
  SnapshotRing<Q> snapshots{32};
};

template <std::size_t Q>
FlowState<Q> initial_state(const MapField<Q>& u0, const FlowProblem<Q>& p, const FlowConfig& cfg) {
  cfg.validate();
  FlowState<Q> s;
  s.u = u0;
  s.dt = std::min(cfg.dt_init, p.grid.cfl_dt_bound(cfg.cfl));
  s.S_tilde = s.S_tilde0 = energies(u0, p).S_tilde;
  if (!std::isfinite(s.S_tilde)) throw NumericFailure("initial action is not finite");
  s.snapshots = SnapshotRing<Q>(static_cast<std::size_t>(cfg.snapshot_capacity));
  return s;
}

struct StepReport {
  double dt = 0.0;  ///< accepted step
  double kinetic = 0.0;
  double S_before = 0.0;
  double S_after = 0.0;
  int halvings = 0;
  bool floor_hit = false;  ///< accepted at dt_min despite an action increase
};

/// Upward slack of the accepted-step test: 1e-10 S~(u0) plus roundoff.
inline double dissipation_slack(double s0, double s_now) {
  return 1e-10 * std::abs(s0) + 1e-14 * std::abs(s_now);
}

/// One explicit Euler step followed by projection. On an action increase the
/// step is retried at half dt; below dt_min it is accepted and flagged.
template <std::size_t Q>
StepReport step(FlowState<Q>& s, const FlowProblem<Q>& p, const FlowConfig& cfg, double dt_cap = 0.0) {
  const auto& g = p.grid;
  const double bound = g.cfl_dt_bound(cfg.cfl);
  double dt = std::min(s.dt, bound);
  if (dt_cap > 0.0) dt = std::min(dt, dt_cap);
  const auto rhs = flow_rhs(s.u, p);
  StepReport rep;
  rep.S_before = s.S_tilde;
  const double slack = dissipation_slack(s.S_tilde0, s.S_tilde);

  VectorField<Q> raw(g.size());
  MapField<Q> next;
  double s_next = 0.0;
  for (;;) {
    for (std::size_t n = 0; n < g.size(); ++n) raw[n] = s.u[n] + dt * rhs[n];
    next = p.make_map(raw);
    s_next = energies(next, p).S_tilde;
    if (!std::isfinite(s_next)) throw NumericFailure("action became non-finite at t = " + std::to_string(s.t));
    if (s_next <= s.S_tilde + slack) break;
    if (0.5 * dt < cfg.dt_min) {
      rep.floor_hit = true;
      break;
    }
    dt *= 0.5;
    ++rep.halvings;
  }

  ScalarField vel(g.size());
  const double inv = 1.0 / dt;
  for (std::size_t n = 0; n < g.size(); ++n) vel[n] = norm2(inv * (next[n] - s.u[n]));
  rep.kinetic = integrate(vel, g);
  rep.dt = dt;
  rep.S_after = s_next;

  s.u = std::move(next);
  s.t += dt;
  s.S_tilde = s_next;
  s.cum_dissipation += rep.kinetic * dt;
  s.last_kinetic = rep.kinetic;
  ++s.steps;
  if (rep.floor_hit) ++s.floor_hits;

  // Next dt: keep a halved step until it has proven stable, then grow.
  s.dt = dt;
  if (rep.halvings > 0 || rep.floor_hit) {
    s.stable_steps = 0;
  } else if (++s.stable_steps >= cfg.grow_after) {
    s.dt = std::min(bound, dt * cfg.grow_factor);
    s.stable_steps = 0;
  }
  return rep;
}

template <std::size_t Q>
LedgerRow make_record(const FlowState<Q>& s, const FlowProblem<Q>& p, const FlowConfig& cfg) {
  const auto e = energies(s.u, p);
  LedgerRow r;
  r.t = s.t;
  r.E = e.E;
  r.dirichlet = e.dirichlet;
  r.B_term = e.B_term;
  r.V_term = e.V_term;
  r.S_tilde = e.S_tilde;
  r.kinetic = s.last_kinetic;
  r.cum_dissipation = s.cum_dissipation;
  r.hess_diag = integrate_flat(hessian_density(s.u.values(), p.grid), p.grid);
  r.sup_local_energy =
      sup_ball_integral(p.grid, BallStencil(p.grid, cfg.ball_radius), local_densities(s.u, p).energy);
  r.dt = s.dt;
  return r;
}

/// Events for a step that hit dt_min: one per concentration cluster, or a
/// single stiffness event at the most energetic ball when nothing concentrates.
template <std::size_t Q>
std::vector<SingularEvent> classify_floor_hit(const FlowState<Q>& s, const FlowProblem<Q>& p,
                                              const FlowConfig& cfg) {
  std::vector<SingularEvent> out;
  const auto clusters = concentration_scan(s.u, p, cfg.delta1, cfg.ball_radius);
  for (const auto& c : clusters)
    out.push_back({s.t, c.node.ix, c.node.iy, cfg.ball_radius, c.local_energy, EventKind::concentration});
  if (out.empty()) {
    const auto& g = p.grid;
    const BallStencil ball(g, cfg.ball_radius);
    const auto e = ball_energies(g, ball, local_densities(s.u, p).energy);
    const auto it = std::max_element(e.begin(), e.end());
    const Node at = g.node(static_cast<std::size_t>(it - e.begin()));
    out.push_back({s.t, at.ix, at.iy, cfg.ball_radius, *it, EventKind::stiffness});
  }
  return out;
}

struct RunSummary {
  bool converged = false;
  bool reached_t_end = false;
  long steps = 0;
  long floor_hits = 0;
};

/// Called after each accepted step; return false to stop.
template <std::size_t Q>
using StepObserver = std::function<bool(const FlowState<Q>&, const StepReport&)>;

/// Advances s to t_end (or max_steps, or convergence). Records at the first
/// step, every record_every steps and at the end. Works in place so the
/// caller keeps the last good state if a step throws.
template <std::size_t Q>
RunSummary run(FlowState<Q>& s, const FlowProblem<Q>& p, const FlowConfig& cfg,
               const StepObserver<Q>& observer = nullptr) {
  cfg.validate();
  RunSummary sum;
  if (s.ledger.empty()) s.ledger.push_back(make_record(s, p, cfg));
  if (cfg.snapshot_every > 0 && s.snapshots.size() == 0) s.snapshots.push(s.t, s.u.values());
  const double t_tol = 1e-12 * std::max(1.0, cfg.t_end);
  bool recorded_last = true;
  while (s.t < cfg.t_end - t_tol && (cfg.max_steps == 0 || s.steps < cfg.max_steps)) {
    const auto rep = step(s, p, cfg, cfg.t_end - s.t);
    recorded_last = false;
    if (rep.floor_hit)
      for (const auto& e : classify_floor_hit(s, p, cfg)) s.events.push_back(e);
    if (cfg.snapshot_every > 0 && s.steps % cfg.snapshot_every == 0) s.snapshots.push(s.t, s.u.values());
    if (s.steps % cfg.record_every == 0) {
      s.ledger.push_back(make_record(s, p, cfg));
      recorded_last = true;
      if (cfg.conv_tol > 0.0 && convergence_probe(s.ledger, s.u, p, cfg.conv_tol).converged) {
        sum.converged = true;
        break;
      }
    }
    if (observer && !observer(s, rep)) break;
  }
  if (!recorded_last && s.t > s.ledger.back().t) {
    s.ledger.push_back(make_record(s, p, cfg));
    if (cfg.conv_tol > 0.0 && convergence_probe(s.ledger, s.u, p, cfg.conv_tol).converged) sum.converged = true;
  }
  sum.reached_t_end = s.t >= cfg.t_end - t_tol;
  sum.steps = s.steps;
  sum.floor_hits = s.floor_hits;
  return sum;
}

// ---------------------------------------------------------------------------
// Ledger checks
// ---------------------------------------------------------------------------

struct MonotonicityReport {
  double max_energy_ratio = 0.0;  ///< max_t E(u_t) / (delta2 S~(u0))
  bool energy_bound_ok = true;
  bool action_monotone = true;
  double max_action_increase = 0.0;
  double identity_defect = 0.0;  ///< |S~(u_T) + dissipation - S~(u0)|
  double identity_tol = 0.0;
  bool identity_ok = true;
  bool passes() const { return energy_bound_ok && action_monotone && identity_ok; }
};

/// E(u_t) <= delta2 S~(u0) at every record, S~ non-increasing between records
/// and the discrete energy identity. identity_tol <= 0 means 1e-3 S~(u0).
inline MonotonicityReport monotonicity_check(const EnergyLedger& ledger, double delta2, double s_tilde0,
                                             double identity_tol = 0.0) {
  if (ledger.empty()) throw InvalidArgument("monotonicity_check: empty ledger");
  MonotonicityReport r;
  const double bound = delta2 * s_tilde0 * (1.0 + 1e-9);
  for (std::size_t k = 0; k < ledger.size(); ++k) {
    const auto& row = ledger[k];
    if (delta2 * s_tilde0 > 0.0) r.max_energy_ratio = std::max(r.max_energy_ratio, row.E / (delta2 * s_tilde0));
    if (row.E > bound) r.energy_bound_ok = false;
    if (k > 0) {
      const double up = row.S_tilde - ledger[k - 1].S_tilde;
      r.max_action_increase = std::max(r.max_action_increase, up);
      if (up > dissipation_slack(s_tilde0, ledger[k - 1].S_tilde)) r.action_monotone = false;
    }
  }
  r.identity_defect = std::abs(ledger.back().S_tilde + ledger.back().cum_dissipation - s_tilde0);
  r.identity_tol = identity_tol > 0.0 ? identity_tol : 1e-3 * s_tilde0;
  r.identity_ok = r.identity_defect <= r.identity_tol;
  return r;
}

}  // namespace bosonic

#endif  // BOSONIC_FLOW_HPP
