#ifndef BOSONIC_HARNESS_HPP
#define BOSONIC_HARNESS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bosonic/config.hpp"
#include "bosonic/flow.hpp"
#include "bosonic/io.hpp"
#include "bosonic/regularity_structure.hpp"
#include "bosonic/singularity_analysis.hpp"

namespace bosonic {

enum ExitCode : int { kExitOk = 0, kExitBadConfig = 1, kExitHypothesis = 2, kExitNumeric = 3 };

/// Calls fn.template operator()<Q>() for the configured ambient dimension.
template <class Fn>
decltype(auto) dispatch_q(int q, Fn&& fn) {
  switch (q) {
    case 4: return fn.template operator()<4>();
    case 5: return fn.template operator()<5>();
    case 6: return fn.template operator()<6>();
    default: throw ConfigError("target.q: supported values are 4, 5 and 6");
  }
}

/// Output directory: BOSONIC_OUT overrides the configured one.
inline fs::path resolve_out_dir(const RunConfig& c, const std::string& cli_out = {}) {
  if (!cli_out.empty()) return cli_out;
  if (const char* env = std::getenv("BOSONIC_OUT"); env && *env) return env;
  return c.output.dir;
}

// ---------------------------------------------------------------------------
// Hypotheses
// ---------------------------------------------------------------------------

struct HypothesisSummary {
  nlohmann::json report;
  bool passes = true;
  double delta2 = 0.0;
  long k_max = -1;
};

template <std::size_t Q>
HypothesisSummary hypothesis_report(const RunConfig& c, const FlowProblem<Q>& p, const MapField<Q>& u0) {
  const auto sup = sup_norms(*p.fields.bfield, *p.fields.potential, *p.target, c.monitor.sup_samples, c.seed);
  const auto small = smallness_report(p.fields, u0.values(), p.grid, c.flow.delta1, sup.B_inf);
  const double s0 = energies(u0, p).S_tilde;
  HypothesisSummary h;
  auto& j = h.report;
  j["sup_norms"] = {{"B_inf", sup.B_inf},   {"Z_inf", sup.Z_inf},     {"gradV_inf", sup.gradV_inf},
                    {"hessV_inf", sup.hessV_inf}, {"A1", sup.A1},      {"A2", sup.A2},
                    {"n_samples", sup.n_samples}, {"pairs_per_sample", sup.pairs_per_sample},
                    {"note", "sampled estimates: lower bounds of the true suprema"}};
  j["bfield_ok"] = small.bfield_ok;
  j["integral_tilde_V"] = small.integral_tilde_V;
  j["potential_bound"] = small.potential_bound;
  j["potential_ok"] = small.potential_ok;
  j["delta1"] = c.flow.delta1;
  j["S_tilde0"] = s0;
  j["target_dim_ok"] = p.fields.bfield->is_zero() || p.target->intrinsic_dim() >= 3;
  h.passes = small.passes() && j["target_dim_ok"].get<bool>();
  if (small.bfield_ok) {
    const auto d = delta_constants(sup.B_inf);
    h.delta2 = d.delta2;
    j["delta2"] = d.delta2;
    j["delta3"] = d.delta3;
    h.k_max = k_bound(std::max(0.0, s0), c.flow.delta1, d.delta2);
    j["k_bound"] = h.k_max;
    if (s0 > 0.0) {
      const auto rt = choose_R1_T1(u0, p, c.flow.delta1, d.delta2, c.monitor.c_hat);
      j["R1"] = rt.R1;
      j["T1"] = rt.T1;
      j["R1_admissible"] = rt.admissible;
      if (!rt.admissible) j["R1_warning"] = "no admissible radius; smallest grid radius returned";
    }
  }
  j["passes"] = h.passes;
  return h;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct ScenarioOutcome {
  int exit_code = kExitOk;
  nlohmann::json report;
};

template <std::size_t Q>
void write_state_snapshot(const fs::path& path, const RunConfig& c, const VectorField<Q>& f, double t) {
  write_snapshot(path, SnapshotData::from_field<Q>(f, c.grid.nx, c.grid.ny, t, c.target.kind));
}

template <std::size_t Q>
ScenarioOutcome run_scenario_q(const RunConfig& c, const fs::path& out) {
  fs::create_directories(out);
  write_json(out / "config.json", to_json(c));
  const auto p = make_problem<Q>(c);
  const auto u0 = make_initial<Q>(c.initial, p, c.seed);
  auto hyp = hypothesis_report(c, p, u0);

  ScenarioOutcome res;
  auto& rep = res.report;
  rep["name"] = c.name;
  rep["hypotheses"] = hyp.report;
  if (!hyp.passes) std::cerr << "warning: flow hypotheses not satisfied; running anyway\n";

  auto state = initial_state(u0, p, c.flow);
  RunSummary sum;
  try {
    sum = run(state, p, c.flow);
  } catch (const Error& e) {
    // Keep the last good state for inspection.
    write_state_snapshot<Q>(out / "failure_state.bin", c, state.u.values(), state.t);
    write_ledger_csv(out / "ledger.csv", state.ledger);
    rep["failure"] = e.what();
    rep["failure_t"] = state.t;
    write_json(out / "report.json", rep);
    res.exit_code = kExitNumeric;
    return res;
  }

  write_ledger_csv(out / "ledger.csv", state.ledger);
  write_events(out / "events.jsonl", state.events);
  if (c.output.final_snapshot) write_state_snapshot<Q>(out / "final.bin", c, state.u.values(), state.t);
  if (c.output.history_snapshots) {
    fs::create_directories(out / "history");
    int k = 0;
    for (const auto& s : state.snapshots.items()) {
      char name[32];
      std::snprintf(name, sizeof name, "snap_%04d.bin", k++);
      write_state_snapshot<Q>(out / "history" / name, c, s.values, s.t);
    }
  }

  const auto el = el_residual(state.u, p);
  rep["run"] = {{"steps", sum.steps},
                {"t_final", state.t},
                {"converged", sum.converged},
                {"reached_t_end", sum.reached_t_end},
                {"floor_hits", sum.floor_hits},
                {"events", state.events.size()},
                {"el_residual_l2", el.l2},
                {"el_residual_linf", el.linf},
                {"el_residual_normal_l2", el.normal_l2},
                {"S_tilde0", state.S_tilde0},
                {"S_tilde_final", state.S_tilde},
                {"E_final", state.ledger.back().E},
                {"max_dist_to_target", state.u.max_distance()}};
  if (hyp.delta2 > 0.0) {
    const auto m = monotonicity_check(state.ledger, hyp.delta2, state.S_tilde0);
    rep["monotonicity"] = {{"energy_bound_ok", m.energy_bound_ok}, {"max_energy_ratio", m.max_energy_ratio},
                           {"action_monotone", m.action_monotone}, {"max_action_increase", m.max_action_increase},
                           {"identity_defect", m.identity_defect}, {"identity_tol", m.identity_tol},
                           {"identity_ok", m.identity_ok}};
  }
  std::size_t clusters = 0;
  for (const auto& e : state.events)
    if (e.kind == EventKind::concentration) ++clusters;
  if (hyp.passes && hyp.k_max >= 0) {
    const bool ok = static_cast<long>(clusters) <= hyp.k_max;
    rep["k_bound_ok"] = ok;
    if (!ok)
      std::cerr << "RED FLAG: " << clusters << " concentration events exceed the bound " << hyp.k_max
                << " in a run that satisfies the hypotheses\n";
  }
  write_json(out / "report.json", rep);
  res.exit_code = hyp.passes ? kExitOk : kExitHypothesis;
  return res;
}

inline ScenarioOutcome run_scenario(const RunConfig& c, const fs::path& out) {
  return dispatch_q(c.target.q, [&]<std::size_t Q>() { return run_scenario_q<Q>(c, out); });
}

// ---------------------------------------------------------------------------
// check / scan on a stored snapshot
// ---------------------------------------------------------------------------

template <std::size_t Q>
MapField<Q> load_map(const RunConfig& c, const FlowProblem<Q>& p, const fs::path& snap) {
  const auto s = read_snapshot(snap);
  if (s.nx != c.grid.nx || s.ny != c.grid.ny)
    throw InvalidArgument("snapshot grid " + std::to_string(s.nx) + "x" + std::to_string(s.ny) +
                          " does not match the configured grid");
  return MapField<Q>(s.to_field<Q>(), p.target);
}

template <std::size_t Q>
nlohmann::json check_snapshot_q(const RunConfig& c, const fs::path& snap) {
  const auto p = make_problem<Q>(c);
  const auto u = load_map<Q>(c, p, snap);
  auto hyp = hypothesis_report(c, p, u);
  const auto sup = hyp.report["sup_norms"];
  const double z_inf = sup["Z_inf"].template get<double>();
  const double hv = sup["hessV_inf"].template get<double>();
  const auto e = energies(u, p);
  const auto el = el_residual(u, p);
  const auto gap = gap_check(u, p, c.monitor.gap_energy);
  const auto triv = triviality_condition(u, p, p.target->curvature_bound(), z_inf, hv);
  nlohmann::json j;
  j["hypotheses"] = hyp.report;
  j["energies"] = {{"E", e.E}, {"dirichlet", e.dirichlet}, {"B_term", e.B_term}, {"V_term", e.V_term},
                   {"S_tilde", e.S_tilde}, {"S_raw", e.S_raw}};
  j["el_residual"] = {{"l2", el.l2}, {"linf", el.linf}, {"normal_l2", el.normal_l2}};
  j["max_dist_to_target"] = u.max_distance();
  j["gap"] = {{"du_l2", gap.du_l2},         {"w24_seminorm", gap.w24_seminorm}, {"gradV_l43", gap.gradV_l43},
              {"ratio", gap.ratio},         {"applicable", gap.applicable},     {"expect_constant", gap.expect_constant},
              {"confirmed", gap.confirmed}};
  j["triviality"] = {{"condition_holds_everywhere", triv.condition_holds_everywhere},
                     {"min_margin", triv.min_margin},
                     {"energy_density_spread", triv.energy_density_spread}};
  if (p.grid.is_flat()) {
    const auto a = assemble_A(u, p);
    const auto bo = bochner_density(u, p, z_inf, hv);
    j["structure"] = {{"skew_defect", skew_defect(a).max()},
                      {"rewrite_residual", rewrite_residual(u, a, p)},
                      {"rewrite_identity_defect", rewrite_identity_defect(u, a, p)},
                      {"A_l2", potential_l2_norm(a, p.grid)},
                      {"bochner_min", *std::min_element(bo.begin(), bo.end())}};
    j["ricci_identity"] = [&] {
      const auto r = ricci_identity_check(u.values(), p.grid);
      return nlohmann::json{{"lhs", r.lhs}, {"rhs", r.rhs}};
    }();
    j["ladyzhenskaya_ratio"] = ladyzhenskaya_ratio(u.values(), p.grid, c.flow.ball_radius);
  }
  return j;
}

inline nlohmann::json check_snapshot(const RunConfig& c, const fs::path& snap) {
  return dispatch_q(c.target.q, [&]<std::size_t Q>() { return check_snapshot_q<Q>(c, snap); });
}

template <std::size_t Q>
nlohmann::json scan_snapshot_q(const RunConfig& c, const fs::path& snap) {
  const auto p = make_problem<Q>(c);
  const auto u = load_map<Q>(c, p, snap);
  const auto clusters = concentration_scan(u, p, c.flow.delta1, c.flow.ball_radius, c.monitor.scan_stride);
  nlohmann::json j;
  j["delta1"] = c.flow.delta1;
  j["R"] = c.flow.ball_radius;
  j["clusters"] = nlohmann::json::array();
  for (const auto& cl : clusters)
    j["clusters"].push_back({{"ix", cl.node.ix}, {"iy", cl.node.iy}, {"local_energy", cl.local_energy},
                             {"members", cl.members}});
  const double s0 = energies(u, p).S_tilde;
  j["S_tilde"] = s0;
  const auto sup = sup_norms(*p.fields.bfield, *p.fields.potential, *p.target, c.monitor.sup_samples, c.seed);
  if (sup.B_inf < 0.5) {
    j["k_bound"] = k_bound(std::max(0.0, s0), c.flow.delta1, delta_constants(sup.B_inf).delta2);
    j["within_k_bound"] = static_cast<long>(clusters.size()) <= j["k_bound"].get<long>();
  }
  return j;
}

inline nlohmann::json scan_snapshot(const RunConfig& c, const fs::path& snap) {
  return dispatch_q(c.target.q, [&]<std::size_t Q>() { return scan_snapshot_q<Q>(c, snap); });
}

// ---------------------------------------------------------------------------
// rescale
// ---------------------------------------------------------------------------

struct RescaleRequest {
  Node x0;
  double t0 = -1.0;      ///< < 0: latest snapshot
  double r_cells = 4.0;  ///< r in grid spacings
  int out_n = 0;         ///< 0: matched resolution, out spacing dx / r
  double out_length = 4.0;
};

/// Snapshot history of a finished run, sorted by time; final.bin included.
inline std::vector<SnapshotData> load_history(const fs::path& run_dir) {
  std::vector<SnapshotData> out;
  if (fs::exists(run_dir / "history"))
    for (const auto& e : fs::directory_iterator(run_dir / "history"))
      if (e.path().extension() == ".bin") out.push_back(read_snapshot(e.path()));
  if (fs::exists(run_dir / "final.bin")) out.push_back(read_snapshot(run_dir / "final.bin"));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  out.erase(std::unique(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.t == b.t; }), out.end());
  if (out.empty()) throw InvalidArgument("no snapshots found in " + run_dir.string());
  return out;
}

template <std::size_t Q>
nlohmann::json rescale_run_q(const RunConfig& c, const fs::path& run_dir, const RescaleRequest& req,
                             const fs::path& out) {
  const auto p = make_problem<Q>(c);
  std::vector<Snapshot<Q>> snaps;
  for (const auto& s : load_history(run_dir)) snaps.push_back({s.t, s.to_field<Q>()});
  const double t0 = req.t0 < 0.0 ? snaps.back().t : req.t0;
  const double h = std::min(p.grid.dx(), p.grid.dy());
  const double r = req.r_cells * h;
  const int n_out = req.out_n > 0 ? req.out_n : static_cast<int>(std::lround(req.out_length * r / h));
  const auto out_grid = SurfaceGrid::flat(n_out, n_out, req.out_length, req.out_length);
  const auto res = parabolic_rescale(snaps, p.grid, p.target, req.x0, t0, r, out_grid);

  nlohmann::json j;
  j["r"] = r;
  j["t0"] = t0;
  j["x0"] = {req.x0.ix, req.x0.iy};
  j["potential_factor"] = res.potential_factor;
  j["out_grid"] = {{"n", n_out}, {"length", req.out_length}};
  j["slices"] = res.slices.size();
  FlowProblem<Q> vp{out_grid, p.target, {}};
  const auto& last = res.slices.back();
  MapField<Q> u_t0;
  for (const auto& s : snaps)
    if (s.t == last.t) u_t0 = MapField<Q>::projected(s.values, p.target);
  j["E_u_ball_r"] = local_energy(u_t0, p, req.x0, r);
  j["E_v_ball_1"] = local_energy(last.v, vp, {0, 0}, 1.0);
  j["relative_difference"] = std::abs(j["E_v_ball_1"].get<double>() - j["E_u_ball_r"].get<double>()) /
                             std::max(1e-300, j["E_u_ball_r"].get<double>());
  if (!out.empty()) {
    fs::create_directories(out);
    int k = 0;
    for (const auto& s : res.slices) {
      char name[32];
      std::snprintf(name, sizeof name, "v_%04d.bin", k++);
      write_snapshot(out / name, SnapshotData::from_field<Q>(s.v.values(), n_out, n_out, s.tau, c.target.kind));
    }
    write_json(out / "rescale.json", j);
  }
  return j;
}

inline nlohmann::json rescale_run(const RunConfig& c, const fs::path& run_dir, const RescaleRequest& req,
                                  const fs::path& out) {
  return dispatch_q(c.target.q, [&]<std::size_t Q>() { return rescale_run_q<Q>(c, run_dir, req, out); });
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

namespace detail {
inline bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}
}  // namespace detail

/// Least-squares slope of log(sep) against t over positive separations.
inline double fit_growth_rate(const std::vector<double>& t, const std::vector<double>& sep) {
  double st = 0, sy = 0, stt = 0, sty = 0;
  int n = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(sep[k] > 0.0)) continue;
    const double y = std::log(sep[k]);
    st += t[k];
    sy += y;
    stt += t[k] * t[k];
    sty += t[k] * y;
    ++n;
  }
  const double den = n * stt - st * st;
  if (n < 2 || den <= 0.0) return 0.0;
  return (n * sty - st * sy) / den;
}

inline nlohmann::json compare_runs(const fs::path& a, const fs::path& b) {
  const auto cfg = load_run_config((a / "config.json").string());
  const auto la = read_ledger_csv(a / "ledger.csv");
  const auto lb = read_ledger_csv(b / "ledger.csv");
  auto ha = load_history(a);
  auto hb = load_history(b);
  if (ha.front().nx != hb.front().nx || ha.front().ny != hb.front().ny || ha.front().q != hb.front().q)
    throw InvalidArgument("compare_runs: runs have incompatible shapes");
  const auto grid = make_grid(cfg.grid);
  if (static_cast<int>(grid.size()) != ha.front().nx * ha.front().ny)
    throw InvalidArgument("compare_runs: configuration does not match the snapshots");

  nlohmann::json j;
  bool ledgers_equal = la.size() == lb.size();
  for (std::size_t k = 0; ledgers_equal && k < la.size(); ++k) {
    const auto x = la[k].as_array(), y = lb[k].as_array();
    ledgers_equal = std::memcmp(x.data(), y.data(), sizeof x) == 0;
  }
  j["ledgers_identical"] = ledgers_equal;
  j["snapshot_count"] = {ha.size(), hb.size()};
  bool snaps_equal = ha.size() == hb.size();
  std::vector<double> ts, seps;
  const std::size_t common = std::min(ha.size(), hb.size());
  const int q = ha.front().q;
  for (std::size_t k = 0; k < common; ++k) {
    if (ha[k].t != hb[k].t || !detail::bitwise_equal(ha[k].values, hb[k].values)) snaps_equal = false;
    if (std::abs(ha[k].t - hb[k].t) > 1e-12 * std::max(1.0, ha[k].t)) continue;
    ScalarField d(grid.size());
    for (std::size_t n = 0; n < grid.size(); ++n) {
      double s = 0.0;
      for (int c = 0; c < q; ++c) {
        const double diff = ha[k].values[n * q + c] - hb[k].values[n * q + c];
        s += diff * diff;
      }
      d[n] = s;
    }
    ts.push_back(ha[k].t);
    seps.push_back(std::sqrt(integrate(d, grid)));
  }
  j["snapshots_identical"] = snaps_equal;
  j["bitwise_identical"] = ledgers_equal && snaps_equal;
  j["times"] = ts;
  j["separation_l2"] = seps;
  j["sup_separation_l2"] = seps.empty() ? 0.0 : *std::max_element(seps.begin(), seps.end());
  j["fitted_gamma"] = fit_growth_rate(ts, seps);
  return j;
}

}  // namespace bosonic

#endif  // BOSONIC_HARNESS_HPP
