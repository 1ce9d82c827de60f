#ifndef BOSONIC_CONFIG_HPP
#define BOSONIC_CONFIG_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bosonic/action_flow.hpp"
#include "bosonic/flow.hpp"

namespace bosonic {

/// Invalid configuration text or values; the message names the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct LambdaSpec {
  std::string kind = "flat";  ///< flat | sine
  double amplitude = 0.0;     ///< lambda = amplitude * sin(kx x + ky y)
  int kx = 1;
  int ky = 0;
};

struct GridSpec {
  int nx = 64;
  int ny = 64;
  double lx = kTwoPi;
  double ly = kTwoPi;
  LambdaSpec lambda;
};

struct TargetSpec {
  std::string kind = "sphere";
  int q = 4;
};

struct BFieldSpec {
  std::string kind = "none";  ///< none | height
  double beta = 0.0;
};

struct PotentialSpec {
  std::string kind = "none";  ///< none | height
  double epsilon = 0.0;
};

struct FieldSpec {
  BFieldSpec bfield;
  PotentialSpec potential;
};

struct MonitorSpec {
  int scan_stride = 1;
  double c_hat = 1.0;
  int sup_samples = 4096;
  double gap_energy = 0.5;  ///< eps_energy of the gap check
};

struct InitialSpec {
  std::string kind = "wrap";  ///< constant | wrap | wrap_noise | bump | random_smooth
  std::vector<double> point;  ///< base point for constant / random_smooth (default e_1)
  double amplitude = 0.05;    ///< noise amplitude for wrap_noise / random_smooth
  int modes = 3;              ///< highest Fourier mode of smooth noise
  double target_energy = 0.0; ///< random_smooth: rescale so that E(u0) equals this (if > 0)
  double bump_scale = 6.0;    ///< bump: scale in grid spacings
  int center_ix = -1;         ///< bump center; -1 = grid middle
  int center_iy = -1;
  double perturb = 0.0;       ///< extra smooth noise of this amplitude (continuous-dependence pairs)
  std::uint64_t perturb_seed = 7919;
};

struct OutputSpec {
  std::string dir = "out";
  bool final_snapshot = true;
  bool history_snapshots = false;  ///< write the snapshot ring at the end
};

struct RunConfig {
  std::string name = "custom";
  GridSpec grid;
  TargetSpec target;
  FieldSpec fields;
  FlowConfig flow;
  MonitorSpec monitor;
  InitialSpec initial;
  OutputSpec output;
  std::uint64_t seed = 1;

  void validate() const;
};

// ---------------------------------------------------------------------------
// JSON serialization with strict key checking
// ---------------------------------------------------------------------------

namespace detail {

class Reader {
 public:
  Reader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }) == keys.end())
        throw ConfigError(child(it.key()) + ": unknown key");
    }
  }

  template <class T>
  void get(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(child(key) + ": wrong type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  Reader sub(const char* key) const { return Reader(j_.at(key), child(key)); }
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "<root>" : path_; }

 private:
  const nlohmann::json& j_;
  std::string path_;
};

}  // namespace detail

inline nlohmann::json to_json(const FlowConfig& f) {
  return {{"dt_init", f.dt_init},       {"cfl", f.cfl},
          {"t_end", f.t_end},           {"delta1", f.delta1},
          {"ball_radius", f.ball_radius}, {"dt_min", f.dt_min},
          {"conv_tol", f.conv_tol},     {"record_every", f.record_every},
          {"max_steps", f.max_steps},   {"snapshot_every", f.snapshot_every},
          {"snapshot_capacity", f.snapshot_capacity}, {"grow_after", f.grow_after},
          {"grow_factor", f.grow_factor}};
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["grid"] = {{"nx", c.grid.nx},
               {"ny", c.grid.ny},
               {"lx", c.grid.lx},
               {"ly", c.grid.ly},
               {"lambda",
                {{"kind", c.grid.lambda.kind},
                 {"amplitude", c.grid.lambda.amplitude},
                 {"kx", c.grid.lambda.kx},
                 {"ky", c.grid.lambda.ky}}}};
  j["target"] = {{"kind", c.target.kind}, {"q", c.target.q}};
  j["fields"] = {{"bfield", {{"kind", c.fields.bfield.kind}, {"beta", c.fields.bfield.beta}}},
                 {"potential", {{"kind", c.fields.potential.kind}, {"epsilon", c.fields.potential.epsilon}}}};
  j["flow"] = to_json(c.flow);
  j["monitor"] = {{"scan_stride", c.monitor.scan_stride},
                  {"c_hat", c.monitor.c_hat},
                  {"sup_samples", c.monitor.sup_samples},
                  {"gap_energy", c.monitor.gap_energy}};
  j["initial"] = {{"kind", c.initial.kind},
                  {"point", c.initial.point},
                  {"amplitude", c.initial.amplitude},
                  {"modes", c.initial.modes},
                  {"target_energy", c.initial.target_energy},
                  {"bump_scale", c.initial.bump_scale},
                  {"center_ix", c.initial.center_ix},
                  {"center_iy", c.initial.center_iy},
                  {"perturb", c.initial.perturb},
                  {"perturb_seed", c.initial.perturb_seed}};
  j["output"] = {{"dir", c.output.dir},
                 {"final_snapshot", c.output.final_snapshot},
                 {"history_snapshots", c.output.history_snapshots}};
  j["seed"] = c.seed;
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  using detail::Reader;
  RunConfig c;
  const Reader root(j, "");
  root.allow({"name", "grid", "target", "fields", "flow", "monitor", "initial", "output", "seed"});
  root.get("name", c.name);
  root.get("seed", c.seed);
  if (root.has("grid")) {
    const auto r = root.sub("grid");
    r.allow({"nx", "ny", "lx", "ly", "lambda"});
    r.get("nx", c.grid.nx);
    r.get("ny", c.grid.ny);
    r.get("lx", c.grid.lx);
    r.get("ly", c.grid.ly);
    if (r.has("lambda")) {
      const auto l = r.sub("lambda");
      l.allow({"kind", "amplitude", "kx", "ky"});
      l.get("kind", c.grid.lambda.kind);
      l.get("amplitude", c.grid.lambda.amplitude);
      l.get("kx", c.grid.lambda.kx);
      l.get("ky", c.grid.lambda.ky);
    }
  }
  if (root.has("target")) {
    const auto r = root.sub("target");
    r.allow({"kind", "q"});
    r.get("kind", c.target.kind);
    r.get("q", c.target.q);
  }
  if (root.has("fields")) {
    const auto r = root.sub("fields");
    r.allow({"bfield", "potential"});
    if (r.has("bfield")) {
      const auto b = r.sub("bfield");
      b.allow({"kind", "beta"});
      b.get("kind", c.fields.bfield.kind);
      b.get("beta", c.fields.bfield.beta);
    }
    if (r.has("potential")) {
      const auto v = r.sub("potential");
      v.allow({"kind", "epsilon"});
      v.get("kind", c.fields.potential.kind);
      v.get("epsilon", c.fields.potential.epsilon);
    }
  }
  if (root.has("flow")) {
    const auto r = root.sub("flow");
    r.allow({"dt_init", "cfl", "t_end", "delta1", "ball_radius", "dt_min", "conv_tol", "record_every", "max_steps",
             "snapshot_every", "snapshot_capacity", "grow_after", "grow_factor"});
    auto& f = c.flow;
    r.get("dt_init", f.dt_init);
    r.get("cfl", f.cfl);
    r.get("t_end", f.t_end);
    r.get("delta1", f.delta1);
    r.get("ball_radius", f.ball_radius);
    r.get("dt_min", f.dt_min);
    r.get("conv_tol", f.conv_tol);
    r.get("record_every", f.record_every);
    r.get("max_steps", f.max_steps);
    r.get("snapshot_every", f.snapshot_every);
    r.get("snapshot_capacity", f.snapshot_capacity);
    r.get("grow_after", f.grow_after);
    r.get("grow_factor", f.grow_factor);
  }
  if (root.has("monitor")) {
    const auto r = root.sub("monitor");
    r.allow({"scan_stride", "c_hat", "sup_samples", "gap_energy"});
    r.get("scan_stride", c.monitor.scan_stride);
    r.get("c_hat", c.monitor.c_hat);
    r.get("sup_samples", c.monitor.sup_samples);
    r.get("gap_energy", c.monitor.gap_energy);
  }
  if (root.has("initial")) {
    const auto r = root.sub("initial");
    r.allow({"kind", "point", "amplitude", "modes", "target_energy", "bump_scale", "center_ix", "center_iy", "perturb",
             "perturb_seed"});
    auto& i = c.initial;
    r.get("kind", i.kind);
    r.get("point", i.point);
    r.get("amplitude", i.amplitude);
    r.get("modes", i.modes);
    r.get("target_energy", i.target_energy);
    r.get("bump_scale", i.bump_scale);
    r.get("center_ix", i.center_ix);
    r.get("center_iy", i.center_iy);
    r.get("perturb", i.perturb);
    r.get("perturb_seed", i.perturb_seed);
  }
  if (root.has("output")) {
    const auto r = root.sub("output");
    r.allow({"dir", "final_snapshot", "history_snapshots"});
    r.get("dir", c.output.dir);
    r.get("final_snapshot", c.output.final_snapshot);
    r.get("history_snapshots", c.output.history_snapshots);
  }
  c.validate();
  return c;
}

inline RunConfig parse_run_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str());
}

inline void RunConfig::validate() const {
  auto bad = [](const std::string& m) { throw ConfigError(m); };
  if (grid.nx < SurfaceGrid::kMinNodes || grid.ny < SurfaceGrid::kMinNodes) bad("grid.nx/ny: need at least 8 nodes");
  if (!(grid.lx > 0.0) || !(grid.ly > 0.0)) bad("grid.lx/ly: must be positive");
  if (grid.lambda.kind != "flat" && grid.lambda.kind != "sine") bad("grid.lambda.kind: expected flat or sine");
  if (target.kind != "sphere") bad("target.kind: only sphere is available");
  if (target.q < 4 || target.q > 6) bad("target.q: supported values are 4, 5 and 6");
  if (fields.bfield.kind != "none" && fields.bfield.kind != "height") bad("fields.bfield.kind: expected none or height");
  if (fields.potential.kind != "none" && fields.potential.kind != "height")
    bad("fields.potential.kind: expected none or height");
  static const char* kinds[] = {"constant", "wrap", "wrap_noise", "bump", "random_smooth"};
  if (std::find(std::begin(kinds), std::end(kinds), initial.kind) == std::end(kinds))
    bad("initial.kind: unknown generator '" + initial.kind + "'");
  if (!initial.point.empty() && initial.point.size() != static_cast<std::size_t>(target.q))
    bad("initial.point: expected " + std::to_string(target.q) + " components");
  if (initial.modes < 1) bad("initial.modes: must be at least 1");
  if (!(initial.bump_scale > 0.0)) bad("initial.bump_scale: must be positive");
  if (monitor.scan_stride < 1) bad("monitor.scan_stride: must be at least 1");
  if (monitor.sup_samples < 1000) bad("monitor.sup_samples: must be at least 1000");
  if (!(monitor.c_hat > 0.0)) bad("monitor.c_hat: must be positive");
  if (!(flow.ball_radius < 0.5 * std::min(grid.lx, grid.ly))) bad("flow.ball_radius: must be below min(lx, ly)/2");
  try {
    flow.validate();
  } catch (const InvalidArgument& e) {
    bad(e.what());
  }
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"flat_harmonic", "bfield_s3",    "potential_descent",
                                                 "concentration", "gap_smallness", "rescale_probe"};
  return names;
}

inline RunConfig preset(const std::string& name) {
  RunConfig c;
  c.name = name;
  c.flow.record_every = 10;
  if (name == "flat_harmonic") {
    c.initial.kind = "wrap";
    c.flow.t_end = 1.0;
    c.flow.conv_tol = 1e-6;
  } else if (name == "bfield_s3") {
    c.initial.kind = "wrap_noise";
    c.initial.amplitude = 0.05;
    c.fields.bfield = {"height", 0.2};
    c.fields.potential = {"height", 5e-3};
    c.flow.t_end = 1.0;
    // The shifted potential integrates to about 0.2 on the wrap, above the
    // bound 0.15 that delta1 = 0.5 allows.
    c.flow.delta1 = 1.0;
  } else if (name == "potential_descent") {
    c.initial.kind = "constant";
    c.initial.point = {0.0, 1.0, 0.0, 0.0};
    c.fields.potential = {"height", 5e-3};
    c.flow.t_end = 2.0;
  } else if (name == "concentration") {
    c.initial.kind = "bump";
    c.initial.bump_scale = 6.0;
    c.flow.t_end = 0.2;
    c.flow.snapshot_every = 5;
  } else if (name == "gap_smallness") {
    c.initial.kind = "random_smooth";
    c.initial.amplitude = 0.01;
    c.initial.target_energy = 0.01;
    c.fields.bfield = {"height", 0.1};
    c.flow.t_end = 5.0;
    c.flow.record_every = 50;
  } else if (name == "rescale_probe") {
    c.initial.kind = "bump";
    c.initial.bump_scale = 6.0;
    // Long enough for the default r = 4 cells cylinder (r^2 ~ 0.15).
    c.flow.t_end = 0.25;
    c.flow.snapshot_every = 2;
    c.flow.snapshot_capacity = 128;
    c.output.history_snapshots = true;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Construction of the problem and initial data
// ---------------------------------------------------------------------------

inline SurfaceGrid make_grid(const GridSpec& s) {
  if (s.lambda.kind == "flat" || s.lambda.amplitude == 0.0) return SurfaceGrid::flat(s.nx, s.ny, s.lx, s.ly);
  const double a = s.lambda.amplitude;
  const double kx = kTwoPi * s.lambda.kx / s.lx;
  const double ky = kTwoPi * s.lambda.ky / s.ly;
  return SurfaceGrid::build(s.nx, s.ny, s.lx, s.ly, [=](double x, double y) { return a * std::sin(kx * x + ky * y); });
}

template <std::size_t Q>
FieldBackground<Q> make_fields(const FieldSpec& s, const TargetManifold<Q>& target) {
  FieldBackground<Q> f;
  if (s.bfield.kind == "height") {
    if constexpr (Q >= 4) f.bfield = std::make_shared<HeightTwoForm<Q>>(s.bfield.beta);
  }
  if (s.potential.kind == "height") f.potential = std::make_shared<HeightPotential<Q>>(s.potential.epsilon);
  f.shift = potential_shift(*f.potential, target);
  return f;
}

template <std::size_t Q>
FlowProblem<Q> make_problem(const RunConfig& c) {
  FlowProblem<Q> p{make_grid(c.grid), std::make_shared<SphereTarget<Q>>(), {}};
  p.fields = make_fields<Q>(c.fields, *p.target);
  return p;
}

/// Low-pass random field: sum over Fourier modes 1 <= max(|kx|,|ky|) <= modes
/// with N(0,1) coefficients damped by 1/(1+|k|^2), normalized to sup 1 per component.
template <std::size_t Q>
VectorField<Q> smooth_random_field(const SurfaceGrid& g, int modes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorField<Q> f(g.size(), zero_point<Q>());
  for (std::size_t c = 0; c < Q; ++c) {
    ScalarField comp(g.size(), 0.0);
    for (int ky = -modes; ky <= modes; ++ky)
      for (int kx = 0; kx <= modes; ++kx) {
        if (kx == 0 && ky <= 0) continue;
        const double damp = 1.0 / (1.0 + kx * kx + ky * ky);
        const double a = gauss(rng) * damp;
        const double b = gauss(rng) * damp;
        for (int j = 0; j < g.ny(); ++j)
          for (int i = 0; i < g.nx(); ++i) {
            const double ph = kTwoPi * (kx * g.x(i) / g.lx() + ky * g.y(j) / g.ly());
            comp[g.index(i, j)] += a * std::cos(ph) + b * std::sin(ph);
          }
      }
    double peak = 0.0;
    for (double v : comp) peak = std::max(peak, std::abs(v));
    for (std::size_t n = 0; n < g.size(); ++n) f[n][c] = peak > 0.0 ? comp[n] / peak : 0.0;
  }
  return f;
}

template <std::size_t Q>
VectorField<Q> wrap_field(const SurfaceGrid& g) {
  VectorField<Q> f(g.size(), zero_point<Q>());
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const double th = kTwoPi * g.x(i) / g.lx();
      f[g.index(i, j)][0] = std::cos(th);
      f[g.index(i, j)][1] = std::sin(th);
    }
  return f;
}

/// Degree-one bubble into the equatorial S^2 (first three components):
/// polar angle 2 atan(rho/s) near the center, glued to the south pole by a
/// smooth cutoff between min(L)/6 and min(L)/3.
template <std::size_t Q>
VectorField<Q> bump_field(const SurfaceGrid& g, double scale, Node center) {
  static_assert(Q >= 3, "bump needs ambient dimension >= 3");
  VectorField<Q> f(g.size(), zero_point<Q>());
  const double r_in = std::min(g.lx(), g.ly()) / 6.0;
  const double r_out = 2.0 * r_in;
  auto cutoff = [&](double rho) {
    if (rho <= r_in) return 1.0;
    if (rho >= r_out) return 0.0;
    const double t = (r_out - rho) / (r_out - r_in);
    return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
  };
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      int di = SurfaceGrid::wrap(i - center.ix, g.nx());
      int dj = SurfaceGrid::wrap(j - center.iy, g.ny());
      if (di > g.nx() / 2) di -= g.nx();
      if (dj > g.ny() / 2) dj -= g.ny();
      const double px = di * g.dx(), py = dj * g.dy();
      const double rho = std::hypot(px, py);
      const double theta = std::numbers::pi - (std::numbers::pi - 2.0 * std::atan(rho / scale)) * cutoff(rho);
      const double alpha = std::atan2(py, px);
      auto& v = f[g.index(i, j)];
      v[0] = std::sin(theta) * std::cos(alpha);
      v[1] = std::sin(theta) * std::sin(alpha);
      v[2] = std::cos(theta);
    }
  return f;
}

template <std::size_t Q>
Point<Q> base_point(const InitialSpec& s) {
  if (s.point.empty()) return unit_vector<Q>(0);
  Point<Q> p{};
  for (std::size_t c = 0; c < Q; ++c) p[c] = s.point[c];
  if (!(norm(p) > 0.0)) throw ConfigError("initial.point: must be nonzero");
  return (1.0 / norm(p)) * p;
}

template <std::size_t Q>
MapField<Q> make_unperturbed_initial(const InitialSpec& s, const FlowProblem<Q>& p, std::uint64_t seed) {
  const auto& g = p.grid;
  if (s.kind == "constant") return MapField<Q>::projected(VectorField<Q>(g.size(), base_point<Q>(s)), p.target);
  if (s.kind == "wrap") return MapField<Q>::projected(wrap_field<Q>(g), p.target);
  if (s.kind == "wrap_noise") {
    auto f = wrap_field<Q>(g);
    const auto noise = smooth_random_field<Q>(g, s.modes, seed);
    for (std::size_t n = 0; n < g.size(); ++n) f[n] += s.amplitude * noise[n];
    return MapField<Q>::projected(f, p.target);
  }
  if (s.kind == "bump") {
    if constexpr (Q >= 3) {
      const Node c{s.center_ix < 0 ? g.nx() / 2 : s.center_ix, s.center_iy < 0 ? g.ny() / 2 : s.center_iy};
      return MapField<Q>::projected(bump_field<Q>(g, s.bump_scale * std::min(g.dx(), g.dy()), c), p.target);
    }
  }
  if (s.kind == "random_smooth") {
    const auto base = base_point<Q>(s);
    const auto noise = smooth_random_field<Q>(g, s.modes, seed);
    auto build = [&](double a) {
      VectorField<Q> f(g.size());
      for (std::size_t n = 0; n < g.size(); ++n) f[n] = base + a * noise[n];
      return MapField<Q>::projected(f, p.target);
    };
    double a = s.amplitude;
    if (s.target_energy > 0.0) {
      // E grows like a^2 for small a; a few fixed-point updates land on the target.
      for (int it = 0; it < 40; ++it) {
        const double e = energies(build(a), p).E;
        if (!(e > 0.0)) break;
        const double next = a * std::sqrt(s.target_energy / e);
        if (std::abs(next - a) <= 1e-15 * a) break;
        a = next;
      }
    }
    return build(a);
  }
  throw ConfigError("initial.kind: unknown generator '" + s.kind + "'");
}

/// Initial data from the generator, plus the optional smooth perturbation.
template <std::size_t Q>
MapField<Q> make_initial(const InitialSpec& s, const FlowProblem<Q>& p, std::uint64_t seed) {
  auto u = make_unperturbed_initial(s, p, seed);
  if (s.perturb == 0.0) return u;
  const auto noise = smooth_random_field<Q>(p.grid, s.modes, s.perturb_seed);
  VectorField<Q> f(u.size());
  for (std::size_t n = 0; n < u.size(); ++n) f[n] = u[n] + s.perturb * noise[n];
  return MapField<Q>::projected(f, p.target);
}

}  // namespace bosonic

#endif  // BOSONIC_CONFIG_HPP
