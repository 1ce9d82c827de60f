// Command-line driver: run, check, scan, rescale, compare.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bosonic/bosonic.hpp"

namespace {

using namespace bosonic;

struct Common {
  std::string config;
  std::string preset;
  std::string out;
  int threads = 1;
  long long seed = -1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run configuration");
  cmd->add_option("--preset", c.preset, "named scenario instead of --config");
  cmd->add_option("--out", c.out, "output directory (overrides config and BOSONIC_OUT)");
  cmd->add_option("--threads", c.threads, "worker threads for node loops")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "override the configured seed");
}

RunConfig resolve_config(const Common& c) {
  if (!c.config.empty() && !c.preset.empty()) throw ConfigError("use either --config or --preset, not both");
  RunConfig cfg = c.config.empty() ? preset(c.preset.empty() ? "flat_harmonic" : c.preset) : load_run_config(c.config);
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  set_num_threads(c.threads);
  return cfg;
}

int print(const nlohmann::json& j) {
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heat flow of the bosonic string action on a conformal torus"};
  app.require_subcommand(1);

  Common run_opts, check_opts, scan_opts, rescale_opts;
  std::string snapshot, run_dir, run_a, run_b;
  RescaleRequest req;
  int ix = -1, iy = -1;

  auto* run_cmd = app.add_subcommand("run", "run a scenario and write ledger, events, snapshots, report");
  add_common(run_cmd, run_opts);
  bool dump_config = false;
  run_cmd->add_flag("--dump-config", dump_config, "print the resolved configuration and exit");

  auto* check_cmd = app.add_subcommand("check", "hypothesis and invariant suite on a snapshot");
  add_common(check_cmd, check_opts);
  check_cmd->add_option("--snapshot", snapshot, "snapshot file")->required();

  auto* scan_cmd = app.add_subcommand("scan", "energy concentration scan of a snapshot");
  add_common(scan_cmd, scan_opts);
  scan_cmd->add_option("--snapshot", snapshot, "snapshot file")->required();

  auto* rescale_cmd = app.add_subcommand("rescale", "parabolic rescaling of a finished run");
  add_common(rescale_cmd, rescale_opts);
  rescale_cmd->add_option("--run", run_dir, "run directory with history snapshots")->required();
  rescale_cmd->add_option("--ix", ix, "center column (default: grid middle)");
  rescale_cmd->add_option("--iy", iy, "center row (default: grid middle)");
  rescale_cmd->add_option("--t0", req.t0, "end time of the cylinder (default: latest snapshot)");
  rescale_cmd->add_option("--r-cells", req.r_cells, "radius r in grid spacings");
  rescale_cmd->add_option("--out-n", req.out_n, "nodes per side of the output grid (0: matched)");

  auto* compare_cmd = app.add_subcommand("compare", "compare two finished runs");
  compare_cmd->add_option("run_a", run_a, "first run directory")->required();
  compare_cmd->add_option("run_b", run_b, "second run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadConfig;
  }

  try {
    if (*run_cmd) {
      const auto cfg = resolve_config(run_opts);
      if (dump_config) return print(to_json(cfg));
      const auto out = resolve_out_dir(cfg, run_opts.out);
      const auto res = run_scenario(cfg, out);
      std::cout << res.report.dump(2) << '\n';
      return res.exit_code;
    }
    if (*check_cmd) return print(check_snapshot(resolve_config(check_opts), snapshot));
    if (*scan_cmd) return print(scan_snapshot(resolve_config(scan_opts), snapshot));
    if (*rescale_cmd) {
      const auto cfg = resolve_config(rescale_opts);
      req.x0 = {ix < 0 ? cfg.grid.nx / 2 : ix, iy < 0 ? cfg.grid.ny / 2 : iy};
      const fs::path out = rescale_opts.out.empty() ? fs::path(run_dir) / "rescaled" : fs::path(rescale_opts.out);
      return print(rescale_run(cfg, run_dir, req, out));
    }
    if (*compare_cmd) return print(compare_runs(run_a, run_b));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitBadConfig;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kExitBadConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitBadConfig;
  } catch (const Error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitOk;
}
