// latsta: synthesize and verify lattice transport protocols.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "latsta/latsta.hpp"

namespace fs = std::filesystem;
using namespace latsta;

namespace {

enum Exit { Ok = 0, ConfigError = 2, NumericalFailure = 3, VerifyFailed = 4 };

struct Cli {
  std::string config_path;
  std::string out;
  std::optional<unsigned> threads;
  std::string resolution;
  std::vector<std::string> schemes;
  std::vector<double> t_f;
};

/// Writes artifacts into the output directory and remembers their names.
class Output {
 public:
  Output(fs::path dir, std::string command) : dir_(std::move(dir)), command_(std::move(command)) {
    fs::create_directories(dir_);
  }

  template <class Fn>
  void write(const std::string& name, Fn&& fn) {
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) throw Error(ErrorKind::Config, "cannot write '" + (dir_ / name).string() + "'");
    fn(os);
    files_.push_back(name);
  }

  void json(const std::string& name, const nlohmann::json& j) {
    write(name, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  }

  void manifest(const RunConfig& cfg, nlohmann::json body) {
    body["command"] = command_;
    body["version"] = std::string(version);
    body["config_hash"] = config_hash(cfg);
    body["config"] = canonical_config(cfg);
    body["files"] = files_;
    std::ofstream os(dir_ / (command_ + ".manifest.json"), std::ios::binary);
    os << body.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  std::string command_;
  std::vector<std::string> files_;
};

RunConfig resolve_config(const Cli& cli) {
  RunConfig cfg = cli.config_path.empty() ? RunConfig{} : load_config(cli.config_path);
  if (!cli.schemes.empty()) {
    cfg.schemes.clear();
    for (const auto& name : cli.schemes) {
      const auto s = parse_scheme(name);
      if (!s || *s == Scheme::Composite) throw Error(ErrorKind::Config, "unknown scheme '" + name + "'");
      cfg.schemes.push_back(*s);
    }
    cfg.block = block_of(cfg.schemes.front());
  }
  if (!cli.t_f.empty()) {
    cfg.t_f_grid = cli.t_f;
    cfg.export_t_f = cli.t_f;
  }
  if (!cli.resolution.empty()) {
    const auto r = parse_resolution(cli.resolution);
    if (!r) throw Error(ErrorKind::Config, "resolution must be 'fast' or 'paper'");
    cfg.resolution = *r;
    cfg.resolution_name = cli.resolution;
  }
  if (cli.threads) cfg.threads = *cli.threads;
  if (const char* env = std::getenv("LATSTA_OUT_DIR"); env != nullptr && *env != '\0') cfg.output_dir = env;
  if (!cli.out.empty()) cfg.output_dir = cli.out;
  validate_config(cfg);
  return cfg;
}

RunOptions run_options(const RunConfig& cfg) { return {cfg.threads, cfg.convergence}; }

int failures_exit(const std::vector<Record>& records) {
  for (const auto& r : records) {
    if (!r.ok()) {
      std::cerr << "failed point: " << scheme_name(r.scheme) << " t_f/T=" << r.t_f_over_T << " g=" << r.g << ": "
                << r.error << '\n';
    }
  }
  for (const auto& r : records) {
    if (!r.ok()) return NumericalFailure;
  }
  return Ok;
}

int cmd_synth(const RunConfig& cfg) {
  const ModelParams p = cfg.params();
  const Scheme scheme = cfg.block_schemes().front();
  const BuildingBlockSpec b = cfg.block_spec();
  const auto rows = control_function_export(scheme, b, cfg.export_t_f, p, cfg.samples);
  Output out(cfg.output_dir, "synth");
  const std::string stem = "controls_" + std::string(scheme_name(scheme));
  out.write(stem + "_omega.csv", [&](std::ostream& os) { write_control_csv(os, rows, ControlQuantity::Omega); });
  out.write(stem + "_q0.csv", [&](std::ostream& os) { write_control_csv(os, rows, ControlQuantity::Q0); });
  out.write(stem + "_g.csv", [&](std::ostream& os) { write_control_csv(os, rows, ControlQuantity::G); });
  if (scheme == Scheme::ShiftConstFreq1 || scheme == Scheme::ShiftConstFreq2) {
    const auto delta = trajectory_difference(b.omega_0, cfg.export_t_f, p, cfg.samples, b.displacement);
    out.write("delta_q0.csv", [&](std::ostream& os) { write_delta_csv(os, delta); });
  }
  out.manifest(cfg, {{"scheme", scheme_name(scheme)}, {"rows", rows.size()}});
  std::cout << "synth: " << scheme_name(scheme) << ", " << cfg.export_t_f.size() << " durations\n";
  return Ok;
}

int cmd_ground(const RunConfig& cfg) {
  const ModelParams p = cfg.params();
  const ControlProtocol protocol = make_protocol(cfg.block_schemes().front(), cfg.block_spec(), p);
  const double origin = protocol.frame(0.0).position;
  const double centre = std::round(origin / p.site_spacing()) * p.site_spacing();
  const Grid grid = Grid::centered(centre, cfg.resolution.periods, cfg.resolution.n_points, p);
  const Grid final_grid = grid.shifted(protocol.frame(protocol.t_f()).position - origin);
  const auto& ends = protocol.endpoints();
  const StationaryState initial = trap_ground_state(ends.start.omega_sq, ends.start.q0, ends.start.g, grid, p);
  const StationaryState target = trap_ground_state(ends.end.omega_sq, ends.end.q0, ends.end.g, final_grid, p);
  Output out(cfg.output_dir, "ground");
  out.write("ground_initial.csv", [&](std::ostream& os) { write_snapshot_csv(os, initial.psi); });
  out.write("ground_target.csv", [&](std::ostream& os) { write_snapshot_csv(os, target.psi); });
  out.json("ground.json", {{"initial", snapshot_metadata(initial, p)}, {"target", snapshot_metadata(target, p)}});
  out.manifest(cfg, {{"block", block_name(cfg.block)}});
  std::cout << "ground: mu_initial=" << initial.mu << " mu_target=" << target.mu << '\n';
  return Ok;
}

int cmd_sweep(const RunConfig& cfg) {
  const ModelParams p = cfg.params();
  SweepSpec spec;
  spec.block = cfg.block_template();
  spec.schemes = cfg.block_schemes();
  spec.t_f_over_T = cfg.block_t_f_grid();
  spec.g = cfg.g_grid;
  spec.omega_over_Omega = cfg.omega_grid;
  const ExperimentResult r = fidelity_vs_final_time(spec, p, cfg.resolution, run_options(cfg));
  Output out(cfg.output_dir, "fidelity-sweep");
  out.write("fidelity.csv", [&](std::ostream& os) { write_records_csv(os, r.records); });
  out.manifest(cfg, experiment_manifest(r, p, cfg.resolution));
  std::cout << "fidelity-sweep: " << r.records.size() << " points\n";
  return failures_exit(r.records);
}

int cmd_threshold(const RunConfig& cfg) {
  const ModelParams p = cfg.params();
  const ExperimentResult r = threshold_sweep(cfg.block_template(), cfg.block_schemes(), cfg.omega_grid, cfg.g_grid,
                                             p, cfg.resolution, cfg.threshold, run_options(cfg));
  Output out(cfg.output_dir, "threshold");
  out.write("thresholds.csv", [&](std::ostream& os) { write_thresholds_csv(os, r.thresholds); });
  out.write("threshold_evaluations.csv", [&](std::ostream& os) { write_records_csv(os, r.records); });
  out.manifest(cfg, experiment_manifest(r, p, cfg.resolution));
  int code = Ok;
  for (const auto& t : r.thresholds) {
    std::printf("%s omega_0=%gOmega g=%g: ", std::string(scheme_name(t.scheme)).c_str(), t.omega_over_Omega, t.g);
    if (t.ok()) {
      std::printf("t_099 = %.2fT\n", t.t_099_over_T);
    } else {
      std::printf("%s\n", t.error.c_str());
      code = NumericalFailure;
    }
  }
  return code;
}

int cmd_robustness(const RunConfig& cfg) {
  const ModelParams p = cfg.params();
  // Robustness is a property of one protocol; without an explicit list the
  // block's shortcut scheme is used.
  const std::vector<Scheme> schemes =
      cfg.schemes.empty() ? std::vector<Scheme>{cfg.block_schemes().front()} : cfg.schemes;
  const BuildingBlockSpec b = cfg.block_spec();
  Output out(cfg.output_dir, "robustness");
  nlohmann::json body;
  int code = Ok;
  for (PerturbationKind kind : cfg.perturbations) {
    ExperimentResult all;
    all.name = std::string("robustness-") + std::string(perturbation_name(kind));
    for (Scheme s : schemes) {
      auto r = robustness_sweep(b, s, cfg.epsilon_grid, kind, cfg.g_grid, p, cfg.resolution, run_options(cfg));
      all.records.insert(all.records.end(), r.records.begin(), r.records.end());
    }
    out.write(all.name + ".csv", [&](std::ostream& os) { write_records_csv(os, all.records); });
    body[all.name] = experiment_manifest(all, p, cfg.resolution);
    code = std::max(code, failures_exit(all.records));
  }
  out.manifest(cfg, body);
  std::cout << "robustness: " << cfg.perturbations.size() << " perturbation kinds\n";
  return code;
}

int cmd_transport(const RunConfig& cfg) {
  const ModelParams p = cfg.params();
  TransportSpec spec = cfg.transport;
  spec.omega_over_Omega = cfg.omega;
  spec.g = cfg.g;
  const TransportResult r = full_transport(spec, p, cfg.resolution, run_options(cfg));
  std::vector<Record> all = r.stages;
  all.push_back(r.total);
  Output out(cfg.output_dir, "transport");
  out.write("transport.csv", [&](std::ostream& os) { write_records_csv(os, all); });
  ExperimentResult er;
  er.name = "transport";
  er.records = all;
  out.manifest(cfg, experiment_manifest(er, p, cfg.resolution));
  for (const auto& s : r.stages) {
    std::printf("%-22s F = %.8f\n", std::string(scheme_name(s.scheme)).c_str(), s.fidelity);
  }
  std::printf("%-22s F = %.8f (t_f = %.2fT)\n", "total", r.total.fidelity, r.total.t_f_over_T);
  return failures_exit(all);
}

int cmd_verify(const RunConfig& cfg) {
  VerifyOptions opt;
  opt.omega_over_Omega = cfg.omega;
  opt.on_check = [](const VerifyCheck& c) {
    std::printf("%-26s %s  deviation %.3e  tolerance %.1e%s%s\n", c.name.c_str(), c.pass() ? "PASS" : "FAIL",
                c.deviation, c.tolerance, c.error.empty() ? "" : "  ", c.error.c_str());
    std::fflush(stdout);
  };
  const VerifyReport r = verify_invariants(cfg.params(), cfg.resolution, opt);
  Output out(cfg.output_dir, "verify");
  out.json("verify.json", verify_json(r));
  out.manifest(cfg, {{"pass", r.pass()}});
  return r.pass() ? Ok : VerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shortcut-to-adiabaticity transport of atoms across an optical lattice"};
  app.set_version_flag("--version", std::string(version));
  app.require_subcommand(1, 1);
  app.fallthrough();

  Cli cli;
  app.add_option("--config", cli.config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", cli.out, "Output directory (overrides LATSTA_OUT_DIR and the config)");
  app.add_option("--threads", cli.threads, "Worker threads for sweep points")->check(CLI::PositiveNumber);
  app.add_option("--resolution", cli.resolution, "Solver resolution preset")
      ->check(CLI::IsMember({"fast", "paper"}));

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&);
    bool schemes;
    bool durations;
  };
  const Command commands[] = {
      {"synth", "Export omega(t), q0(t) and g(t) of one scheme", cmd_synth, true, true},
      {"ground", "Stationary states at the ends of the configured block", cmd_ground, true, false},
      {"fidelity-sweep", "Fidelity versus final time", cmd_sweep, true, true},
      {"threshold", "Threshold time t_099 versus omega_0", cmd_threshold, true, false},
      {"robustness", "Fidelity versus systematic control error", cmd_robustness, true, false},
      {"transport", "Load, shift across n sites, unload", cmd_transport, false, false},
      {"verify", "Run the invariant suite", cmd_verify, false, false},
  };
  const Command* selected = nullptr;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    if (c.schemes) sub->add_option("--scheme", cli.schemes, "Scheme name (repeatable)");
    if (c.durations) sub->add_option("--t-f", cli.t_f, "Final time in T (repeatable)");
    sub->callback([&selected, &c] { selected = &c; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ConfigError;
  }

  try {
    const RunConfig cfg = resolve_config(cli);
    return selected->run(cfg);
  } catch (const Error& e) {
    std::cerr << "latsta " << selected->name << ": " << e.what() << '\n';
    return e.kind() == ErrorKind::Config ? ConfigError : NumericalFailure;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "latsta: " << e.what() << '\n';
    return ConfigError;
  }
}
