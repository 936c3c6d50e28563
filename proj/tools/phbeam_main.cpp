// Command-line front end.  Exit codes: 0 success, 1 bad configuration or
// usage, 2 runtime failure (integration, I/O), 3 audit failure.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "phbeam/run.hpp"

using namespace phbeam;

namespace {

const char* kUsage = R"(phbeam: port-Hamiltonian beam simulator

usage:
  phbeam run <config-file> [--output DIR] [key=value ...]
  phbeam preset <name> [--output DIR] [key=value ...]
  phbeam presets
  phbeam print-config <name>
  phbeam audit <run-dir>
  phbeam converge (<config-file> | <preset>) [--levels N] [--spatial]
  phbeam verify-casimir [--order 2|4] [--n N]
  phbeam oracle [--trials N] [--model NAME] [--order 2|4] [--n N] [--seed S]
  phbeam help

Configurations are key=value lines; `phbeam print-config <preset>` shows the
full key set.  Extra key=value arguments after `run`/`preset` override the
file.  Output lands in --output, else $PHBEAM_OUTPUT_ROOT/<name>, else
./runs/<name>.
)";

struct Args {
  std::vector<std::string> positional;
  std::string output;
  std::vector<std::string> overrides;
  int levels = 4;
  bool spatial = false;
  int order = 2;
  int n = 101;
  int trials = 50;
  std::uint64_t seed = 1234;
  std::string model = "nonlinear_structural";
};

Args parse_args(int argc, char** argv, int first) {
  Args a;
  for (int i = first; i < argc; ++i) {
    std::string arg = argv[i];
    auto want_value = [&](const char* flag) -> std::string {
      if (i + 1 >= argc) throw std::invalid_argument(std::string(flag) + " needs a value");
      return argv[++i];
    };
    if (arg == "--output") a.output = want_value("--output");
    else if (arg == "--levels") a.levels = std::stoi(want_value("--levels"));
    else if (arg == "--spatial") a.spatial = true;
    else if (arg == "--order") a.order = std::stoi(want_value("--order"));
    else if (arg == "--n") a.n = std::stoi(want_value("--n"));
    else if (arg == "--trials") a.trials = std::stoi(want_value("--trials"));
    else if (arg == "--seed") a.seed = std::stoull(want_value("--seed"));
    else if (arg == "--model") a.model = want_value("--model");
    else if (arg.rfind("--", 0) == 0) throw std::invalid_argument("unknown option " + arg);
    else if (arg.find('=') != std::string::npos) a.overrides.push_back(arg);
    else a.positional.push_back(arg);
  }
  return a;
}

// Loads a preset or a file, then appends the command-line overrides so they
// win by the usual last-assignment rule.
ScenarioConfig load_with_overrides(const std::string& source, const Args& a) {
  std::string text;
  if (is_preset(source)) {
    text = preset_text(source);
  } else {
    ScenarioConfig probe = load_config_file(source);  // errors carry line numbers
    if (a.overrides.empty()) {
      if (!a.output.empty()) probe.output_dir = a.output;
      return probe;
    }
    text = render_config(probe);
  }
  for (const std::string& kv : a.overrides) text += "\n" + kv;
  ScenarioConfig cfg = parse_config(text);
  if (!a.output.empty()) cfg.output_dir = a.output;
  return cfg;
}

int cmd_run(const std::string& source, const Args& a) {
  ScenarioConfig cfg = load_with_overrides(source, a);
  RunResult r = run_scenario(cfg);
  std::cout << "wrote " << r.artifacts.dir.string() << "\n";
  std::cout << "  steps " << r.trajectory.steps << ", snapshots "
            << r.trajectory.snapshots.size() << "\n";
  std::cout << "  energy " << r.trajectory.initial().energy << " -> "
            << r.trajectory.final_snapshot().energy << "\n";
  if (r.trajectory.initial().lyapunov)
    std::cout << "  storage " << *r.trajectory.initial().lyapunov << " -> "
              << *r.trajectory.final_snapshot().lyapunov << "\n";
  std::cout << "  max split disagreement " << r.audit.max_split_disagreement
            << " (power scale " << r.audit.max_abs_power << ")\n";
  std::cout << (r.audit_pass ? "audit PASS" : "audit FAIL") << "\n";
  if (!r.audit_pass) {
    std::cerr << r.audit_notes;
    return 3;
  }
  return 0;
}

int cmd_converge(const std::string& source, const Args& a) {
  ScenarioConfig cfg = load_with_overrides(source, a);
  if (a.spatial) {
    SystemFactory make_system = [cfg](int n_nodes) {
      ScenarioConfig c = cfg;
      c.n_nodes = n_nodes;
      return build_system(c);
    };
    StateFactory make_state = [cfg](const ClosedLoopSystem& sys) {
      return build_initial_state(cfg, sys);
    };
    std::vector<int> ns;
    int n = cfg.n_nodes;
    for (int l = 0; l < a.levels; ++l) {
      ns.push_back(n);
      n = 2 * (n - 1) + 1;
    }
    IntegratorOptions opt = build_integrator(cfg);
    ConvergenceReport rep = spatial_convergence(make_system, make_state, ns,
                                                cfg.t_final, opt, cfg.order);
    std::cout << rep.summary();
    return rep.pass(0.35) ? 0 : 2;
  }
  ClosedLoopSystem sys = build_system(cfg);
  ClosedLoopState x0 = build_initial_state(cfg, sys);
  IntegratorOptions opt = build_integrator(cfg);
  const double expected = (opt.scheme == Scheme::Rk4) ? 4.0 : 2.0;
  ConvergenceReport rep = temporal_convergence(sys, x0, cfg.t_final, cfg.dt, a.levels, opt);
  rep.expected_order = expected;
  std::cout << rep.summary();
  return rep.pass(0.35) ? 0 : 2;
}

int cmd_verify_casimir(const Args& a) {
  Grid grid(a.n, 0.54);
  DiscreteOperators ops = build_operators(grid, a.order);
  CasimirConditionReport rep = verify_casimir_conditions(default_casimir_setup(), ops, 16, a.seed);
  std::cout << rep.summary();
  std::cout << (rep.pass(1e-10) ? "PASS" : "FAIL") << "\n";
  return rep.pass(1e-10) ? 0 : 2;
}

int cmd_oracle(const Args& a) {
  MaterialParams mat;
  mat.EI = 14.97;
  mat.EA = 50.0;
  mat.rhoA = 2.1;
  mat.L = 0.54;
  mat.alpha1 = 1e-3;
  mat.alpha2 = 1e-3;
  ModelVariant variant;
  if (a.model == "linear_viscous") variant = ModelVariant::LinearViscous;
  else if (a.model == "nonlinear_undamped") variant = ModelVariant::NonlinearUndamped;
  else if (a.model == "nonlinear_structural") variant = ModelVariant::NonlinearStructural;
  else throw std::invalid_argument("unknown model " + a.model);

  ModelSpec model{variant, mat};
  Grid grid(a.n, mat.L);
  DiscreteOperators ops = build_operators(grid, a.order);
  OracleReport rep = variational_oracle(model, ops, a.trials, a.seed);
  std::printf("trials                 %d\n", rep.trials);
  std::printf("max FD mismatch        %.3e (relative)\n", rep.max_fd_mismatch);
  std::printf("max boundary residual  %.3e\n", rep.max_boundary_residual);
  std::printf("max interior residual  %.3e\n", rep.max_interior_residual);
  const bool ok = rep.pass(1e-5, 1e-10);
  std::cout << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << kUsage;
    return 1;
  }
  const std::string cmd = argv[1];
  try {
    if (cmd == "help" || cmd == "--help" || cmd == "-h") {
      std::cout << kUsage;
      return 0;
    }
    if (cmd == "presets") {
      for (const std::string& name : preset_names()) std::cout << name << "\n";
      return 0;
    }
    if (cmd == "print-config") {
      if (argc < 3) throw std::invalid_argument("print-config needs a preset name");
      std::cout << render_config(parse_config(preset_text(argv[2])));
      return 0;
    }
    Args a = parse_args(argc, argv, 2);
    if (cmd == "run" || cmd == "preset") {
      if (a.positional.empty())
        throw std::invalid_argument(cmd + " needs a " +
                                    (cmd == "run" ? "config file" : "preset name"));
      return cmd_run(a.positional[0], a);
    }
    if (cmd == "audit") {
      if (a.positional.empty()) throw std::invalid_argument("audit needs a run directory");
      return audit_run_dir(a.positional[0], std::cout);
    }
    if (cmd == "converge") {
      if (a.positional.empty()) throw std::invalid_argument("converge needs a config or preset");
      return cmd_converge(a.positional[0], a);
    }
    if (cmd == "verify-casimir") return cmd_verify_casimir(a);
    if (cmd == "oracle") return cmd_oracle(a);
    std::cerr << "unknown command '" << cmd << "'\n" << kUsage;
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << e.what();
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const SimulationError& e) {
    std::cerr << "integration failed at t=" << e.t << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
