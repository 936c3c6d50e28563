#include "phbeam/run.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace phbeam {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CasimirControllerSetup setup_from(const CasimirKnobs& k) {
  CasimirControllerSetup s = default_casimir_setup();
  s.c1 = k.c1;
  s.c2 = k.c2;
  s.c3 = k.c3;
  s.a = k.a;
  s.b = k.b;
  s.A = Eigen::Vector3d(-k.r4, -k.r5, -k.r6).asDiagonal();
  s.M_c = Eigen::Vector3d(k.m4, k.m5, k.m6).asDiagonal();
  s.G_hat(0, 3) = k.g4;
  s.G_hat(1, 4) = k.g5;
  s.G_check(0, 5) = k.g6;
  return s;
}

}  // namespace

ClosedLoopSystem build_system(const ScenarioConfig& cfg) {
  ModelSpec model{cfg.variant, cfg.material};
  ClosedLoopSystem sys{
      make_plant(model, Grid(cfg.n_nodes, cfg.material.L), cfg.order, cfg.unactuated),
      cfg.control, cfg.ebc, setup_from(cfg.casimir)};
  if (cfg.control == ControlMode::Ebc || cfg.control == ControlMode::EbcTarget)
    sys.ebc.validate(false);
  if (cfg.control == ControlMode::Casimir) sys.casimir.validate();
  return sys;
}

ClosedLoopState build_initial_state(const ScenarioConfig& cfg, const ClosedLoopSystem& sys) {
  ClosedLoopState x;
  x.beam = BeamState::zero(sys.n());
  switch (cfg.initial) {
    case InitialKind::Rest:
      break;
    case InitialKind::Fourier: {
      x.beam = random_smooth_state(sys.plant.ops, cfg.seed, cfg.initial_amplitude,
                                   cfg.initial_modes);
      if (cfg.unactuated == BoundaryKind::Clamped) {
        // Taper the random fields into the clamped end smoothly; projecting a
        // state that violates the constraints would instead cut a grid-scale
        // kink at z=0 with huge curvature energy.
        const FieldVector s = sys.plant.ops.grid.z / cfg.material.L;
        const FieldVector quad = s.cwiseAbs2();
        x.beam.w1 = x.beam.w1.cwiseProduct(quad);
        x.beam.p1 = x.beam.p1.cwiseProduct(quad);
        x.beam.w2 = x.beam.w2.cwiseProduct(s);
        x.beam.p2 = x.beam.p2.cwiseProduct(s);
      }
      break;
    }
    case InitialKind::Mode1:
      x.beam.w1 = cfg.initial_amplitude * cantilever_mode_shape(sys.plant.ops.grid);
      break;
    case InitialKind::File: {
      auto rows = load_states_csv(cfg.initial_file);
      if (rows.empty()) throw std::invalid_argument("initial state file has no rows");
      if (rows.back().second.n() != sys.n())
        throw std::invalid_argument("initial state file grid size does not match the scenario");
      x.beam = rows.back().second;
      break;
    }
  }
  x.beam.t = 0.0;
  sys.project(x);
  if (sys.has_controller_state()) {
    // Start the controller matched to the boundary traces, so the conserved
    // quantities begin (and stay) at zero.
    x.xc.setZero();
    x.xc(0) = x.beam.w1(sys.n() - 1);
    x.xc(1) = x.beam.w2(sys.n() - 1);
    x.xc(2) = (sys.plant.ops.D1 * x.beam.w1)(sys.n() - 1);
  }
  return x;
}

IntegratorOptions build_integrator(const ScenarioConfig& cfg) {
  IntegratorOptions opt;
  opt.scheme = cfg.scheme;
  opt.dt = cfg.dt;
  opt.newton_tol = cfg.newton_tol;
  opt.max_newton_iters = cfg.max_newton_iters;
  opt.fd_jacobian = cfg.fd_jacobian;
  return opt;
}

std::filesystem::path resolve_output_dir(const ScenarioConfig& cfg) {
  namespace fs = std::filesystem;
  fs::path base;
  if (!cfg.output_dir.empty()) {
    base = cfg.output_dir;
  } else {
    const char* root = std::getenv("PHBEAM_OUTPUT_ROOT");
    base = fs::path(root ? root : "runs") / cfg.name;
  }
  fs::path dir = base;
  for (int k = 2; fs::exists(dir); ++k) dir = base.string() + "-" + std::to_string(k);
  return dir;
}

// ---------------------------------------------------------------------------
// CSV records

void write_states_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const int n = traj.snapshots.front().beam.n();
  const int width = static_cast<int>(std::to_string(n - 1).size());

  out << "t";
  for (const char* field : {"w1", "w2", "p1", "p2"})
    for (int i = 0; i < n; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, ",%s_%0*d", field, width, i);
      out << buf;
    }
  out << "\n";
  for (const Snapshot& s : traj.snapshots) {
    out << fmt(s.t);
    for (const FieldVector* f : {&s.beam.w1, &s.beam.w2, &s.beam.p1, &s.beam.p2})
      for (int i = 0; i < n; ++i) out << "," << fmt((*f)(i));
    out << "\n";
  }
}

std::vector<std::pair<double, BeamState>> load_states_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("empty states file " + path.string());
  const long long cols = std::count(header.begin(), header.end(), ',') + 1;
  if (cols < 5 || (cols - 1) % 4 != 0)
    throw std::runtime_error("unexpected states layout in " + path.string());
  const int n = static_cast<int>((cols - 1) / 4);

  std::vector<std::pair<double, BeamState>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    BeamState x = BeamState::zero(n);
    const char* p = line.c_str();
    auto next = [&]() {
      char* end = nullptr;
      double v = std::strtod(p, &end);
      if (end == p) throw std::runtime_error("bad number in " + path.string());
      p = (*end == ',') ? end + 1 : end;
      return v;
    };
    double t = next();
    for (FieldVector* f : {&x.w1, &x.w2, &x.p1, &x.p2})
      for (int i = 0; i < n; ++i) (*f)(i) = next();
    x.t = t;
    rows.emplace_back(t, std::move(x));
  }
  return rows;
}

namespace {

void write_ports_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  out << "t,u_hat_1,u_hat_2,u_check_1,y_hat_1,y_hat_2,y_check_1\n";
  for (const Snapshot& s : traj.snapshots) {
    out << fmt(s.t) << "," << fmt(s.ports.u.u_hat_1) << "," << fmt(s.ports.u.u_hat_2) << ","
        << fmt(s.ports.u.u_check_1) << "," << fmt(s.ports.y_hat_1) << ","
        << fmt(s.ports.y_hat_2) << "," << fmt(s.ports.y_check_1) << "\n";
  }
}

void write_energy_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  const bool lyap = traj.snapshots.front().lyapunov.has_value();
  out << "t,energy" << (lyap ? ",lyapunov" : "") << ",boundary_power,dissipation\n";
  for (const Snapshot& s : traj.snapshots) {
    out << fmt(s.t) << "," << fmt(s.energy);
    if (lyap) out << "," << fmt(*s.lyapunov);
    out << "," << fmt(s.boundary_power) << "," << fmt(s.dissipation) << "\n";
  }
}

void write_controller_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path);
  out << "t,xc_1,xc_2,xc_3,xc_4,xc_5,xc_6,casimir_1,casimir_2,casimir_3\n";
  for (const Snapshot& s : traj.snapshots) {
    out << fmt(s.t);
    for (int i = 0; i < 6; ++i) out << "," << fmt(s.xc(i));
    for (int i = 0; i < 3; ++i) out << "," << fmt(s.casimirs(i));
    out << "\n";
  }
}

void write_plotdata(const std::filesystem::path& dir, const ClosedLoopSystem& sys,
                    const Trajectory& traj) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "plotdata");
  const int iR = sys.n() - 1;
  {
    std::ofstream out(dir / "plotdata" / "tip.dat");
    out << "# t  w1_tip  w2_tip  slope_tip\n";
    for (const Snapshot& s : traj.snapshots)
      out << fmt(s.t) << " " << fmt(s.beam.w1(iR)) << " " << fmt(s.beam.w2(iR)) << " "
          << fmt((sys.plant.ops.D1 * s.beam.w1)(iR)) << "\n";
  }
  {
    std::ofstream out(dir / "plotdata" / "energy.dat");
    out << "# t  energy  storage  boundary_power  dissipation\n";
    for (const Snapshot& s : traj.snapshots)
      out << fmt(s.t) << " " << fmt(s.energy) << " "
          << fmt(s.lyapunov ? *s.lyapunov : s.energy) << " " << fmt(s.boundary_power) << " "
          << fmt(s.dissipation) << "\n";
  }
  std::ofstream gp(dir / "plot.gp");
  gp << "# gnuplot script for a quick look at the run\n"
        "set terminal pngcairo size 1100,800\n"
        "set output 'overview.png'\n"
        "set multiplot layout 2,1\n"
        "set xlabel 't [s]'\n"
        "plot 'plotdata/tip.dat' using 1:2 with lines title 'tip deflection', \\\n"
        "     'plotdata/tip.dat' using 1:3 with lines title 'tip axial', \\\n"
        "     'plotdata/tip.dat' using 1:4 with lines title 'tip slope'\n"
        "set logscale y\n"
        "plot 'plotdata/energy.dat' using 1:3 with lines title 'storage function'\n"
        "unset multiplot\n";
}

}  // namespace

bool audit_passes(const ClosedLoopSystem& sys, const Trajectory& traj,
                  const BalanceAudit& audit, std::string* notes) {
  std::ostringstream why;
  bool ok = true;

  // The difference quotient (E1-E0)/dt dominates the roundoff of both
  // rate formulations, so conservative runs (net power ~ 0) must still be
  // judged against the energy/dt scale rather than the vanishing net power.
  const double split_scale =
      std::max({1.0, audit.max_abs_power, audit.energy_scale / std::max(audit.dt, 1e-300)});
  const double split_tol = 1e-10 * split_scale;
  if (audit.max_split_disagreement > split_tol) {
    ok = false;
    why << "energy-rate formulations disagree: " << audit.max_split_disagreement << " > "
        << split_tol << "\n";
  }

  if (sys.mode == ControlMode::OpenLoop) {
    const double e0 = traj.snapshots.front().energy;
    const bool dissipative =
        sys.plant.model.alpha1() > 0.0 || sys.plant.model.alpha2() > 0.0;
    // With damping the energy must fall every step.  Without it the
    // quadratic part is conserved exactly but the quartic terms wiggle at
    // the integrator's local order, so only drift is gated.
    const double tol = (dissipative ? 1e-10 : 1e-6) * std::max(e0, 1e-300);
    if (traj.max_energy_increment > tol) {
      ok = false;
      why << "open-loop energy increased by " << traj.max_energy_increment << " in one step (tol "
          << tol << ")\n";
    }
    const double drift = std::abs(traj.snapshots.back().energy - e0);
    if (!dissipative && drift > 1e-6 * std::max(e0, 1e-300)) {
      ok = false;
      why << "conserved energy drifted by " << drift << " (tol " << 1e-6 * e0 << ")\n";
    }
  } else if (traj.snapshots.front().lyapunov) {
    const double v0 = *traj.snapshots.front().lyapunov;
    const double tol = 1e-10 * std::max(v0, 1e-300);
    if (traj.max_lyapunov_increment > tol) {
      ok = false;
      why << "storage function increased by " << traj.max_lyapunov_increment
          << " in one step (tol " << tol << ")\n";
    }
  }

  if (notes) *notes = why.str();
  return ok;
}

RunResult run_scenario(const ScenarioConfig& cfg) {
  return run_scenario(cfg, resolve_output_dir(cfg));
}

RunResult run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  ClosedLoopSystem sys = build_system(cfg);
  ClosedLoopState x0 = build_initial_state(cfg, sys);
  IntegratorOptions opt = build_integrator(cfg);

  RunResult result;
  result.trajectory = simulate(sys, x0, cfg.t_final, opt, cfg.stride);
  result.audit = audit_energy_balance(sys, result.trajectory);
  result.audit_pass = audit_passes(sys, result.trajectory, result.audit, &result.audit_notes);

  fs::create_directories(dir);
  RunArtifacts& art = result.artifacts;
  art.dir = dir;
  art.states = dir / "states.csv";
  art.ports = dir / "ports.csv";
  art.energy = dir / "energy.csv";
  art.audit = dir / "audit.json";
  art.config_echo = dir / "config.txt";
  art.plot_script = dir / "plot.gp";

  {
    std::ofstream out(art.config_echo);
    out << render_config(cfg);
  }
  write_states_csv(art.states, result.trajectory);
  write_ports_csv(art.ports, result.trajectory);
  write_energy_csv(art.energy, result.trajectory);
  if (sys.has_controller_state()) {
    art.controller = dir / "controller.csv";
    write_controller_csv(art.controller, result.trajectory);
  }
  write_plotdata(dir, sys, result.trajectory);

  const Trajectory& traj = result.trajectory;
  nlohmann::json j;
  j["scenario"] = cfg.name;
  j["scheme"] = to_string(traj.scheme);
  j["dt"] = traj.dt;
  j["steps"] = traj.steps;
  j["snapshots"] = traj.snapshots.size();
  j["energy"] = {{"initial", traj.snapshots.front().energy},
                 {"final", traj.snapshots.back().energy},
                 {"max_step_increment", traj.max_energy_increment}};
  if (traj.snapshots.front().lyapunov) {
    j["storage"] = {{"initial", *traj.snapshots.front().lyapunov},
                    {"final", *traj.snapshots.back().lyapunov},
                    {"max_step_increment", traj.max_lyapunov_increment}};
  }
  j["balance"] = {{"intervals", result.audit.intervals},
                  {"max_split_disagreement", result.audit.max_split_disagreement},
                  {"power_scale", result.audit.max_abs_power},
                  {"max_interval_residual", result.audit.max_energy_residual},
                  {"sum_interval_residual", result.audit.sum_energy_residual},
                  {"max_storage_interval_residual", result.audit.max_lyapunov_residual}};
  if (sys.has_controller_state()) {
    Eigen::Vector3d drift = casimir_drift(traj);
    j["casimir_drift"] = {drift(0), drift(1), drift(2)};
    j["max_interconnect_residual"] = traj.max_interconnect_residual;
  }
  j["newton"] = {{"factorizations", traj.newton.factorizations},
                 {"total_iterations", traj.newton.total_iters},
                 {"worst_step_iterations", traj.newton.worst_step_iters}};
  j["pass"] = result.audit_pass;
  j["notes"] = result.audit_notes;
  {
    std::ofstream out(art.audit);
    out << j.dump(2) << "\n";
  }
  return result;
}

int audit_run_dir(const std::filesystem::path& dir, std::ostream& log) {
  ScenarioConfig cfg = load_config_file((dir / "config.txt").string());
  ClosedLoopSystem sys = build_system(cfg);
  auto rows = load_states_csv(dir / "states.csv");
  if (rows.size() < 2) throw std::runtime_error("states.csv holds fewer than two snapshots");

  std::vector<ControllerState> xcs;
  if (sys.has_controller_state()) {
    std::ifstream in(dir / "controller.csv");
    if (!in) throw std::runtime_error("controller.csv missing for a controlled run");
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ControllerState xc;
      const char* p = line.c_str();
      char* end = nullptr;
      std::strtod(p, &end);  // t column
      p = end + 1;
      for (int i = 0; i < 6; ++i) {
        xc(i) = std::strtod(p, &end);
        p = (*end == ',') ? end + 1 : end;
      }
      xcs.push_back(xc);
    }
    if (xcs.size() != rows.size())
      throw std::runtime_error("controller.csv and states.csv disagree on snapshot count");
  }

  // Rebuild the trajectory record from the stored states alone.
  Trajectory traj;
  traj.dt = cfg.dt;
  traj.stride = cfg.stride;
  traj.scheme = cfg.scheme;
  for (size_t k = 0; k < rows.size(); ++k) {
    ClosedLoopState x;
    x.beam = rows[k].second;
    if (!xcs.empty()) x.xc = xcs[k];
    Snapshot s;
    s.t = rows[k].first;
    s.beam = x.beam;
    s.xc = x.xc;
    s.ports = sys.ports(x);
    s.energy = sys.energy(x);
    s.lyapunov = sys.lyapunov(x);
    s.boundary_power = s.ports.u.u_hat_1 * s.ports.y_hat_1 +
                       s.ports.u.u_hat_2 * s.ports.y_hat_2 +
                       s.ports.u.u_check_1 * s.ports.y_check_1;
    s.dissipation = dissipation_rate(sys.plant, x.beam);
    if (sys.mode == ControlMode::Casimir) s.casimirs = casimir_values(sys.plant, x.beam, x.xc);

    if (!traj.snapshots.empty()) {
      traj.max_energy_increment =
          std::max(traj.max_energy_increment, s.energy - traj.snapshots.back().energy);
      if (s.lyapunov)
        traj.max_lyapunov_increment = std::max(
            traj.max_lyapunov_increment, *s.lyapunov - *traj.snapshots.back().lyapunov);
    }
    traj.snapshots.push_back(std::move(s));
  }

  BalanceAudit audit = audit_energy_balance(sys, traj);
  std::string notes;
  const bool ok = audit_passes(sys, traj, audit, &notes);

  log << "audited " << traj.snapshots.size() << " snapshots from " << dir.string() << "\n";
  log << "  max split disagreement " << audit.max_split_disagreement << " (power scale "
      << audit.max_abs_power << ")\n";
  log << "  max interval residual  " << audit.max_energy_residual << "\n";
  if (sys.has_controller_state()) {
    Eigen::Vector3d drift = casimir_drift(traj);
    log << "  conserved-quantity drift " << drift(0) << " " << drift(1) << " " << drift(2)
        << "\n";
  }
  log << (ok ? "PASS" : ("FAIL\n" + notes)) << "\n";
  return ok ? 0 : 3;
}

}  // namespace phbeam
