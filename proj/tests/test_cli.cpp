#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "phbeam/run.hpp"

using namespace phbeam;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("phbeam_test_" + tag);
  fs::remove_all(d);
  return d;
}

// Small, fast scenario used by the artifact tests.
std::string small_scenario(const std::string& extra = "") {
  return std::string("free-decay\n"
                     "grid.n_nodes = 21\n"
                     "integrator.t_final = 0.01\n"
                     "integrator.stride = 20\n") +
         extra;
}

}  // namespace

TEST_CASE("every preset parses, validates, and renders round-trip") {
  for (const std::string& name : preset_names()) {
    CAPTURE(name);
    REQUIRE(is_preset(name));
    ScenarioConfig cfg = parse_config(preset_text(name));
    CHECK(cfg.name == name);
    // render -> parse -> render must reach a fixed point
    std::string once = render_config(cfg);
    ScenarioConfig again = parse_config(once);
    CHECK(render_config(again) == once);
  }
  CHECK_FALSE(is_preset("no-such-preset"));
  CHECK_THROWS_AS(preset_text("no-such-preset"), std::invalid_argument);
}

TEST_CASE("preset values survive the round trip") {
  ScenarioConfig cfg = parse_config(preset_text("fig1-ebc"));
  CHECK(cfg.variant == ModelVariant::NonlinearStructural);
  CHECK(cfg.material.EI == 14.97);
  CHECK(cfg.material.EA == 50.0);
  CHECK(cfg.material.rhoA == 2.1);
  CHECK(cfg.material.L == 0.54);
  CHECK(cfg.n_nodes == 201);
  CHECK(cfg.unactuated == BoundaryKind::Free);
  CHECK(cfg.control == ControlMode::Ebc);
  CHECK(cfg.ebc.c1 == 2e8);
  CHECK(cfg.ebc.k1 == 2200.0);
  CHECK(cfg.ebc.a == 0.01);

  ScenarioConfig cas = parse_config(preset_text("fig1-casimir"));
  CHECK(cas.control == ControlMode::Casimir);
  CHECK(cas.casimir.g4 == 47.0);
  CHECK(cas.casimir.r5 == 100.0);
}

TEST_CASE("config errors carry line numbers, keys, and all problems at once") {
  const std::string text =
      "model = nonlinear_structural\n"
      "material.EI = 14.97\n"
      "material.EA = fifty\n"        // line 3: bad number
      "material.rhoA = 2.1\n"
      "material.L = 0.54\n"
      "grid.n_nodes = 5\n"           // line 6: too small
      "integrator.dt = -1\n"         // line 7: not positive
      "integrator.t_final = 1\n"
      "no.such.key = 1\n";           // line 9: unknown
  try {
    parse_config(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("material.EA") != std::string::npos);
    CHECK(msg.find("expected a number") != std::string::npos);
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("must be at least 9") != std::string::npos);
    CHECK(msg.find("integrator.dt") != std::string::npos);
    CHECK(msg.find("unknown key") != std::string::npos);
    CHECK(e.issues.size() >= 4);
  }
}

TEST_CASE("missing required keys are reported without line numbers") {
  try {
    parse_config("model = linear_viscous\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    bool found = false;
    for (const ConfigIssue& i : e.issues)
      if (i.key == "integrator.dt" && i.message == "required key missing" && i.line == 0)
        found = true;
    CHECK(found);
  }
}

TEST_CASE("controller-specific validation") {
  // zero damping gain is rejected on the configuration surface
  CHECK_THROWS_AS(parse_config(small_scenario("controller = ebc\nebc.k1 = 0\n")),
                  ConfigError);
  // casimir weights must be positive
  CHECK_THROWS_AS(parse_config(small_scenario("controller = casimir\ncasimir.m4 = 0\n")),
                  ConfigError);
  // unknown controller name
  CHECK_THROWS_AS(parse_config(small_scenario("controller = bang_bang\n")), ConfigError);
  // file initial data requires the path
  CHECK_THROWS_AS(parse_config(small_scenario("initial.kind = file\n")), ConfigError);
}

TEST_CASE("later assignments win, enabling override lists") {
  ScenarioConfig cfg = parse_config(small_scenario("grid.n_nodes = 31\n"));
  CHECK(cfg.n_nodes == 31);
  CHECK(cfg.t_final == 0.01);
  CHECK(cfg.name == "free-decay");
}

TEST_CASE("states CSV survives a bit-exact round trip") {
  ClosedLoopSystem sys;
  {
    ScenarioConfig cfg = parse_config(small_scenario());
    sys = build_system(cfg);
    ClosedLoopState x0 = build_initial_state(cfg, sys);
    IntegratorOptions opt = build_integrator(cfg);
    Trajectory traj = simulate(sys, x0, cfg.t_final, opt, cfg.stride);

    fs::path dir = fresh_dir("csv");
    fs::create_directories(dir);
    write_states_csv(dir / "states.csv", traj);
    auto rows = load_states_csv(dir / "states.csv");
    REQUIRE(rows.size() == traj.snapshots.size());
    for (size_t k = 0; k < rows.size(); ++k) {
      CHECK(rows[k].first == traj.snapshots[k].t);
      CHECK((rows[k].second.w1 - traj.snapshots[k].beam.w1).cwiseAbs().maxCoeff() == 0.0);
      CHECK((rows[k].second.p2 - traj.snapshots[k].beam.p2).cwiseAbs().maxCoeff() == 0.0);
    }
    fs::remove_all(dir);
  }
}

TEST_CASE("run artifacts land in the requested directory") {
  ScenarioConfig cfg = parse_config(small_scenario());
  fs::path dir = fresh_dir("artifacts");
  RunResult r = run_scenario(cfg, dir);
  CHECK(r.audit_pass);
  CHECK(fs::exists(r.artifacts.states));
  CHECK(fs::exists(r.artifacts.ports));
  CHECK(fs::exists(r.artifacts.energy));
  CHECK(fs::exists(r.artifacts.audit));
  CHECK(fs::exists(r.artifacts.config_echo));
  CHECK(fs::exists(dir / "plot.gp"));
  CHECK(fs::exists(dir / "plotdata" / "tip.dat"));
  CHECK(fs::exists(dir / "plotdata" / "energy.dat"));
  // open loop: no controller record
  CHECK(r.artifacts.controller.empty());
  // audit summary must state the verdict
  std::string audit_json = slurp(r.artifacts.audit);
  CHECK(audit_json.find("\"pass\": true") != std::string::npos);
  // the echoed configuration reproduces the run
  ScenarioConfig echo = parse_config(slurp(r.artifacts.config_echo));
  CHECK(echo.n_nodes == cfg.n_nodes);
  CHECK(echo.dt == cfg.dt);
  fs::remove_all(dir);
}

TEST_CASE("controller runs record the controller trace") {
  ScenarioConfig cfg = parse_config(
      "fig1-casimir\n"
      "grid.n_nodes = 21\n"
      "integrator.t_final = 0.005\n"
      "integrator.stride = 10\n");
  fs::path dir = fresh_dir("casimir_artifacts");
  RunResult r = run_scenario(cfg, dir);
  CHECK(fs::exists(r.artifacts.controller));
  std::string head = slurp(r.artifacts.controller).substr(0, 60);
  CHECK(head.find("xc_1") != std::string::npos);
  CHECK(head.find("casimir_1") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("identical configurations produce identical records") {
  ScenarioConfig cfg = parse_config(small_scenario());
  fs::path d1 = fresh_dir("det1");
  fs::path d2 = fresh_dir("det2");
  run_scenario(cfg, d1);
  run_scenario(cfg, d2);
  CHECK(slurp(d1 / "states.csv") == slurp(d2 / "states.csv"));
  CHECK(slurp(d1 / "ports.csv") == slurp(d2 / "ports.csv"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("output directory resolution prefers config, then environment") {
  ScenarioConfig cfg = parse_config(small_scenario());
  cfg.output_dir = "/tmp/phbeam_explicit";
  CHECK(resolve_output_dir(cfg) == fs::path("/tmp/phbeam_explicit"));

  cfg.output_dir.clear();
  setenv("PHBEAM_OUTPUT_ROOT", "/tmp/phbeam_root", 1);
  CHECK(resolve_output_dir(cfg) == fs::path("/tmp/phbeam_root") / "free-decay");
  unsetenv("PHBEAM_OUTPUT_ROOT");

  // collision gets a numeric suffix
  fs::path taken = fresh_dir("taken");
  fs::create_directories(taken);
  cfg.output_dir = taken.string();
  CHECK(resolve_output_dir(cfg) != taken);
  CHECK(resolve_output_dir(cfg).string().find(taken.string()) == 0);
  fs::remove_all(taken);
}

TEST_CASE("a finished run re-audits clean from its files") {
  ScenarioConfig cfg = parse_config(small_scenario("integrator.stride = 1\n"));
  fs::path dir = fresh_dir("reaudit");
  run_scenario(cfg, dir);

  std::ostringstream log;
  CHECK(audit_run_dir(dir, log) == 0);
  CHECK(log.str().find("PASS") != std::string::npos);

  SUBCASE("tampered records fail the audit") {
    // graft the first state row over the last one: the damped run now ends
    // with an energy jump the ledger cannot explain
    fs::path states = dir / "states.csv";
    std::ifstream in(states);
    std::string header, first, line, last;
    std::getline(in, header);
    std::getline(in, first);
    std::vector<std::string> rows{first};
    while (std::getline(in, line))
      if (!line.empty()) rows.push_back(line);
    in.close();
    const std::string t_last = rows.back().substr(0, rows.back().find(','));
    rows.back() = t_last + first.substr(first.find(','));
    std::ofstream out(states);
    out << header << "\n";
    for (const std::string& r : rows) out << r << "\n";
    out.close();

    std::ostringstream log2;
    CHECK(audit_run_dir(dir, log2) == 3);
    CHECK(log2.str().find("FAIL") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("file initial state restarts from the recorded endpoint") {
  ScenarioConfig cfg = parse_config(small_scenario());
  fs::path dir = fresh_dir("restart");
  RunResult first = run_scenario(cfg, dir);

  ScenarioConfig next = parse_config(small_scenario(
      "initial.kind = file\ninitial.file = " + (dir / "states.csv").string() + "\n"));
  ClosedLoopSystem sys = build_system(next);
  ClosedLoopState x0 = build_initial_state(next, sys);
  const BeamState& recorded = first.trajectory.final_snapshot().beam;
  CHECK((x0.beam.w1 - recorded.w1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((x0.beam.p1 - recorded.p1).cwiseAbs().maxCoeff() < 1e-12);

  // grid mismatch is refused
  ScenarioConfig bad = next;
  bad.n_nodes = 31;
  ClosedLoopSystem sys31 = build_system(bad);
  CHECK_THROWS_AS(build_initial_state(bad, sys31), std::invalid_argument);
  fs::remove_all(dir);
}
