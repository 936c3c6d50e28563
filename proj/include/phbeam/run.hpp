#pragma once

// Scenario execution: building the runtime objects from a configuration,
// writing the run artifacts (CSV records, audit summary, resolved config,
// plot data) and re-auditing a finished run directory from its files alone.

#include <filesystem>
#include <iosfwd>
#include <utility>

#include "phbeam/config.hpp"
#include "phbeam/diagnostics.hpp"

namespace phbeam {

ClosedLoopSystem build_system(const ScenarioConfig& cfg);
ClosedLoopState build_initial_state(const ScenarioConfig& cfg, const ClosedLoopSystem& sys);
IntegratorOptions build_integrator(const ScenarioConfig& cfg);

struct RunArtifacts {
  std::filesystem::path dir;
  std::filesystem::path states, ports, energy, controller, audit, config_echo, plot_script;
};

struct RunResult {
  RunArtifacts artifacts;
  Trajectory trajectory;
  BalanceAudit audit;
  bool audit_pass = false;
  std::string audit_notes;
};

// Output directory: the configured one, else $PHBEAM_OUTPUT_ROOT/<name>, else
// ./runs/<name>; a numeric suffix is appended when the directory is taken.
std::filesystem::path resolve_output_dir(const ScenarioConfig& cfg);

RunResult run_scenario(const ScenarioConfig& cfg);
RunResult run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& dir);

// The pass/fail gate applied to every finished run: exact-identity margins
// (rate splits), monotone storage functions, finite records.
bool audit_passes(const ClosedLoopSystem& sys, const Trajectory& traj,
                  const BalanceAudit& audit, std::string* notes);

void write_states_csv(const std::filesystem::path& path, const Trajectory& traj);
std::vector<std::pair<double, BeamState>> load_states_csv(const std::filesystem::path& path);

// Recomputes the audit of a run directory from config.txt plus the recorded
// states; returns 0 on pass, 3 on audit failure.
int audit_run_dir(const std::filesystem::path& dir, std::ostream& log);

}  // namespace phbeam
