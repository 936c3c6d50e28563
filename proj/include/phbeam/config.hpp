#pragma once

// Scenario configuration: a small line-oriented key=value format with
// comments, named presets that expand in place, strict unknown-key
// rejection, and collected validation errors with line numbers.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "phbeam/simulate.hpp"

namespace phbeam {

enum class InitialKind { Rest, Fourier, Mode1, File };
const char* to_string(InitialKind k);

// Scalar surface for the dynamic controller's free parameters; expanded to
// the full matrix setup when the system is built.
struct CasimirKnobs {
  double c1 = 2e8, c2 = 1000.0, c3 = 8e4;
  double a = 0.01, b = 0.01;
  double r4 = 100.0, r5 = 100.0, r6 = 100.0;  // damping on states 4..6
  double m4 = 1.0, m5 = 1.0, m6 = 1.0;        // energy weights on states 4..6
  double g4 = 47.0, g5 = 1.0, g6 = 1.0;       // free input-map columns
};

struct ScenarioConfig {
  std::string name = "scenario";

  ModelVariant variant = ModelVariant::NonlinearStructural;
  MaterialParams material;  // alpha1/alpha2 default 1e-3, rest required

  int n_nodes = 0;
  int order = 2;
  BoundaryKind unactuated = BoundaryKind::Clamped;

  Scheme scheme = Scheme::ImplicitMidpoint;
  double dt = 0.0;
  double t_final = -1.0;
  int stride = 1;
  double newton_tol = 1e-10;
  int max_newton_iters = 50;
  bool fd_jacobian = false;

  ControlMode control = ControlMode::OpenLoop;
  EbcParams ebc{};
  CasimirKnobs casimir{};

  InitialKind initial = InitialKind::Rest;
  int initial_modes = 5;
  double initial_amplitude = 1e-3;
  std::string initial_file;
  std::uint64_t seed = 0;

  std::string output_dir;  // resolved against PHBEAM_OUTPUT_ROOT when empty
};

struct ConfigIssue {
  int line = 0;  // 0 when no source line applies (missing keys)
  std::string key;
  std::string message;
};

struct ConfigError : std::runtime_error {
  std::vector<ConfigIssue> issues;
  explicit ConfigError(std::vector<ConfigIssue> found);
  static std::string render(const std::vector<ConfigIssue>& issues);
};

// Parses and validates; throws ConfigError carrying every problem found.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config_file(const std::string& path);

std::vector<std::string> preset_names();
bool is_preset(const std::string& name);
std::string preset_text(const std::string& name);  // throws std::invalid_argument

// Deterministic full dump; parse_config(render_config(c)) reproduces c.
std::string render_config(const ScenarioConfig& c);

}  // namespace phbeam
