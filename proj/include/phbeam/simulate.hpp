#pragma once

// Closed-loop assembly and time integration.  The implicit midpoint rule is
// the default scheme: with the final update rewritten as
//   x1 = x0 + dt * f((x0 + x1)/2)
// at the converged midpoint, linear invariants of the flow are inherited by
// the discrete trajectory up to roundoff, and the quadratic parts of the
// energy balance close to integrator tolerance.

#include <Eigen/Sparse>

#include <optional>
#include <stdexcept>
#include <vector>

#include "phbeam/control.hpp"
#include "phbeam/dynamics.hpp"

namespace phbeam {

enum class ControlMode { OpenLoop, Ebc, EbcTarget, Casimir };
const char* to_string(ControlMode m);

enum class Scheme { ImplicitMidpoint, Rk4 };
const char* to_string(Scheme s);

struct ClosedLoopState {
  BeamState beam;
  ControllerState xc = ControllerState::Zero();  // live in Casimir mode only
};

struct ClosedLoopSystem {
  Plant plant;
  ControlMode mode = ControlMode::OpenLoop;
  EbcParams ebc{};
  CasimirControllerSetup casimir = default_casimir_setup();

  int n() const { return plant.n(); }
  bool has_controller_state() const { return mode == ControlMode::Casimir; }
  int dim() const { return 4 * n() + (has_controller_state() ? 6 : 0); }

  // Actuator command produced by the active controller.
  BoundaryInput command(const ClosedLoopState& x) const;

  // Boundary input as the plant energy balance sees it.  Identical to
  // command() except in target-dynamics mode, where the shaping forces enter
  // through the shaped gradient instead of the actuator; folding them back in
  // makes the port records of the two equivalent closed loops comparable.
  BoundaryInput effective_input(const ClosedLoopState& x) const;

  PortValues ports(const ClosedLoopState& x) const;

  void rhs(const ClosedLoopState& x, ClosedLoopState& dxdt) const;

  double energy(const ClosedLoopState& x) const;  // plant energy

  // Storage function the active controller is proven to decrease: shaped
  // energy for the static law and its target dynamics, plant plus controller
  // energy for the dynamic controller, nothing in open loop.
  std::optional<double> lyapunov(const ClosedLoopState& x) const;

  void project(ClosedLoopState& x) const;

  Eigen::VectorXd pack(const ClosedLoopState& x) const;
  void unpack(const Eigen::VectorXd& v, ClosedLoopState& x) const;

  // Jacobian of the packed right-hand side; analytic sparse assembly.
  SparseMat jacobian(const ClosedLoopState& x) const;

  // Central-difference Jacobian, O(dim^2) evaluations; reference variant for
  // tests and a fallback behind a configuration flag.
  SparseMat fd_jacobian(const ClosedLoopState& x) const;
};

struct SimulationError : std::runtime_error {
  double t;
  SimulationError(const std::string& what, double when)
      : std::runtime_error(what), t(when) {}
};

struct IntegratorOptions {
  Scheme scheme = Scheme::ImplicitMidpoint;
  double dt = 1e-4;
  double newton_tol = 1e-10;  // on ||G||_inf relative to max(1, ||x0||_inf)
  int max_newton_iters = 50;
  int rebuild_after = 8;      // refresh the frozen Jacobian at this iteration
  bool fd_jacobian = false;
};

struct NewtonStats {
  long long total_iters = 0;
  long long factorizations = 0;
  int worst_step_iters = 0;
};

struct Snapshot {
  double t = 0.0;
  BeamState beam;
  ControllerState xc = ControllerState::Zero();
  PortValues ports;
  double energy = 0.0;
  std::optional<double> lyapunov;
  double boundary_power = 0.0;  // u . y through the actuated end
  double dissipation = 0.0;
  Eigen::Vector3d casimirs = Eigen::Vector3d::Zero();
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  long long steps = 0;
  double dt = 0.0;
  int stride = 1;
  Scheme scheme = Scheme::ImplicitMidpoint;
  NewtonStats newton;

  // Worst single-step increase, tracked every step (not just at snapshots).
  double max_energy_increment = 0.0;
  double max_lyapunov_increment = 0.0;

  // Casimir runs only: worst |plant port power + controller port power| seen
  // at any step.  The coupling is power-conserving, so this is roundoff.
  double max_interconnect_residual = 0.0;

  const Snapshot& initial() const { return snapshots.front(); }
  const Snapshot& final_snapshot() const { return snapshots.back(); }
};

// Implicit midpoint with a frozen sparse LU of I - dt/2 J, refactored only
// when Newton slows down.  step() advances by dt or throws SimulationError.
class MidpointStepper {
 public:
  MidpointStepper(const ClosedLoopSystem& sys, const IntegratorOptions& opt);
  void step(ClosedLoopState& x);
  const NewtonStats& stats() const { return stats_; }

 private:
  void refactor(const ClosedLoopState& mid, double t);

  const ClosedLoopSystem& sys_;
  IntegratorOptions opt_;
  Eigen::SparseLU<SparseMat> lu_;
  bool factored_ = false;
  NewtonStats stats_;
};

void rk4_step(const ClosedLoopSystem& sys, const IntegratorOptions& opt, ClosedLoopState& x);

// Integrates over [x0.beam.t, x0.beam.t + t_final] in round(t_final/dt)
// steps, recording every stride-th state plus the endpoints.
Trajectory simulate(const ClosedLoopSystem& sys, const ClosedLoopState& x0, double t_final,
                    const IntegratorOptions& opt, int stride = 1);

}  // namespace phbeam
