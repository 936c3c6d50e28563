#pragma once

// Post-hoc auditing and numerical oracles: the two-sided energy ledger, drift
// of conserved quantities, independent checks of the variational machinery,
// convergence studies and the analytic cantilever reference values.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "phbeam/simulate.hpp"

namespace phbeam {

// Energy bookkeeping over a recorded trajectory.  Each interval is evaluated
// at the midpoint state, matching the integrator's quadrature.  Three
// formulations of the energy rate are compared:
//   chain:  quadrature of the density partials against the moving jets,
//   parts:  domain variational derivative plus uncorrected boundary forces,
//   ports:  commanded boundary power minus dissipation.
// Their mutual agreement is an algebraic property of the discretization and
// must hold to roundoff; the interval residual against the stored energies is
// limited by the integrator instead.
struct BalanceAudit {
  int intervals = 0;
  double dt = 0.0;

  double max_energy_residual = 0.0;  // |dE - dt*(ports rate)| per interval
  double sum_energy_residual = 0.0;

  bool has_lyapunov = false;
  double max_lyapunov_residual = 0.0;
  double sum_lyapunov_residual = 0.0;

  double max_split_disagreement = 0.0;  // chain vs ports, parts vs ports
  double max_abs_power = 0.0;           // scale of the compared rates
  double energy_scale = 0.0;            // max |E| over the snapshots
};

BalanceAudit audit_energy_balance(const ClosedLoopSystem& sys, const Trajectory& traj);

// Largest excursion of each conserved quantity from its initial value.
Eigen::Vector3d casimir_drift(const Trajectory& traj);

// ---------------------------------------------------------------------------
// Variational oracle

// Independent check of the energy gradient machinery on random smooth states:
//  - analytic directional derivatives against central finite differences,
//  - the integration-by-parts identity including boundary traces,
//  - the pure domain pairing for perturbations with silent boundaries.
struct OracleReport {
  int trials = 0;
  double max_fd_mismatch = 0.0;        // relative
  double max_boundary_residual = 0.0;  // relative to the derivative scale
  double max_interior_residual = 0.0;  // relative

  bool pass(double fd_tol, double identity_tol) const {
    return max_fd_mismatch <= fd_tol && max_boundary_residual <= identity_tol &&
           max_interior_residual <= identity_tol;
  }
};

OracleReport variational_oracle(const ModelSpec& model, const DiscreteOperators& ops,
                                int trials, std::uint64_t seed);

// Band-limited random fields: the lowest Fourier modes with 1/k^2 weights,
// deterministic in the seed.
FieldVector random_smooth_field(const DiscreteOperators& ops, std::mt19937_64& rng,
                                double amplitude, int modes = 5);
BeamState random_smooth_state(const DiscreteOperators& ops, std::uint64_t seed,
                              double amplitude, int modes = 5);

// ---------------------------------------------------------------------------
// Convergence studies

struct ConvergenceReport {
  std::string label;
  std::vector<double> resolution;  // dt or h, coarse to fine
  std::vector<double> error;       // against the finer reference
  double expected_order = 0.0;
  double fitted_order = 0.0;       // least-squares slope; NaN when exact
  bool exact = false;              // errors at roundoff at every level
  bool monotone = true;

  bool pass(double slack) const;
  std::string summary() const;
};

// W-weighted distance of two states of the same system.
double state_distance(const ClosedLoopSystem& sys, const ClosedLoopState& a,
                      const ClosedLoopState& b);

// Halves dt `levels` times from dt0; the reference uses two extra halvings.
ConvergenceReport temporal_convergence(const ClosedLoopSystem& sys, const ClosedLoopState& x0,
                                       double t_final, double dt0, int levels,
                                       IntegratorOptions opt);

using SystemFactory = std::function<ClosedLoopSystem(int n_nodes)>;
using StateFactory = std::function<ClosedLoopState(const ClosedLoopSystem&)>;

// Nested grids: every n in `ns`, and the reference grid refining the finest
// once more.  States are compared on the coarse nodes.
ConvergenceReport spatial_convergence(const SystemFactory& make_system,
                                      const StateFactory& make_state,
                                      const std::vector<int>& ns, double t_final,
                                      const IntegratorOptions& opt, double expected_order);

// ---------------------------------------------------------------------------
// Cantilever reference values

// First natural frequency [Hz] of the clamped-free linear beam.
double cantilever_mode_frequency(const MaterialParams& m);

// First clamped-free mode shape sampled on the grid, normalized to unit tip
// deflection.
FieldVector cantilever_mode_shape(const Grid& grid);

// Frequency estimate from upward zero crossings with linear interpolation.
// Throws std::runtime_error when fewer than two crossings are present.
double dominant_frequency(const std::vector<double>& t, const std::vector<double>& signal);

}  // namespace phbeam
