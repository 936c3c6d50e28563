#pragma once

// Semidiscrete beam dynamics: the state fields, boundary ports, and the
// plant right-hand side.  The actuated end replaces the natural boundary
// forces with commanded values through quadrature-scaled injection rows, so
// the semidiscrete power balance
//   dE/dt = -dissipation + u_hat . y_hat + u_check . y_check
// holds as an algebraic identity, not up to truncation error.

#include "phbeam/discretization.hpp"
#include "phbeam/model.hpp"

namespace phbeam {

enum class BoundaryKind {
  Clamped,  // w1 = w1_1 = w2 = 0 held by constraint elimination
  Free,     // natural boundary forces replaced by zero
};

const char* to_string(BoundaryKind k);

struct BeamState {
  FieldVector w1, w2, p1, p2;
  double t = 0.0;

  static BeamState zero(int n);
  int n() const { return static_cast<int>(w1.size()); }
  bool all_finite() const;
};

// Commanded values at the actuated end z = L.
struct BoundaryInput {
  double u_hat_1 = 0.0;    // shear channel [N]
  double u_hat_2 = 0.0;    // normal force channel [N]
  double u_check_1 = 0.0;  // bending moment channel [N m]
};

// Collocated outputs at z = L plus the commands that were applied.
struct PortValues {
  double y_hat_1 = 0.0;    // tip transverse velocity
  double y_hat_2 = 0.0;    // tip axial velocity
  double y_check_1 = 0.0;  // tip angular velocity (d/dt w1_1)
  BoundaryInput u;
};

// Everything fixed over a run: model, operators, boundary configuration and
// the precomputed injection/projection machinery.
struct Plant {
  ModelSpec model;
  DiscreteOperators ops;
  BoundaryKind unactuated = BoundaryKind::Clamped;

  ConstraintProjector proj_transverse;  // trivial when the left end is free
  ConstraintProjector proj_axial;

  FieldVector alpha1_field, alpha2_field;

  // Injection directions: Winv*e and Winv*D1^T*e at each end.
  FieldVector inj_force_R, inj_moment_R;
  FieldVector inj_force_L, inj_moment_L;

  int n() const { return ops.n(); }
};

Plant make_plant(const ModelSpec& model, const Grid& grid, int order, BoundaryKind unactuated);

// Damping-corrected natural forces at an end, with the velocity jets taken
// from the current momenta.
InternalForces natural_forces(const Plant& plant, const BeamState& x, End end);

PortValues port_outputs(const Plant& plant, const BeamState& x, const BoundaryInput& u);

// dx/dt for a commanded boundary input.  Clamped-end rows are removed by the
// W-orthogonal projector, which keeps the energy identity exact.
void plant_rhs(const Plant& plant, const BeamState& x, const BoundaryInput& u,
               BeamState& dxdt);

double plant_energy(const Plant& plant, const BeamState& x);

// Instantaneous dissipation rate (nonnegative by construction).
double dissipation_rate(const Plant& plant, const BeamState& x);

// Re-enforces the clamped-end constraints; no-op for a free end.
void project_state(const Plant& plant, BeamState& x);

}  // namespace phbeam
