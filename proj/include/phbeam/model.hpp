#pragma once

// Beam constitutive models: Hamiltonian densities on second-order jets,
// their analytic partials, and the boundary force/moment expressions that
// feed the boundary ports.

namespace phbeam {

enum class ModelVariant {
  LinearViscous,        // quadratic density, pointwise viscous damping
  NonlinearUndamped,    // von Karman strain coupling, no dissipation
  NonlinearStructural,  // von Karman strains, differential damping operators
};

const char* to_string(ModelVariant v);

struct MaterialParams {
  double EI = 0.0;      // bending stiffness [N m^2]
  double EA = 0.0;      // axial stiffness [N]
  double rhoA = 0.0;    // mass per unit length [kg/m]
  double alpha1 = 0.0;  // transverse damping coefficient [N m^2 s]
  double alpha2 = 0.0;  // axial damping coefficient [N s]
  double L = 0.0;       // beam length [m]

  // Throws std::invalid_argument with the offending field named.
  void validate() const;
};

struct ModelSpec {
  ModelVariant variant = ModelVariant::NonlinearStructural;
  MaterialParams material;

  bool nonlinear() const { return variant != ModelVariant::LinearViscous; }
  bool structural_damping() const { return variant == ModelVariant::NonlinearStructural; }
  bool viscous_damping() const { return variant == ModelVariant::LinearViscous; }

  // Effective damping coefficients; the undamped variant ignores whatever
  // the material carries.
  double alpha1() const;
  double alpha2() const;
};

// Field values and their spatial derivatives at a single node.
struct JetPoint {
  double w1 = 0.0;     // transverse deflection
  double w2 = 0.0;     // axial deflection
  double p1 = 0.0;     // transverse momentum density
  double p2 = 0.0;     // axial momentum density
  double w1_1 = 0.0;   // d/dz w1
  double w2_1 = 0.0;   // d/dz w2
  double w1_11 = 0.0;  // d^2/dz^2 w1
};

struct HamiltonianPartials {
  double dH_dw1 = 0.0;  // identically zero for every beam model; kept so the
  double dH_dw2 = 0.0;  // variational pipeline stays shape-generic
  double dH_dp1 = 0.0;
  double dH_dp2 = 0.0;
  double dH_dw1_1 = 0.0;
  double dH_dw2_1 = 0.0;
  double dH_dw1_11 = 0.0;
};

struct InternalForces {
  double Q = 0.0;  // shear force [N]
  double N = 0.0;  // normal force [N]
  double M = 0.0;  // bending moment [N m]
  bool variant_corrected = false;  // true once damping corrections are applied
};

// Energy density at one jet point.  Non-finite input raises std::domain_error.
double hamiltonian_density(const ModelSpec& model, const JetPoint& q);

// Analytic partials of the density with respect to every jet coordinate.
HamiltonianPartials hamiltonian_partials(const ModelSpec& model, const JetPoint& q);

// Uncorrected boundary forces:
//   Q = dH/dw1_1 - EI * w1_111,  N = dH/dw2_1,  M = dH/dw1_11.
// w1_111 is the third derivative supplied by the discretization.
InternalForces internal_forces(const ModelSpec& model, const JetPoint& q, double w1_111);

// Damping-corrected boundary forces.  The corrections carry the boundary
// terms of the differential damping operators:
//   Q = Q~ - alpha1 * dot(w1_111),  N = N~ + alpha2 * dot(w2_1),
//   M = M~ + alpha1 * dot(w1_11).
// Models without structural damping return the uncorrected forces unchanged.
InternalForces corrected_boundary_forces(const ModelSpec& model, const JetPoint& q,
                                         double w1_111, double dot_w1_111,
                                         double dot_w2_1, double dot_w1_11);

}  // namespace phbeam
