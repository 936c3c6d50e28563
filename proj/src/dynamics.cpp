#include "phbeam/dynamics.hpp"

#include <stdexcept>

namespace phbeam {

const char* to_string(BoundaryKind k) {
  switch (k) {
    case BoundaryKind::Clamped: return "clamped";
    case BoundaryKind::Free: return "free";
  }
  return "?";
}

BeamState BeamState::zero(int n) {
  BeamState x;
  x.w1 = FieldVector::Zero(n);
  x.w2 = FieldVector::Zero(n);
  x.p1 = FieldVector::Zero(n);
  x.p2 = FieldVector::Zero(n);
  return x;
}

bool BeamState::all_finite() const {
  return w1.allFinite() && w2.allFinite() && p1.allFinite() && p2.allFinite();
}

Plant make_plant(const ModelSpec& model, const Grid& grid, int order,
                 BoundaryKind unactuated) {
  model.material.validate();
  Plant plant{model, build_operators(grid, order), unactuated, {}, {}, {}, {}, {}, {}, {}, {}};
  const int n = plant.ops.n();

  plant.alpha1_field = FieldVector::Constant(n, model.alpha1());
  plant.alpha2_field = FieldVector::Constant(n, model.alpha2());

  if (unactuated == BoundaryKind::Clamped) {
    plant.proj_transverse = clamped_projector_transverse(plant.ops);
    plant.proj_axial = clamped_projector_axial(plant.ops);
  } else {
    plant.proj_transverse.trivial = true;
    plant.proj_axial.trivial = true;
  }

  auto unit = [n](int i) {
    FieldVector e = FieldVector::Zero(n);
    e(i) = 1.0;
    return e;
  };
  const FieldVector winv = plant.ops.Winv;
  plant.inj_force_R = winv.cwiseProduct(unit(n - 1));
  plant.inj_force_L = winv.cwiseProduct(unit(0));
  plant.inj_moment_R = winv.cwiseProduct(FieldVector(plant.ops.D1.transpose() * unit(n - 1)));
  plant.inj_moment_L = winv.cwiseProduct(FieldVector(plant.ops.D1.transpose() * unit(0)));
  return plant;
}

InternalForces natural_forces(const Plant& plant, const BeamState& x, End end) {
  const auto& ops = plant.ops;
  const int i = ops.node(end);
  const double s = 1.0 / plant.model.material.rhoA;

  FieldJets jets = compute_jets(ops, x.w1, x.w2);
  JetPoint q = jet_at(x.w1, x.w2, x.p1, x.p2, jets, i);

  const FieldVector v1 = s * x.p1;
  const FieldVector v2 = s * x.p2;
  const double w1_111 = (ops.D3 * x.w1)(i);
  const double dot_w1_111 = (ops.D3 * v1)(i);
  const double dot_w1_11 = (ops.D2 * v1)(i);
  const double dot_w2_1 = (ops.D1 * v2)(i);

  return corrected_boundary_forces(plant.model, q, w1_111, dot_w1_111, dot_w2_1,
                                   dot_w1_11);
}

PortValues port_outputs(const Plant& plant, const BeamState& x, const BoundaryInput& u) {
  const auto& ops = plant.ops;
  const int iR = ops.n() - 1;
  const double s = 1.0 / plant.model.material.rhoA;
  PortValues y;
  y.y_hat_1 = s * x.p1(iR);
  y.y_hat_2 = s * x.p2(iR);
  y.y_check_1 = s * (ops.D1 * x.p1)(iR);
  y.u = u;
  return y;
}

void plant_rhs(const Plant& plant, const BeamState& x, const BoundaryInput& u,
               BeamState& dxdt) {
  const auto& ops = plant.ops;
  const auto& m = plant.model;
  const double s = 1.0 / m.material.rhoA;

  if (!x.all_finite()) throw std::domain_error("beam state contains non-finite values");

  const FieldVector v1 = s * x.p1;
  const FieldVector v2 = s * x.p2;

  FieldJets jets = compute_jets(ops, x.w1, x.w2);
  PartialFields d = partial_fields(m, jets);

  dxdt.w1 = v1;
  dxdt.w2 = v2;
  // p-equations carry minus the variational derivative of the energy.
  dxdt.p1 = FieldVector(ops.D1 * d.dw1_1);
  dxdt.p1 -= ops.D2 * d.dw1_11;
  dxdt.p2 = FieldVector(ops.D1 * d.dw2_1);

  if (m.structural_damping()) {
    dxdt.p1 -= apply_RB(ops, v1, plant.alpha1_field);
    dxdt.p2 += apply_RA(ops, v2, plant.alpha2_field);
  } else if (m.viscous_damping()) {
    dxdt.p1 -= m.alpha1() * v1;
    dxdt.p2 -= m.alpha2() * v2;
  }

  // Actuated end: subtract the natural boundary flux and add the commanded
  // one.  At a free unactuated end the commands are zero.
  InternalForces fR = natural_forces(plant, x, End::Right);
  dxdt.p1 += plant.inj_force_R * (u.u_hat_1 - fR.Q);
  dxdt.p1 += plant.inj_moment_R * (u.u_check_1 - fR.M);
  dxdt.p2 += plant.inj_force_R * (u.u_hat_2 - fR.N);

  if (plant.unactuated == BoundaryKind::Free) {
    InternalForces fL = natural_forces(plant, x, End::Left);
    dxdt.p1 += plant.inj_force_L * fL.Q;
    dxdt.p1 += plant.inj_moment_L * fL.M;
    dxdt.p2 += plant.inj_force_L * fL.N;
  } else {
    plant.proj_transverse.apply_in_place(dxdt.w1);
    plant.proj_transverse.apply_in_place(dxdt.p1);
    plant.proj_axial.apply_in_place(dxdt.w2);
    plant.proj_axial.apply_in_place(dxdt.p2);
  }
}

double plant_energy(const Plant& plant, const BeamState& x) {
  FieldJets jets = compute_jets(plant.ops, x.w1, x.w2);
  FieldVector h = hamiltonian_field(plant.model, x.w1, x.w2, x.p1, x.p2, jets);
  return plant.ops.quadrature(h);
}

double dissipation_rate(const Plant& plant, const BeamState& x) {
  const auto& m = plant.model;
  if (!m.viscous_damping() && !m.structural_damping()) return 0.0;
  const double s = 1.0 / m.material.rhoA;
  const FieldVector v1 = s * x.p1;
  const FieldVector v2 = s * x.p2;
  FieldVector q1, q2;
  if (m.structural_damping()) {
    q1 = plant.ops.D2 * v1;
    q2 = plant.ops.D1 * v2;
  } else {
    q1 = v1;
    q2 = v2;
  }
  FieldVector density = plant.alpha1_field.cwiseProduct(q1.cwiseAbs2()) +
                        plant.alpha2_field.cwiseProduct(q2.cwiseAbs2());
  return plant.ops.quadrature(density);
}

void project_state(const Plant& plant, BeamState& x) {
  if (plant.unactuated != BoundaryKind::Clamped) return;
  plant.proj_transverse.apply_in_place(x.w1);
  plant.proj_transverse.apply_in_place(x.p1);
  plant.proj_axial.apply_in_place(x.w2);
  plant.proj_axial.apply_in_place(x.p2);
}

}  // namespace phbeam
