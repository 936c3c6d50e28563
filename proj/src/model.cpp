#include "phbeam/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace phbeam {

const char* to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::LinearViscous: return "linear_viscous";
    case ModelVariant::NonlinearUndamped: return "nonlinear_undamped";
    case ModelVariant::NonlinearStructural: return "nonlinear_structural";
  }
  return "unknown";
}

void MaterialParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string(name) + " must be positive and finite");
  };
  auto nonnegative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string(name) + " must be nonnegative and finite");
  };
  positive(EI, "EI");
  positive(EA, "EA");
  positive(rhoA, "rhoA");
  positive(L, "L");
  nonnegative(alpha1, "alpha1");
  nonnegative(alpha2, "alpha2");
}

double ModelSpec::alpha1() const {
  return variant == ModelVariant::NonlinearUndamped ? 0.0 : material.alpha1;
}

double ModelSpec::alpha2() const {
  return variant == ModelVariant::NonlinearUndamped ? 0.0 : material.alpha2;
}

namespace {

void check_finite(const JetPoint& q) {
  bool ok = std::isfinite(q.w1) && std::isfinite(q.w2) && std::isfinite(q.p1) &&
            std::isfinite(q.p2) && std::isfinite(q.w1_1) && std::isfinite(q.w2_1) &&
            std::isfinite(q.w1_11);
  if (!ok) throw std::domain_error("jet point contains non-finite values");
}

}  // namespace

double hamiltonian_density(const ModelSpec& model, const JetPoint& q) {
  check_finite(q);
  const MaterialParams& m = model.material;
  const double kinetic = (q.p1 * q.p1 + q.p2 * q.p2) / (2.0 * m.rhoA);
  const double bending = 0.5 * m.EI * q.w1_11 * q.w1_11;
  if (!model.nonlinear()) {
    return kinetic + 0.5 * m.EA * q.w2_1 * q.w2_1 + bending;
  }
  // Membrane part: (w2_1)^2 + (w1_1)^4/4 + w2_1 (w1_1)^2, i.e. the square of
  // the von Karman axial strain w2_1 + (w1_1)^2/2.  Kept in expanded form so
  // the partials below read off directly.
  const double s1 = q.w1_1 * q.w1_1;
  const double membrane = q.w2_1 * q.w2_1 + 0.25 * s1 * s1 + q.w2_1 * s1;
  return kinetic + 0.5 * m.EA * membrane + bending;
}

HamiltonianPartials hamiltonian_partials(const ModelSpec& model, const JetPoint& q) {
  check_finite(q);
  const MaterialParams& m = model.material;
  HamiltonianPartials d;
  d.dH_dp1 = q.p1 / m.rhoA;
  d.dH_dp2 = q.p2 / m.rhoA;
  d.dH_dw1_11 = m.EI * q.w1_11;
  if (model.nonlinear()) {
    d.dH_dw1_1 = 0.5 * m.EA * q.w1_1 * q.w1_1 * q.w1_1 + m.EA * q.w2_1 * q.w1_1;
    d.dH_dw2_1 = m.EA * q.w2_1 + 0.5 * m.EA * q.w1_1 * q.w1_1;
  } else {
    d.dH_dw1_1 = 0.0;
    d.dH_dw2_1 = m.EA * q.w2_1;
  }
  return d;
}

InternalForces internal_forces(const ModelSpec& model, const JetPoint& q, double w1_111) {
  if (!std::isfinite(w1_111)) throw std::domain_error("w1_111 is non-finite");
  const HamiltonianPartials d = hamiltonian_partials(model, q);
  InternalForces f;
  f.Q = d.dH_dw1_1 - model.material.EI * w1_111;
  f.N = d.dH_dw2_1;
  f.M = d.dH_dw1_11;
  f.variant_corrected = false;
  return f;
}

InternalForces corrected_boundary_forces(const ModelSpec& model, const JetPoint& q,
                                         double w1_111, double dot_w1_111,
                                         double dot_w2_1, double dot_w1_11) {
  InternalForces f = internal_forces(model, q, w1_111);
  if (model.structural_damping()) {
    f.Q -= model.material.alpha1 * dot_w1_111;
    f.N += model.material.alpha2 * dot_w2_1;
    f.M += model.material.alpha1 * dot_w1_11;
  }
  f.variant_corrected = true;
  return f;
}

}  // namespace phbeam
