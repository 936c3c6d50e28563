#include "phbeam/control.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace phbeam {

namespace {

double cube(double x) { return x * x * x; }

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

// ---------------------------------------------------------------------------
// Static law

void EbcParams::validate(bool strict_damping) const {
  require(c1 > 0.0, "ebc.c1 must be positive");
  require(c2 > 0.0, "ebc.c2 must be positive");
  require(c3 > 0.0, "ebc.c3 must be positive");
  if (strict_damping) {
    require(k1 > 0.0, "ebc.k1 must be positive");
    require(k2 > 0.0, "ebc.k2 must be positive");
    require(k3 > 0.0, "ebc.k3 must be positive");
  } else {
    require(k1 >= 0.0, "ebc.k1 must be nonnegative");
    require(k2 >= 0.0, "ebc.k2 must be nonnegative");
    require(k3 >= 0.0, "ebc.k3 must be nonnegative");
  }
}

EbcErrors ebc_errors(const EbcParams& p, const Plant& plant, const BeamState& x) {
  const int iR = plant.n() - 1;
  EbcErrors e;
  e.e1 = x.w1(iR) - p.target_tip(plant.ops.grid.L);
  e.e2 = x.w2(iR);
  e.e3 = (plant.ops.D1 * x.w1)(iR) - p.a;
  return e;
}

BoundaryInput ebc_energy_shaping(const EbcParams& p, const Plant& plant,
                                 const BeamState& x) {
  EbcErrors e = ebc_errors(p, plant, x);
  BoundaryInput u;
  u.u_hat_1 = -p.c1 * cube(e.e1);
  u.u_hat_2 = -p.c2 * cube(e.e2);
  u.u_check_1 = -p.c3 * cube(e.e3);
  return u;
}

BoundaryInput ebc_damping_injection(const EbcParams& p, const Plant& plant,
                                    const BeamState& x) {
  PortValues y = port_outputs(plant, x, {});
  BoundaryInput u;
  u.u_hat_1 = -p.k1 * y.y_hat_1;
  u.u_hat_2 = -p.k2 * y.y_hat_2;
  u.u_check_1 = -p.k3 * y.y_check_1;
  return u;
}

BoundaryInput ebc_control(const EbcParams& p, const Plant& plant, const BeamState& x) {
  BoundaryInput shaping = ebc_energy_shaping(p, plant, x);
  BoundaryInput damping = ebc_damping_injection(p, plant, x);
  return {shaping.u_hat_1 + damping.u_hat_1, shaping.u_hat_2 + damping.u_hat_2,
          shaping.u_check_1 + damping.u_check_1};
}

double shaped_energy(const EbcParams& p, const Plant& plant, const BeamState& x) {
  EbcErrors e = ebc_errors(p, plant, x);
  auto quartic = [](double c, double err) {
    double e2 = err * err;
    return 0.25 * c * e2 * e2;
  };
  return plant_energy(plant, x) + quartic(p.c1, e.e1) + quartic(p.c2, e.e2) +
         quartic(p.c3, e.e3);
}

// ---------------------------------------------------------------------------
// Dynamic controller

void CasimirControllerSetup::validate() const {
  require(c1 > 0.0 && c2 > 0.0 && c3 > 0.0, "casimir gains c1..c3 must be positive");

  Eigen::Matrix<double, 2, 3> id_hat = Eigen::Matrix<double, 2, 3>::Zero();
  id_hat(0, 0) = 1.0;
  id_hat(1, 1) = 1.0;
  require((G_hat.leftCols<3>() - id_hat).cwiseAbs().maxCoeff() == 0.0,
          "casimir G_hat must carry the identity pattern in its first three columns");
  Eigen::Matrix<double, 1, 3> id_check = Eigen::Matrix<double, 1, 3>::Zero();
  id_check(0, 2) = 1.0;
  require((G_check.leftCols<3>() - id_check).cwiseAbs().maxCoeff() == 0.0,
          "casimir G_check must carry the identity pattern in its first three columns");

  require((M_c - M_c.transpose()).cwiseAbs().maxCoeff() <=
              1e-12 * (1.0 + M_c.cwiseAbs().maxCoeff()),
          "casimir M_c must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (M_c + M_c.transpose()));
  require(es.eigenvalues().minCoeff() > 0.0, "casimir M_c must be positive definite");

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> ea(0.5 * (A + A.transpose()));
  require(ea.eigenvalues().maxCoeff() <= 1e-12 * (1.0 + A.cwiseAbs().maxCoeff()),
          "casimir A must have negative semidefinite symmetric part");

  require(std::abs(K_hat.determinant()) >
              1e-12 * (1.0 + K_hat.cwiseAbs().maxCoeff()) *
                  (1.0 + K_hat.cwiseAbs().maxCoeff()),
          "casimir K_hat must be invertible");
  require(K_check(0, 0) != 0.0, "casimir K_check must be invertible");
}

CasimirControllerSetup default_casimir_setup() {
  CasimirControllerSetup s;
  s.A = -100.0 * Eigen::Matrix3d::Identity();
  s.M_c = Eigen::Matrix3d::Identity();
  s.G_hat.setZero();
  s.G_hat(0, 0) = 1.0;
  s.G_hat(1, 1) = 1.0;
  s.G_hat(0, 3) = 47.0;
  s.G_hat(1, 4) = 1.0;
  s.G_check.setZero();
  s.G_check(0, 2) = 1.0;
  s.G_check(0, 5) = 1.0;
  s.K_hat = Eigen::Matrix2d::Identity();
  s.K_check(0, 0) = 1.0;
  s.xc0.setZero();
  return s;
}

ControllerState casimir_gradient(const CasimirControllerSetup& s, const ControllerState& xc,
                                 double L) {
  ControllerState g;
  g(0) = s.c1 * cube(xc(0) - s.target1(L));
  g(1) = s.c2 * cube(xc(1));
  g(2) = s.c3 * cube(xc(2) - s.a);
  g.tail<3>() = s.M_c * xc.tail<3>();
  return g;
}

double casimir_energy(const CasimirControllerSetup& s, const ControllerState& xc, double L) {
  auto quartic = [](double c, double err) {
    double e2 = err * err;
    return 0.25 * c * e2 * e2;
  };
  return quartic(s.c1, xc(0) - s.target1(L)) + quartic(s.c2, xc(1)) +
         quartic(s.c3, xc(2) - s.a) +
         0.5 * xc.tail<3>().dot(s.M_c * xc.tail<3>());
}

ControllerOutputs casimir_outputs(const CasimirControllerSetup& s, const ControllerState& xc,
                                  double L) {
  ControllerState g = casimir_gradient(s, xc, L);
  ControllerOutputs out;
  out.y_hat_c = s.G_hat * g;
  out.y_check_c = (s.G_check * g)(0);
  return out;
}

ControllerState casimir_rhs(const CasimirControllerSetup& s, const ControllerState& xc,
                            const Eigen::Vector2d& u_hat_c, double u_check_c, double L) {
  ControllerState g = casimir_gradient(s, xc, L);
  ControllerState r = ControllerState::Zero();
  r.tail<3>() = s.A * g.tail<3>();
  r += s.G_hat.transpose() * u_hat_c;
  r += s.G_check.transpose() * u_check_c;
  return r;
}

Interconnection interconnect(const CasimirControllerSetup& s, double y_hat_1, double y_hat_2,
                             double y_check_1, const ControllerOutputs& c) {
  Interconnection link;
  link.u_hat_c = s.K_hat * Eigen::Vector2d(y_hat_1, y_hat_2);
  link.u_check_c = s.K_check(0, 0) * y_check_1;
  Eigen::Vector2d u_hat = -(s.K_hat.transpose() * c.y_hat_c);
  link.plant_u.u_hat_1 = u_hat(0);
  link.plant_u.u_hat_2 = u_hat(1);
  link.plant_u.u_check_1 = -(s.K_check(0, 0) * c.y_check_c);
  return link;
}

double casimir_closed_loop_energy(const CasimirControllerSetup& s, const Plant& plant,
                                  const BeamState& x, const ControllerState& xc) {
  return plant_energy(plant, x) + casimir_energy(s, xc, plant.ops.grid.L);
}

Eigen::Vector3d casimir_values(const Plant& plant, const BeamState& x,
                               const ControllerState& xc) {
  const int iR = plant.n() - 1;
  Eigen::Vector3d c;
  c(0) = xc(0) - x.w1(iR);
  c(1) = xc(1) - x.w2(iR);
  c(2) = xc(2) - (plant.ops.D1 * x.w1)(iR);
  return c;
}

// ---------------------------------------------------------------------------
// Structural verifier

DensityPartials casimir_density(const DiscreteOperators& ops, int lambda) {
  const int n = ops.n();
  const double L = ops.grid.L;
  DensityPartials d;
  d.d0_w1 = FieldVector::Zero(n);
  d.d1_w1 = FieldVector::Zero(n);
  d.d11_w1 = FieldVector::Zero(n);
  d.d0_w2 = FieldVector::Zero(n);
  d.d1_w2 = FieldVector::Zero(n);
  switch (lambda) {
    case 1:
      d.d0_w1 = FieldVector::Constant(n, -1.0 / L);
      d.d1_w1 = -ops.grid.z / L;
      break;
    case 2:
      d.d0_w2 = FieldVector::Constant(n, -1.0 / L);
      d.d1_w2 = -ops.grid.z / L;
      break;
    case 3:
      d.d1_w1 = FieldVector::Constant(n, -1.0 / L);
      d.d11_w1 = -ops.grid.z / L;
      break;
    default:
      throw std::invalid_argument("casimir density index must be 1, 2 or 3");
  }
  return d;
}

FieldVector density_delta_w1(const DiscreteOperators& ops, const DensityPartials& d) {
  return d.d0_w1 - ops.D1 * d.d1_w1 + ops.D2 * d.d11_w1;
}

FieldVector density_delta_w2(const DiscreteOperators& ops, const DensityPartials& d) {
  return d.d0_w2 - ops.D1 * d.d1_w2;
}

PerFieldScalar density_boundary_delta1(const DiscreteOperators& ops,
                                       const DensityPartials& d, End end) {
  const int i = ops.node(end);
  PerFieldScalar out;
  out.w1 = d.d1_w1(i) - (ops.D1 * d.d11_w1)(i);
  out.w2 = d.d1_w2(i);
  return out;
}

PerFieldScalar density_boundary_delta2(const DiscreteOperators& ops,
                                       const DensityPartials& d, End end) {
  PerFieldScalar out;
  out.w1 = d.d11_w1(ops.node(end));
  return out;
}

double CasimirConditionReport::worst() const {
  double w = structure;
  w = std::max(w, domain);
  w = std::max(w, coupling_hat);
  w = std::max(w, coupling_check);
  w = std::max(w, far_end);
  return w;
}

std::string CasimirConditionReport::summary() const {
  std::ostringstream os;
  os.setf(std::ios::scientific);
  os.precision(3);
  os << "controller structure rows      " << structure << "\n"
     << "domain variational derivative  " << domain << "\n"
     << "force coupling at z=L          " << coupling_hat << "\n"
     << "moment coupling at z=L         " << coupling_check << "\n"
     << "traces at z=0                  " << far_end << "\n";
  return os.str();
}

CasimirConditionReport verify_casimir_conditions(const CasimirControllerSetup& s,
                                                 const DiscreteOperators& ops,
                                                 int probes, std::uint64_t seed) {
  CasimirConditionReport rep;

  // (a) rows 1..3 of the controller structure matrix must vanish so the
  // quantity states are driven only through the input maps.
  Eigen::Matrix<double, 6, 6> J = Eigen::Matrix<double, 6, 6>::Zero();
  J.bottomRightCorner<3, 3>() = s.A;
  rep.structure = J.topRows<3>().cwiseAbs().maxCoeff();

  // Coefficient of y_hat_eta in d/dt xc_lambda through the interconnection.
  Eigen::Matrix<double, 6, 2> GK = s.G_hat.transpose() * s.K_hat;
  Eigen::Matrix<double, 6, 1> GKc = s.G_check.transpose() * s.K_check(0, 0);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int lambda = 1; lambda <= 3; ++lambda) {
    DensityPartials d = casimir_density(ops, lambda);

    // (b) the density is a total derivative: its domain variational
    // derivative vanishes at every node.
    rep.domain = std::max(rep.domain, density_delta_w1(ops, d).cwiseAbs().maxCoeff());
    rep.domain = std::max(rep.domain, density_delta_w2(ops, d).cwiseAbs().maxCoeff());

    // (c, d) at the actuated end the boundary traces cancel the input-map
    // columns channel by channel.
    PerFieldScalar t1 = density_boundary_delta1(ops, d, End::Right);
    PerFieldScalar t2 = density_boundary_delta2(ops, d, End::Right);
    rep.coupling_hat = std::max(rep.coupling_hat, std::abs(GK(lambda - 1, 0) + t1.w1));
    rep.coupling_hat = std::max(rep.coupling_hat, std::abs(GK(lambda - 1, 1) + t1.w2));
    rep.coupling_check = std::max(rep.coupling_check, std::abs(GKc(lambda - 1) + t2.w1));

    // (e) at the unactuated end the traces vanish for any boundary motion.
    PerFieldScalar s1 = density_boundary_delta1(ops, d, End::Left);
    PerFieldScalar s2 = density_boundary_delta2(ops, d, End::Left);
    for (int k = 0; k < probes; ++k) {
      double v1 = gauss(rng), v2 = gauss(rng), v1_1 = gauss(rng);
      rep.far_end = std::max(rep.far_end, std::abs(s1.w1 * v1 + s1.w2 * v2 + s2.w1 * v1_1));
    }
  }
  return rep;
}

}  // namespace phbeam
