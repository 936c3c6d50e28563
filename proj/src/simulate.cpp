#include "phbeam/simulate.hpp"

#include <algorithm>
#include <sstream>
#include <cmath>
#include <vector>

namespace phbeam {

namespace {

double cube(double x) { return x * x * x; }

FieldVector unit_vector(int n, int i) {
  FieldVector e = FieldVector::Zero(n);
  e(i) = 1.0;
  return e;
}

// Row r of a sparse matrix as a dense vector (storage is column major).
FieldVector sparse_row(const SparseMat& m, int r) {
  return FieldVector(m.transpose() * unit_vector(static_cast<int>(m.rows()), r));
}

SparseMat spdiag(const FieldVector& d) {
  const int n = static_cast<int>(d.size());
  SparseMat m(n, n);
  m.reserve(Eigen::VectorXi::Constant(n, 1));
  for (int i = 0; i < n; ++i) m.insert(i, i) = d(i);
  m.makeCompressed();
  return m;
}

void add_block(std::vector<Eigen::Triplet<double>>& trip, int row0, int col0,
               const SparseMat& block) {
  for (int k = 0; k < block.outerSize(); ++k)
    for (SparseMat::InnerIterator it(block, k); it; ++it)
      trip.emplace_back(row0 + static_cast<int>(it.row()), col0 + static_cast<int>(it.col()),
                        it.value());
}

// column (a dense vector with small support) times a dense row, added at the
// given row offset.
void add_outer(std::vector<Eigen::Triplet<double>>& trip, int row0,
               const FieldVector& col, const Eigen::RowVectorXd& row) {
  for (int i = 0; i < col.size(); ++i) {
    if (col(i) == 0.0) continue;
    for (int j = 0; j < row.size(); ++j) {
      if (row(j) == 0.0) continue;
      trip.emplace_back(row0 + i, j, col(i) * row(j));
    }
  }
}

}  // namespace

const char* to_string(ControlMode m) {
  switch (m) {
    case ControlMode::OpenLoop: return "none";
    case ControlMode::Ebc: return "ebc";
    case ControlMode::EbcTarget: return "ebc_target";
    case ControlMode::Casimir: return "casimir";
  }
  return "?";
}

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::ImplicitMidpoint: return "implicit_midpoint";
    case Scheme::Rk4: return "rk4";
  }
  return "?";
}

BoundaryInput ClosedLoopSystem::command(const ClosedLoopState& x) const {
  switch (mode) {
    case ControlMode::OpenLoop:
      return {};
    case ControlMode::Ebc:
      return ebc_control(ebc, plant, x.beam);
    case ControlMode::EbcTarget:
      return ebc_damping_injection(ebc, plant, x.beam);
    case ControlMode::Casimir: {
      ControllerOutputs out = casimir_outputs(casimir, x.xc, plant.ops.grid.L);
      PortValues y = port_outputs(plant, x.beam, {});
      return interconnect(casimir, y.y_hat_1, y.y_hat_2, y.y_check_1, out).plant_u;
    }
  }
  return {};
}

BoundaryInput ClosedLoopSystem::effective_input(const ClosedLoopState& x) const {
  if (mode == ControlMode::EbcTarget) return ebc_control(ebc, plant, x.beam);
  return command(x);
}

PortValues ClosedLoopSystem::ports(const ClosedLoopState& x) const {
  return port_outputs(plant, x.beam, effective_input(x));
}

void ClosedLoopSystem::rhs(const ClosedLoopState& x, ClosedLoopState& dxdt) const {
  switch (mode) {
    case ControlMode::OpenLoop:
      plant_rhs(plant, x.beam, {}, dxdt.beam);
      dxdt.xc.setZero();
      return;
    case ControlMode::Ebc:
      plant_rhs(plant, x.beam, ebc_control(ebc, plant, x.beam), dxdt.beam);
      dxdt.xc.setZero();
      return;
    case ControlMode::EbcTarget: {
      plant_rhs(plant, x.beam, ebc_damping_injection(ebc, plant, x.beam), dxdt.beam);
      // The shaping forces live in the gradient of the shaped energy; its
      // extra terms are boundary traces, so they land on the injection rows.
      EbcErrors e = ebc_errors(ebc, plant, x.beam);
      dxdt.beam.p1 -= plant.inj_force_R * (ebc.c1 * cube(e.e1));
      dxdt.beam.p1 -= plant.inj_moment_R * (ebc.c3 * cube(e.e3));
      dxdt.beam.p2 -= plant.inj_force_R * (ebc.c2 * cube(e.e2));
      dxdt.xc.setZero();
      return;
    }
    case ControlMode::Casimir: {
      ControllerOutputs out = casimir_outputs(casimir, x.xc, plant.ops.grid.L);
      PortValues y = port_outputs(plant, x.beam, {});
      Interconnection link = interconnect(casimir, y.y_hat_1, y.y_hat_2, y.y_check_1, out);
      plant_rhs(plant, x.beam, link.plant_u, dxdt.beam);
      dxdt.xc = casimir_rhs(casimir, x.xc, link.u_hat_c, link.u_check_c, plant.ops.grid.L);
      return;
    }
  }
}

double ClosedLoopSystem::energy(const ClosedLoopState& x) const {
  return plant_energy(plant, x.beam);
}

std::optional<double> ClosedLoopSystem::lyapunov(const ClosedLoopState& x) const {
  switch (mode) {
    case ControlMode::OpenLoop:
      return std::nullopt;
    case ControlMode::Ebc:
    case ControlMode::EbcTarget:
      return shaped_energy(ebc, plant, x.beam);
    case ControlMode::Casimir:
      return casimir_closed_loop_energy(casimir, plant, x.beam, x.xc);
  }
  return std::nullopt;
}

void ClosedLoopSystem::project(ClosedLoopState& x) const { project_state(plant, x.beam); }

Eigen::VectorXd ClosedLoopSystem::pack(const ClosedLoopState& x) const {
  const int nn = n();
  Eigen::VectorXd v(dim());
  v.segment(0, nn) = x.beam.w1;
  v.segment(nn, nn) = x.beam.w2;
  v.segment(2 * nn, nn) = x.beam.p1;
  v.segment(3 * nn, nn) = x.beam.p2;
  if (has_controller_state()) v.segment(4 * nn, 6) = x.xc;
  return v;
}

void ClosedLoopSystem::unpack(const Eigen::VectorXd& v, ClosedLoopState& x) const {
  const int nn = n();
  x.beam.w1 = v.segment(0, nn);
  x.beam.w2 = v.segment(nn, nn);
  x.beam.p1 = v.segment(2 * nn, nn);
  x.beam.p2 = v.segment(3 * nn, nn);
  if (has_controller_state()) x.xc = v.segment(4 * nn, 6);
}

SparseMat ClosedLoopSystem::jacobian(const ClosedLoopState& x) const {
  const auto& ops = plant.ops;
  const auto& mat = plant.model.material;
  const int nn = n();
  const int N = dim();
  const int ow1 = 0, ow2 = nn, op1 = 2 * nn, op2 = 3 * nn, oc = 4 * nn;
  const int iR = nn - 1;
  const double s = 1.0 / mat.rhoA;
  const bool structural = plant.model.structural_damping();

  FieldJets jets = compute_jets(ops, x.beam.w1, x.beam.w2);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(40 * nn));

  // velocity rows
  for (int i = 0; i < nn; ++i) {
    trip.emplace_back(ow1 + i, op1 + i, s);
    trip.emplace_back(ow2 + i, op2 + i, s);
  }

  // stiffness blocks
  add_block(trip, op1, ow1, SparseMat(-mat.EI * (ops.D2 * ops.D2)));
  add_block(trip, op2, ow2, SparseMat(mat.EA * ops.D2));
  FieldVector cQQ, cQN;
  if (plant.model.nonlinear()) {
    cQQ = 1.5 * mat.EA * jets.w1_1.cwiseAbs2() + mat.EA * jets.w2_1;
    cQN = mat.EA * jets.w1_1;
    SparseMat coupling(ops.D1 * spdiag(cQN) * ops.D1);
    add_block(trip, op1, ow1, SparseMat(ops.D1 * spdiag(cQQ) * ops.D1));
    add_block(trip, op1, ow2, coupling);
    add_block(trip, op2, ow1, coupling);
  } else {
    cQQ = FieldVector::Zero(nn);
    cQN = FieldVector::Zero(nn);
  }

  // damping blocks
  if (structural) {
    add_block(trip, op1, op1, SparseMat(-s * (ops.D2 * spdiag(plant.alpha1_field) * ops.D2)));
    add_block(trip, op2, op2, SparseMat(s * (ops.D1 * spdiag(plant.alpha2_field) * ops.D1)));
  } else if (plant.model.viscous_damping()) {
    for (int i = 0; i < nn; ++i) {
      trip.emplace_back(op1 + i, op1 + i, -plant.model.alpha1() * s);
      trip.emplace_back(op2 + i, op2 + i, -plant.model.alpha2() * s);
    }
  }

  const FieldVector d1_rowR = sparse_row(ops.D1, iR);
  const FieldVector d2_rowR = sparse_row(ops.D2, iR);
  const FieldVector d3_rowR = sparse_row(ops.D3, iR);

  // natural boundary forces at the actuated end, as rows over the packed state
  auto force_rows = [&](int node, const FieldVector& d1r, const FieldVector& d2r,
                        const FieldVector& d3r, Eigen::RowVectorXd& rowQ,
                        Eigen::RowVectorXd& rowN, Eigen::RowVectorXd& rowM) {
    rowQ.setZero(N);
    rowN.setZero(N);
    rowM.setZero(N);
    for (int j = 0; j < nn; ++j) {
      rowQ(ow1 + j) = cQQ(node) * d1r(j) - mat.EI * d3r(j);
      rowQ(ow2 + j) = cQN(node) * d1r(j);
      rowN(ow1 + j) = cQN(node) * d1r(j);
      rowN(ow2 + j) = mat.EA * d1r(j);
      rowM(ow1 + j) = mat.EI * d2r(j);
      if (structural) {
        rowQ(op1 + j) = -plant.model.alpha1() * s * d3r(j);
        rowN(op2 + j) = plant.model.alpha2() * s * d1r(j);
        rowM(op1 + j) = plant.model.alpha1() * s * d2r(j);
      }
    }
  };

  Eigen::RowVectorXd rowQ(N), rowN(N), rowM(N);
  force_rows(iR, d1_rowR, d2_rowR, d3_rowR, rowQ, rowN, rowM);

  // actuator command rows
  Eigen::RowVectorXd rowU1 = Eigen::RowVectorXd::Zero(N);
  Eigen::RowVectorXd rowU2 = Eigen::RowVectorXd::Zero(N);
  Eigen::RowVectorXd rowU3 = Eigen::RowVectorXd::Zero(N);
  if (mode == ControlMode::Ebc || mode == ControlMode::EbcTarget) {
    // identical vector fields, so identical Jacobians
    EbcErrors e = ebc_errors(ebc, plant, x.beam);
    rowU1(ow1 + iR) = -3.0 * ebc.c1 * e.e1 * e.e1;
    rowU1(op1 + iR) = -ebc.k1 * s;
    rowU2(ow2 + iR) = -3.0 * ebc.c2 * e.e2 * e.e2;
    rowU2(op2 + iR) = -ebc.k2 * s;
    for (int j = 0; j < nn; ++j) {
      rowU3(ow1 + j) = -3.0 * ebc.c3 * e.e3 * e.e3 * d1_rowR(j);
      rowU3(op1 + j) = -ebc.k3 * s * d1_rowR(j);
    }
  } else if (mode == ControlMode::Casimir) {
    Eigen::Matrix<double, 6, 6> hess = Eigen::Matrix<double, 6, 6>::Zero();
    const double L = ops.grid.L;
    hess(0, 0) = 3.0 * casimir.c1 * std::pow(x.xc(0) - casimir.target1(L), 2);
    hess(1, 1) = 3.0 * casimir.c2 * std::pow(x.xc(1), 2);
    hess(2, 2) = 3.0 * casimir.c3 * std::pow(x.xc(2) - casimir.a, 2);
    hess.bottomRightCorner<3, 3>() = casimir.M_c;
    Eigen::Matrix<double, 2, 6> u_hat_xc = -(casimir.K_hat.transpose() * casimir.G_hat * hess);
    Eigen::Matrix<double, 1, 6> u_check_xc = -(casimir.K_check(0, 0) * casimir.G_check * hess);
    rowU1.segment(oc, 6) = u_hat_xc.row(0);
    rowU2.segment(oc, 6) = u_hat_xc.row(1);
    rowU3.segment(oc, 6) = u_check_xc;

    // controller rows: dissipative block plus the plant-output coupling
    Eigen::Matrix3d AM = casimir.A * casimir.M_c;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        if (AM(r, c) != 0.0) trip.emplace_back(oc + 3 + r, oc + 3 + c, AM(r, c));
    Eigen::Matrix<double, 6, 2> GK = casimir.G_hat.transpose() * casimir.K_hat;
    Eigen::Matrix<double, 6, 1> GKc = casimir.G_check.transpose() * casimir.K_check(0, 0);
    for (int r = 0; r < 6; ++r) {
      if (GK(r, 0) != 0.0) trip.emplace_back(oc + r, op1 + iR, GK(r, 0) * s);
      if (GK(r, 1) != 0.0) trip.emplace_back(oc + r, op2 + iR, GK(r, 1) * s);
      if (GKc(r) != 0.0)
        for (int j = 0; j < nn; ++j)
          if (d1_rowR(j) != 0.0) trip.emplace_back(oc + r, op1 + j, GKc(r) * s * d1_rowR(j));
    }
  }

  add_outer(trip, op1, plant.inj_force_R, rowU1 - rowQ);
  add_outer(trip, op1, plant.inj_moment_R, rowU3 - rowM);
  add_outer(trip, op2, plant.inj_force_R, rowU2 - rowN);

  if (plant.unactuated == BoundaryKind::Free) {
    Eigen::RowVectorXd rowQ0(N), rowN0(N), rowM0(N);
    force_rows(0, sparse_row(ops.D1, 0), sparse_row(ops.D2, 0), sparse_row(ops.D3, 0), rowQ0,
               rowN0, rowM0);
    add_outer(trip, op1, plant.inj_force_L, rowQ0);
    add_outer(trip, op1, plant.inj_moment_L, rowM0);
    add_outer(trip, op2, plant.inj_force_L, rowN0);
  }

  SparseMat J(N, N);
  J.setFromTriplets(trip.begin(), trip.end());

  if (plant.unactuated == BoundaryKind::Clamped) {
    std::vector<Eigen::Triplet<double>> pt;
    pt.reserve(static_cast<size_t>(N + 4 * plant.proj_transverse.P.nonZeros()));
    add_block(pt, ow1, ow1, plant.proj_transverse.P);
    add_block(pt, ow2, ow2, plant.proj_axial.P);
    add_block(pt, op1, op1, plant.proj_transverse.P);
    add_block(pt, op2, op2, plant.proj_axial.P);
    for (int i = oc; i < N; ++i) pt.emplace_back(i, i, 1.0);
    SparseMat P(N, N);
    P.setFromTriplets(pt.begin(), pt.end());
    J = P * J;
  }
  return J;
}

SparseMat ClosedLoopSystem::fd_jacobian(const ClosedLoopState& x) const {
  const int N = dim();
  Eigen::VectorXd x0 = pack(x);
  ClosedLoopState xs = x, fs = x;
  Eigen::MatrixXd J(N, N);
  for (int j = 0; j < N; ++j) {
    const double eps = 1e-6 * std::max(1.0, std::abs(x0(j)));
    Eigen::VectorXd xp = x0, xm = x0;
    xp(j) += eps;
    xm(j) -= eps;
    unpack(xp, xs);
    rhs(xs, fs);
    Eigen::VectorXd fp = pack(fs);
    unpack(xm, xs);
    rhs(xs, fs);
    Eigen::VectorXd fm = pack(fs);
    J.col(j) = (fp - fm) / (2.0 * eps);
  }
  return J.sparseView(1.0, 1e-300);
}

MidpointStepper::MidpointStepper(const ClosedLoopSystem& sys, const IntegratorOptions& opt)
    : sys_(sys), opt_(opt) {
  if (opt_.dt <= 0.0) throw std::invalid_argument("dt must be positive");
}

namespace {

std::string stall_detail(const Eigen::VectorXd& g, double tol, int iter) {
  int worst = 0;
  g.cwiseAbs().maxCoeff(&worst);
  std::ostringstream os;
  os << "newton failed to converge (residual " << g.lpNorm<Eigen::Infinity>() << " at component "
     << worst << ", tol " << tol << ", iteration " << iter << ")";
  return os.str();
}

}  // namespace

void MidpointStepper::refactor(const ClosedLoopState& mid, double t) {
  SparseMat J = opt_.fd_jacobian ? sys_.fd_jacobian(mid) : sys_.jacobian(mid);
  SparseMat K(J.rows(), J.cols());
  K.setIdentity();
  K = SparseMat(K - (0.5 * opt_.dt) * J);
  lu_.compute(K);
  if (lu_.info() != Eigen::Success)
    throw SimulationError("newton matrix factorization failed", t);
  factored_ = true;
  ++stats_.factorizations;
}

void MidpointStepper::step(ClosedLoopState& x) {
  const double t0 = x.beam.t;
  const double dt = opt_.dt;
  const Eigen::VectorXd x0 = sys_.pack(x);
  const double tol = opt_.newton_tol * std::max(1.0, x0.lpNorm<Eigen::Infinity>());

  Eigen::VectorXd x1 = x0;
  ClosedLoopState mid = x, f = x;

  // Residual of the midpoint equations at a trial endpoint; leaves mid at the
  // trial's midpoint and fv at the vector field there.
  Eigen::VectorXd fv;
  auto residual = [&](const Eigen::VectorXd& xt) {
    sys_.unpack(0.5 * (x0 + xt), mid);
    sys_.rhs(mid, f);
    fv = sys_.pack(f);
    return Eigen::VectorXd(xt - x0 - dt * fv);
  };

  auto refresh = [&](const Eigen::VectorXd& at) {
    sys_.unpack(0.5 * (x0 + at), mid);
    refactor(mid, t0);
  };

  // Writing the accepted state as x0 + dt*f(midpoint) hands linear
  // invariants of f to the discrete flow at roundoff level.
  auto finish = [&](int iters_used) {
    x1 = x0 + dt * fv;
    sys_.unpack(x1, x);
    x.beam.t = t0 + dt;
    sys_.project(x);
    if (!x.beam.all_finite())
      throw SimulationError("state left the finite range", t0 + dt);
    stats_.worst_step_iters = std::max(stats_.worst_step_iters, iters_used);
  };

  Eigen::VectorXd g = residual(x1);
  bool aggressive = false;  // once a chord step stalls, refresh every iterate
  for (int iter = 0; iter <= opt_.max_newton_iters; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() <= tol) {
      finish(iter);
      return;
    }
    bool fresh = false;
    if (!factored_ || aggressive || iter == opt_.rebuild_after) {
      refresh(x1);
      fresh = true;
    }

    // Chord step with residual backtracking.  Progress is measured in the
    // 2-norm, where the Newton direction of an exact Jacobian is guaranteed
    // descent; a stale factorization earns one refresh at the current iterate
    // before the step counts as failed.  Full steps overshoot badly near
    // strongly cubic boundary forces.
    const double gn2 = g.norm();
    for (;;) {
      Eigen::VectorXd dx = lu_.solve(-g);
      if (lu_.info() != Eigen::Success)
        throw SimulationError("newton linear solve failed", t0);
      // Stiff rows put the attainable residual floor above tol: roundoff in
      // the bending term alone is eps*EI*|w|*dt/h^4.  A full Newton step of
      // size <= tol under a fresh factorization settles convergence anyway,
      // since the remaining error is quadratic in it.
      if (fresh && dx.lpNorm<Eigen::Infinity>() <= tol) {
        Eigen::VectorXd xt = x1 + dx;
        if (xt.allFinite()) {
          g = residual(xt);
          x1 = std::move(xt);
          ++stats_.total_iters;
          finish(iter + 1);
          return;
        }
      }
      bool accepted = false;
      double s = 1.0;
      for (int cut = 0; cut < 16; ++cut, s *= 0.5) {
        Eigen::VectorXd xt = x1 + s * dx;
        if (!xt.allFinite()) continue;
        Eigen::VectorXd gt = residual(xt);
        if (gt.norm() < gn2 || gt.lpNorm<Eigen::Infinity>() <= tol) {
          x1 = xt;
          g = std::move(gt);
          accepted = true;
          break;
        }
      }
      if (accepted) break;
      if (fresh) throw SimulationError(stall_detail(g, tol, iter), t0);
      refresh(x1);
      fresh = true;
      aggressive = true;
    }
    ++stats_.total_iters;
  }
  throw SimulationError(stall_detail(g, tol, opt_.max_newton_iters), t0);
}

void rk4_step(const ClosedLoopSystem& sys, const IntegratorOptions& opt, ClosedLoopState& x) {
  const double dt = opt.dt;
  const double t0 = x.beam.t;
  ClosedLoopState xs = x, fs = x;
  const Eigen::VectorXd x0 = sys.pack(x);

  auto eval = [&](const Eigen::VectorXd& v) {
    sys.unpack(v, xs);
    sys.rhs(xs, fs);
    return sys.pack(fs);
  };

  Eigen::VectorXd k1 = eval(x0);
  Eigen::VectorXd k2 = eval(x0 + (0.5 * dt) * k1);
  Eigen::VectorXd k3 = eval(x0 + (0.5 * dt) * k2);
  Eigen::VectorXd k4 = eval(x0 + dt * k3);
  sys.unpack(x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), x);
  x.beam.t = t0 + dt;
  sys.project(x);
  if (!x.beam.all_finite()) throw SimulationError("state left the finite range", t0 + dt);
}

namespace {

Snapshot make_snapshot(const ClosedLoopSystem& sys, const ClosedLoopState& x) {
  Snapshot s;
  s.t = x.beam.t;
  s.beam = x.beam;
  s.xc = x.xc;
  s.ports = sys.ports(x);
  s.energy = sys.energy(x);
  s.lyapunov = sys.lyapunov(x);
  s.boundary_power = s.ports.u.u_hat_1 * s.ports.y_hat_1 +
                     s.ports.u.u_hat_2 * s.ports.y_hat_2 +
                     s.ports.u.u_check_1 * s.ports.y_check_1;
  s.dissipation = dissipation_rate(sys.plant, x.beam);
  if (sys.mode == ControlMode::Casimir)
    s.casimirs = casimir_values(sys.plant, x.beam, x.xc);
  return s;
}

}  // namespace

Trajectory simulate(const ClosedLoopSystem& sys, const ClosedLoopState& x0, double t_final,
                    const IntegratorOptions& opt, int stride) {
  if (opt.dt <= 0.0) throw std::invalid_argument("dt must be positive");
  if (t_final < 0.0) throw std::invalid_argument("t_final must be nonnegative");
  if (stride < 1) throw std::invalid_argument("stride must be at least 1");

  ClosedLoopState x = x0;
  sys.project(x);

  const long long steps = std::llround(t_final / opt.dt);

  Trajectory traj;
  traj.dt = opt.dt;
  traj.stride = stride;
  traj.scheme = opt.scheme;
  traj.snapshots.reserve(static_cast<size_t>(steps / stride + 2));
  traj.snapshots.push_back(make_snapshot(sys, x));

  double e_prev = traj.snapshots.front().energy;
  std::optional<double> v_prev = traj.snapshots.front().lyapunov;

  MidpointStepper stepper(sys, opt);
  for (long long k = 1; k <= steps; ++k) {
    if (opt.scheme == Scheme::ImplicitMidpoint)
      stepper.step(x);
    else
      rk4_step(sys, opt, x);

    const double e = sys.energy(x);
    traj.max_energy_increment = std::max(traj.max_energy_increment, e - e_prev);
    e_prev = e;
    if (v_prev) {
      const double v = *sys.lyapunov(x);
      traj.max_lyapunov_increment = std::max(traj.max_lyapunov_increment, v - *v_prev);
      v_prev = v;
    }
    if (sys.mode == ControlMode::Casimir) {
      ControllerOutputs out = casimir_outputs(sys.casimir, x.xc, sys.plant.ops.grid.L);
      PortValues y = port_outputs(sys.plant, x.beam, {});
      Interconnection link = interconnect(sys.casimir, y.y_hat_1, y.y_hat_2, y.y_check_1, out);
      const double plant_power = link.plant_u.u_hat_1 * y.y_hat_1 +
                                 link.plant_u.u_hat_2 * y.y_hat_2 +
                                 link.plant_u.u_check_1 * y.y_check_1;
      const double ctrl_power = link.u_hat_c.dot(out.y_hat_c) + link.u_check_c * out.y_check_c;
      traj.max_interconnect_residual =
          std::max(traj.max_interconnect_residual, std::abs(plant_power + ctrl_power));
    }

    if (k % stride == 0 || k == steps) traj.snapshots.push_back(make_snapshot(sys, x));
  }
  traj.steps = steps;
  traj.newton = stepper.stats();
  return traj;
}

}  // namespace phbeam
