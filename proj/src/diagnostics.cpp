#include "phbeam/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace phbeam {

namespace {

// The three energy-rate formulations at one state, rates per unit time.
struct RateSplit {
  double chain = 0.0;
  double parts = 0.0;
  double ports = 0.0;
};

RateSplit rate_split(const ClosedLoopSystem& sys, const ClosedLoopState& x,
                     const ClosedLoopState& dxdt) {
  const Plant& plant = sys.plant;
  const auto& ops = plant.ops;
  const double s = 1.0 / plant.model.material.rhoA;

  FieldJets jets = compute_jets(ops, x.beam.w1, x.beam.w2);
  PartialFields d = partial_fields(plant.model, jets);
  const FieldVector v1 = s * x.beam.p1;
  const FieldVector v2 = s * x.beam.p2;

  RateSplit r;

  // chain rule, no integration by parts
  FieldVector density = d.dw1_1.cwiseProduct(FieldVector(ops.D1 * dxdt.beam.w1)) +
                        d.dw1_11.cwiseProduct(FieldVector(ops.D2 * dxdt.beam.w1)) +
                        d.dw2_1.cwiseProduct(FieldVector(ops.D1 * dxdt.beam.w2)) +
                        v1.cwiseProduct(dxdt.beam.p1) + v2.cwiseProduct(dxdt.beam.p2);
  r.chain = ops.quadrature(density);

  // after integration by parts: domain variational derivative plus the
  // uncorrected boundary forces paired with the boundary motion
  VariationalDerivative delta =
      variational_derivative(plant.model, ops, x.beam.w1, x.beam.w2, x.beam.p1, x.beam.p2);
  r.parts = ops.quadrature(FieldVector(delta.w1.cwiseProduct(dxdt.beam.w1) +
                                       delta.w2.cwiseProduct(dxdt.beam.w2) +
                                       x.beam.p1.cwiseProduct(dxdt.beam.p1) * s +
                                       x.beam.p2.cwiseProduct(dxdt.beam.p2) * s));
  for (End end : {End::Left, End::Right}) {
    const int i = ops.node(end);
    const double sigma = DiscreteOperators::sign(end);
    JetPoint q = jet_at(x.beam.w1, x.beam.w2, x.beam.p1, x.beam.p2, jets, i);
    InternalForces f = internal_forces(plant.model, q, (ops.D3 * x.beam.w1)(i));
    r.parts += sigma * (f.Q * dxdt.beam.w1(i) + f.N * dxdt.beam.w2(i) +
                        f.M * (ops.D1 * dxdt.beam.w1)(i));
  }

  // ports ledger: commanded boundary power minus dissipation
  PortValues y = sys.ports(x);
  r.ports = y.u.u_hat_1 * y.y_hat_1 + y.u.u_hat_2 * y.y_hat_2 +
            y.u.u_check_1 * y.y_check_1 - dissipation_rate(plant, x.beam);
  return r;
}

ClosedLoopState midpoint_state(const ClosedLoopState& a, const ClosedLoopState& b) {
  ClosedLoopState m;
  m.beam.w1 = 0.5 * (a.beam.w1 + b.beam.w1);
  m.beam.w2 = 0.5 * (a.beam.w2 + b.beam.w2);
  m.beam.p1 = 0.5 * (a.beam.p1 + b.beam.p1);
  m.beam.p2 = 0.5 * (a.beam.p2 + b.beam.p2);
  m.beam.t = 0.5 * (a.beam.t + b.beam.t);
  m.xc = 0.5 * (a.xc + b.xc);
  return m;
}

ClosedLoopState snapshot_state(const Snapshot& s) {
  ClosedLoopState x;
  x.beam = s.beam;
  x.xc = s.xc;
  return x;
}

}  // namespace

BalanceAudit audit_energy_balance(const ClosedLoopSystem& sys, const Trajectory& traj) {
  BalanceAudit audit;
  audit.dt = traj.dt;
  if (traj.snapshots.size() < 2) return audit;
  audit.has_lyapunov = traj.snapshots.front().lyapunov.has_value();

  const double L = sys.plant.ops.grid.L;
  const int iR = sys.n() - 1;

  ClosedLoopState dxdt = snapshot_state(traj.snapshots.front());
  for (size_t k = 0; k + 1 < traj.snapshots.size(); ++k) {
    const Snapshot& s0 = traj.snapshots[k];
    const Snapshot& s1 = traj.snapshots[k + 1];
    const double h = s1.t - s0.t;
    ClosedLoopState xm = midpoint_state(snapshot_state(s0), snapshot_state(s1));

    sys.rhs(xm, dxdt);
    RateSplit r = rate_split(sys, xm, dxdt);

    audit.max_split_disagreement = std::max(
        audit.max_split_disagreement,
        std::max(std::abs(r.chain - r.ports), std::abs(r.parts - r.ports)));
    audit.max_abs_power = std::max(
        audit.max_abs_power, std::max({std::abs(r.chain), std::abs(r.parts), std::abs(r.ports)}));

    const double res = std::abs((s1.energy - s0.energy) - h * r.ports);
    audit.max_energy_residual = std::max(audit.max_energy_residual, res);
    audit.sum_energy_residual += res;

    if (audit.has_lyapunov) {
      double rate = r.ports;
      if (sys.mode == ControlMode::Ebc || sys.mode == ControlMode::EbcTarget) {
        EbcErrors e = ebc_errors(sys.ebc, sys.plant, xm.beam);
        const double de1 = dxdt.beam.w1(iR);
        const double de2 = dxdt.beam.w2(iR);
        const double de3 = (sys.plant.ops.D1 * dxdt.beam.w1)(iR);
        rate += sys.ebc.c1 * e.e1 * e.e1 * e.e1 * de1 + sys.ebc.c2 * e.e2 * e.e2 * e.e2 * de2 +
                sys.ebc.c3 * e.e3 * e.e3 * e.e3 * de3;
      } else if (sys.mode == ControlMode::Casimir) {
        rate += casimir_gradient(sys.casimir, xm.xc, L).dot(dxdt.xc);
      }
      const double resv = std::abs((*s1.lyapunov - *s0.lyapunov) - h * rate);
      audit.max_lyapunov_residual = std::max(audit.max_lyapunov_residual, resv);
      audit.sum_lyapunov_residual += resv;
    }

    audit.energy_scale = std::max(audit.energy_scale, std::abs(s0.energy));
    ++audit.intervals;
  }
  audit.energy_scale = std::max(audit.energy_scale, std::abs(traj.snapshots.back().energy));
  return audit;
}

Eigen::Vector3d casimir_drift(const Trajectory& traj) {
  Eigen::Vector3d drift = Eigen::Vector3d::Zero();
  if (traj.snapshots.empty()) return drift;
  const Eigen::Vector3d c0 = traj.snapshots.front().casimirs;
  for (const Snapshot& s : traj.snapshots)
    drift = drift.cwiseMax((s.casimirs - c0).cwiseAbs());
  return drift;
}

// ---------------------------------------------------------------------------
// Variational oracle

FieldVector random_smooth_field(const DiscreteOperators& ops, std::mt19937_64& rng,
                                double amplitude, int modes) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = ops.n();
  const double L = ops.grid.L;
  FieldVector f = FieldVector::Zero(n);
  for (int k = 1; k <= modes; ++k) {
    const double ak = gauss(rng) / (k * k);
    const double bk = gauss(rng) / (k * k);
    for (int i = 0; i < n; ++i) {
      const double phase = k * M_PI * ops.grid.z(i) / L;
      f(i) += amplitude * (ak * std::sin(phase) + bk * std::cos(phase));
    }
  }
  return f;
}

BeamState random_smooth_state(const DiscreteOperators& ops, std::uint64_t seed,
                              double amplitude, int modes) {
  std::mt19937_64 rng(seed);
  BeamState x = BeamState::zero(ops.n());
  x.w1 = random_smooth_field(ops, rng, amplitude, modes);
  x.w2 = random_smooth_field(ops, rng, amplitude, modes);
  x.p1 = random_smooth_field(ops, rng, amplitude, modes);
  x.p2 = random_smooth_field(ops, rng, amplitude, modes);
  return x;
}

namespace {

double total_energy(const ModelSpec& model, const DiscreteOperators& ops, const BeamState& x) {
  FieldJets jets = compute_jets(ops, x.w1, x.w2);
  return ops.quadrature(hamiltonian_field(model, x.w1, x.w2, x.p1, x.p2, jets));
}

// Analytic directional derivative of the energy along a state perturbation.
double directional_derivative(const ModelSpec& model, const DiscreteOperators& ops,
                              const BeamState& x, const BeamState& eta) {
  FieldJets jets = compute_jets(ops, x.w1, x.w2);
  PartialFields d = partial_fields(model, jets);
  const double s = 1.0 / model.material.rhoA;
  FieldVector density = d.dw1_1.cwiseProduct(FieldVector(ops.D1 * eta.w1)) +
                        d.dw1_11.cwiseProduct(FieldVector(ops.D2 * eta.w1)) +
                        d.dw2_1.cwiseProduct(FieldVector(ops.D1 * eta.w2)) +
                        (s * x.p1).cwiseProduct(eta.p1) + (s * x.p2).cwiseProduct(eta.p2);
  return ops.quadrature(density);
}

}  // namespace

OracleReport variational_oracle(const ModelSpec& model, const DiscreteOperators& ops,
                                int trials, std::uint64_t seed) {
  OracleReport rep;
  rep.trials = trials;
  std::mt19937_64 rng(seed);
  ConstraintProjector interior = interior_projector(ops);
  const double s = 1.0 / model.material.rhoA;

  for (int trial = 0; trial < trials; ++trial) {
    BeamState x = BeamState::zero(ops.n());
    x.w1 = random_smooth_field(ops, rng, 1e-2);
    x.w2 = random_smooth_field(ops, rng, 1e-2);
    x.p1 = random_smooth_field(ops, rng, 1e-2);
    x.p2 = random_smooth_field(ops, rng, 1e-2);
    BeamState eta = BeamState::zero(ops.n());
    eta.w1 = random_smooth_field(ops, rng, 1.0);
    eta.w2 = random_smooth_field(ops, rng, 1.0);
    eta.p1 = random_smooth_field(ops, rng, 1.0);
    eta.p2 = random_smooth_field(ops, rng, 1.0);

    const double dE = directional_derivative(model, ops, x, eta);
    const double scale = std::max(1e-12, std::abs(dE));

    // central finite difference of the energy itself; quadratic energies
    // have no truncation term, so a wide step only averages away roundoff,
    // while the quartic membrane term wants a narrow one
    const double eps = model.nonlinear() ? 1e-5 : 1e-3;
    BeamState xp = x, xm = x;
    xp.w1 += eps * eta.w1;
    xp.w2 += eps * eta.w2;
    xp.p1 += eps * eta.p1;
    xp.p2 += eps * eta.p2;
    xm.w1 -= eps * eta.w1;
    xm.w2 -= eps * eta.w2;
    xm.p1 -= eps * eta.p1;
    xm.p2 -= eps * eta.p2;
    const double fd =
        (total_energy(model, ops, xp) - total_energy(model, ops, xm)) / (2.0 * eps);
    rep.max_fd_mismatch = std::max(rep.max_fd_mismatch, std::abs(fd - dE) / scale);

    // integration by parts with boundary traces
    VariationalDerivative delta = variational_derivative(model, ops, x.w1, x.w2, x.p1, x.p2);
    double paired = ops.quadrature(FieldVector(
        delta.w1.cwiseProduct(eta.w1) + delta.w2.cwiseProduct(eta.w2) +
        (s * x.p1).cwiseProduct(eta.p1) + (s * x.p2).cwiseProduct(eta.p2)));
    for (End end : {End::Left, End::Right}) {
      const int i = ops.node(end);
      const double sigma = DiscreteOperators::sign(end);
      PerFieldScalar b1 = boundary_delta1(model, ops, x.w1, x.w2, end);
      PerFieldScalar b2 = boundary_delta2(model, ops, x.w1, x.w2, end);
      paired += sigma * (b1.w1 * eta.w1(i) + b1.w2 * eta.w2(i) +
                         b2.w1 * (ops.D1 * eta.w1)(i));
    }
    rep.max_boundary_residual =
        std::max(rep.max_boundary_residual, std::abs(paired - dE) / scale);

    // perturbations with silent boundaries pair against the domain part only
    BeamState etai = eta;
    interior.apply_in_place(etai.w1);
    etai.w2(0) = 0.0;
    etai.w2(ops.n() - 1) = 0.0;
    const double dEi = directional_derivative(model, ops, x, etai);
    const double pairedi = ops.quadrature(FieldVector(
        delta.w1.cwiseProduct(etai.w1) + delta.w2.cwiseProduct(etai.w2) +
        (s * x.p1).cwiseProduct(etai.p1) + (s * x.p2).cwiseProduct(etai.p2)));
    rep.max_interior_residual =
        std::max(rep.max_interior_residual,
                 std::abs(pairedi - dEi) / std::max(1e-12, std::abs(dEi)));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Convergence studies

bool ConvergenceReport::pass(double slack) const {
  if (exact) return true;
  return std::isfinite(fitted_order) && std::abs(fitted_order - expected_order) <= slack;
}

std::string ConvergenceReport::summary() const {
  std::ostringstream os;
  os << label << ": ";
  if (exact) {
    os << "errors at roundoff";
  } else {
    os.setf(std::ios::fixed);
    os.precision(3);
    os << "fitted order " << fitted_order << " (expected " << expected_order << ")";
    if (!monotone) os << ", non-monotone";
  }
  os << "; errors:";
  os.setf(std::ios::scientific, std::ios::floatfield);
  os.precision(3);
  for (double e : error) os << " " << e;
  return os.str();
}

double state_distance(const ClosedLoopSystem& sys, const ClosedLoopState& a,
                      const ClosedLoopState& b) {
  const auto& ops = sys.plant.ops;
  auto wnorm2 = [&](const FieldVector& d) { return ops.quadrature(d.cwiseAbs2()); };
  double acc = wnorm2(a.beam.w1 - b.beam.w1) + wnorm2(a.beam.w2 - b.beam.w2) +
               wnorm2(a.beam.p1 - b.beam.p1) + wnorm2(a.beam.p2 - b.beam.p2);
  if (sys.has_controller_state()) acc += (a.xc - b.xc).squaredNorm();
  return std::sqrt(acc);
}

namespace {

void fit_order(ConvergenceReport& rep) {
  const int m = static_cast<int>(rep.error.size());
  double scale = 0.0;
  for (double e : rep.error) scale = std::max(scale, e);
  if (scale <= 1e-13) {
    rep.exact = true;
    rep.fitted_order = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  for (int i = 1; i < m; ++i)
    if (rep.error[i] >= rep.error[i - 1]) rep.monotone = false;

  // least-squares slope of log(error) against log(resolution)
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    const double lx = std::log(rep.resolution[i]);
    const double ly = std::log(std::max(rep.error[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  rep.fitted_order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace

ConvergenceReport temporal_convergence(const ClosedLoopSystem& sys, const ClosedLoopState& x0,
                                       double t_final, double dt0, int levels,
                                       IntegratorOptions opt) {
  if (levels < 2) throw std::invalid_argument("temporal study needs at least two levels");
  ConvergenceReport rep;
  rep.label = std::string("dt refinement, ") + to_string(opt.scheme);
  rep.expected_order = opt.scheme == Scheme::Rk4 ? 4.0 : 2.0;

  opt.dt = dt0 / std::pow(2.0, levels + 1);
  ClosedLoopState ref = snapshot_state(simulate(sys, x0, t_final, opt, 1 << 30).snapshots.back());

  for (int lev = 0; lev < levels; ++lev) {
    opt.dt = dt0 / std::pow(2.0, lev);
    Trajectory traj = simulate(sys, x0, t_final, opt, 1 << 30);
    rep.resolution.push_back(opt.dt);
    rep.error.push_back(state_distance(sys, snapshot_state(traj.snapshots.back()), ref));
  }
  fit_order(rep);
  return rep;
}

ConvergenceReport spatial_convergence(const SystemFactory& make_system,
                                      const StateFactory& make_state,
                                      const std::vector<int>& ns, double t_final,
                                      const IntegratorOptions& opt, double expected_order) {
  if (ns.size() < 2) throw std::invalid_argument("spatial study needs at least two grids");
  ConvergenceReport rep;
  rep.label = "grid refinement";
  rep.expected_order = expected_order;

  const int n_ref = 2 * (ns.back() - 1) + 1;
  ClosedLoopSystem ref_sys = make_system(n_ref);
  Trajectory ref_traj = simulate(ref_sys, make_state(ref_sys), t_final, opt, 1 << 30);
  const BeamState& ref = ref_traj.snapshots.back().beam;

  for (int n : ns) {
    if ((n_ref - 1) % (n - 1) != 0)
      throw std::invalid_argument("spatial study grids must be nested");
    const int ratio = (n_ref - 1) / (n - 1);
    ClosedLoopSystem sys = make_system(n);
    Trajectory traj = simulate(sys, make_state(sys), t_final, opt, 1 << 30);
    const BeamState& fin = traj.snapshots.back().beam;

    auto restrict_field = [&](const FieldVector& fine) {
      FieldVector coarse(n);
      for (int i = 0; i < n; ++i) coarse(i) = fine(i * ratio);
      return coarse;
    };
    ClosedLoopState a, b;
    a.beam = fin;
    b.beam.w1 = restrict_field(ref.w1);
    b.beam.w2 = restrict_field(ref.w2);
    b.beam.p1 = restrict_field(ref.p1);
    b.beam.p2 = restrict_field(ref.p2);
    if (ref_traj.snapshots.back().xc.size() == 6) {
      a.xc = traj.snapshots.back().xc;
      b.xc = ref_traj.snapshots.back().xc;
    }
    rep.resolution.push_back(sys.plant.ops.grid.h);
    rep.error.push_back(state_distance(sys, a, b));
  }
  fit_order(rep);
  return rep;
}

// ---------------------------------------------------------------------------
// Cantilever reference values

namespace {
constexpr double kBetaL1 = 1.8751040687119611;  // first root of cos(x)cosh(x) = -1
}

double cantilever_mode_frequency(const MaterialParams& m) {
  const double beta = kBetaL1 / m.L;
  return beta * beta * std::sqrt(m.EI / m.rhoA) / (2.0 * M_PI);
}

FieldVector cantilever_mode_shape(const Grid& grid) {
  const double bl = kBetaL1;
  const double sigma =
      (std::cosh(bl) + std::cos(bl)) / (std::sinh(bl) + std::sin(bl));
  FieldVector phi(grid.n_nodes);
  for (int i = 0; i < grid.n_nodes; ++i) {
    const double bz = bl * grid.z(i) / grid.L;
    phi(i) = std::cosh(bz) - std::cos(bz) - sigma * (std::sinh(bz) - std::sin(bz));
  }
  return phi / phi(grid.n_nodes - 1);
}

double dominant_frequency(const std::vector<double>& t, const std::vector<double>& signal) {
  if (t.size() != signal.size() || t.size() < 3)
    throw std::runtime_error("frequency estimate needs a sampled signal");
  std::vector<double> crossings;
  for (size_t i = 0; i + 1 < signal.size(); ++i) {
    if (signal[i] <= 0.0 && signal[i + 1] > 0.0) {
      const double frac = -signal[i] / (signal[i + 1] - signal[i]);
      crossings.push_back(t[i] + frac * (t[i + 1] - t[i]));
    }
  }
  if (crossings.size() < 2)
    throw std::runtime_error("signal has too few zero crossings for a frequency estimate");
  return (crossings.size() - 1) / (crossings.back() - crossings.front());
}

}  // namespace phbeam
