#include "phbeam/discretization.hpp"

#include <Eigen/LU>
#include <stdexcept>
#include <vector>

namespace phbeam {

Grid::Grid(int n, double length) : n_nodes(n), L(length) {
  if (n < 9) throw std::invalid_argument("grid needs at least 9 nodes");
  if (!(length > 0.0)) throw std::invalid_argument("grid length must be positive");
  h = L / static_cast<double>(n - 1);
  z.resize(n);
  for (int i = 0; i < n; ++i) z(i) = h * static_cast<double>(i);
}

double DiscreteOperators::quadrature(const FieldVector& f) const {
  if (f.size() != W.size()) throw std::invalid_argument("quadrature: field/grid size mismatch");
  return W.dot(f);
}

namespace {

// Classical diagonal-norm SBP blocks.  The right end mirrors the left with a
// sign flip: D[n-1-i][n-1-j] = -D[i][j].
struct SbpTable {
  std::vector<double> norm;                 // boundary norm weights, times h
  std::vector<std::vector<double>> rows;    // boundary rows, times 1/h
  std::vector<double> interior;             // centered stencil, times 1/h
  int interior_half = 1;
};

SbpTable table_order2() {
  SbpTable t;
  t.norm = {0.5};
  t.rows = {{-1.0, 1.0}};
  t.interior = {-0.5, 0.0, 0.5};
  t.interior_half = 1;
  return t;
}

SbpTable table_order4() {
  SbpTable t;
  t.norm = {17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0};
  t.rows = {
      {-24.0 / 17.0, 59.0 / 34.0, -4.0 / 17.0, -3.0 / 34.0},
      {-1.0 / 2.0, 0.0, 1.0 / 2.0},
      {4.0 / 43.0, -59.0 / 86.0, 0.0, 59.0 / 86.0, -4.0 / 43.0},
      {3.0 / 98.0, 0.0, -59.0 / 98.0, 0.0, 32.0 / 49.0, -4.0 / 49.0},
  };
  t.interior = {1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0};
  t.interior_half = 2;
  return t;
}

}  // namespace

DiscreteOperators build_operators(const Grid& grid, int order) {
  if (order != 2 && order != 4)
    throw std::invalid_argument("operator order must be 2 or 4");
  const int n = grid.n_nodes;
  const double h = grid.h;
  const SbpTable t = order == 2 ? table_order2() : table_order4();
  const int nb = static_cast<int>(t.rows.size());
  if (n < 2 * nb + 1) throw std::invalid_argument("grid too small for the chosen stencil");

  DiscreteOperators ops;
  ops.grid = grid;
  ops.order = order;

  ops.W = Eigen::VectorXd::Constant(n, h);
  for (int i = 0; i < nb; ++i) {
    ops.W(i) = h * t.norm[i];
    ops.W(n - 1 - i) = h * t.norm[i];
  }
  ops.Winv = ops.W.cwiseInverse();

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(n) * (t.interior.size() + 2));
  auto push = [&](int r, int c, double v) {
    if (v != 0.0) trip.emplace_back(r, c, v / h);
  };
  for (int i = 0; i < nb; ++i) {
    for (size_t j = 0; j < t.rows[i].size(); ++j) {
      push(i, static_cast<int>(j), t.rows[i][j]);
      push(n - 1 - i, n - 1 - static_cast<int>(j), -t.rows[i][j]);
    }
  }
  for (int i = nb; i < n - nb; ++i)
    for (size_t j = 0; j < t.interior.size(); ++j)
      push(i, i - t.interior_half + static_cast<int>(j), t.interior[j]);

  ops.D1.resize(n, n);
  ops.D1.setFromTriplets(trip.begin(), trip.end());
  ops.D1.makeCompressed();
  ops.D2 = ops.D1 * ops.D1;
  ops.D2.makeCompressed();
  ops.D3 = ops.D1 * ops.D2;
  ops.D3.makeCompressed();

  // Widest node reach of any boundary row; diagnostics treat nodes beyond
  // this distance from the ends as interior.
  size_t reach = t.interior.size() - static_cast<size_t>(t.interior_half);
  for (const auto& row : t.rows) reach = std::max(reach, row.size());
  ops.closure_width = static_cast<int>(reach);
  return ops;
}

FieldJets compute_jets(const DiscreteOperators& ops, const FieldVector& w1,
                       const FieldVector& w2) {
  FieldJets j;
  j.w1_1 = ops.D1 * w1;
  j.w2_1 = ops.D1 * w2;
  j.w1_11 = ops.D2 * w1;
  return j;
}

JetPoint jet_at(const FieldVector& w1, const FieldVector& w2, const FieldVector& p1,
                const FieldVector& p2, const FieldJets& jets, int i) {
  JetPoint q;
  q.w1 = w1(i);
  q.w2 = w2(i);
  q.p1 = p1(i);
  q.p2 = p2(i);
  q.w1_1 = jets.w1_1(i);
  q.w2_1 = jets.w2_1(i);
  q.w1_11 = jets.w1_11(i);
  return q;
}

FieldVector hamiltonian_field(const ModelSpec& model, const FieldVector& w1,
                              const FieldVector& w2, const FieldVector& p1,
                              const FieldVector& p2, const FieldJets& jets) {
  const int n = static_cast<int>(w1.size());
  FieldVector H(n);
  for (int i = 0; i < n; ++i)
    H(i) = hamiltonian_density(model, jet_at(w1, w2, p1, p2, jets, i));
  return H;
}

PartialFields partial_fields(const ModelSpec& model, const FieldJets& jets) {
  const MaterialParams& m = model.material;
  PartialFields d;
  d.dw1_11 = m.EI * jets.w1_11;
  if (model.nonlinear()) {
    const FieldVector s1 = jets.w1_1.cwiseProduct(jets.w1_1);
    d.dw1_1 = 0.5 * m.EA * s1.cwiseProduct(jets.w1_1) + m.EA * jets.w2_1.cwiseProduct(jets.w1_1);
    d.dw2_1 = m.EA * jets.w2_1 + 0.5 * m.EA * s1;
  } else {
    d.dw1_1 = FieldVector::Zero(jets.w1_1.size());
    d.dw2_1 = m.EA * jets.w2_1;
  }
  return d;
}

VariationalDerivative variational_derivative(const ModelSpec& model,
                                             const DiscreteOperators& ops,
                                             const FieldVector& w1, const FieldVector& w2,
                                             const FieldVector& p1, const FieldVector& p2) {
  FieldJets jets = compute_jets(ops, w1, w2);
  PartialFields d = partial_fields(model, jets);
  VariationalDerivative v;
  // No model depends on the undifferentiated displacements, so the zeroth
  // order term is dropped here.
  v.w1 = -(ops.D1 * d.dw1_1) + ops.D2 * d.dw1_11;
  v.w2 = -(ops.D1 * d.dw2_1);
  v.p1 = p1 / model.material.rhoA;
  v.p2 = p2 / model.material.rhoA;
  return v;
}

PerFieldScalar boundary_delta1(const ModelSpec& model, const DiscreteOperators& ops,
                               const FieldVector& w1, const FieldVector& w2, End end) {
  FieldJets jets = compute_jets(ops, w1, w2);
  PartialFields d = partial_fields(model, jets);
  const int i = ops.node(end);
  PerFieldScalar out;
  out.w1 = d.dw1_1(i) - (ops.D1 * d.dw1_11).eval()(i);
  out.w2 = d.dw2_1(i);
  return out;
}

PerFieldScalar boundary_delta2(const ModelSpec& model, const DiscreteOperators& ops,
                               const FieldVector& w1, const FieldVector& w2, End end) {
  FieldJets jets = compute_jets(ops, w1, w2);
  PartialFields d = partial_fields(model, jets);
  PerFieldScalar out;
  out.w1 = d.dw1_11(ops.node(end));
  return out;
}

FieldVector apply_RA(const DiscreteOperators& ops, const FieldVector& eta,
                     const FieldVector& coeff) {
  if (eta.size() != coeff.size() || eta.size() != ops.W.size())
    throw std::invalid_argument("apply_RA: size mismatch");
  return ops.D1 * coeff.cwiseProduct(ops.D1 * eta).eval();
}

FieldVector apply_RB(const DiscreteOperators& ops, const FieldVector& eta,
                     const FieldVector& coeff) {
  if (eta.size() != coeff.size() || eta.size() != ops.W.size())
    throw std::invalid_argument("apply_RB: size mismatch");
  return ops.D2 * coeff.cwiseProduct(ops.D2 * eta).eval();
}

ConstraintProjector make_projector(const DiscreteOperators& ops,
                                   const Eigen::MatrixXd& constraints) {
  ConstraintProjector proj;
  const int n = ops.n();
  const int k = static_cast<int>(constraints.rows());
  if (k == 0) {
    proj.trivial = true;
    return proj;
  }
  if (constraints.cols() != n) throw std::invalid_argument("projector: constraint width mismatch");

  // P = I - Winv C^T (C Winv C^T)^{-1} C.  The correction only touches the
  // columns where C has support, so P stays sparse.
  Eigen::MatrixXd CWinv = constraints * ops.Winv.asDiagonal();
  Eigen::MatrixXd S = CWinv * constraints.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
  if (!lu.isInvertible())
    throw std::invalid_argument("projector: linearly dependent constraint rows");
  Eigen::MatrixXd SinvC = lu.solve(constraints);          // k x n
  Eigen::MatrixXd corr_cols = CWinv.transpose();          // n x k, Winv C^T

  std::vector<int> support;
  for (int j = 0; j < n; ++j)
    if (corr_cols.row(j).cwiseAbs().maxCoeff() > 0.0) support.push_back(j);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(n) + support.size() * support.size());
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, 1.0);
  for (int r : support)
    for (int c = 0; c < n; ++c) {
      double v = 0.0;
      for (int s = 0; s < k; ++s) v += corr_cols(r, s) * SinvC(s, c);
      if (v != 0.0) trip.emplace_back(r, c, -v);
    }
  proj.P.resize(n, n);
  proj.P.setFromTriplets(trip.begin(), trip.end());
  proj.P.makeCompressed();
  proj.trivial = false;
  return proj;
}

namespace {

Eigen::MatrixXd d1_row(const DiscreteOperators& ops, int row) {
  // D1 is stored column-major; pull one row out via a unit vector.
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(1, ops.n());
  Eigen::VectorXd e = Eigen::VectorXd::Zero(ops.n());
  e(row) = 1.0;
  r.row(0) = (ops.D1.transpose() * e).transpose();
  return r;
}

}  // namespace

ConstraintProjector clamped_projector_transverse(const DiscreteOperators& ops) {
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(2, ops.n());
  C(0, 0) = 1.0;
  C.row(1) = d1_row(ops, 0);
  return make_projector(ops, C);
}

ConstraintProjector clamped_projector_axial(const DiscreteOperators& ops) {
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(1, ops.n());
  C(0, 0) = 1.0;
  return make_projector(ops, C);
}

ConstraintProjector interior_projector(const DiscreteOperators& ops) {
  const int n = ops.n();
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(4, n);
  C(0, 0) = 1.0;
  C(1, n - 1) = 1.0;
  C.row(2) = d1_row(ops, 0);
  C.row(3) = d1_row(ops, n - 1);
  return make_projector(ops, C);
}

}  // namespace phbeam
