#pragma once

// Uniform grid, diagonal-norm summation-by-parts difference operators, the
// discrete variational derivative, boundary force extraction and the
// dissipation operators.  Everything here is built so that the discrete
// energy identities hold to machine precision, not merely to truncation
// order: W*D1 + D1^T*W = B exactly, D2 = D1*D1, and integration by parts is
// an algebraic identity of the operators.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "phbeam/model.hpp"

namespace phbeam {

using FieldVector = Eigen::VectorXd;  // one scalar per grid node
using SparseMat = Eigen::SparseMatrix<double>;

enum class End { Left, Right };

struct Grid {
  int n_nodes = 0;
  double L = 0.0;
  double h = 0.0;       // L / (n_nodes - 1)
  Eigen::VectorXd z;    // z_i = i*h

  Grid() = default;
  Grid(int n, double length);  // throws std::invalid_argument (n >= 9, L > 0)
};

struct DiscreteOperators {
  Grid grid;
  int order = 2;            // interior accuracy, 2 or 4
  SparseMat D1;             // first derivative
  SparseMat D2;             // D1*D1 (wide second derivative)
  SparseMat D3;             // D1*D2 (boundary third derivatives)
  Eigen::VectorXd W;        // diagonal norm/quadrature weights
  Eigen::VectorXd Winv;
  int closure_width = 1;    // boundary rows touched per end

  int n() const { return grid.n_nodes; }

  // Sum_i W_ii f_i.
  double quadrature(const FieldVector& f) const;

  // Boundary difference  f(L)*g(L) - f(0)*g(0)  as used by the discrete
  // integration-by-parts identities.
  static int node(const Grid& g, End e) { return e == End::Left ? 0 : g.n_nodes - 1; }
  int node(End e) const { return node(grid, e); }
  static double sign(End e) { return e == End::Left ? -1.0 : 1.0; }
};

// Builds the SBP operator set for the given interior order (2 or 4).
DiscreteOperators build_operators(const Grid& grid, int order);

// Nodewise jets of the displacement fields.
struct FieldJets {
  FieldVector w1_1, w2_1, w1_11;
};
FieldJets compute_jets(const DiscreteOperators& ops, const FieldVector& w1,
                       const FieldVector& w2);

JetPoint jet_at(const FieldVector& w1, const FieldVector& w2, const FieldVector& p1,
                const FieldVector& p2, const FieldJets& jets, int i);

// Density and analytic partials evaluated at every node.
struct PartialFields {
  FieldVector dw1_1;   // dH/dw1_1
  FieldVector dw2_1;   // dH/dw2_1
  FieldVector dw1_11;  // dH/dw1_11
};
FieldVector hamiltonian_field(const ModelSpec& model, const FieldVector& w1,
                              const FieldVector& w2, const FieldVector& p1,
                              const FieldVector& p2, const FieldJets& jets);
PartialFields partial_fields(const ModelSpec& model, const FieldJets& jets);

// Discrete variational derivative per field:
//   delta_w H = d0 - D1*(d1 partial) + D2*(d2 partial),  delta_p H = p/rhoA.
struct VariationalDerivative {
  FieldVector w1, w2, p1, p2;
};
VariationalDerivative variational_derivative(const ModelSpec& model,
                                             const DiscreteOperators& ops,
                                             const FieldVector& w1, const FieldVector& w2,
                                             const FieldVector& p1, const FieldVector& p2);

// Boundary variational operators evaluated at one end:
//   delta1_w = d1 partial - D1*(d2 partial),  delta2_w = d2 partial.
// The p components vanish (no momentum jets in the density).
struct PerFieldScalar {
  double w1 = 0.0, w2 = 0.0, p1 = 0.0, p2 = 0.0;
};
PerFieldScalar boundary_delta1(const ModelSpec& model, const DiscreteOperators& ops,
                               const FieldVector& w1, const FieldVector& w2, End end);
PerFieldScalar boundary_delta2(const ModelSpec& model, const DiscreteOperators& ops,
                               const FieldVector& w1, const FieldVector& w2, End end);

// Dissipation operators with per-node coefficient fields:
//   apply_RA(eta) = D1*(coeff .* D1*eta)      (second order)
//   apply_RB(eta) = D2*(coeff .* D2*eta)      (fourth order)
FieldVector apply_RA(const DiscreteOperators& ops, const FieldVector& eta,
                     const FieldVector& coeff);
FieldVector apply_RB(const DiscreteOperators& ops, const FieldVector& eta,
                     const FieldVector& coeff);

// W-orthogonal projector onto {x : C x = 0} for a small set of boundary
// constraint rows.  Stored sparse: identity plus a corner correction block,
// so it composes cheaply with the banded operators.
struct ConstraintProjector {
  SparseMat P;          // n x n projector
  bool trivial = true;  // no constraints: P is the identity

  void apply_in_place(FieldVector& x) const {
    if (!trivial) x = P * x;
  }
  FieldVector apply(const FieldVector& x) const { return trivial ? x : FieldVector(P * x); }
};

ConstraintProjector make_projector(const DiscreteOperators& ops,
                                   const Eigen::MatrixXd& constraints);

// Clamped-end projectors at z = 0: two constraints (value and D1 row) for the
// transverse pair, one (value) for the axial pair.
ConstraintProjector clamped_projector_transverse(const DiscreteOperators& ops);
ConstraintProjector clamped_projector_axial(const DiscreteOperators& ops);

// Projector for perturbations vanishing at both ends together with their
// D1 image; used by the variational oracle.
ConstraintProjector interior_projector(const DiscreteOperators& ops);

}  // namespace phbeam
