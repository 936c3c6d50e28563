#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "phbeam/model.hpp"

using namespace phbeam;

namespace {

MaterialParams fig_material() {
  MaterialParams m;
  m.EI = 14.97;
  m.EA = 50.0;
  m.rhoA = 2.1;
  m.alpha1 = 1e-3;
  m.alpha2 = 1e-3;
  m.L = 0.54;
  return m;
}

ModelSpec spec(ModelVariant v) { return ModelSpec{v, fig_material()}; }

}  // namespace

TEST_CASE("material validation names the offending field") {
  MaterialParams m = fig_material();
  m.validate();  // baseline is fine

  m.EI = 0.0;
  CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("EI"), std::invalid_argument);
  m = fig_material();
  m.rhoA = -1.0;
  CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("rhoA"), std::invalid_argument);
  m = fig_material();
  m.L = std::nan("");
  CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("L"), std::invalid_argument);
  m = fig_material();
  m.alpha1 = -1e-9;  // damping may be zero but never negative
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m.alpha1 = 0.0;
  m.validate();
}

TEST_CASE("damping coefficients per variant") {
  CHECK(spec(ModelVariant::NonlinearStructural).alpha1() == 1e-3);
  CHECK(spec(ModelVariant::NonlinearStructural).alpha2() == 1e-3);
  // the undamped variant ignores the material's coefficients
  CHECK(spec(ModelVariant::NonlinearUndamped).alpha1() == 0.0);
  CHECK(spec(ModelVariant::NonlinearUndamped).alpha2() == 0.0);
  CHECK(spec(ModelVariant::LinearViscous).alpha1() == 1e-3);
  CHECK(spec(ModelVariant::LinearViscous).nonlinear() == false);
  CHECK(spec(ModelVariant::NonlinearStructural).structural_damping());
  CHECK_FALSE(spec(ModelVariant::NonlinearUndamped).structural_damping());
}

TEST_CASE("energy density reproduces hand-computed values") {
  ModelSpec m = spec(ModelVariant::NonlinearStructural);
  JetPoint q;

  // pure quartic membrane term: 1/2 * EA * 1/4 * w1_1^4
  q.w1_1 = 0.1;
  CHECK(hamiltonian_density(m, q) == doctest::Approx(6.25e-4).epsilon(1e-14));

  // pure kinetic term: p^2 / (2 rhoA)
  q = JetPoint{};
  q.p1 = 2.1;
  CHECK(hamiltonian_density(m, q) == doctest::Approx(1.05).epsilon(1e-14));

  // the membrane density is a perfect square, 1/2 EA (w2_1 + w1_1^2/2)^2
  q = JetPoint{};
  q.w2_1 = 0.01;
  q.w1_1 = 0.1;
  const double square = 0.5 * 50.0 * std::pow(0.01 + 0.5 * 0.01, 2);
  CHECK(hamiltonian_density(m, q) == doctest::Approx(square).epsilon(1e-14));
}

TEST_CASE("linear variant drops the strain coupling") {
  ModelSpec lin = spec(ModelVariant::LinearViscous);
  JetPoint q;
  q.w1_1 = 0.1;
  q.w2_1 = 0.01;
  // 1/2 EA w2_1^2 only; the quartic and mixed terms belong to the
  // nonlinear variants
  CHECK(hamiltonian_density(lin, q) == doctest::Approx(0.5 * 50.0 * 1e-4).epsilon(1e-14));
  CHECK(hamiltonian_partials(lin, q).dH_dw2_1 == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(hamiltonian_partials(lin, q).dH_dw1_1 == doctest::Approx(0.0));
}

TEST_CASE("density is nonnegative on random jets") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (ModelVariant v : {ModelVariant::LinearViscous, ModelVariant::NonlinearUndamped,
                         ModelVariant::NonlinearStructural}) {
    ModelSpec m = spec(v);
    for (int trial = 0; trial < 200; ++trial) {
      JetPoint q;
      q.w1 = gauss(rng);
      q.w2 = gauss(rng);
      q.p1 = gauss(rng);
      q.p2 = gauss(rng);
      q.w1_1 = gauss(rng);
      q.w2_1 = gauss(rng);
      q.w1_11 = gauss(rng);
      CHECK(hamiltonian_density(m, q) >= 0.0);
    }
  }
}

TEST_CASE("partials match central differences of the density") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 0.5);
  const double eps = 1e-6;

  for (ModelVariant v : {ModelVariant::LinearViscous, ModelVariant::NonlinearUndamped,
                         ModelVariant::NonlinearStructural}) {
    ModelSpec m = spec(v);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      JetPoint q;
      q.p1 = gauss(rng);
      q.p2 = gauss(rng);
      q.w1_1 = gauss(rng);
      q.w2_1 = gauss(rng);
      q.w1_11 = gauss(rng);
      HamiltonianPartials g = hamiltonian_partials(m, q);

      auto fd = [&](double JetPoint::*member, double analytic) {
        JetPoint qp = q, qm = q;
        qp.*member += eps;
        qm.*member -= eps;
        const double d =
            (hamiltonian_density(m, qp) - hamiltonian_density(m, qm)) / (2.0 * eps);
        worst = std::max(worst, std::abs(d - analytic) / std::max(1.0, std::abs(analytic)));
      };
      fd(&JetPoint::p1, g.dH_dp1);
      fd(&JetPoint::p2, g.dH_dp2);
      fd(&JetPoint::w1_1, g.dH_dw1_1);
      fd(&JetPoint::w2_1, g.dH_dw2_1);
      fd(&JetPoint::w1_11, g.dH_dw1_11);
      CHECK(g.dH_dw1 == 0.0);
      CHECK(g.dH_dw2 == 0.0);
    }
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("boundary forces at pinned jet values") {
  ModelSpec m = spec(ModelVariant::NonlinearStructural);
  JetPoint q;
  q.w1_1 = 0.1;
  q.w2_1 = 0.01;
  q.w1_11 = 0.2;

  InternalForces f = internal_forces(m, q, /*w1_111=*/0.0);
  CHECK_FALSE(f.variant_corrected);
  // N = EA (w2_1 + w1_1^2/2), Q = EA w1_1 (w2_1 + w1_1^2/2), M = EI w1_11
  CHECK(f.N == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(f.Q == doctest::Approx(0.075).epsilon(1e-14));
  CHECK(f.M == doctest::Approx(2.994).epsilon(1e-14));

  SUBCASE("damping corrections enter with the operator's boundary terms") {
    MaterialParams mat = fig_material();
    mat.alpha1 = 0.3;
    mat.alpha2 = 0.5;
    ModelSpec damped{ModelVariant::NonlinearStructural, mat};
    InternalForces c = corrected_boundary_forces(damped, q, 0.0, /*dot_w1_111=*/0.0,
                                                 /*dot_w2_1=*/0.2, /*dot_w1_11=*/-0.1);
    CHECK(c.variant_corrected);
    CHECK(c.N == doctest::Approx(0.85).epsilon(1e-14));   // N~ + alpha2 dot(w2_1)
    CHECK(c.M == doctest::Approx(2.964).epsilon(1e-14));  // M~ + alpha1 dot(w1_11)
    CHECK(c.Q == doctest::Approx(0.075).epsilon(1e-14));  // dot_w1_111 = 0 here
  }

  SUBCASE("viscous and undamped variants leave the forces alone") {
    for (ModelVariant v : {ModelVariant::LinearViscous, ModelVariant::NonlinearUndamped}) {
      InternalForces c = corrected_boundary_forces(spec(v), q, 0.0, 1.0, 1.0, 1.0);
      InternalForces u = internal_forces(spec(v), q, 0.0);
      CHECK(c.Q == u.Q);
      CHECK(c.N == u.N);
      CHECK(c.M == u.M);
    }
  }
}

TEST_CASE("non-finite jets are rejected") {
  ModelSpec m = spec(ModelVariant::NonlinearStructural);
  JetPoint q;
  q.w1_1 = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(hamiltonian_density(m, q), std::domain_error);
}
