#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "mfc/lq_mfc.hpp"
#include "mfc/smp_check.hpp"

using namespace mfc;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

LqModel small_model() {
  LqModel m;
  m.b1 = -0.5;
  m.b2 = 0.2;
  m.s1 = 0.2;
  m.q = 1.0;
  m.v = 1.0;
  m.ell = 1.0;
  m.m0 = 1.0;
  m.v0 = 0.04;
  return m;
}

}  // namespace

TEST_CASE("hamiltonian bilinear form, vector and scalar") {
  Eigen::VectorXd b(2), y(2);
  b << 1.0, 2.0;
  y << 3.0, -1.0;
  Eigen::MatrixXd sigma(2, 1), z(2, 1);
  sigma << 0.5, 0.25;
  z << 4.0, 8.0;
  CHECK(hamiltonian(b, sigma, y, z, 0.5, 10.0) == doctest::Approx(1.0 + 4.0 + 5.0));

  LqModel m = small_model();
  double h = hamiltonian(0.0, 2.0, 1.0, 0.5, 0.3, 1.5, 0.7, 1.0, m.dynamics(),
                         m.running_cost().f);
  // drift = -0.5*2 + 0.2*1 + 0.3, diffusion = 0.2*2, f = (4 + 0.09)/2
  CHECK(h == doctest::Approx((-1.0 + 0.2 + 0.3) * 1.5 + 0.4 * 0.7 + 2.045));
  Eigen::MatrixXd bad(1, 1);
  CHECK_THROWS(hamiltonian(b, bad, y, z, 1.0, 0.0));
}

TEST_CASE("residual vanishes at the unconstrained optimum and grows v-strongly") {
  LqModel model = small_model();
  TimeGrid grid(1.0, 40);
  LqSolveReport rep = solve_unconstrained(model, grid, 2000, 1, 80, 0.5);
  REQUIRE(rep.converged);
  ConstraintSpec none;
  double at_opt =
      min_condition_residual(rep.ensemble, rep.adjoint, rep.mult, none, model.dynamics(),
                             model.running_cost(), -kInf, kInf);
  CHECK(at_opt < 1e-3);

  // constant perturbation delta: residual(alpha + delta) >= v |delta| - residual(alpha)
  double delta = 0.37;
  ParticleEnsemble shifted = rep.ensemble;
  shifted.controls.array() += delta;
  double at_shift =
      min_condition_residual(shifted, rep.adjoint, rep.mult, none, model.dynamics(),
                             model.running_cost(), -kInf, kInf);
  CHECK(at_shift >= model.v * delta - at_opt);
}

TEST_CASE("constraint evaluation averages the particles") {
  LqModel model = small_model();
  TimeGrid grid(1.0, 4);
  ParticleEnsemble ens =
      simulate_forward(model.dynamics(),
                       ControlPolicy::feedback([](double, double, double) { return 0.25; }),
                       grid, 50, 1, InitialLaw{1.0, 0.04});
  ConstraintSpec spec;
  ExpectationConstraint ec;
  ec.phi_x = [](double, double x) { return x; };
  ec.phi_x_dx = [](double, double) { return 1.0; };
  spec.expectation.push_back(ec);
  PathConstraint pc;
  pc.psi = [](double, double, double u) { return 1.0 - u; };
  pc.psi_dx = [](double, double, double) { return 0.0; };
  pc.psi_du = [](double, double, double) { return -1.0; };
  spec.pathwise.push_back(pc);

  ConstraintEvals ev = evaluate_constraints(ens, spec);
  REQUIRE(ev.phi_mean.size() == 1);
  REQUIRE(ev.psi.size() == 1);
  for (Eigen::Index k = 0; k <= 4; ++k) {
    CHECK(ev.phi_mean[0](k) == doctest::Approx(ens.states.col(k).mean()));
    CHECK(ev.psi[0](0, k) == doctest::Approx(0.75));
  }
}

TEST_CASE("kernel constraints accumulate the control integral") {
  LqModel model = small_model();
  TimeGrid grid(1.0, 4);
  ParticleEnsemble ens =
      simulate_forward(model.dynamics(),
                       ControlPolicy::feedback([](double, double, double) { return 2.0; }),
                       grid, 10, 1, InitialLaw{0.0, 0.0});
  ConstraintSpec spec;
  ExpectationConstraint ec;
  ec.Phi = [](double s) { return s; };
  ec.Phi_prime = [](double) { return 1.0; };
  ec.kernel = [](double) { return 1.0; };
  spec.expectation.push_back(ec);
  ConstraintEvals ev = evaluate_constraints(ens, spec);
  // integral of the constant control 2 up to node k
  for (Eigen::Index k = 0; k <= 4; ++k)
    CHECK(ev.phi_mean[0](k) == doctest::Approx(2.0 * 0.25 * static_cast<double>(k)));
}

TEST_CASE("support check pairs multipliers with constraint values") {
  LqModel model = small_model();
  TimeGrid grid(1.0, 2);
  ParticleEnsemble ens =
      simulate_forward(model.dynamics(),
                       ControlPolicy::feedback([](double, double, double) { return 0.0; }),
                       grid, 20, 1, InitialLaw{1.0, 0.0});
  ConstraintSpec spec;
  PathConstraint pc;
  pc.psi = [](double, double, double) { return 0.5; };  // slack everywhere
  pc.psi_dx = [](double, double, double) { return 0.0; };
  pc.psi_du = [](double, double, double) { return 0.0; };
  spec.pathwise.push_back(pc);
  MultiplierSet mult;
  mult.eta = {Eigen::MatrixXd::Constant(20, 3, 2.0)};
  SupportCheck sc = support_check(mult, ens, spec, 1e-8);
  // integral of 0.5 * 2 over [0, 1]
  CHECK(sc.slackness_integral[0] == doctest::Approx(1.0));
}

TEST_CASE("normalization scales the bundle to total mass one") {
  TimeGrid grid(1.0, 4);
  MultiplierSet mult;
  mult.r0 = 2.0;
  mult.atom_weights = {Eigen::VectorXd::Constant(5, 0.4)};
  mult.eta = {Eigen::MatrixXd::Constant(3, 5, 1.0)};
  CHECK(multiplier_total(mult, grid) == doctest::Approx(2.0 + 2.0 + 1.0));
  MultiplierSet unit = normalize(mult, grid);
  CHECK(multiplier_total(unit, grid) == doctest::Approx(1.0));
  CHECK(unit.r0 == doctest::Approx(0.4));

  MultiplierSet zero;
  zero.r0 = 0.0;
  CHECK_THROWS_AS(normalize(zero, grid), std::invalid_argument);
}

TEST_CASE("dual ascent moves along violations and stays nonnegative") {
  MultiplierSet mult;
  mult.atom_weights = {Eigen::VectorXd::Constant(3, 0.1)};
  mult.eta = {Eigen::MatrixXd::Constant(2, 3, 0.1)};
  ConstraintEvals ev;
  ev.phi_mean = {Eigen::VectorXd::Constant(3, -1.0)};  // violated in mean
  ev.psi = {Eigen::MatrixXd::Constant(2, 3, 5.0)};     // slack pathwise
  MultiplierSet next = dual_ascent_update(mult, ev, 0.5);
  CHECK(next.atom_weights[0](0) == doctest::Approx(0.6));
  CHECK(next.eta[0](0, 0) == doctest::Approx(0.0));  // clipped at zero
  CHECK_THROWS(dual_ascent_update(mult, ev, 0.0));
}

TEST_CASE("report serializes to json") {
  SmpReport rep;
  rep.min_condition_residual = 0.25;
  rep.support_violation = {0.0};
  rep.r0 = 0.5;
  std::string j = rep.to_json();
  CHECK(j.find("\"min_condition_residual\": 0.25") != std::string::npos);
  CHECK(j.find("\"r0\": 0.5") != std::string::npos);
}
