#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mfc/mf_bsde.hpp"

using namespace mfc;

namespace {

MeanFieldDynamics brownian() {
  MeanFieldDynamics dyn;
  auto zero = [](double, double, double, double, double) { return 0.0; };
  auto one = [](double, double, double, double, double) { return 1.0; };
  dyn.drift = zero;
  dyn.diffusion = one;
  dyn.drift_dx = dyn.drift_du = dyn.drift_dmx = dyn.drift_dma = zero;
  dyn.diff_dx = dyn.diff_du = dyn.diff_dmx = dyn.diff_dma = zero;
  return dyn;
}

ParticleEnsemble brownian_ensemble(int N, std::size_t M, std::uint64_t seed) {
  TimeGrid grid(1.0, M);
  ControlPolicy policy =
      ControlPolicy::open_loop(Eigen::MatrixXd::Zero(N, static_cast<Eigen::Index>(M) + 1));
  return simulate_forward(brownian(), policy, grid, N, seed, InitialLaw{0.0, 0.0});
}

}  // namespace

TEST_CASE("martingale identity: terminal W_T gives Y = W, Z = 1") {
  ParticleEnsemble ens = brownian_ensemble(2000, 40, 1);
  DriverSpec spec;
  spec.terminal = [](double x, double) { return x; };
  AdjointSolution sol = solve_backward(ens, spec, MultiplierSet{}, ConstraintGradients{});
  CHECK((sol.Y - ens.states).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((sol.Z.array() - 1.0).abs().maxCoeff() < 1e-8);
  for (double r : sol.regression_residuals) CHECK(r < 1e-16);
}

TEST_CASE("single-step recursion matches hand algebra") {
  // constant terminal c: the conditional expectation is c and Z = 0;
  // a constant driver d then shifts Y_0 by d dt
  ParticleEnsemble ens = brownian_ensemble(64, 1, 2);
  DriverSpec spec;
  spec.terminal = [](double, double) { return 3.0; };
  spec.driver = [](const DriverArgs&) { return 0.25; };
  AdjointSolution sol = solve_backward(ens, spec, MultiplierSet{}, ConstraintGradients{});
  for (int i = 0; i < 64; ++i) {
    CHECK(sol.Y(i, 1) == doctest::Approx(3.0));
    CHECK(sol.Y(i, 0) == doctest::Approx(3.0 + 0.25).epsilon(1e-12));
    CHECK(sol.Z(i, 0) == doctest::Approx(0.0).epsilon(1e-10));
  }
}

TEST_CASE("driver sees the conditional expectation, not the raw next value") {
  // linear driver in y: Y_k = (1 + dt) CE[Y_{k+1}], so Y_0 at a point
  // mass start is (1 + dt)^M E[W_T] = 0 and Y along the path stays the
  // discounted martingale (1 + dt)^(M-k) W_k
  std::size_t M = 20;
  ParticleEnsemble ens = brownian_ensemble(3000, M, 3);
  DriverSpec spec;
  spec.terminal = [](double x, double) { return x; };
  spec.driver = [](const DriverArgs& a) { return a.y; };
  AdjointSolution sol = solve_backward(ens, spec, MultiplierSet{}, ConstraintGradients{});
  double dt = ens.grid.dt();
  for (std::size_t k = 0; k <= M; ++k) {
    double factor = std::pow(1.0 + dt, static_cast<double>(M - k));
    Eigen::VectorXd expected = factor * ens.states.col(static_cast<Eigen::Index>(k));
    CHECK((sol.Y.col(static_cast<Eigen::Index>(k)) - expected).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("mean-field terminal couples through the ensemble average") {
  // terminal x - mean_x: exact conditional expectations keep the
  // centered structure, Y_k = X_k - mean_x(T) for the driftless state
  ParticleEnsemble ens = brownian_ensemble(1500, 10, 4);
  DriverSpec spec;
  spec.terminal = [](double x, double mx) { return x - mx; };
  AdjointSolution sol = solve_backward(ens, spec, MultiplierSet{}, ConstraintGradients{});
  double mxT = ens.states.col(10).mean();
  for (Eigen::Index k = 0; k <= 10; ++k) {
    Eigen::VectorXd expected = ens.states.col(k).array() - mxT;
    CHECK((sol.Y.col(k) - expected).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("measure atoms shift every node strictly before the atom") {
  AdjointSolution sol;
  sol.Y = Eigen::MatrixXd::Zero(3, 5);
  sol.Z = Eigen::MatrixXd::Zero(3, 4);
  AdjointSolution shifted = apply_measure_atoms(sol, {{2, 1.5}, {2, 0.5}, {4, 1.0}});
  // merged atom of 2.0 at node 2 plus 1.0 at node 4
  Eigen::RowVectorXd expected(5);
  expected << 3.0, 3.0, 1.0, 1.0, 0.0;
  for (int i = 0; i < 3; ++i) CHECK(sol.Y.row(i).isZero());
  for (int i = 0; i < 3; ++i)
    CHECK((shifted.Y.row(i) - expected).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK_THROWS_AS(apply_measure_atoms(shifted, {{5, 1.0}}), std::invalid_argument);
}

TEST_CASE("atom weights in the backward pass subtract the constraint gradient") {
  std::size_t M = 4;
  int N = 128;
  ParticleEnsemble ens = brownian_ensemble(N, M, 5);
  DriverSpec spec;
  spec.terminal = [](double, double) { return 0.0; };
  MultiplierSet mult;
  mult.atom_weights = {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(M) + 1)};
  mult.atom_weights[0](2) = 0.7;  // atom at node 2
  ConstraintGradients grads;
  grads.phi_x = {[](double, double) { return 1.0; }};
  AdjointSolution sol = solve_backward(ens, spec, mult, grads);
  // gradient 1 and weight 0.7: nodes 0 and 1 shift by -0.7, later nodes stay 0
  for (int i = 0; i < N; ++i) {
    CHECK(sol.Y(i, 0) == doctest::Approx(-0.7).epsilon(1e-10));
    CHECK(sol.Y(i, 1) == doctest::Approx(-0.7).epsilon(1e-10));
    CHECK(sol.Y(i, 2) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(sol.Y(i, 4) == doctest::Approx(0.0));
  }
}

TEST_CASE("pathwise multiplier fields enter at the left node like a drift") {
  std::size_t M = 2;
  int N = 64;
  ParticleEnsemble ens = brownian_ensemble(N, M, 6);
  DriverSpec spec;
  spec.terminal = [](double, double) { return 0.0; };
  MultiplierSet mult;
  mult.eta = {Eigen::MatrixXd::Constant(N, static_cast<Eigen::Index>(M) + 1, 2.0)};
  ConstraintGradients grads;
  grads.psi_x = {[](double, double, double) { return 1.0; }};
  AdjointSolution sol = solve_backward(ens, spec, mult, grads);
  double dt = ens.grid.dt();
  for (int i = 0; i < N; ++i) {
    CHECK(sol.Y(i, 2) == doctest::Approx(0.0));
    CHECK(sol.Y(i, 1) == doctest::Approx(-2.0 * dt).epsilon(1e-12));
    CHECK(sol.Y(i, 0) == doctest::Approx(-4.0 * dt).epsilon(1e-12));
  }
}

TEST_CASE("one-step residual of a computed solution is small") {
  ParticleEnsemble ens = brownian_ensemble(800, 20, 7);
  DriverSpec spec;
  spec.terminal = [](double x, double) { return 2.0 * x + 1.0; };
  spec.driver = [](const DriverArgs& a) { return -0.5 * a.y + 0.1 * a.z; };
  RegressionBasis basis{1};
  AdjointSolution sol = solve_backward(ens, spec, MultiplierSet{}, ConstraintGradients{}, basis);
  CHECK(bsde_residual(ens, spec, MultiplierSet{}, ConstraintGradients{}, sol, basis) < 1e-8);
}

TEST_CASE("shape mismatches are rejected") {
  ParticleEnsemble ens = brownian_ensemble(32, 4, 8);
  DriverSpec spec;
  spec.terminal = [](double, double) { return 0.0; };
  MultiplierSet mult;
  mult.atom_weights = {Eigen::VectorXd::Zero(3)};  // wrong length
  ConstraintGradients grads;
  grads.phi_x = {[](double, double) { return 1.0; }};
  CHECK_THROWS(solve_backward(ens, spec, mult, grads));
  MultiplierSet mult2;  // gradient without a matching weight vector
  CHECK_THROWS(solve_backward(ens, spec, mult2, grads));
}
