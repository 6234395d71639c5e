#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "mfc/discrete_bridge.hpp"

using namespace mfc;

namespace {

DeterministicScenario lq_scenario(double b1, double q, double v, double ell, double x0) {
  DeterministicScenario sc;
  sc.drift = [b1](double, double x, double u) { return b1 * x + u; };
  sc.drift_dx = [b1](double, double, double) { return b1; };
  sc.drift_du = [](double, double, double) { return 1.0; };
  sc.running = [q, v](double, double x, double u) { return 0.5 * (q * x * x + v * u * u); };
  sc.running_dx = [q](double, double x, double) { return q * x; };
  sc.running_du = [v](double, double, double u) { return v * u; };
  sc.terminal = [ell](double x) { return 0.5 * ell * x * x; };
  sc.terminal_dx = [ell](double x) { return ell * x; };
  sc.x0 = x0;
  sc.T = 1.0;
  return sc;
}

// costate gain pi(t) for the continuous problem, fine rk4 sweep
std::function<double(double, double)> lq_adjoint(double b1, double q, double v, double ell,
                                                 double T) {
  const std::size_t fine = 4000;
  auto pi = std::make_shared<std::vector<double>>(fine + 1);
  (*pi)[fine] = ell;
  double h = T / static_cast<double>(fine);
  auto rhs = [b1, q, v](double p) { return -2.0 * b1 * p + p * p / v - q; };
  for (std::size_t k = fine; k > 0; --k) {
    double p = (*pi)[k];
    double k1 = rhs(p);
    double k2 = rhs(p - 0.5 * h * k1);
    double k3 = rhs(p - 0.5 * h * k2);
    double k4 = rhs(p - h * k3);
    (*pi)[k - 1] = p - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return [pi, h, fine](double t, double x) {
    double s = t / h;
    std::size_t k = std::min(fine - 1, static_cast<std::size_t>(s));
    double w = s - static_cast<double>(k);
    return ((1.0 - w) * (*pi)[k] + w * (*pi)[k + 1]) * x;
  };
}

}  // namespace

TEST_CASE("transcription layout and dynamics rows") {
  DeterministicScenario sc = lq_scenario(-0.5, 1.0, 1.0, 1.0, 1.0);
  TimeGrid grid(1.0, 4);
  DiscreteControlProblem p = discretize(sc, grid);
  CHECK(p.nlp.dim == 9);  // 5 states + 4 controls
  CHECK(p.x_index(0) == 0);
  CHECK(p.u_index(0) == 5);
  REQUIRE(p.nlp.equalities.size() == 2);
  CHECK(p.nlp.equalities[0].out_dim == 4);
  CHECK(p.nlp.equalities[1].out_dim == 1);
  CHECK(p.nlp.inequalities.empty());

  // a hand-rolled euler path satisfies the dynamics rows exactly
  Eigen::VectorXd z = Eigen::VectorXd::Zero(9);
  z(0) = sc.x0;
  for (std::size_t k = 0; k < 4; ++k) {
    double u = 0.1 * static_cast<double>(k);
    z(p.u_index(k)) = u;
    z(p.x_index(k + 1)) =
        z(p.x_index(k)) + grid.dt() * sc.drift(grid.node(k), z(p.x_index(k)), u);
  }
  Eigen::VectorXd resid = p.nlp.equalities[0].h(z, nullptr);
  CHECK(resid.cwiseAbs().maxCoeff() < 1e-14);
  CHECK(std::abs(p.nlp.equalities[1].h(z, nullptr)(0)) < 1e-14);
}

TEST_CASE("unconstrained qp certificate is exact and transversal") {
  DeterministicScenario sc = lq_scenario(-0.5, 1.0, 1.0, 1.0, 1.0);
  TimeGrid grid(1.0, 10);
  DiscreteControlProblem p = discretize(sc, grid);
  QpSolution qp = solve_discrete_qp(p);
  FjCertificate cert = certificate_from_qp(p, qp);
  CHECK(cert.r0 > 0.1);
  FjResidualReport rep = evaluate_fj_residual(p.nlp, qp.z, cert);
  CHECK(rep.stationarity_residual < 1e-8);
  CHECK(rep.normalization_error < 1e-10);
  // last dynamics multiplier equals the terminal gradient exactly
  double xT = qp.z(10);
  CHECK(qp.dyn_multipliers(9) == doctest::Approx(sc.terminal_dx(xT)).epsilon(1e-10));
}

TEST_CASE("constrained qp respects the control cap with nonnegative multipliers") {
  DeterministicScenario sc = lq_scenario(-0.5, 0.0, 1.0, 0.0, 1.0);
  // reward steering toward u = 1 so the cap u <= 0.3 x binds everywhere
  sc.running = [](double, double, double u) { return 0.5 * (u - 1.0) * (u - 1.0); };
  sc.running_dx = [](double, double, double) { return 0.0; };
  sc.running_du = [](double, double, double u) { return u - 1.0; };
  sc.h = [](double) { return 0.3; };
  TimeGrid grid(1.0, 4);
  DiscreteControlProblem p = discretize(sc, grid);
  REQUIRE(p.nlp.inequalities.size() == 1);
  QpSolution qp = solve_discrete_qp(p);
  for (std::size_t k = 0; k < 4; ++k) {
    double slack = qp.z(p.u_index(k)) - 0.3 * qp.z(p.x_index(k));
    CHECK(slack <= 1e-9);
    // complementarity: either tight or zero multiplier
    CHECK(std::min(std::abs(slack), qp.ineq_multipliers(static_cast<Eigen::Index>(k))) <
          1e-7);
  }
  CHECK(qp.ineq_multipliers.minCoeff() >= -1e-9);
  FjCertificate cert = certificate_from_qp(p, qp);
  FjResidualReport rep = evaluate_fj_residual(p.nlp, qp.z, cert);
  CHECK(rep.stationarity_residual < 1e-8);
  CHECK(rep.dual_feasibility);
}

TEST_CASE("discrete multipliers track the continuous adjoint at first order") {
  DeterministicScenario sc = lq_scenario(-0.5, 1.0, 1.0, 1.0, 1.0);
  auto adjoint = lq_adjoint(-0.5, 1.0, 1.0, 1.0, 1.0);
  ConvergenceStudy study =
      convergence_study(sc, {1.0 / 10, 1.0 / 20, 1.0 / 40}, adjoint);
  REQUIRE(study.rows.size() == 3);
  CHECK(study.slope_valid);
  CHECK(study.slope > 0.8);
  CHECK(study.slope < 1.2);
  CHECK(study.rows[2].sup_error < study.rows[0].sup_error);
}

TEST_CASE("comparison reports both node conventions") {
  DeterministicScenario sc = lq_scenario(-0.5, 1.0, 1.0, 1.0, 1.0);
  auto adjoint = lq_adjoint(-0.5, 1.0, 1.0, 1.0, 1.0);
  TimeGrid grid(1.0, 20);
  DiscreteControlProblem p = discretize(sc, grid);
  QpSolution qp = solve_discrete_qp(p);
  FjCertificate cert = certificate_from_qp(p, qp);
  MultiplierComparison cmp =
      compare_multipliers(cert, adjoint, qp.z.head(21), grid, sc);
  CHECK(cmp.discrete.size() == 20);
  CHECK(cmp.sup_error > 0.0);
  CHECK(cmp.sup_error_right > 0.0);
  // discrete multipliers sit at the right node, so that error is smaller
  CHECK(cmp.sup_error_right < cmp.sup_error);
  CHECK(cmp.scaling_factor > 0.0);
  CHECK(cmp.transversality_error < 1e-10);
}

TEST_CASE("abnormal certificates cannot be compared") {
  DeterministicScenario sc = lq_scenario(-0.5, 1.0, 1.0, 1.0, 1.0);
  auto adjoint = lq_adjoint(-0.5, 1.0, 1.0, 1.0, 1.0);
  TimeGrid grid(1.0, 4);
  FjCertificate cert;
  cert.r0 = 0.0;
  cert.mus = {Eigen::VectorXd::Ones(4), Eigen::VectorXd::Ones(1)};
  CHECK_THROWS(compare_multipliers(cert, adjoint, Eigen::VectorXd::Zero(5), grid, sc));
}

TEST_CASE("active-set enumeration refuses oversized horizons") {
  DeterministicScenario sc = lq_scenario(-0.5, 1.0, 1.0, 1.0, 1.0);
  sc.h = [](double) { return 0.5; };
  TimeGrid grid(1.0, 12);
  DiscreteControlProblem p = discretize(sc, grid);
  CHECK_THROWS(solve_discrete_qp(p));
}
