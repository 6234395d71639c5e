#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mfc/fj.hpp"
#include "mfc/problem_file.hpp"
#include "mfc/toy_suite.hpp"

using namespace mfc;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> vals) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double x : vals) v(i++) = x;
  return v;
}

NlpProblem halfline() {
  return parse_problem_file(std::string(MFC_PROBLEMS_DIR) + "/halfline.txt");
}

}  // namespace

TEST_CASE("toy suite: brute force search lands on the hand optima") {
  for (const auto& tp : toy_suite(MFC_PROBLEMS_DIR)) {
    CAPTURE(tp.name);
    Eigen::VectorXd found = brute_force_minimize(tp.problem, tp.brute_grid);
    CHECK((found - tp.optimum).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("toy suite: certificates and cq verdicts all grade as expected") {
  auto results = run_toy_suite(MFC_PROBLEMS_DIR);
  CHECK(results.size() == 8);
  for (const auto& r : results) {
    CAPTURE(r.name);
    CAPTURE(r.detail);
    CHECK(r.pass);
  }
}

TEST_CASE("hand certificate on the halfline problem") {
  NlpProblem p = halfline();
  Eigen::VectorXd x = vec({0.0});
  FjCertificate cert;
  cert.r0 = 0.5;
  cert.lambdas = {vec({0.5})};
  cert.xi = vec({0.0});
  FjResidualReport rep = evaluate_fj_residual(p, x, cert);
  CHECK(rep.stationarity_residual == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rep.normalization_error == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rep.dual_feasibility);
  CHECK(rep.slackness_residuals[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(check_kkt(p, x, cert));
}

TEST_CASE("negative multiplier breaks dual feasibility") {
  NlpProblem p = halfline();
  FjCertificate cert;
  cert.r0 = 0.5;
  cert.lambdas = {vec({-0.5})};
  cert.xi = vec({0.0});
  FjResidualReport rep = evaluate_fj_residual(p, vec({0.0}), cert);
  CHECK(!rep.dual_feasibility);
}

TEST_CASE("abnormal problem has no kkt certificate") {
  NlpProblem p = parse_problem_file(std::string(MFC_PROBLEMS_DIR) + "/abnormal_square.txt");
  RecoveryResult rec = recover_multipliers(p, vec({0.0}));
  CHECK(rec.achieved_residual < 1e-8);
  CHECK(rec.certificate.r0 < 1e-8);
  CHECK(!check_kkt(p, vec({0.0}), rec.certificate));
}

TEST_CASE("active set band scales with the constraint size") {
  NlpProblem p = parse_problem_file(std::string(MFC_PROBLEMS_DIR) + "/upper_face.txt");
  CHECK(active_inequalities(p, vec({1.0})) == std::vector<int>{0});
  CHECK(active_inequalities(p, vec({1.0 - 1e-8})) == std::vector<int>{0});
  CHECK(active_inequalities(p, vec({0.5})).empty());
}

TEST_CASE("feasibility failures name the violated block") {
  NlpProblem p = halfline();
  std::string violated;
  CHECK(is_feasible(p, vec({0.5})));
  CHECK(!is_feasible(p, vec({-0.5}), 1e-8, &violated));
  CHECK(violated == "ineq.0");
  CHECK(!is_feasible(p, vec({2.0}), 1e-8, &violated));
  CHECK(violated == "box");
}

TEST_CASE("equality-only recovery is exact") {
  NlpProblem p =
      parse_problem_file(std::string(MFC_PROBLEMS_DIR) + "/equality_quadratic.txt");
  RecoveryResult rec = recover_multipliers(p, vec({0.5, 0.5}));
  CHECK(rec.converged);
  CHECK(rec.achieved_residual < 1e-10);
  CHECK(rec.certificate.r0 > 0.1);
  FjResidualReport rep = evaluate_fj_residual(p, vec({0.5, 0.5}), rec.certificate);
  CHECK(rep.stationarity_residual < 1e-10);
  CHECK(rep.normalization_error < 1e-12);
}

TEST_CASE("licq reports the jacobian rank") {
  NlpProblem dup = parse_problem_file(std::string(MFC_PROBLEMS_DIR) + "/duplicated_row.txt");
  CqReport r = check_licq(dup, vec({1.0}));
  CHECK(!r.licq);
  CHECK(r.jacobian_rows == 2);
  CHECK(r.jacobian_rank == 1);
  CHECK(r.active_set == std::vector<int>{0, 1});
}

TEST_CASE("mfcq produces a strict witness inside the box") {
  NlpProblem p = halfline();
  CqReport r = check_mfcq(p, vec({0.0}));
  REQUIRE(r.mfcq);
  REQUIRE(r.mfcq_witness.size() == 1);
  // witness direction must strictly decrease the active constraint -x
  CHECK(r.mfcq_witness(0) > 0.0);
  CHECK(p.feasible_set.contains(r.mfcq_witness));
}

TEST_CASE("certificate norm accounting") {
  FjCertificate cert;
  cert.r0 = 0.25;
  cert.lambdas = {vec({0.3, 0.4})};  // norm 0.5
  cert.mus = {vec({0.25})};
  CHECK(cert.norm_sum() == doctest::Approx(1.0));
}

TEST_CASE("brute force rejects unbounded or high-dimensional boxes") {
  NlpProblem p = halfline();
  CHECK_THROWS(brute_force_minimize(p, {21, 21}));  // wrong grid arity
}
