#include "mfc/toy_suite.hpp"

#include <algorithm>
#include <sstream>

#include "mfc/problem_file.hpp"

namespace mfc {

namespace {

Eigen::VectorXd point(std::initializer_list<double> vals) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double x : vals) v(i++) = x;
  return v;
}

}  // namespace

std::vector<ToyProblem> toy_suite(const std::string& dir) {
  auto load = [&dir](const std::string& stem) {
    return parse_problem_file(dir + "/" + stem + ".txt");
  };
  std::vector<ToyProblem> suite;
  suite.push_back({"halfline", load("halfline"), point({0.0}), true, true, false, {21}});
  suite.push_back({"equality_quadratic", load("equality_quadratic"), point({0.5, 0.5}),
                   true, true, false, {17, 17}});
  suite.push_back({"abnormal_square", load("abnormal_square"), point({0.0}), false, false,
                   true, {21}});
  suite.push_back({"duplicated_row", load("duplicated_row"), point({1.0}), false, true,
                   false, {17}});
  suite.push_back({"interior_quadratic", load("interior_quadratic"), point({0.25}), true,
                   true, false, {5}});
  suite.push_back({"box_active", load("box_active"), point({0.0}), true, true, false, {11}});
  suite.push_back({"polyhedral_cone", load("polyhedral_cone"), point({0.0, 1.0}), true,
                   true, false, {17, 17}});
  suite.push_back({"upper_face", load("upper_face"), point({1.0}), true, true, false, {5}});
  return suite;
}

std::vector<ToyCaseResult> run_toy_suite(const std::string& dir) {
  std::vector<ToyCaseResult> results;
  for (const auto& tp : toy_suite(dir)) {
    ToyCaseResult r;
    r.name = tp.name;
    r.licq_expected = tp.licq_expected;
    r.mfcq_expected = tp.mfcq_expected;
    std::ostringstream why;

    std::string violated;
    if (!is_feasible(tp.problem, tp.optimum, 1e-8, &violated))
      why << "optimum infeasible (" << violated << "); ";

    RecoveryResult rec = recover_multipliers(tp.problem, tp.optimum);
    FjResidualReport res = evaluate_fj_residual(tp.problem, tp.optimum, rec.certificate);
    r.stationarity = res.stationarity_residual;
    r.slackness_worst = 0.0;
    for (double s : res.slackness_residuals) r.slackness_worst = std::max(r.slackness_worst, s);
    r.normalization_error = res.normalization_error;
    r.r0 = rec.certificate.r0;

    CqReport licq = check_licq(tp.problem, tp.optimum);
    CqReport mfcq = check_mfcq(tp.problem, tp.optimum);
    r.licq = licq.licq;
    r.mfcq = mfcq.mfcq;

    if (r.stationarity >= 1e-6) why << "stationarity " << r.stationarity << "; ";
    if (r.slackness_worst >= 1e-8) why << "slackness " << r.slackness_worst << "; ";
    if (r.normalization_error >= 1e-10)
      why << "normalization " << r.normalization_error << "; ";
    if (!res.dual_feasibility) why << "dual infeasible; ";
    if (r.licq != tp.licq_expected)
      why << "licq " << r.licq << " expected " << tp.licq_expected << "; ";
    if (r.mfcq != tp.mfcq_expected)
      why << "mfcq " << r.mfcq << " expected " << tp.mfcq_expected << "; ";
    if (tp.abnormal_expected && r.r0 > 1e-6) why << "expected abnormal, r0 " << r.r0 << "; ";
    if ((r.licq || r.mfcq) && r.r0 < 0.1)
      why << "cq holds but r0 " << r.r0 << " < 0.1; ";

    r.detail = why.str();
    r.pass = r.detail.empty();
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace mfc
