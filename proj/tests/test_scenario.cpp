#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mfc/config_text.hpp"
#include "mfc/csv.hpp"
#include "mfc/emit.hpp"
#include "mfc/lq_mfc.hpp"
#include "mfc/problem_file.hpp"
#include "mfc/scenario.hpp"

using namespace mfc;

namespace {

const char* kScenario = R"(# benchmark run
mode = lq-unconstrained

[model]
b1 = -0.5
b2 = 0.2
s1 = 0.2
q = 1
v = 1
ell = 1
T = 1
m0 = 1
v0 = 0.04

[run]
N = 500
M = 20
seed = 3
damping = 0.25
)";

std::string slurp(const std::string& path) { return read_text_file(path); }

}  // namespace

TEST_CASE("scenario round trip") {
  Scenario sc = parse_scenario_text(kScenario);
  CHECK(sc.mode == "lq-unconstrained");
  CHECK(sc.model.b1 == -0.5);
  CHECK(sc.model.b2 == 0.2);
  CHECK(sc.model.v0 == 0.04);
  CHECK(sc.N == 500);
  CHECK(sc.M == 20);
  CHECK(sc.seed == 3);
  CHECK(sc.damping == 0.25);
  finalize_scenario(sc);
  CHECK(!sc.model.constrained);
}

TEST_CASE("unknown keys are rejected with line and key") {
  std::string bad = std::string(kScenario) + "\n[model]\nbogus = 1\n";
  try {
    parse_scenario_text(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.key() == "bogus");
    CHECK(e.line() > 20);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }
}

TEST_CASE("malformed values and sections are parse errors") {
  CHECK_THROWS_AS(parse_scenario_text("mode = lq-unconstrained\n[model]\nb1 = abc\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_scenario_text("mode = warp\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario_text("mode = mfg\n[mystery]\nx = 1\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario_text("[model\nb1 = 1\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario_text("[run]\nN = 1\n"), ParseError);  // N too small
  CHECK_THROWS_AS(parse_scenario_text("just text\n"), ParseError);
}

TEST_CASE("missing mode is rejected") {
  CHECK_THROWS_AS(parse_scenario_text("[model]\nb1 = 1\n"), ParseError);
}

TEST_CASE("overrides reuse the scenario grammar") {
  Scenario sc = parse_scenario_text(kScenario);
  apply_override(sc, "run.seed=7");
  apply_override(sc, "model.q=2.5");
  apply_override(sc, "mode=mfg");
  CHECK(sc.seed == 7);
  CHECK(sc.model.q == 2.5);
  CHECK(sc.mode == "mfg");
  CHECK_THROWS_AS(apply_override(sc, "run.bogus=1"), ParseError);
  CHECK_THROWS_AS(apply_override(sc, "run.seed"), ParseError);
}

TEST_CASE("constrained modes demand the constraint block") {
  Scenario sc = parse_scenario_text(kScenario);
  apply_override(sc, "mode=lq-constrained");
  CHECK_THROWS_AS(finalize_scenario(sc), ParseError);
  apply_override(sc, "constraint.h=0.5");
  finalize_scenario(sc);
  CHECK(sc.model.constrained);
  CHECK(sc.model.h(0.3) == 0.5);
}

TEST_CASE("dt lists parse as comma-separated numbers") {
  Scenario sc = parse_scenario_text(kScenario);
  apply_override(sc, "run.dt_list=0.1, 0.05,0.025");
  REQUIRE(sc.dt_list.size() == 3);
  CHECK(sc.dt_list[1] == 0.05);
  CHECK_THROWS_AS(apply_override(sc, "run.dt_list=0.1,oops"), ParseError);
}

TEST_CASE("problem files parse polynomials with analytic gradients") {
  NlpProblem p = parse_problem_text(R"(
dim = 2
[objective]
term = 1 2 0
term = 2 1 1
term = -3 0 0
[box]
lower = -1 -1
upper = 1 1
)");
  Eigen::VectorXd x(2);
  x << 0.5, -0.25;
  Eigen::VectorXd g;
  // f = x1^2 + 2 x1 x2 - 3
  CHECK(p.objective(x, &g) == doctest::Approx(0.25 - 0.25 - 3.0));
  CHECK(g(0) == doctest::Approx(2.0 * 0.5 + 2.0 * -0.25));
  CHECK(g(1) == doctest::Approx(2.0 * 0.5));
}

TEST_CASE("problem file errors carry the offending line") {
  CHECK_THROWS_AS(parse_problem_text("dim = 0\n"), ParseError);
  CHECK_THROWS_AS(parse_problem_text("[objective]\nterm = 1 1\n"), ParseError);  // no dim
  CHECK_THROWS_AS(parse_problem_text("dim = 1\n[objective]\nterm = 1 1 1\n"), ParseError);
  CHECK_THROWS_AS(parse_problem_text("dim = 1\n[objective]\nterm = 1 -2\n"), ParseError);
  CHECK_THROWS_AS(
      parse_problem_text("dim = 1\n[objective]\nterm = 1 1\n[ineq.0]\ncone = moebius\nrow = 1 1\n"),
      ParseError);
  CHECK_THROWS_AS(
      parse_problem_text("dim = 1\n[objective]\nterm = 1 1\n[box]\nlower = 0\n"), ParseError);
}

TEST_CASE("csv emitters write the documented schemas byte-identically") {
  LqModel model;
  model.b1 = -0.5;
  model.s1 = 0.2;
  TimeGrid grid(1.0, 5);
  ControlPolicy policy =
      ControlPolicy::feedback([](double, double x, double) { return -0.2 * x; });
  ParticleEnsemble ens =
      simulate_forward(model.dynamics(), policy, grid, 16, 4, InitialLaw{1.0, 0.04});

  std::string m1 = "/tmp/mfc_test_moments1.csv", m2 = "/tmp/mfc_test_moments2.csv";
  emit_moments_csv(ens, m1);
  emit_moments_csv(ens, m2);
  std::string text = slurp(m1);
  CHECK(text == slurp(m2));
  CHECK(text.rfind("step,t,mean_x,var_x,mean_a\n", 0) == 0);
  CHECK(text.find("\r") == std::string::npos);

  std::string pp = "/tmp/mfc_test_paths.csv";
  emit_paths_csv(ens, pp, 8);
  CHECK(slurp(pp).rfind("step,t,particle,x,a\n", 0) == 0);

  DriverSpec spec;
  spec.terminal = [](double x, double) { return x; };
  AdjointSolution sol = solve_backward(ens, spec, MultiplierSet{}, ConstraintGradients{});
  std::string ap = "/tmp/mfc_test_adjoint.csv";
  emit_adjoint_csv(ens, sol, ap, 8);
  CHECK(slurp(ap).rfind("step,t,particle,y,z\n", 0) == 0);

  std::remove(m1.c_str());
  std::remove(m2.c_str());
  std::remove(pp.c_str());
  std::remove(ap.c_str());
}

TEST_CASE("csv numbers round-trip through shortest formatting") {
  CHECK(csv::fmt(0.1) == "0.1");
  CHECK(csv::fmt(1.0) == "1");
  double v = 0.1 + 0.2;
  double back = 0.0;
  std::sscanf(csv::fmt(v).c_str(), "%lf", &back);
  CHECK(back == v);
}
