#include "mfc/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mfc/discrete_bridge.hpp"
#include "mfc/lq_mfc.hpp"
#include "mfc/mf_bsde.hpp"
#include "mfc/rng.hpp"
#include "mfc/toy_suite.hpp"

namespace mfc {

namespace {

LqModel benchmark_model() {
  LqModel m;
  m.b1 = -0.5;
  m.b2 = 0.2;
  m.b3 = 1.0;
  m.b4 = 0.0;
  m.s1 = 0.2;
  m.s2 = m.s3 = m.s4 = 0.0;
  m.q = 1.0;
  m.v = 1.0;
  m.ell = 1.0;
  m.T = 1.0;
  m.m0 = 1.0;
  m.v0 = 0.04;
  return m;
}

double rms(const Eigen::MatrixXd& m) {
  return std::sqrt(m.squaredNorm() / static_cast<double>(m.size()));
}

struct Sizes {
  int mc_large;   // criteria 1 and 3
  int mc_medium;  // criteria 7 and 9 (coupled)
  int mc_small;   // criteria 2, 6, 8 and the decoupled game
};

CriterionResult lq_cross_validation(const Sizes& sz) {
  CriterionResult r{1, "unconstrained lq cross-validation", false, "", 0.0};
  LqModel model = benchmark_model();
  RiccatiSolution ric = riccati_solve(model, TimeGrid(model.T, 1000));
  LqOracle oracle = lq_oracle_discrete(model, 1e-3);
  LqSolveReport mc = solve_unconstrained(model, TimeGrid(model.T, 100), sz.mc_large, 1);
  double ric_vs_dp = std::abs(ric.value - oracle.value) / std::abs(oracle.value);
  double mc_vs_ric = std::abs(mc.cost - ric.value) / std::abs(ric.value);
  std::ostringstream d;
  d << "mc " << mc.cost << " ricatti " << ric.value << " dp " << oracle.value
    << "; mc rel " << mc_vs_ric << " (<0.01), ode rel " << ric_vs_dp << " (<0.005)";
  r.detail = d.str();
  r.pass = mc.converged && mc_vs_ric < 0.01 && ric_vs_dp < 0.005;
  return r;
}

CriterionResult degenerate_cost(const Sizes& sz) {
  CriterionResult r{2, "degenerate zero-cost case", false, "", 0.0};
  LqModel model = benchmark_model();
  model.q = 0.0;
  model.ell = 0.0;
  LqSolveReport rep = solve_unconstrained(model, TimeGrid(model.T, 50), sz.mc_small, 1);
  double alpha_rms = rms(rep.ensemble.controls);
  double y_rms = rms(rep.adjoint.Y);
  std::ostringstream d;
  d << "iterations " << rep.iterations << " (==1), alpha rms " << alpha_rms
    << ", y rms " << y_rms << " (<1e-10)";
  r.detail = d.str();
  r.pass = rep.iterations == 1 && alpha_rms < 1e-10 && y_rms < 1e-10;
  return r;
}

CriterionResult constrained_lq(const Sizes& sz) {
  CriterionResult r{3, "constrained lq feasibility and slackness", false, "", 0.0};
  TimeGrid grid(1.0, 100);
  LqModel unc = benchmark_model();
  LqModel con = benchmark_model();
  con.constrained = true;
  con.h = [](double) { return 0.5; };
  LqSolveReport u = solve_unconstrained(unc, grid, sz.mc_large, 1);
  LqSolveReport c = solve_constrained(con, grid, sz.mc_large, 1);

  double eta_min = 0.0;
  double enorm = 0.0;
  if (!c.mult.eta.empty()) {
    eta_min = c.mult.eta[0].minCoeff();
    enorm = eta_norm(c.mult.eta[0], grid);
  }
  double slack = c.smp.slackness_integral.empty() ? 0.0 : c.smp.slackness_integral[0];
  double cost_floor = u.cost - 2.0 * (u.ci_halfwidth + c.ci_halfwidth);
  std::ostringstream d;
  d << "feasibility worst " << c.feasibility_worst << " (<=1e-12), slackness " << slack
    << " (<" << 1e-3 * (1.0 + enorm) << "), eta min " << eta_min
    << " (>=0), cost " << c.cost << " vs floor " << cost_floor;
  r.detail = d.str();
  r.pass = c.converged && c.feasibility_worst <= 1e-12 &&
           slack < 1e-3 * (1.0 + enorm) && eta_min >= 0.0 && c.cost >= cost_floor;
  return r;
}

CriterionResult fj_suite(const std::string& problems_dir) {
  CriterionResult r{4, "fritz-john certificate suite", false, "", 0.0};
  auto results = run_toy_suite(problems_dir);
  std::ostringstream d;
  bool all = true;
  int n = 0;
  for (const auto& c : results) {
    all = all && c.pass;
    ++n;
    if (!c.pass) d << c.name << ": " << c.detail << " ";
  }
  if (all) d << n << " problems, all certificates and cq verdicts as expected";
  r.detail = d.str();
  r.pass = all && n == 8;
  return r;
}

CriterionResult bridge_convergence() {
  CriterionResult r{5, "adjoint-as-multiplier bridge", false, "", 0.0};
  DeterministicScenario sc;
  double b1 = -0.5, q = 1.0, v = 1.0, ell = 1.0;
  sc.drift = [b1](double, double x, double u) { return b1 * x + u; };
  sc.drift_dx = [b1](double, double, double) { return b1; };
  sc.drift_du = [](double, double, double) { return 1.0; };
  sc.running = [q, v](double, double x, double u) { return 0.5 * (q * x * x + v * u * u); };
  sc.running_dx = [q](double, double x, double) { return q * x; };
  sc.running_du = [v](double, double, double u) { return v * u; };
  sc.terminal = [ell](double x) { return 0.5 * ell * x * x; };
  sc.terminal_dx = [ell](double x) { return ell * x; };
  sc.x0 = 1.0;
  sc.T = 1.0;

  // reference costate gain: pi' = -2 b1 pi + pi^2 / v - q, pi(T) = ell
  const std::size_t fine = 4000;
  std::vector<double> pi(fine + 1);
  pi[fine] = ell;
  double hstep = sc.T / static_cast<double>(fine);
  auto rhs = [&](double p) { return -2.0 * b1 * p + p * p / v - q; };
  for (std::size_t k = fine; k > 0; --k) {
    double p = pi[k];
    double k1 = rhs(p);
    double k2 = rhs(p - 0.5 * hstep * k1);
    double k3 = rhs(p - 0.5 * hstep * k2);
    double k4 = rhs(p - hstep * k3);
    pi[k - 1] = p - hstep / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  auto adjoint = [&, hstep](double t, double x) {
    double s = t / hstep;
    std::size_t k = std::min(fine - 1, static_cast<std::size_t>(s));
    double w = s - static_cast<double>(k);
    return ((1.0 - w) * pi[k] + w * pi[k + 1]) * x;
  };

  ConvergenceStudy study =
      convergence_study(sc, {1.0 / 10, 1.0 / 20, 1.0 / 40, 1.0 / 80}, adjoint);

  TimeGrid grid(sc.T, 80);
  DiscreteControlProblem p = discretize(sc, grid);
  QpSolution qp = solve_discrete_qp(p);
  FjCertificate cert = certificate_from_qp(p, qp);
  Eigen::VectorXd x_nodes = qp.z.head(81);
  MultiplierComparison cmp = compare_multipliers(cert, adjoint, x_nodes, grid, sc);
  double gT = sc.terminal_dx(x_nodes(80));
  double trans_rel = cmp.transversality_error / std::abs(gT);

  std::ostringstream d;
  d << "order " << study.slope << " (in [0.8,1.2]), transversality rel " << trans_rel
    << " (<0.05), errors";
  for (const auto& row : study.rows) d << " " << row.sup_error;
  r.detail = d.str();
  r.pass = study.slope_valid && study.slope >= 0.8 && study.slope <= 1.2 &&
           trans_rel < 0.05;
  return r;
}

CriterionResult frechet_check(const Sizes& sz) {
  CriterionResult r{6, "directional derivative of the cost", false, "", 0.0};
  LqModel model = benchmark_model();
  TimeGrid grid(model.T, 100);
  int N = sz.mc_small;
  Eigen::MatrixXd base = Eigen::MatrixXd::Zero(N, static_cast<Eigen::Index>(grid.steps) + 1);
  InitialLaw law{model.m0, model.v0};
  double worst = 0.0;
  for (int dir = 0; dir < 5; ++dir) {
    Eigen::MatrixXd K(N, static_cast<Eigen::Index>(grid.steps) + 1);
    for (int i = 0; i < N; ++i)
      for (Eigen::Index k = 0; k < K.cols(); ++k)
        K(i, k) = rng::normal(777 + static_cast<std::uint64_t>(dir),
                              static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k));
    DerivativeCheckReport rep = directional_derivative_check(
        model.dynamics(), model.running_cost(), model.terminal_cost(), base, K, grid, N, 1,
        law, {1e-4});
    worst = std::max(worst, rep.rel_error[0]);
  }
  std::ostringstream d;
  d << "worst relative error over 5 directions " << worst << " (<1e-4)";
  r.detail = d.str();
  r.pass = worst < 1e-4;
  return r;
}

CriterionResult picard_contraction(const Sizes& sz) {
  CriterionResult r{7, "law-freezing fixed point", false, "", 0.0};
  LqModel model = benchmark_model();
  TimeGrid grid(model.T, 50);
  InitialLaw law{model.m0, model.v0};
  ControlPolicy policy = ControlPolicy::feedback(
      [](double, double x, double mx) { return -0.4 * x - 0.1 * mx; });
  auto [ens, log] =
      picard_iterate(model.dynamics(), policy, grid, sz.mc_medium, 1, law, 30, 1e-13);
  ParticleEnsemble direct =
      simulate_forward(model.dynamics(), policy, grid, sz.mc_medium, 1, law);
  double gap = rms(ens.states - direct.states);
  bool monotone = log.distances.size() >= 2;
  for (std::size_t i = 2; i < log.distances.size(); ++i)
    monotone = monotone && log.distances[i] < log.distances[i - 1];
  std::ostringstream d;
  d << log.distances.size() << " sweeps, monotone from sweep 2: " << monotone
    << ", gap to direct coupling " << gap << " (<1e-10)";
  r.detail = d.str();
  r.pass = log.converged && monotone && gap < 1e-10;
  return r;
}

CriterionResult martingale_identity(const Sizes& sz) {
  CriterionResult r{8, "backward solver martingale identity", false, "", 0.0};
  MeanFieldDynamics dyn;
  auto zero = [](double, double, double, double, double) { return 0.0; };
  auto one = [](double, double, double, double, double) { return 1.0; };
  dyn.drift = zero;
  dyn.diffusion = one;
  dyn.drift_dx = dyn.drift_du = dyn.drift_dmx = dyn.drift_dma = zero;
  dyn.diff_dx = dyn.diff_du = dyn.diff_dmx = dyn.diff_dma = zero;
  TimeGrid grid(1.0, 50);
  int N = sz.mc_small;
  ControlPolicy policy = ControlPolicy::open_loop(
      Eigen::MatrixXd::Zero(N, static_cast<Eigen::Index>(grid.steps) + 1));
  ParticleEnsemble ens = simulate_forward(dyn, policy, grid, N, 1, InitialLaw{0.0, 0.0});
  DriverSpec spec;
  spec.terminal = [](double x, double) { return x; };
  AdjointSolution sol = solve_backward(ens, spec, MultiplierSet{}, ConstraintGradients{});
  double y_err = (sol.Y - ens.states).cwiseAbs().maxCoeff();
  double z_err = (sol.Z.array() - 1.0).abs().maxCoeff();
  std::ostringstream d;
  d << "max |Y - X| " << y_err << ", max |Z - 1| " << z_err << " (<1e-8)";
  r.detail = d.str();
  r.pass = y_err < 1e-8 && z_err < 1e-8;
  return r;
}

CriterionResult mfg_consistency(const Sizes& sz) {
  CriterionResult r{9, "mean-field game consistency", false, "", 0.0};
  TimeGrid grid(1.0, 50);

  LqModel decoupled = benchmark_model();
  decoupled.b2 = decoupled.b4 = decoupled.s2 = decoupled.s4 = 0.0;
  decoupled.ell = 0.0;
  MfgReport dec = mfg_solve(decoupled, grid, sz.mc_small, 1, 20, 1e-3);

  MfgReport coup = mfg_solve(benchmark_model(), grid, sz.mc_medium, 1, 20, 1e-3);
  double final_res = coup.residual_history.empty() ? -1.0 : coup.residual_history.back();

  std::ostringstream d;
  d << "decoupled outer iterations " << dec.outer_iterations << " (==1), residual "
    << (dec.residual_history.empty() ? -1.0 : dec.residual_history[0])
    << "; coupled outer iterations " << coup.outer_iterations << " residual " << final_res
    << " (<1e-3)";
  r.detail = d.str();
  r.pass = dec.converged && dec.outer_iterations == 1 &&
           !dec.residual_history.empty() && dec.residual_history[0] == 0.0 &&
           coup.converged && coup.outer_iterations <= 20 && final_res < 1e-3;
  return r;
}

}  // namespace

std::string AcceptanceSummary::to_json() const {
  nlohmann::json j;
  j["suite"] = suite;
  j["all_pass"] = all_pass;
  j["seconds"] = seconds;
  j["criteria"] = nlohmann::json::array();
  for (const auto& r : results)
    j["criteria"].push_back({{"id", r.id},
                             {"name", r.name},
                             {"pass", r.pass},
                             {"detail", r.detail},
                             {"seconds", r.seconds}});
  return j.dump(2);
}

AcceptanceSummary run_acceptance(const std::string& suite, const std::string& problems_dir) {
  if (suite != "fast" && suite != "full")
    throw std::invalid_argument("unknown acceptance suite '" + suite + "'");
  Sizes sz = suite == "full" ? Sizes{50000, 10000, 4000} : Sizes{12000, 4000, 2000};

  AcceptanceSummary summary;
  summary.suite = suite;
  auto t0 = std::chrono::steady_clock::now();

  auto timed = [&](CriterionResult (*fn)(const Sizes&)) {
    auto a = std::chrono::steady_clock::now();
    CriterionResult r = fn(sz);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - a).count();
    summary.results.push_back(std::move(r));
  };
  auto push = [&](CriterionResult r, std::chrono::steady_clock::time_point a) {
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - a).count();
    summary.results.push_back(std::move(r));
  };

  timed(lq_cross_validation);
  if (suite == "full" && !summary.results.empty() && summary.results[0].seconds >= 60.0) {
    summary.results[0].pass = false;
    summary.results[0].detail += "; runtime budget 60 s exceeded";
  }
  timed(degenerate_cost);
  {
    auto a = std::chrono::steady_clock::now();
    CriterionResult r = constrained_lq(sz);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - a).count();
    if (suite == "full" && r.seconds >= 120.0) {
      r.pass = false;
      r.detail += "; runtime budget 120 s exceeded";
    }
    summary.results.push_back(std::move(r));
  }
  {
    auto a = std::chrono::steady_clock::now();
    push(fj_suite(problems_dir), a);
  }
  {
    auto a = std::chrono::steady_clock::now();
    push(bridge_convergence(), a);
  }
  timed(frechet_check);
  timed(picard_contraction);
  timed(martingale_identity);
  timed(mfg_consistency);

  summary.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  summary.all_pass = true;
  for (const auto& r : summary.results) summary.all_pass = summary.all_pass && r.pass;
  return summary;
}

}  // namespace mfc
