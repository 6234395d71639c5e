#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "mfc/acceptance.hpp"
#include "mfc/config_text.hpp"
#include "mfc/csv.hpp"
#include "mfc/emit.hpp"
#include "mfc/discrete_bridge.hpp"
#include "mfc/lq_mfc.hpp"
#include "mfc/scenario.hpp"
#include "mfc/toy_suite.hpp"

namespace {

using nlohmann::json;

std::string hash_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

json smp_json(const mfc::SmpReport& smp) { return json::parse(smp.to_json()); }

json lq_report_json(const mfc::LqSolveReport& rep) {
  json j;
  j["cost"] = rep.cost;
  j["ci_halfwidth"] = rep.ci_halfwidth;
  j["iterations"] = rep.iterations;
  j["converged"] = rep.converged;
  j["last_update_rms"] = rep.last_update_rms;
  j["feasibility_worst"] = rep.feasibility_worst;
  j["smp"] = smp_json(rep.smp);
  return j;
}

constexpr int kDumpParticles = 32;

int run_scenario(mfc::Scenario& sc, const std::string& out_dir, bool verbose) {
  std::filesystem::create_directories(out_dir);
  mfc::finalize_scenario(sc);

  json report;
  report["mode"] = sc.mode;
  report["scenario_hash"] = hash_hex(sc.source_text);
  json artifacts = json::array();
  auto t0 = std::chrono::steady_clock::now();
  bool converged = true;

  mfc::TimeGrid grid(sc.model.T, sc.M);

  if (sc.mode == "lq-unconstrained" || sc.mode == "lq-constrained") {
    mfc::LqSolveReport rep =
        sc.mode == "lq-constrained"
            ? mfc::solve_constrained(sc.model, grid, sc.N, sc.seed, sc.max_iter, sc.damping)
            : mfc::solve_unconstrained(sc.model, grid, sc.N, sc.seed, sc.max_iter,
                                       sc.damping);
    converged = rep.converged;
    report["solve"] = lq_report_json(rep);
    if (sc.mode == "lq-unconstrained") {
      mfc::RiccatiSolution ric = mfc::riccati_solve(sc.model, mfc::TimeGrid(sc.model.T, 1000));
      report["riccati_value"] = ric.value;
      report["riccati_rel_error"] = std::abs(rep.cost - ric.value) / std::abs(ric.value);
    }
    std::string mpath = join_path(out_dir, "moments.csv");
    std::string ppath = join_path(out_dir, "paths.csv");
    std::string apath = join_path(out_dir, "adjoint.csv");
    mfc::emit_moments_csv(rep.ensemble, mpath);
    mfc::emit_paths_csv(rep.ensemble, ppath, kDumpParticles);
    mfc::emit_adjoint_csv(rep.ensemble, rep.adjoint, apath, kDumpParticles);
    artifacts.push_back(mpath);
    artifacts.push_back(ppath);
    artifacts.push_back(apath);
  } else if (sc.mode == "mfg") {
    mfc::MfgReport rep =
        mfc::mfg_solve(sc.model, grid, sc.N, sc.seed, sc.outer_iter, sc.tol, sc.damping);
    converged = rep.converged;
    report["solve"] = lq_report_json(rep.inner);
    report["outer_iterations"] = rep.outer_iterations;
    report["residual_history"] = rep.residual_history;
    std::string mpath = join_path(out_dir, "moments.csv");
    mfc::emit_moments_csv(rep.inner.ensemble, mpath);
    artifacts.push_back(mpath);
  } else if (sc.mode == "bridge") {
    mfc::DeterministicScenario det;
    const mfc::LqModel m = sc.model;
    det.drift = [m](double, double x, double u) { return m.b1 * x + m.b3 * u; };
    det.drift_dx = [m](double, double, double) { return m.b1; };
    det.drift_du = [m](double, double, double) { return m.b3; };
    det.running = [m](double, double x, double u) {
      return 0.5 * (m.q * x * x + m.v * u * u);
    };
    det.running_dx = [m](double, double x, double) { return m.q * x; };
    det.running_du = [m](double, double, double u) { return m.v * u; };
    det.terminal = [m](double x) { return 0.5 * m.ell * x * x; };
    det.terminal_dx = [m](double x) { return m.ell * x; };
    det.x0 = m.m0;
    det.T = m.T;
    if (sc.model.constrained) det.h = sc.model.h;

    std::vector<double> dts = sc.dt_list;
    if (dts.empty()) {
      // constrained transcriptions enumerate active sets, so keep those grids coarse
      if (det.h) dts = {1.0 / 4, 1.0 / 6, 1.0 / 8, 1.0 / 10};
      else dts = {1.0 / 10, 1.0 / 20, 1.0 / 40, 1.0 / 80};
    }

    // reference costate from a fine Riccati sweep of the same model
    const std::size_t fine = 4000;
    std::vector<double> pi(fine + 1);
    pi[fine] = m.ell;
    double hstep = m.T / static_cast<double>(fine);
    auto rhs = [&m](double p) {
      return -2.0 * m.b1 * p + m.b3 * m.b3 * p * p / m.v - m.q;
    };
    for (std::size_t k = fine; k > 0; --k) {
      double p = pi[k];
      double k1 = rhs(p);
      double k2 = rhs(p - 0.5 * hstep * k1);
      double k3 = rhs(p - 0.5 * hstep * k2);
      double k4 = rhs(p - hstep * k3);
      pi[k - 1] = p - hstep / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    auto adjoint = [pi, hstep, fine](double t, double x) {
      double s = t / hstep;
      std::size_t k = std::min(fine - 1, static_cast<std::size_t>(s));
      double w = s - static_cast<double>(k);
      return ((1.0 - w) * pi[k] + w * pi[k + 1]) * x;
    };

    mfc::ConvergenceStudy study = mfc::convergence_study(det, dts, adjoint);
    report["order_estimate"] = study.slope;
    report["order_valid"] = study.slope_valid;
    std::string cpath = join_path(out_dir, "comparison.csv");
    mfc::csv::Writer w(cpath);
    w.row({"dt", "sup_error", "order_estimate"});
    for (const auto& row : study.rows)
      w.row({mfc::csv::fmt(row.dt), mfc::csv::fmt(row.sup_error),
             mfc::csv::fmt(study.slope)});
    artifacts.push_back(cpath);
  } else if (sc.mode == "fj-suite") {
    auto results = mfc::run_toy_suite(sc.problems);
    json cases = json::array();
    bool all = true;
    for (const auto& c : results) {
      all = all && c.pass;
      cases.push_back({{"name", c.name},
                       {"pass", c.pass},
                       {"stationarity", c.stationarity},
                       {"slackness_worst", c.slackness_worst},
                       {"normalization_error", c.normalization_error},
                       {"r0", c.r0},
                       {"licq", c.licq},
                       {"mfcq", c.mfcq},
                       {"detail", c.detail}});
    }
    report["cases"] = cases;
    converged = all;
  } else if (sc.mode == "mvsde-check") {
    mfc::ControlPolicy policy =
        mfc::ControlPolicy::feedback([](double, double, double) { return 0.0; });
    mfc::InitialLaw law{sc.model.m0, sc.model.v0};
    auto [ens, log] = mfc::picard_iterate(sc.model.dynamics(), policy, grid, sc.N, sc.seed,
                                          law, sc.picard_iter, 1e-12);
    converged = log.converged;
    report["picard_distances"] = log.distances;
    report["picard_converged"] = log.converged;
    std::string mpath = join_path(out_dir, "moments.csv");
    mfc::emit_moments_csv(ens, mpath);
    artifacts.push_back(mpath);
  }

  report["seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report["converged"] = converged;
  report["artifacts"] = artifacts;

  std::string rpath = join_path(out_dir, "report.json");
  std::ofstream out(rpath, std::ios::binary);
  out << report.dump(2) << "\n";
  if (verbose) std::cout << report.dump(2) << "\n";
  std::cout << (converged ? "ok" : "did not converge") << ": report written to " << rpath
            << "\n";
  return converged ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field control experiment runner"};
  app.require_subcommand(0, 1);

  std::string scenario_path, out_dir = "out";
  std::vector<std::string> overrides;
  int threads = 0;
  bool verbose = false;
  app.add_option("--scenario", scenario_path, "scenario file");
  app.add_option("--set", overrides, "override key=value (repeatable)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads, 0 = auto");
  app.add_flag("--verbose", verbose, "print the report to stdout");

  std::string suite = "fast", problems_dir = "problems";
  CLI::App* acc = app.add_subcommand("acceptance", "run the acceptance criteria");
  acc->add_option("--suite", suite, "fast or full");
  acc->add_option("--problems", problems_dir, "toy problem directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  try {
    if (acc->parsed()) {
      mfc::AcceptanceSummary summary = mfc::run_acceptance(suite, problems_dir);
      std::filesystem::create_directories(out_dir);
      std::string rpath = (std::filesystem::path(out_dir) / "acceptance.json").string();
      std::ofstream out(rpath, std::ios::binary);
      out << summary.to_json() << "\n";
      for (const auto& r : summary.results)
        std::cout << (r.pass ? "pass" : "FAIL") << "  criterion " << r.id << "  " << r.name
                  << "  (" << r.detail << ")\n";
      std::cout << (summary.all_pass ? "all criteria passed" : "criteria failed") << " in "
                << summary.seconds << " s\n";
      return summary.all_pass ? 0 : 3;
    }
    if (scenario_path.empty()) {
      std::cerr << "error: --scenario is required\n";
      return 2;
    }
    mfc::Scenario sc = mfc::parse_scenario_file(scenario_path);
    for (const auto& o : overrides) mfc::apply_override(sc, o);
    return run_scenario(sc, out_dir, verbose);
  } catch (const mfc::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  }
}
