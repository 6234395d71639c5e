#pragma once

#include <string>
#include <vector>

#include "mfc/fj.hpp"

namespace mfc {

/// Hand-analyzed certificate test case loaded from a problem file.
struct ToyProblem {
  std::string name;
  NlpProblem problem;
  Eigen::VectorXd optimum;       // hand-computed minimizer
  bool licq_expected = false;
  bool mfcq_expected = false;
  bool abnormal_expected = false;  // the only certificates have r0 = 0
  std::vector<int> brute_grid;     // points per axis for the oracle search
};

std::vector<ToyProblem> toy_suite(const std::string& problems_dir);

struct ToyCaseResult {
  std::string name;
  bool pass = false;
  double stationarity = 0.0;
  double slackness_worst = 0.0;
  double normalization_error = 0.0;
  double r0 = 0.0;
  bool licq = false;
  bool mfcq = false;
  bool licq_expected = false;
  bool mfcq_expected = false;
  std::string detail;  // empty when pass
};

/// Recover a certificate at each hand-computed optimum and grade it
/// against the residual thresholds and the expected CQ verdicts.
std::vector<ToyCaseResult> run_toy_suite(const std::string& problems_dir);

}  // namespace mfc
