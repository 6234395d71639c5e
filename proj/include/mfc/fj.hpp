#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "mfc/cones.hpp"

namespace mfc {

/// Finite-dimensional cone-constrained program
///   min f(x)  s.t.  g_i(x) <=_{K_i} 0,  h_j(x) = 0,  x in feasible_set.
struct NlpProblem {
  using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd* grad)>;
  using VectorMap =
      std::function<Eigen::VectorXd(const Eigen::VectorXd&, Eigen::MatrixXd* jac)>;

  struct IneqBlock {
    VectorMap g;
    ConeSpec cone;
  };
  struct EqBlock {
    VectorMap h;
    int out_dim = 1;
  };

  int dim = 0;
  Objective objective;
  std::vector<IneqBlock> inequalities;
  std::vector<EqBlock> equalities;
  BoxSet feasible_set;
  int split_index = 0;  // first split_index coordinates form X1; 0 = no split
};

/// Multiplier bundle (r0, lambda_i, mu_j, xi).
struct FjCertificate {
  double r0 = 0.0;
  std::vector<Eigen::VectorXd> lambdas;
  std::vector<Eigen::VectorXd> mus;
  Eigen::VectorXd xi;

  double norm_sum() const;  // |r0| + sum ||lambda_i|| + sum ||mu_j||
};

struct FjResidualReport {
  double stationarity_residual = 0.0;
  std::vector<double> slackness_residuals;
  bool dual_feasibility = true;
  double normalization_error = 0.0;
  double xi_normal_residual = 0.0;
};

struct CqReport {
  bool licq = false;
  int jacobian_rank = 0;
  int jacobian_rows = 0;
  bool mfcq = false;
  Eigen::VectorXd mfcq_witness;  // the point c, empty when mfcq is false
  std::vector<int> active_set;
};

struct RecoveryResult {
  FjCertificate certificate;
  double achieved_residual = 0.0;
  bool converged = true;
};

/// g_i is treated as active when its cone-boundary distance is below
/// 1e-6 * (1 + ||g_i||).
std::vector<int> active_inequalities(const NlpProblem& p, const Eigen::VectorXd& x_hat);

bool is_feasible(const NlpProblem& p, const Eigen::VectorXd& x_hat, double tol = 1e-8,
                 std::string* violated = nullptr);

FjResidualReport evaluate_fj_residual(const NlpProblem& p, const Eigen::VectorXd& x_hat,
                                      const FjCertificate& cert, double tol = 1e-8);

RecoveryResult recover_multipliers(const NlpProblem& p, const Eigen::VectorXd& x_hat);

CqReport check_licq(const NlpProblem& p, const Eigen::VectorXd& x_hat);
CqReport check_mfcq(const NlpProblem& p, const Eigen::VectorXd& x_hat);

bool check_kkt(const NlpProblem& p, const Eigen::VectorXd& x_hat,
               const FjCertificate& cert, double tol = 1e-6);

/// Feasible grid point of minimal objective; oracle for certificate tests.
Eigen::VectorXd brute_force_minimize(const NlpProblem& p,
                                     const std::vector<int>& points_per_axis,
                                     double eq_tol = 1e-6);

}  // namespace mfc
