#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "mfc/fj.hpp"
#include "mfc/grid.hpp"

namespace mfc {

/// Deterministic scalar control problem (no noise, point initial state)
///   x' = b(t, x, u),  J = int f(t, x, u) dt + g(x_T),
/// optionally under h(t) x - u >= 0.
struct DeterministicScenario {
  std::function<double(double t, double x, double u)> drift, drift_dx, drift_du;
  std::function<double(double t, double x, double u)> running, running_dx, running_du;
  std::function<double(double x)> terminal, terminal_dx;
  double x0 = 0.0;
  double T = 1.0;
  std::function<double(double t)> h;  // null = unconstrained
};

/// Direct transcription: decision vector z = (x_0..x_M, u_0..u_{M-1}),
/// equality block 0 = the M dynamics rows x_{k+1} - x_k - dt b = 0,
/// equality block 1 = the initial pin, inequality block 0 (when h is
/// set) = the M rows u_k - h(t_k) x_k <= 0 in the orthant cone.
struct DiscreteControlProblem {
  NlpProblem nlp;
  TimeGrid grid;

  Eigen::Index x_index(std::size_t k) const { return static_cast<Eigen::Index>(k); }
  Eigen::Index u_index(std::size_t k) const {
    return static_cast<Eigen::Index>(grid.steps + 1 + k);
  }
};

DiscreteControlProblem discretize(const DeterministicScenario& sc, const TimeGrid& grid);

/// Exact solution of a linear-quadratic instance: dense symmetric KKT
/// solve when no inequalities, active-set enumeration (M <= 10) with.
struct QpSolution {
  Eigen::VectorXd z;                 // optimal decision vector
  Eigen::VectorXd dyn_multipliers;   // one per dynamics row
  double pin_multiplier = 0.0;
  Eigen::VectorXd ineq_multipliers;  // one per inequality row, >= 0
};

QpSolution solve_discrete_qp(const DiscreteControlProblem& p);

/// Multiplier bundle of a QP solution in Fritz-John normalized form.
FjCertificate certificate_from_qp(const DiscreteControlProblem& p, const QpSolution& qp);

struct MultiplierComparison {
  std::vector<double> discrete;      // rescaled dynamics multipliers
  std::vector<double> adjoint_left;  // adjoint at the left node of each row
  double sup_error = 0.0;            // left-node convention (primary)
  double sup_error_right = 0.0;      // right-node convention, for reference
  double scaling_factor = 0.0;       // applied to undo the FJ normalization
  double transversality_error = 0.0;
};

/// adjoint(t, x) evaluates the costate along the discrete optimal path.
MultiplierComparison compare_multipliers(const FjCertificate& cert,
                                         const std::function<double(double, double)>& adjoint,
                                         const Eigen::VectorXd& x_nodes,
                                         const TimeGrid& grid,
                                         const DeterministicScenario& sc);

struct ConvergenceRow {
  double dt = 0.0;
  double sup_error = 0.0;
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  double slope = 0.0;  // least-squares order estimate
  bool slope_valid = false;
};

ConvergenceStudy convergence_study(const DeterministicScenario& sc,
                                   const std::vector<double>& dt_list,
                                   const std::function<double(double, double)>& adjoint);

}  // namespace mfc
