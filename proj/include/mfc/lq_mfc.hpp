#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "mfc/mf_bsde.hpp"
#include "mfc/mvsde.hpp"
#include "mfc/smp_check.hpp"

namespace mfc {

/// Scalar linear-quadratic mean-field control model
///   dX = (b1 X + b2 E[X] + b3 a + b4 E[a]) dt
///      + (s1 X + s2 E[X] + s3 a + s4 E[a]) dW,
///   J  = (1/2) E[ int (q X^2 + v a^2) dt + ell (X_T - E[X_T])^2 ],
/// optionally under the pathwise constraint h(t) X - a >= 0.
struct LqModel {
  double b1 = 0, b2 = 0, b3 = 1, b4 = 0;
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  double q = 0, v = 1, ell = 0;
  double T = 1.0;
  double m0 = 0, v0 = 0;
  bool constrained = false;
  std::function<double(double t)> h;  // required when constrained

  MeanFieldDynamics dynamics() const;
  RunningCost running_cost() const;
  TerminalCost terminal_cost() const;
};

struct RiccatiSolution {
  std::vector<double> beta;    // node values, beta(T) = ell
  std::vector<double> zeta;    // node values, zeta(T) = -ell
  std::vector<double> gamma1;  // feedback a = gamma1 x + gamma2 E[x]
  std::vector<double> gamma2;
  double value = 0.0;  // optimal cost from (m0, v0)
};

RiccatiSolution riccati_solve(const LqModel& model, const TimeGrid& grid);

struct LqOracle {
  double value = 0.0;
  std::vector<double> gain_x;     // per step: control coefficient on X
  std::vector<double> gain_mean;  // per step: additional coefficient on E[X]
};

/// Exact dynamic programming on the discretized problem, split into the
/// mean and the deviation component; independent of the Riccati ODEs.
LqOracle lq_oracle_discrete(const LqModel& model, double dt);

/// Scalar KKT resolution of min over a of the strongly convex local
/// objective with a <= hx: returns (alpha, eta).
std::pair<double, double> pointwise_kkt_control(double u_star, double hx, double v);

struct LqSolveReport {
  double cost = 0.0;
  double ci_halfwidth = 0.0;
  SmpReport smp;
  int iterations = 0;
  bool converged = false;
  double last_update_rms = 0.0;
  double feasibility_worst = 0.0;  // max over (particle, step) of alpha - h x
  ParticleEnsemble ensemble;
  AdjointSolution adjoint;
  MultiplierSet mult;
};

LqSolveReport solve_unconstrained(const LqModel& model, const TimeGrid& grid, int N,
                                  std::uint64_t seed, int max_iter = 50,
                                  double damping = 0.5);

LqSolveReport solve_constrained(const LqModel& model, const TimeGrid& grid, int N,
                                std::uint64_t seed, int max_iter = 50,
                                double damping = 0.5);

struct MfgReport {
  LqSolveReport inner;
  std::vector<double> residual_history;  // sup-node flow gap per outer iteration
  int outer_iterations = 0;
  bool converged = false;
};

/// Frozen-flow fixed point: each outer pass solves the control problem
/// against the previous measure flow, then compares the induced flow.
MfgReport mfg_solve(const LqModel& model, const TimeGrid& grid, int N, std::uint64_t seed,
                    int outer_iter, double tol, double damping = 0.5);

}  // namespace mfc
