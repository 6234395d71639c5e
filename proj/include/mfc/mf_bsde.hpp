#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

#include "mfc/multipliers.hpp"
#include "mfc/mvsde.hpp"

namespace mfc {

struct DriverArgs {
  double t = 0.0;
  double x = 0.0, mean_x = 0.0, mean_a = 0.0, u = 0.0;
  double y = 0.0, mean_y = 0.0;
  double z = 0.0, mean_z = 0.0;
  double extra_mean = 0.0;  // ensemble average of the extra callback
};

struct DriverSpec {
  /// Integrand of the backward drift: the state-gradient of the
  /// Hamiltonian plus its mean-field counterpart. Null means zero.
  std::function<double(const DriverArgs&)> driver;
  std::function<double(double x, double mean_x)> terminal;
  /// Optional per-particle term whose ensemble average is fed back to
  /// every particle through DriverArgs::extra_mean (cross-particle
  /// expectations that are not plain means of y or z).
  std::function<double(double t, double x, double mean_x, double mean_a, double u,
                       double y, double z)>
      extra;
};

/// State gradients of the constraint maps entering the backward drift.
struct ConstraintGradients {
  std::vector<std::function<double(double t, double x)>> phi_x;
  std::vector<std::function<double(double t, double x, double u)>> psi_x;
};

struct AdjointSolution {
  Eigen::MatrixXd Y;  // N x (M+1)
  Eigen::MatrixXd Z;  // N x M
  std::vector<double> regression_residuals;  // per-step mean-square fit residual
  int basis_degree_used = 1;
};

struct RegressionBasis {
  int degree = 1;  // polynomial in the state; reduced when rank-deficient
};

/// Backward Euler with least-squares conditional expectations. Measure
/// atoms at node k enter while computing Y at node k-1 (they affect all
/// nodes before the atom); eta terms enter at the left endpoint like
/// the drift.
AdjointSolution solve_backward(const ParticleEnsemble& ens, const DriverSpec& spec,
                               const MultiplierSet& mult,
                               const ConstraintGradients& grads,
                               const RegressionBasis& basis = {});

/// Raw jump bookkeeping: adds weight w to Y at every node j <= step-1.
/// Atoms at the same node merge by summation before application.
AdjointSolution apply_measure_atoms(AdjointSolution sol,
                                    const std::vector<std::pair<std::size_t, double>>& atoms);

/// Mean-square one-step consistency residual of a candidate solution.
double bsde_residual(const ParticleEnsemble& ens, const DriverSpec& spec,
                     const MultiplierSet& mult, const ConstraintGradients& grads,
                     const AdjointSolution& sol, const RegressionBasis& basis = {});

}  // namespace mfc
