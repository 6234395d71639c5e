#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "mfc/cones.hpp"
#include "mfc/mf_bsde.hpp"
#include "mfc/multipliers.hpp"
#include "mfc/mvsde.hpp"

namespace mfc {

/// Expectation constraint in the separable family
///   phi(t, x, control path) = phi_x(t, x) + Phi(int_0^t kernel(s) u_s ds),
/// required to hold in mean: E[phi] >= 0 on [0, T]. Phi and kernel may
/// be null (pure state constraint).
struct ExpectationConstraint {
  std::function<double(double t, double x)> phi_x;
  std::function<double(double t, double x)> phi_x_dx;
  std::function<double(double)> Phi;
  std::function<double(double)> Phi_prime;
  std::function<double(double t)> kernel;
};

/// Pathwise constraint psi(t, x, u) >= 0, dt x dP almost surely.
struct PathConstraint {
  std::function<double(double t, double x, double u)> psi;
  std::function<double(double t, double x, double u)> psi_dx;
  std::function<double(double t, double x, double u)> psi_du;
};

struct ConstraintSpec {
  std::vector<ExpectationConstraint> expectation;
  std::vector<PathConstraint> pathwise;
};

struct ConstraintEvals {
  std::vector<Eigen::VectorXd> phi_mean;  // per constraint, ensemble mean at each node
  std::vector<Eigen::MatrixXd> psi;       // per constraint, N x (M+1)
};

struct SmpReport {
  double min_condition_residual = 0.0;
  std::vector<double> support_violation;
  std::vector<double> slackness_integral;
  double normalization_error = 0.0;
  std::vector<double> primal_feasibility;  // worst violation per constraint, phi then psi
  double r0 = 1.0;

  std::string to_json() const;
};

/// H^{r0} = <b, y> + tr(sigma z^T) + r0 f.
double hamiltonian(const Eigen::VectorXd& b, const Eigen::MatrixXd& sigma,
                   const Eigen::VectorXd& y, const Eigen::MatrixXd& z, double r0, double f);

/// Scalar convenience over the dynamics/cost callbacks.
double hamiltonian(double t, double x, double mean_x, double mean_a, double u, double y,
                   double z, double r0, const MeanFieldDynamics& dyn,
                   const MeanFieldDynamics::Coef& running_cost);

ConstraintEvals evaluate_constraints(const ParticleEnsemble& ens, const ConstraintSpec& spec);

/// RMS over (particle, step) of the projection residual
/// |alpha - Proj_U(alpha - G)| with G the constrained control gradient.
double min_condition_residual(const ParticleEnsemble& ens, const AdjointSolution& adjoint,
                              const MultiplierSet& mult, const ConstraintSpec& spec,
                              const MeanFieldDynamics& dyn, const RunningCost& running,
                              double control_lo, double control_hi);

struct SupportCheck {
  std::vector<double> support_violation;   // per expectation constraint
  std::vector<double> slackness_integral;  // per pathwise constraint
};

SupportCheck support_check(const MultiplierSet& mult, const ParticleEnsemble& ens,
                           const ConstraintSpec& spec, double tol);

/// L2(dt x dP) norm of a nonnegative multiplier field on the grid.
double eta_norm(const Eigen::MatrixXd& eta, const TimeGrid& grid);

double multiplier_total(const MultiplierSet& mult, const TimeGrid& grid);

/// Scales the bundle so r0 + total atom mass + sum of eta norms = 1.
MultiplierSet normalize(MultiplierSet mult, const TimeGrid& grid);

/// Projected (Uzawa) ascent step on the constraint evaluations.
MultiplierSet dual_ascent_update(MultiplierSet mult, const ConstraintEvals& evals,
                                 double step_size);

}  // namespace mfc
