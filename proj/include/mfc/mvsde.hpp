#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "mfc/grid.hpp"

namespace mfc {

/// Scalar mean-coupled dynamics: coefficients see the state, the
/// empirical means of state and control, and the particle's own control.
struct MeanFieldDynamics {
  using Coef = std::function<double(double t, double x, double mx, double ma, double u)>;

  Coef drift;
  Coef diffusion;

  // partial derivatives, used by adjoint assembly and derivative checks
  Coef drift_dx, drift_du, drift_dmx, drift_dma;
  Coef diff_dx, diff_du, diff_dmx, diff_dma;
};

struct RunningCost {
  using Coef = MeanFieldDynamics::Coef;
  Coef f;
  Coef dx, du, dmx, dma;
};

struct TerminalCost {
  std::function<double(double x, double mx)> g;
  std::function<double(double x, double mx)> dx, dmx;
};

/// Gaussian initial law; variance 0 is a point mass.
struct InitialLaw {
  double mean = 0.0;
  double variance = 0.0;
};

struct ControlPolicy {
  enum class Mode { OpenLoop, Feedback, FeedbackIndexed };

  Mode mode = Mode::OpenLoop;
  Eigen::MatrixXd table;  // N x (M+1), open-loop
  std::function<double(double t, double x, double mx)> law;
  // feedback that may consult per-particle data (e.g. a stored field)
  std::function<double(double t, int particle, std::size_t step, double x, double mx)>
      law_indexed;

  static ControlPolicy open_loop(Eigen::MatrixXd controls);
  static ControlPolicy feedback(std::function<double(double, double, double)> law);
  static ControlPolicy feedback_indexed(
      std::function<double(double, int, std::size_t, double, double)> law);
};

struct ParticleEnsemble {
  int N = 0;
  TimeGrid grid;
  std::uint64_t seed = 0;
  Eigen::MatrixXd states;    // N x (M+1)
  Eigen::MatrixXd controls;  // N x (M+1); column M repeats M-1 for dumps
  Eigen::MatrixXd dW;        // N x M
};

struct Moments {
  double mean_x = 0.0;
  double mean_a = 0.0;
  double cov_x = 0.0;
};

/// Euler-Maruyama with same-step empirical means (explicit coupling).
/// Increments and initial states are counter-seeded by (seed, particle,
/// step), so results do not depend on scheduling.
ParticleEnsemble simulate_forward(const MeanFieldDynamics& dyn, const ControlPolicy& policy,
                                  const TimeGrid& grid, int N, std::uint64_t seed,
                                  const InitialLaw& law);

/// Single-threaded reference; must produce bit-identical ensembles.
ParticleEnsemble simulate_forward_serial(const MeanFieldDynamics& dyn,
                                         const ControlPolicy& policy, const TimeGrid& grid,
                                         int N, std::uint64_t seed, const InitialLaw& law);

struct PicardLog {
  std::vector<double> distances;  // sup_k RMS gap between successive iterates
  bool converged = false;
};

/// Law-freezing fixed point: sweep n advances particles against the
/// empirical means of sweep n-1, reusing identical increments.
std::pair<ParticleEnsemble, PicardLog> picard_iterate(const MeanFieldDynamics& dyn,
                                                      const ControlPolicy& policy,
                                                      const TimeGrid& grid, int N,
                                                      std::uint64_t seed, const InitialLaw& law,
                                                      int max_iter, double tol);

Moments empirical_moments(const ParticleEnsemble& ens, std::size_t k);

/// Left-endpoint quadrature of the running cost plus terminal average.
double cost_evaluate(const ParticleEnsemble& ens, const RunningCost& running,
                     const TerminalCost& terminal);

struct DerivativeCheckReport {
  double analytic = 0.0;
  std::vector<double> central;    // one per eps
  std::vector<double> rel_error;  // |central - analytic| / max(1e-12, |analytic|)
};

/// Analytic directional derivative of the cost (adjoint representation)
/// against common-random-number central differences in the open-loop
/// control, direction K (N x (M+1), last column ignored).
DerivativeCheckReport directional_derivative_check(
    const MeanFieldDynamics& dyn, const RunningCost& running, const TerminalCost& terminal,
    const Eigen::MatrixXd& base_controls, const Eigen::MatrixXd& direction,
    const TimeGrid& grid, int N, std::uint64_t seed, const InitialLaw& law,
    const std::vector<double>& eps_list);

}  // namespace mfc
