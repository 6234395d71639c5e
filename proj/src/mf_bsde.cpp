#include "mfc/mf_bsde.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace mfc {

namespace {

struct StepFit {
  Eigen::VectorXd ce;  // conditional expectation of y given the state
  Eigen::VectorXd z;   // martingale coefficient against the increment
  double mean_square_residual = 0.0;
  int degree_used = 0;
};

// Joint least-squares fit y ~ sum_p c_p B_p(x) + sum_p d_p B_p(x) dw
// with polynomial B in the (centered, scaled) state. Solving for the
// conditional expectation and the martingale coefficient together makes
// the scheme exact whenever y lies in the span (affine adjoints, the
// Brownian martingale case), instead of leaving O(N^-1/2) cross-noise.
StepFit regress_step(const Eigen::VectorXd& x, const Eigen::VectorXd& dw,
                     const Eigen::VectorXd& y, int degree) {
  const auto N = x.size();
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().mean());
  int d = sd > 0.0 ? degree : 0;
  while (true) {
    Eigen::MatrixXd P(N, d + 1);
    P.col(0).setOnes();
    for (int p = 1; p <= d; ++p)
      P.col(p) = P.col(p - 1).cwiseProduct(((x.array() - mean) / sd).matrix());
    Eigen::MatrixXd B(N, 2 * (d + 1));
    B.leftCols(d + 1) = P;
    for (int p = 0; p <= d; ++p) B.col(d + 1 + p) = P.col(p).cwiseProduct(dw);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
    qr.setThreshold(1e-10);
    if (qr.rank() < B.cols()) {
      if (d == 0) throw std::runtime_error("mf_bsde: degenerate regression basis");
      --d;
      continue;
    }
    Eigen::VectorXd coef = qr.solve(y);
    StepFit f;
    f.ce = P * coef.head(d + 1);
    f.z = P * coef.tail(d + 1);
    f.mean_square_residual = (y - B * coef).squaredNorm() / static_cast<double>(N);
    f.degree_used = d;
    return f;
  }
}

void check_shapes(const ParticleEnsemble& ens, const MultiplierSet& mult,
                  const ConstraintGradients& grads) {
  const auto M = static_cast<Eigen::Index>(ens.grid.steps);
  for (const auto& w : mult.atom_weights)
    if (w.size() != M + 1) throw std::invalid_argument("mf_bsde: atom weights off-grid");
  for (const auto& e : mult.eta)
    if (e.rows() != ens.N || e.cols() != M + 1)
      throw std::invalid_argument("mf_bsde: eta field shape mismatch");
  if (mult.atom_weights.size() != grads.phi_x.size() ||
      mult.eta.size() != grads.psi_x.size())
    throw std::invalid_argument("mf_bsde: multiplier/gradient count mismatch");
}

}  // namespace

AdjointSolution solve_backward(const ParticleEnsemble& ens, const DriverSpec& spec,
                               const MultiplierSet& mult,
                               const ConstraintGradients& grads,
                               const RegressionBasis& basis) {
  check_shapes(ens, mult, grads);
  const int N = ens.N;
  const auto M = static_cast<Eigen::Index>(ens.grid.steps);
  const double dt = ens.grid.dt();

  AdjointSolution sol;
  sol.Y.resize(N, M + 1);
  sol.Z.setZero(N, M);
  sol.regression_residuals.assign(static_cast<std::size_t>(M), 0.0);
  sol.basis_degree_used = basis.degree;

  const double mxT = ens.states.col(M).mean();
  for (int i = 0; i < N; ++i) sol.Y(i, M) = spec.terminal(ens.states(i, M), mxT);

  for (Eigen::Index k = M - 1; k >= 0; --k) {
    const double t = ens.grid.node(static_cast<std::size_t>(k));
    const double t_next = ens.grid.node(static_cast<std::size_t>(k + 1));
    const double mx = ens.states.col(k).mean();
    const double ma = ens.controls.col(k).mean();

    StepFit fit = regress_step(ens.states.col(k), ens.dW.col(k), sol.Y.col(k + 1),
                               basis.degree);
    sol.regression_residuals[static_cast<std::size_t>(k)] = fit.mean_square_residual;
    sol.basis_degree_used = std::min(sol.basis_degree_used, fit.degree_used);
    sol.Z.col(k) = fit.z;

    const double mean_y = sol.Y.col(k + 1).mean();
    const double mean_z = sol.Z.col(k).mean();

    double extra_mean = 0.0;
    if (spec.extra) {
      for (int i = 0; i < N; ++i)
        extra_mean += spec.extra(t, ens.states(i, k), mx, ma, ens.controls(i, k),
                                 fit.ce(i), sol.Z(i, k));
      extra_mean /= N;
    }

#pragma omp parallel for
    for (int i = 0; i < N; ++i) {
      double y = fit.ce(i);
      if (spec.driver) {
        DriverArgs a;
        a.t = t;
        a.x = ens.states(i, k);
        a.mean_x = mx;
        a.mean_a = ma;
        a.u = ens.controls(i, k);
        a.y = fit.ce(i);
        a.mean_y = mean_y;
        a.z = sol.Z(i, k);
        a.mean_z = mean_z;
        a.extra_mean = extra_mean;
        y += dt * spec.driver(a);
      }
      // atoms at node k+1 reach every node strictly before it
      for (std::size_t c = 0; c < grads.phi_x.size(); ++c)
        y -= grads.phi_x[c](t_next, ens.states(i, k + 1)) * mult.atom_weights[c](k + 1);
      for (std::size_t j = 0; j < grads.psi_x.size(); ++j)
        y -= grads.psi_x[j](t, ens.states(i, k), ens.controls(i, k)) *
             mult.eta[j](i, k) * dt;
      sol.Y(i, k) = y;
    }
    if (!sol.Y.col(k).allFinite())
      throw std::runtime_error("mf_bsde: non-finite adjoint at step " + std::to_string(k));
  }
  return sol;
}

AdjointSolution apply_measure_atoms(AdjointSolution sol,
                                    const std::vector<std::pair<std::size_t, double>>& atoms) {
  const auto nodes = static_cast<std::size_t>(sol.Y.cols());
  std::map<std::size_t, double> merged;
  for (const auto& [step, w] : atoms) {
    if (step >= nodes) throw std::invalid_argument("mf_bsde: atom step off-grid");
    merged[step] += w;
  }
  for (const auto& [step, w] : merged)
    for (std::size_t j = 0; j < step; ++j)
      sol.Y.col(static_cast<Eigen::Index>(j)).array() += w;
  return sol;
}

double bsde_residual(const ParticleEnsemble& ens, const DriverSpec& spec,
                     const MultiplierSet& mult, const ConstraintGradients& grads,
                     const AdjointSolution& sol, const RegressionBasis& basis) {
  check_shapes(ens, mult, grads);
  const int N = ens.N;
  const auto M = static_cast<Eigen::Index>(ens.grid.steps);
  const double dt = ens.grid.dt();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < M; ++k) {
    const double t = ens.grid.node(static_cast<std::size_t>(k));
    const double t_next = ens.grid.node(static_cast<std::size_t>(k + 1));
    const double mx = ens.states.col(k).mean();
    const double ma = ens.controls.col(k).mean();
    StepFit fit = regress_step(ens.states.col(k), ens.dW.col(k), sol.Y.col(k + 1),
                               basis.degree);
    const double mean_y = sol.Y.col(k + 1).mean();
    const double mean_z = sol.Z.col(k).mean();
    double extra_mean = 0.0;
    if (spec.extra) {
      for (int i = 0; i < N; ++i)
        extra_mean += spec.extra(t, ens.states(i, k), mx, ma, ens.controls(i, k),
                                 fit.ce(i), sol.Z(i, k));
      extra_mean /= N;
    }
    double step_acc = 0.0;
    for (int i = 0; i < N; ++i) {
      double rhs = sol.Y(i, k + 1) - sol.Z(i, k) * ens.dW(i, k);
      if (spec.driver) {
        DriverArgs a;
        a.t = t;
        a.x = ens.states(i, k);
        a.mean_x = mx;
        a.mean_a = ma;
        a.u = ens.controls(i, k);
        a.y = fit.ce(i);
        a.mean_y = mean_y;
        a.z = sol.Z(i, k);
        a.mean_z = mean_z;
        a.extra_mean = extra_mean;
        rhs += dt * spec.driver(a);
      }
      for (std::size_t c = 0; c < grads.phi_x.size(); ++c)
        rhs -= grads.phi_x[c](t_next, ens.states(i, k + 1)) * mult.atom_weights[c](k + 1);
      for (std::size_t j = 0; j < grads.psi_x.size(); ++j)
        rhs -= grads.psi_x[j](t, ens.states(i, k), ens.controls(i, k)) *
               mult.eta[j](i, k) * dt;
      const double r = sol.Y(i, k) - rhs;
      step_acc += r * r;
    }
    acc += step_acc / N;
  }
  return std::sqrt(acc / static_cast<double>(M));
}

}  // namespace mfc
