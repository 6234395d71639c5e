#include "mfc/smp_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace mfc {

double hamiltonian(const Eigen::VectorXd& b, const Eigen::MatrixXd& sigma,
                   const Eigen::VectorXd& y, const Eigen::MatrixXd& z, double r0, double f) {
  if (b.size() != y.size() || sigma.rows() != b.size() || sigma.cols() != z.cols() ||
      z.rows() != b.size())
    throw std::invalid_argument("hamiltonian: dimension mismatch");
  return b.dot(y) + (sigma.array() * z.array()).sum() + r0 * f;
}

double hamiltonian(double t, double x, double mean_x, double mean_a, double u, double y,
                   double z, double r0, const MeanFieldDynamics& dyn,
                   const MeanFieldDynamics::Coef& running_cost) {
  return dyn.drift(t, x, mean_x, mean_a, u) * y + dyn.diffusion(t, x, mean_x, mean_a, u) * z +
         r0 * running_cost(t, x, mean_x, mean_a, u);
}

namespace {

// Running integral I(t_k) = sum_{s<k} kernel(t_s) u_s dt per particle.
Eigen::MatrixXd kernel_integral(const ParticleEnsemble& ens,
                                const ExpectationConstraint& c) {
  const auto M = static_cast<Eigen::Index>(ens.grid.steps);
  const double dt = ens.grid.dt();
  Eigen::MatrixXd I = Eigen::MatrixXd::Zero(ens.N, M + 1);
  for (Eigen::Index k = 0; k < M; ++k) {
    const double kv = c.kernel(ens.grid.node(static_cast<std::size_t>(k)));
    I.col(k + 1) = I.col(k) + kv * dt * ens.controls.col(k);
  }
  return I;
}

}  // namespace

ConstraintEvals evaluate_constraints(const ParticleEnsemble& ens, const ConstraintSpec& spec) {
  const auto M = static_cast<Eigen::Index>(ens.grid.steps);
  ConstraintEvals ev;
  for (const auto& c : spec.expectation) {
    Eigen::MatrixXd I;
    if (c.Phi) I = kernel_integral(ens, c);
    Eigen::VectorXd mean(M + 1);
    for (Eigen::Index k = 0; k <= M; ++k) {
      const double t = ens.grid.node(static_cast<std::size_t>(k));
      double acc = 0.0;
      for (int i = 0; i < ens.N; ++i) {
        double v = c.phi_x ? c.phi_x(t, ens.states(i, k)) : 0.0;
        if (c.Phi) v += c.Phi(I(i, k));
        acc += v;
      }
      mean(k) = acc / ens.N;
    }
    ev.phi_mean.push_back(std::move(mean));
  }
  for (const auto& c : spec.pathwise) {
    Eigen::MatrixXd vals(ens.N, M + 1);
    for (Eigen::Index k = 0; k <= M; ++k) {
      const double t = ens.grid.node(static_cast<std::size_t>(k));
      for (int i = 0; i < ens.N; ++i)
        vals(i, k) = c.psi(t, ens.states(i, k), ens.controls(i, k));
    }
    ev.psi.push_back(std::move(vals));
  }
  return ev;
}

double min_condition_residual(const ParticleEnsemble& ens, const AdjointSolution& adjoint,
                              const MultiplierSet& mult, const ConstraintSpec& spec,
                              const MeanFieldDynamics& dyn, const RunningCost& running,
                              double control_lo, double control_hi) {
  const auto M = static_cast<Eigen::Index>(ens.grid.steps);
  const int N = ens.N;
  if (mult.atom_weights.size() != spec.expectation.size() ||
      mult.eta.size() != spec.pathwise.size())
    throw std::invalid_argument("smp_check: multiplier/constraint count mismatch");

  // Suffix atom sums S(i,k) = sum_{s >= k} Phi'(I(i,s)) w_s, closed at k.
  std::vector<Eigen::MatrixXd> suffix;
  for (std::size_t c = 0; c < spec.expectation.size(); ++c) {
    const auto& ec = spec.expectation[c];
    if (!ec.Phi) {
      suffix.emplace_back();
      continue;
    }
    Eigen::MatrixXd I = kernel_integral(ens, ec);
    Eigen::MatrixXd S(N, M + 1);
    for (int i = 0; i < N; ++i) {
      double acc = 0.0;
      for (Eigen::Index k = M; k >= 0; --k) {
        acc += ec.Phi_prime(I(i, k)) * mult.atom_weights[c](k);
        S(i, k) = acc;
      }
    }
    suffix.push_back(std::move(S));
  }

  double acc = 0.0;
  for (Eigen::Index k = 0; k < M; ++k) {
    const double t = ens.grid.node(static_cast<std::size_t>(k));
    const double mx = ens.states.col(k).mean();
    const double ma = ens.controls.col(k).mean();

    // mean-control sensitivity, shared by all particles at this node
    double mean_term = 0.0;
    for (int j = 0; j < N; ++j) {
      const double x = ens.states(j, k);
      const double u = ens.controls(j, k);
      mean_term += dyn.drift_dma(t, x, mx, ma, u) * adjoint.Y(j, k) +
                   dyn.diff_dma(t, x, mx, ma, u) * adjoint.Z(j, k) +
                   mult.r0 * running.dma(t, x, mx, ma, u);
    }
    mean_term /= N;

    double step_acc = 0.0;
    for (int i = 0; i < N; ++i) {
      const double x = ens.states(i, k);
      const double u = ens.controls(i, k);
      double G = dyn.drift_du(t, x, mx, ma, u) * adjoint.Y(i, k) +
                 dyn.diff_du(t, x, mx, ma, u) * adjoint.Z(i, k) +
                 mult.r0 * running.du(t, x, mx, ma, u) + mean_term;
      for (std::size_t c = 0; c < spec.expectation.size(); ++c)
        if (spec.expectation[c].Phi)
          G -= spec.expectation[c].kernel(t) * suffix[c](i, k);
      for (std::size_t j = 0; j < spec.pathwise.size(); ++j)
        G -= spec.pathwise[j].psi_du(t, x, u) * mult.eta[j](i, k);
      const double proj = std::clamp(u - G, control_lo, control_hi);
      const double r = u - proj;
      step_acc += r * r;
    }
    acc += step_acc / N;
  }
  return std::sqrt(acc / static_cast<double>(M));
}

SupportCheck support_check(const MultiplierSet& mult, const ParticleEnsemble& ens,
                           const ConstraintSpec& spec, double tol) {
  const auto M = static_cast<Eigen::Index>(ens.grid.steps);
  const double dt = ens.grid.dt();
  ConstraintEvals ev = evaluate_constraints(ens, spec);
  SupportCheck out;
  for (std::size_t c = 0; c < spec.expectation.size(); ++c) {
    double v = 0.0;
    for (Eigen::Index k = 0; k <= M; ++k)
      v += mult.atom_weights[c](k) * std::max(0.0, std::abs(ev.phi_mean[c](k)) - tol);
    out.support_violation.push_back(v);
  }
  for (std::size_t j = 0; j < spec.pathwise.size(); ++j) {
    double v = 0.0;
    for (Eigen::Index k = 0; k < M; ++k)
      for (int i = 0; i < ens.N; ++i) v += ev.psi[j](i, k) * mult.eta[j](i, k) * dt;
    out.slackness_integral.push_back(std::abs(v / ens.N));
  }
  return out;
}

double eta_norm(const Eigen::MatrixXd& eta, const TimeGrid& grid) {
  const auto M = static_cast<Eigen::Index>(grid.steps);
  return std::sqrt(eta.leftCols(M).squaredNorm() / eta.rows() * grid.dt());
}

double multiplier_total(const MultiplierSet& mult, const TimeGrid& grid) {
  double total = mult.r0;
  for (const auto& w : mult.atom_weights) total += w.sum();
  for (const auto& e : mult.eta) total += eta_norm(e, grid);
  return total;
}

MultiplierSet normalize(MultiplierSet mult, const TimeGrid& grid) {
  const double total = multiplier_total(mult, grid);
  if (total <= 0.0)
    throw std::invalid_argument("smp_check: all-zero multiplier bundle cannot be normalized");
  mult.r0 /= total;
  for (auto& w : mult.atom_weights) w /= total;
  for (auto& e : mult.eta) e /= total;
  return mult;
}

MultiplierSet dual_ascent_update(MultiplierSet mult, const ConstraintEvals& evals,
                                 double step_size) {
  if (step_size <= 0.0) throw std::invalid_argument("smp_check: step size must be positive");
  if (evals.phi_mean.size() != mult.atom_weights.size() ||
      evals.psi.size() != mult.eta.size())
    throw std::invalid_argument("smp_check: evaluation/multiplier count mismatch");
  for (std::size_t c = 0; c < mult.atom_weights.size(); ++c)
    mult.atom_weights[c] =
        (mult.atom_weights[c] - step_size * evals.phi_mean[c]).cwiseMax(0.0);
  for (std::size_t j = 0; j < mult.eta.size(); ++j)
    mult.eta[j] = (mult.eta[j] - step_size * evals.psi[j]).cwiseMax(0.0);
  return mult;
}

std::string SmpReport::to_json() const {
  nlohmann::json j;
  j["min_condition_residual"] = min_condition_residual;
  j["support_violation"] = support_violation;
  j["slackness_integral"] = slackness_integral;
  j["normalization_error"] = normalization_error;
  j["primal_feasibility"] = primal_feasibility;
  j["r0"] = r0;
  return j.dump(2);
}

}  // namespace mfc
