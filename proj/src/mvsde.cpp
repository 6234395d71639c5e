#include "mfc/mvsde.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mfc/rng.hpp"

namespace mfc {

namespace {

constexpr std::uint64_t kInitDraw = ~0ULL;  // index reserved for the initial sample

void check_finite(double x, std::size_t step, int particle) {
  if (!std::isfinite(x))
    throw std::runtime_error("mvsde: non-finite state at step " + std::to_string(step) +
                             " particle " + std::to_string(particle));
}

ParticleEnsemble allocate(const TimeGrid& grid, int N, std::uint64_t seed,
                          const InitialLaw& law) {
  if (N < 2) throw std::invalid_argument("mvsde: need at least two particles");
  ParticleEnsemble ens;
  ens.N = N;
  ens.grid = grid;
  ens.seed = seed;
  const auto M = static_cast<Eigen::Index>(grid.steps);
  ens.states.resize(N, M + 1);
  ens.controls.setZero(N, M + 1);
  ens.dW.resize(N, M);
  const double sd = std::sqrt(law.variance);
  const double sq = std::sqrt(grid.dt());
  for (int i = 0; i < N; ++i) {
    ens.states(i, 0) =
        law.mean + sd * rng::normal(seed, static_cast<std::uint64_t>(i), kInitDraw);
    for (Eigen::Index k = 0; k < M; ++k)
      ens.dW(i, k) = sq * rng::normal(seed, static_cast<std::uint64_t>(i),
                                      static_cast<std::uint64_t>(k));
  }
  return ens;
}

// One Euler-Maruyama sweep. When frozen means are supplied (Picard mode)
// they replace the same-step empirical means of the evolving ensemble.
void sweep(ParticleEnsemble& ens, const MeanFieldDynamics& dyn, const ControlPolicy& policy,
           const std::vector<double>* frozen_mx, const std::vector<double>* frozen_ma,
           bool parallel) {
  const auto M = static_cast<Eigen::Index>(ens.grid.steps);
  const double dt = ens.grid.dt();
  const int N = ens.N;
  for (Eigen::Index k = 0; k <= M; ++k) {
    const double t = ens.grid.node(static_cast<std::size_t>(k));
    const double mx = frozen_mx ? (*frozen_mx)[static_cast<std::size_t>(k)]
                                : ens.states.col(k).mean();
    if (policy.mode == ControlPolicy::Mode::OpenLoop) {
      ens.controls.col(k) = policy.table.col(k);
    } else if (policy.mode == ControlPolicy::Mode::Feedback) {
#pragma omp parallel for if (parallel)
      for (int i = 0; i < N; ++i) ens.controls(i, k) = policy.law(t, ens.states(i, k), mx);
    } else {
#pragma omp parallel for if (parallel)
      for (int i = 0; i < N; ++i)
        ens.controls(i, k) = policy.law_indexed(t, i, static_cast<std::size_t>(k),
                                                ens.states(i, k), mx);
    }
    if (k == M) break;
    const double ma = frozen_ma ? (*frozen_ma)[static_cast<std::size_t>(k)]
                                : ens.controls.col(k).mean();
#pragma omp parallel for if (parallel)
    for (int i = 0; i < N; ++i) {
      const double x = ens.states(i, k);
      const double u = ens.controls(i, k);
      ens.states(i, k + 1) = x + dyn.drift(t, x, mx, ma, u) * dt +
                             dyn.diffusion(t, x, mx, ma, u) * ens.dW(i, k);
    }
    for (int i = 0; i < N; ++i) check_finite(ens.states(i, k + 1), static_cast<std::size_t>(k + 1), i);
  }
}

}  // namespace

ControlPolicy ControlPolicy::open_loop(Eigen::MatrixXd controls) {
  ControlPolicy p;
  p.mode = Mode::OpenLoop;
  p.table = std::move(controls);
  return p;
}

ControlPolicy ControlPolicy::feedback(std::function<double(double, double, double)> law) {
  ControlPolicy p;
  p.mode = Mode::Feedback;
  p.law = std::move(law);
  return p;
}

ControlPolicy ControlPolicy::feedback_indexed(
    std::function<double(double, int, std::size_t, double, double)> law) {
  ControlPolicy p;
  p.mode = Mode::FeedbackIndexed;
  p.law_indexed = std::move(law);
  return p;
}

ParticleEnsemble simulate_forward(const MeanFieldDynamics& dyn, const ControlPolicy& policy,
                                  const TimeGrid& grid, int N, std::uint64_t seed,
                                  const InitialLaw& law) {
  ParticleEnsemble ens = allocate(grid, N, seed, law);
  sweep(ens, dyn, policy, nullptr, nullptr, true);
  return ens;
}

ParticleEnsemble simulate_forward_serial(const MeanFieldDynamics& dyn,
                                         const ControlPolicy& policy, const TimeGrid& grid,
                                         int N, std::uint64_t seed, const InitialLaw& law) {
  ParticleEnsemble ens = allocate(grid, N, seed, law);
  sweep(ens, dyn, policy, nullptr, nullptr, false);
  return ens;
}

std::pair<ParticleEnsemble, PicardLog> picard_iterate(const MeanFieldDynamics& dyn,
                                                      const ControlPolicy& policy,
                                                      const TimeGrid& grid, int N,
                                                      std::uint64_t seed, const InitialLaw& law,
                                                      int max_iter, double tol) {
  ParticleEnsemble prev = allocate(grid, N, seed, law);
  // iterate 0: state frozen at its initial sample on every node
  const auto M = static_cast<Eigen::Index>(grid.steps);
  for (Eigen::Index k = 1; k <= M; ++k) prev.states.col(k) = prev.states.col(0);
  for (Eigen::Index k = 0; k <= M; ++k) {
    if (policy.mode == ControlPolicy::Mode::OpenLoop) {
      prev.controls.col(k) = policy.table.col(k);
    } else {
      const double t = grid.node(static_cast<std::size_t>(k));
      const double mx = prev.states.col(k).mean();
      for (int i = 0; i < N; ++i)
        prev.controls(i, k) =
            policy.mode == ControlPolicy::Mode::Feedback
                ? policy.law(t, prev.states(i, k), mx)
                : policy.law_indexed(t, i, static_cast<std::size_t>(k), prev.states(i, k), mx);
    }
  }
  PicardLog log;
  for (int n = 0; n < max_iter; ++n) {
    std::vector<double> mx(grid.nodes()), ma(grid.nodes());
    for (Eigen::Index k = 0; k <= M; ++k) {
      mx[static_cast<std::size_t>(k)] = prev.states.col(k).mean();
      ma[static_cast<std::size_t>(k)] = prev.controls.col(k).mean();
    }
    ParticleEnsemble next = allocate(grid, N, seed, law);
    sweep(next, dyn, policy, &mx, &ma, true);
    double dist = 0.0;
    for (Eigen::Index k = 0; k <= M; ++k) {
      double rms = std::sqrt((next.states.col(k) - prev.states.col(k)).squaredNorm() / N);
      dist = std::max(dist, rms);
    }
    log.distances.push_back(dist);
    prev = std::move(next);
    if (dist < tol) {
      log.converged = true;
      break;
    }
  }
  return {std::move(prev), std::move(log)};
}

Moments empirical_moments(const ParticleEnsemble& ens, std::size_t k) {
  if (k >= ens.grid.nodes()) throw std::invalid_argument("mvsde: step out of range");
  const auto kk = static_cast<Eigen::Index>(k);
  Moments m;
  m.mean_x = ens.states.col(kk).mean();
  m.mean_a = ens.controls.col(kk).mean();
  m.cov_x = (ens.states.col(kk).array() - m.mean_x).square().mean();
  return m;
}

double cost_evaluate(const ParticleEnsemble& ens, const RunningCost& running,
                     const TerminalCost& terminal) {
  const auto M = static_cast<Eigen::Index>(ens.grid.steps);
  const double dt = ens.grid.dt();
  double total = 0.0;
  for (Eigen::Index k = 0; k < M; ++k) {
    const double t = ens.grid.node(static_cast<std::size_t>(k));
    const double mx = ens.states.col(k).mean();
    const double ma = ens.controls.col(k).mean();
    double acc = 0.0;
    for (int i = 0; i < ens.N; ++i)
      acc += running.f(t, ens.states(i, k), mx, ma, ens.controls(i, k));
    total += acc / ens.N * dt;
  }
  const double mxT = ens.states.col(M).mean();
  double acc = 0.0;
  for (int i = 0; i < ens.N; ++i) acc += terminal.g(ens.states(i, M), mxT);
  return total + acc / ens.N;
}

DerivativeCheckReport directional_derivative_check(
    const MeanFieldDynamics& dyn, const RunningCost& running, const TerminalCost& terminal,
    const Eigen::MatrixXd& base_controls, const Eigen::MatrixXd& direction,
    const TimeGrid& grid, int N, std::uint64_t seed, const InitialLaw& law,
    const std::vector<double>& eps_list) {
  const auto M = static_cast<Eigen::Index>(grid.steps);
  const double dt = grid.dt();

  ParticleEnsemble ens = simulate_forward(dyn, ControlPolicy::open_loop(base_controls),
                                          grid, N, seed, law);

  // Exact adjoint of the discrete cost (pathwise backpropagation through
  // the Euler scheme, including the 1/N sensitivity of empirical means).
  Eigen::VectorXd Y(N);
  {
    const double mxT = ens.states.col(M).mean();
    double mean_gm = 0.0;
    for (int i = 0; i < N; ++i) mean_gm += terminal.dmx(ens.states(i, M), mxT);
    mean_gm /= N;
    for (int i = 0; i < N; ++i) Y(i) = terminal.dx(ens.states(i, M), mxT) + mean_gm;
  }

  double analytic = 0.0;
  for (Eigen::Index k = M - 1; k >= 0; --k) {
    const double t = grid.node(static_cast<std::size_t>(k));
    const double mx = ens.states.col(k).mean();
    const double ma = ens.controls.col(k).mean();
    double mean_x_term = 0.0;  // (1/N) sum_j [Y_j (b_mx dt + s_mx dW_j) + f_mx dt]
    double mean_a_term = 0.0;
    for (int j = 0; j < N; ++j) {
      const double x = ens.states(j, k);
      const double u = ens.controls(j, k);
      mean_x_term += Y(j) * (dyn.drift_dmx(t, x, mx, ma, u) * dt +
                             dyn.diff_dmx(t, x, mx, ma, u) * ens.dW(j, k)) +
                     running.dmx(t, x, mx, ma, u) * dt;
      mean_a_term += Y(j) * (dyn.drift_dma(t, x, mx, ma, u) * dt +
                             dyn.diff_dma(t, x, mx, ma, u) * ens.dW(j, k)) +
                     running.dma(t, x, mx, ma, u) * dt;
    }
    mean_x_term /= N;
    mean_a_term /= N;
    Eigen::VectorXd Ynew(N);
    double pairing = 0.0;
    for (int i = 0; i < N; ++i) {
      const double x = ens.states(i, k);
      const double u = ens.controls(i, k);
      const double G = Y(i) * (dyn.drift_du(t, x, mx, ma, u) * dt +
                               dyn.diff_du(t, x, mx, ma, u) * ens.dW(i, k)) +
                       running.du(t, x, mx, ma, u) * dt + mean_a_term;
      pairing += G * direction(i, k);
      Ynew(i) = Y(i) * (1.0 + dyn.drift_dx(t, x, mx, ma, u) * dt +
                        dyn.diff_dx(t, x, mx, ma, u) * ens.dW(i, k)) +
                running.dx(t, x, mx, ma, u) * dt + mean_x_term;
    }
    analytic += pairing / N;
    Y = std::move(Ynew);
  }

  DerivativeCheckReport rep;
  rep.analytic = analytic;
  for (double eps : eps_list) {
    auto run = [&](double sgn) {
      Eigen::MatrixXd u = base_controls + sgn * eps * direction;
      ParticleEnsemble e = simulate_forward(dyn, ControlPolicy::open_loop(u), grid, N, seed, law);
      return cost_evaluate(e, running, terminal);
    };
    const double central = (run(+1.0) - run(-1.0)) / (2.0 * eps);
    rep.central.push_back(central);
    rep.rel_error.push_back(std::abs(central - analytic) /
                            std::max(1e-12, std::abs(analytic)));
  }
  return rep;
}

}  // namespace mfc
