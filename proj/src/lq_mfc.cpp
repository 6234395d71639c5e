#include "mfc/lq_mfc.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mfc {

MeanFieldDynamics LqModel::dynamics() const {
  MeanFieldDynamics d;
  const double c1 = b1, c2 = b2, c3 = b3, c4 = b4;
  const double d1 = s1, d2 = s2, d3 = s3, d4 = s4;
  d.drift = [=](double, double x, double mx, double ma, double u) {
    return c1 * x + c2 * mx + c3 * u + c4 * ma;
  };
  d.diffusion = [=](double, double x, double mx, double ma, double u) {
    return d1 * x + d2 * mx + d3 * u + d4 * ma;
  };
  auto constant = [](double c) {
    return [c](double, double, double, double, double) { return c; };
  };
  d.drift_dx = constant(c1);
  d.drift_dmx = constant(c2);
  d.drift_du = constant(c3);
  d.drift_dma = constant(c4);
  d.diff_dx = constant(d1);
  d.diff_dmx = constant(d2);
  d.diff_du = constant(d3);
  d.diff_dma = constant(d4);
  return d;
}

RunningCost LqModel::running_cost() const {
  RunningCost r;
  const double qq = q, vv = v;
  r.f = [=](double, double x, double, double, double u) {
    return 0.5 * (qq * x * x + vv * u * u);
  };
  r.dx = [=](double, double x, double, double, double) { return qq * x; };
  r.du = [=](double, double, double, double, double u) { return vv * u; };
  r.dmx = [](double, double, double, double, double) { return 0.0; };
  r.dma = [](double, double, double, double, double) { return 0.0; };
  return r;
}

TerminalCost LqModel::terminal_cost() const {
  TerminalCost t;
  const double l = ell;
  t.g = [=](double x, double mx) { return 0.5 * l * (x - mx) * (x - mx); };
  t.dx = [=](double x, double mx) { return l * (x - mx); };
  t.dmx = [=](double x, double mx) { return -l * (x - mx); };
  return t;
}

namespace {

struct Gains {
  double g1 = 0.0, g2 = 0.0, zx = 0.0, zm = 0.0;
};

Gains lq_gains(const LqModel& mo, double beta, double zeta) {
  Gains g;
  g.g1 = -beta * (mo.b3 + mo.s1 * mo.s3) / (mo.v + mo.s3 * mo.s3 * beta);
  g.zx = mo.s1 + mo.s3 * g.g1;
  const double s34 = mo.s3 + mo.s4;
  g.g2 = -(mo.b3 * zeta + mo.b4 * (beta + zeta) + mo.s4 * beta * g.zx +
           s34 * beta * (mo.s2 + mo.s4 * g.g1)) /
         (mo.v + s34 * s34 * beta);
  g.zm = mo.s2 + mo.s4 * g.g1 + s34 * g.g2;
  return g;
}

}  // namespace

RiccatiSolution riccati_solve(const LqModel& mo, const TimeGrid& grid) {
  const auto M = grid.steps;
  const double dt = grid.dt();
  RiccatiSolution sol;
  sol.beta.assign(M + 1, 0.0);
  sol.zeta.assign(M + 1, 0.0);
  sol.gamma1.assign(M + 1, 0.0);
  sol.gamma2.assign(M + 1, 0.0);
  sol.beta[M] = mo.ell;
  sol.zeta[M] = -mo.ell;

  auto rhs = [&](double beta, double zeta, double& dbeta, double& dzeta) {
    const Gains g = lq_gains(mo, beta, zeta);
    dbeta = -(mo.b1 * beta + mo.s1 * beta * g.zx + mo.q) - beta * (mo.b1 + mo.b3 * g.g1);
    dzeta = -(mo.b1 * zeta + mo.b2 * (beta + zeta) + mo.s1 * beta * g.zm +
              mo.s2 * beta * (g.zx + g.zm)) -
            beta * (mo.b2 + mo.b3 * g.g2 + mo.b4 * (g.g1 + g.g2)) -
            zeta * (mo.b1 + mo.b2 + (mo.b3 + mo.b4) * (g.g1 + g.g2));
  };

  for (std::size_t k = M; k-- > 0;) {
    // one RK4 step backward in time (step -dt)
    double b = sol.beta[k + 1], z = sol.zeta[k + 1];
    double kb1, kz1, kb2, kz2, kb3, kz3, kb4, kz4;
    rhs(b, z, kb1, kz1);
    rhs(b - 0.5 * dt * kb1, z - 0.5 * dt * kz1, kb2, kz2);
    rhs(b - 0.5 * dt * kb2, z - 0.5 * dt * kz2, kb3, kz3);
    rhs(b - dt * kb3, z - dt * kz3, kb4, kz4);
    sol.beta[k] = b - dt / 6.0 * (kb1 + 2 * kb2 + 2 * kb3 + kb4);
    sol.zeta[k] = z - dt / 6.0 * (kz1 + 2 * kz2 + 2 * kz3 + kz4);
    if (std::abs(sol.beta[k]) > 1e8)
      throw std::runtime_error("riccati_solve: blowup at t = " +
                               std::to_string(grid.node(k)));
  }
  for (std::size_t k = 0; k <= M; ++k) {
    const Gains g = lq_gains(mo, sol.beta[k], sol.zeta[k]);
    sol.gamma1[k] = g.g1;
    sol.gamma2[k] = g.g2;
  }

  // value by forward moment ODEs in (m, S, accumulated cost)
  auto gains_at = [&](double t) {
    const double u = t / dt;
    const auto k0 = static_cast<std::size_t>(std::min(u, static_cast<double>(M)));
    const std::size_t k1 = std::min(k0 + 1, M);
    const double w = u - static_cast<double>(k0);
    const double beta = (1 - w) * sol.beta[k0] + w * sol.beta[k1];
    const double zeta = (1 - w) * sol.zeta[k0] + w * sol.zeta[k1];
    return lq_gains(mo, beta, zeta);
  };
  auto frhs = [&](double t, double m, double S, double& dm, double& dS, double& dc) {
    const Gains g = gains_at(t);
    const double gsum = g.g1 + g.g2;
    dm = (mo.b1 + mo.b2 + (mo.b3 + mo.b4) * gsum) * m;
    dS = 2.0 * (mo.b1 + mo.b3 * g.g1) * S +
         2.0 * (mo.b2 + mo.b3 * g.g2 + mo.b4 * gsum) * m * m + g.zx * g.zx * S +
         2.0 * g.zx * g.zm * m * m + g.zm * g.zm * m * m;
    dc = 0.5 * (mo.q * S +
                mo.v * (g.g1 * g.g1 * S + 2.0 * g.g1 * g.g2 * m * m + g.g2 * g.g2 * m * m));
  };
  double m = mo.m0, S = mo.v0 + mo.m0 * mo.m0, c = 0.0;
  for (std::size_t k = 0; k < M; ++k) {
    const double t = grid.node(k);
    double km1, kS1, kc1, km2, kS2, kc2, km3, kS3, kc3, km4, kS4, kc4;
    frhs(t, m, S, km1, kS1, kc1);
    frhs(t + 0.5 * dt, m + 0.5 * dt * km1, S + 0.5 * dt * kS1, km2, kS2, kc2);
    frhs(t + 0.5 * dt, m + 0.5 * dt * km2, S + 0.5 * dt * kS2, km3, kS3, kc3);
    frhs(t + dt, m + dt * km3, S + dt * kS3, km4, kS4, kc4);
    c += dt / 6.0 * (kc1 + 2 * kc2 + 2 * kc3 + kc4);
    const double mn = m + dt / 6.0 * (km1 + 2 * km2 + 2 * km3 + km4);
    const double Sn = S + dt / 6.0 * (kS1 + 2 * kS2 + 2 * kS3 + kS4);
    m = mn;
    S = Sn;
  }
  sol.value = c + 0.5 * mo.ell * (S - m * m);
  return sol;
}

LqOracle lq_oracle_discrete(const LqModel& mo, double dt) {
  const auto M = static_cast<std::size_t>(std::llround(mo.T / dt));
  if (M < 1) throw std::invalid_argument("lq_oracle: dt larger than horizon");
  const double A = 1.0 + dt * mo.b1;
  const double Abar = 1.0 + dt * (mo.b1 + mo.b2);
  const double b34 = mo.b3 + mo.b4;
  const double s12 = mo.s1 + mo.s2;
  const double s34 = mo.s3 + mo.s4;

  LqOracle out;
  out.gain_x.assign(M, 0.0);
  out.gain_mean.assign(M, 0.0);
  std::vector<double> gbar(M, 0.0);

  // deviation recursion: cost-to-go P_k E[(X_k - m_k)^2]
  double P = mo.ell;
  // mean recursion: cost-to-go Q_k m_k^2
  double Q = 0.0;
  for (std::size_t k = M; k-- > 0;) {
    const double g = -P * (A * mo.b3 + mo.s1 * mo.s3) /
                     (mo.v + P * (dt * mo.b3 * mo.b3 + mo.s3 * mo.s3));
    const double Pn = P * ((A + dt * mo.b3 * g) * (A + dt * mo.b3 * g) +
                           dt * (mo.s1 + mo.s3 * g) * (mo.s1 + mo.s3 * g)) +
                      dt * (mo.q + mo.v * g * g);
    const double gb = -(P * s12 * s34 + Q * Abar * b34) /
                      (mo.v + P * s34 * s34 + Q * dt * b34 * b34);
    const double Qn = P * dt * (s12 + s34 * gb) * (s12 + s34 * gb) +
                      Q * (Abar + dt * b34 * gb) * (Abar + dt * b34 * gb) +
                      dt * (mo.q + mo.v * gb * gb);
    out.gain_x[k] = g;
    gbar[k] = gb;
    out.gain_mean[k] = gb - g;
    P = Pn;
    Q = Qn;
  }
  out.value = 0.5 * (P * mo.v0 + Q * mo.m0 * mo.m0);
  return out;
}

std::pair<double, double> pointwise_kkt_control(double u_star, double hx, double v) {
  if (v <= 0.0) throw std::invalid_argument("pointwise_kkt_control: v must be positive");
  if (u_star <= hx) return {u_star, 0.0};
  return {hx, v * (u_star - hx)};
}

namespace {

struct Flow {
  std::vector<double> mx, ma;
};

Flow flow_of(const ParticleEnsemble& ens) {
  const auto M = static_cast<Eigen::Index>(ens.grid.steps);
  Flow f;
  f.mx.resize(static_cast<std::size_t>(M) + 1);
  f.ma.resize(static_cast<std::size_t>(M) + 1);
  for (Eigen::Index k = 0; k <= M; ++k) {
    f.mx[static_cast<std::size_t>(k)] = ens.states.col(k).mean();
    f.ma[static_cast<std::size_t>(k)] = ens.controls.col(k).mean();
  }
  return f;
}

// Shared fixed-point engine. When frozen is set the measure flow is
// held fixed (game mode): coefficients read the frozen means and the
// own-law terms drop out of the driver and the control update.
LqSolveReport solve_core(const LqModel& mo, const TimeGrid& grid, int N, std::uint64_t seed,
                         int max_iter, double damping, bool constrained,
                         const Flow* frozen) {
  const auto M = static_cast<Eigen::Index>(grid.steps);
  const double dt = grid.dt();
  if (constrained && !mo.h)
    throw std::invalid_argument("lq_mfc: constrained model needs the slope h");

  auto node_of = [&](double t) {
    return static_cast<std::size_t>(
        std::min<long long>(std::llround(t / dt), static_cast<long long>(M)));
  };

  MeanFieldDynamics dyn;
  if (!frozen) {
    dyn = mo.dynamics();
  } else {
    const Flow& fl = *frozen;
    dyn.drift = [&mo, &fl, node_of](double t, double x, double, double, double u) {
      const std::size_t k = node_of(t);
      return mo.b1 * x + mo.b2 * fl.mx[k] + mo.b3 * u + mo.b4 * fl.ma[k];
    };
    dyn.diffusion = [&mo, &fl, node_of](double t, double x, double, double, double u) {
      const std::size_t k = node_of(t);
      return mo.s1 * x + mo.s2 * fl.mx[k] + mo.s3 * u + mo.s4 * fl.ma[k];
    };
    auto constant = [](double c) {
      return [c](double, double, double, double, double) { return c; };
    };
    dyn.drift_dx = constant(mo.b1);
    dyn.drift_du = constant(mo.b3);
    dyn.drift_dmx = constant(0.0);
    dyn.drift_dma = constant(0.0);
    dyn.diff_dx = constant(mo.s1);
    dyn.diff_du = constant(mo.s3);
    dyn.diff_dmx = constant(0.0);
    dyn.diff_dma = constant(0.0);
  }
  const RunningCost running = mo.running_cost();

  InitialLaw law{mo.m0, mo.v0};

  DriverSpec spec;
  if (!frozen) {
    spec.driver = [&mo](const DriverArgs& a) {
      return mo.b1 * a.y + mo.b2 * a.mean_y + mo.s1 * a.z + mo.s2 * a.mean_z + mo.q * a.x;
    };
    spec.terminal = [&mo](double x, double mx) { return mo.ell * (x - mx); };
  } else {
    spec.driver = [&mo](const DriverArgs& a) {
      return mo.b1 * a.y + mo.s1 * a.z + mo.q * a.x;
    };
    const double mT = frozen->mx.back();
    spec.terminal = [&mo, mT](double x, double) { return mo.ell * (x - mT); };
  }

  ConstraintGradients grads;
  ConstraintSpec cons;
  if (constrained) {
    grads.psi_x.push_back([&mo](double t, double, double) { return mo.h(t); });
    PathConstraint pc;
    pc.psi = [&mo](double t, double x, double u) { return mo.h(t) * x - u; };
    pc.psi_dx = [&mo](double t, double, double) { return mo.h(t); };
    pc.psi_du = [](double, double, double) { return -1.0; };
    cons.pathwise.push_back(std::move(pc));
  }

  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(N, M + 1);  // unclamped target control
  LqSolveReport rep;
  rep.mult.r0 = 1.0;
  if (constrained) rep.mult.eta.push_back(Eigen::MatrixXd::Zero(N, M + 1));

  auto forward = [&]() {
    if (!constrained)
      return simulate_forward(dyn, ControlPolicy::open_loop(U), grid, N, seed, law);
    auto clamp = [&](double t, int i, std::size_t k, double x, double) {
      return std::min(U(i, static_cast<Eigen::Index>(k)), mo.h(t) * x);
    };
    return simulate_forward(dyn, ControlPolicy::feedback_indexed(clamp), grid, N, seed, law);
  };

  for (int it = 1; it <= max_iter; ++it) {
    rep.iterations = it;
    rep.ensemble = forward();
    if (constrained) {
      Eigen::MatrixXd& eta = rep.mult.eta[0];
      for (Eigen::Index k = 0; k < M; ++k) {
        const double t = grid.node(static_cast<std::size_t>(k));
        for (int i = 0; i < N; ++i)
          eta(i, k) = mo.v * std::max(0.0, U(i, k) - mo.h(t) * rep.ensemble.states(i, k));
      }
      eta.col(M).setZero();
    }
    rep.adjoint = solve_backward(rep.ensemble, spec, rep.mult, grads);

    Eigen::MatrixXd Unew(N, M + 1);
    for (Eigen::Index k = 0; k < M; ++k) {
      const double my = rep.adjoint.Y.col(k).mean();
      const double mz = rep.adjoint.Z.col(k).mean();
      for (int i = 0; i < N; ++i) {
        double g = mo.b3 * rep.adjoint.Y(i, k) + mo.s3 * rep.adjoint.Z(i, k);
        if (!frozen) g += mo.b4 * my + mo.s4 * mz;
        Unew(i, k) = -g / mo.v;
      }
    }
    Unew.col(M) = Unew.col(M - 1);

    rep.last_update_rms =
        std::sqrt((Unew.leftCols(M) - U.leftCols(M)).squaredNorm() / (N * M));
    U += damping * (Unew - U);
    if (rep.last_update_rms < 1e-4) {
      rep.converged = true;
      break;
    }
  }

  // final consistent forward/backward pass at the settled control
  rep.ensemble = forward();
  if (constrained) {
    Eigen::MatrixXd& eta = rep.mult.eta[0];
    for (Eigen::Index k = 0; k < M; ++k) {
      const double t = grid.node(static_cast<std::size_t>(k));
      for (int i = 0; i < N; ++i)
        eta(i, k) = mo.v * std::max(0.0, U(i, k) - mo.h(t) * rep.ensemble.states(i, k));
    }
    eta.col(M).setZero();
  }
  rep.adjoint = solve_backward(rep.ensemble, spec, rep.mult, grads);

  // Monte-Carlo cost with a normal-approximation confidence interval
  {
    const TerminalCost terminal = mo.terminal_cost();
    Eigen::VectorXd per(N);
    per.setZero();
    for (Eigen::Index k = 0; k < M; ++k) {
      const double t = grid.node(static_cast<std::size_t>(k));
      const double mx = rep.ensemble.states.col(k).mean();
      const double ma = rep.ensemble.controls.col(k).mean();
      for (int i = 0; i < N; ++i)
        per(i) += running.f(t, rep.ensemble.states(i, k), mx, ma,
                            rep.ensemble.controls(i, k)) *
                  dt;
    }
    const double mxT = rep.ensemble.states.col(M).mean();
    for (int i = 0; i < N; ++i) per(i) += terminal.g(rep.ensemble.states(i, M), mxT);
    rep.cost = per.mean();
    const double sd = std::sqrt((per.array() - rep.cost).square().sum() / (N - 1));
    rep.ci_halfwidth = 1.96 * sd / std::sqrt(static_cast<double>(N));
  }

  rep.smp.min_condition_residual = min_condition_residual(
      rep.ensemble, rep.adjoint, rep.mult, cons, dyn, running,
      -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
  if (constrained) {
    SupportCheck sc = support_check(rep.mult, rep.ensemble, cons, 1e-8);
    rep.smp.support_violation = sc.support_violation;
    rep.smp.slackness_integral = sc.slackness_integral;
    ConstraintEvals ev = evaluate_constraints(rep.ensemble, cons);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < M; ++k)
      worst = std::max(worst, -ev.psi[0].col(k).minCoeff());
    rep.smp.primal_feasibility.push_back(std::max(0.0, worst));
    rep.feasibility_worst = std::max(0.0, worst);
  }
  const double total = multiplier_total(rep.mult, grid);
  rep.smp.r0 = rep.mult.r0 / total;
  rep.smp.normalization_error = std::abs(multiplier_total(normalize(rep.mult, grid), grid) - 1.0);
  return rep;
}

}  // namespace

LqSolveReport solve_unconstrained(const LqModel& model, const TimeGrid& grid, int N,
                                  std::uint64_t seed, int max_iter, double damping) {
  if (model.constrained)
    throw std::invalid_argument("lq_mfc: model is constrained; use solve_constrained");
  return solve_core(model, grid, N, seed, max_iter, damping, false, nullptr);
}

LqSolveReport solve_constrained(const LqModel& model, const TimeGrid& grid, int N,
                                std::uint64_t seed, int max_iter, double damping) {
  return solve_core(model, grid, N, seed, max_iter, damping, true, nullptr);
}

MfgReport mfg_solve(const LqModel& model, const TimeGrid& grid, int N, std::uint64_t seed,
                    int outer_iter, double tol, double damping) {
  const std::size_t nodes = grid.nodes();
  Flow frozen;
  frozen.mx.assign(nodes, model.m0);
  frozen.ma.assign(nodes, 0.0);

  MfgReport rep;
  for (int n = 0; n <= outer_iter; ++n) {
    rep.inner = solve_core(model, grid, N, seed, 50, 0.5, model.constrained, &frozen);
    Flow fresh = flow_of(rep.inner.ensemble);
    if (n == 0) {
      frozen = std::move(fresh);  // bootstrap flow, no residual recorded
      continue;
    }
    double resid = 0.0;
    for (std::size_t k = 0; k < nodes; ++k)
      resid = std::max({resid, std::abs(fresh.mx[k] - frozen.mx[k]),
                        std::abs(fresh.ma[k] - frozen.ma[k])});
    rep.residual_history.push_back(resid);
    rep.outer_iterations = n;
    if (resid < tol) {
      rep.converged = true;
      break;
    }
    for (std::size_t k = 0; k < nodes; ++k) {
      frozen.mx[k] += damping * (fresh.mx[k] - frozen.mx[k]);
      frozen.ma[k] += damping * (fresh.ma[k] - frozen.ma[k]);
    }
  }
  return rep;
}

}  // namespace mfc
