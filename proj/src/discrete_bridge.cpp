#include "mfc/discrete_bridge.hpp"

#include <cmath>
#include <stdexcept>

namespace mfc {

DiscreteControlProblem discretize(const DeterministicScenario& sc, const TimeGrid& grid) {
  const std::size_t M = grid.steps;
  const double dt = grid.dt();
  const auto dim = static_cast<Eigen::Index>(2 * M + 1);

  DiscreteControlProblem p;
  p.grid = grid;
  p.nlp.dim = static_cast<int>(dim);
  p.nlp.feasible_set = BoxSet::whole_space(static_cast<int>(dim));

  auto xi = [M](std::size_t k) { return static_cast<Eigen::Index>(k); };
  auto ui = [M](std::size_t k) { return static_cast<Eigen::Index>(M + 1 + k); };

  p.nlp.objective = [sc, M, dt, xi, ui](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
    double total = 0.0;
    if (grad) grad->setZero(z.size());
    for (std::size_t k = 0; k < M; ++k) {
      const double t = static_cast<double>(k) * dt;
      const double x = z(xi(k)), u = z(ui(k));
      total += sc.running(t, x, u) * dt;
      if (grad) {
        (*grad)(xi(k)) += sc.running_dx(t, x, u) * dt;
        (*grad)(ui(k)) += sc.running_du(t, x, u) * dt;
      }
    }
    total += sc.terminal(z(xi(M)));
    if (grad) (*grad)(xi(M)) += sc.terminal_dx(z(xi(M)));
    return total;
  };

  NlpProblem::EqBlock dynamics;
  dynamics.out_dim = static_cast<int>(M);
  dynamics.h = [sc, M, dt, dim, xi, ui](const Eigen::VectorXd& z, Eigen::MatrixXd* jac) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(M));
    if (jac) jac->setZero(static_cast<Eigen::Index>(M), dim);
    for (std::size_t k = 0; k < M; ++k) {
      const double t = static_cast<double>(k) * dt;
      const double x = z(xi(k)), u = z(ui(k));
      out(static_cast<Eigen::Index>(k)) = z(xi(k + 1)) - x - dt * sc.drift(t, x, u);
      if (jac) {
        (*jac)(static_cast<Eigen::Index>(k), xi(k + 1)) = 1.0;
        (*jac)(static_cast<Eigen::Index>(k), xi(k)) = -1.0 - dt * sc.drift_dx(t, x, u);
        (*jac)(static_cast<Eigen::Index>(k), ui(k)) = -dt * sc.drift_du(t, x, u);
      }
    }
    return out;
  };
  p.nlp.equalities.push_back(std::move(dynamics));

  NlpProblem::EqBlock pin;
  pin.out_dim = 1;
  pin.h = [sc, dim, xi](const Eigen::VectorXd& z, Eigen::MatrixXd* jac) {
    Eigen::VectorXd out(1);
    out(0) = z(xi(0)) - sc.x0;
    if (jac) {
      jac->setZero(1, dim);
      (*jac)(0, xi(0)) = 1.0;
    }
    return out;
  };
  p.nlp.equalities.push_back(std::move(pin));

  if (sc.h) {
    NlpProblem::IneqBlock con{
        [sc, M, dt, dim, xi, ui](const Eigen::VectorXd& z, Eigen::MatrixXd* jac) {
          Eigen::VectorXd out(static_cast<Eigen::Index>(M));
          if (jac) jac->setZero(static_cast<Eigen::Index>(M), dim);
          for (std::size_t k = 0; k < M; ++k) {
            const double t = static_cast<double>(k) * dt;
            out(static_cast<Eigen::Index>(k)) = z(ui(k)) - sc.h(t) * z(xi(k));
            if (jac) {
              (*jac)(static_cast<Eigen::Index>(k), ui(k)) = 1.0;
              (*jac)(static_cast<Eigen::Index>(k), xi(k)) = -sc.h(t);
            }
          }
          return out;
        },
        ConeSpec::orthant(static_cast<int>(M))};
    p.nlp.inequalities.push_back(std::move(con));
  }
  return p;
}

namespace {

struct QuadraticData {
  Eigen::MatrixXd H;
  Eigen::VectorXd c;
  Eigen::MatrixXd E;   // stacked dynamics + pin rows
  Eigen::VectorXd be;  // E z = be
  Eigen::MatrixXd G;   // inequality rows, G z + g0 <= 0
  Eigen::VectorXd g0;
};

// Exact extraction for linear-quadratic instances: the gradient of a
// quadratic is affine, so unit-vector differences recover the Hessian
// without truncation error.
QuadraticData extract(const DiscreteControlProblem& p) {
  const auto n = static_cast<Eigen::Index>(p.nlp.dim);
  QuadraticData q;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  q.c.resize(n);
  p.nlp.objective(zero, &q.c);
  q.H.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd g(n);
    p.nlp.objective(Eigen::VectorXd::Unit(n, i), &g);
    q.H.col(i) = g - q.c;
  }
  std::vector<Eigen::MatrixXd> jacs;
  std::vector<Eigen::VectorXd> vals;
  Eigen::Index rows = 0;
  for (const auto& blk : p.nlp.equalities) {
    Eigen::MatrixXd J;
    vals.push_back(blk.h(zero, &J));
    jacs.push_back(J);
    rows += J.rows();
  }
  q.E.resize(rows, n);
  q.be.resize(rows);
  Eigen::Index r = 0;
  for (std::size_t b = 0; b < jacs.size(); ++b) {
    q.E.middleRows(r, jacs[b].rows()) = jacs[b];
    q.be.segment(r, jacs[b].rows()) = -vals[b];
    r += jacs[b].rows();
  }
  if (!p.nlp.inequalities.empty()) {
    Eigen::MatrixXd J;
    q.g0 = p.nlp.inequalities[0].g(zero, &J);
    q.G = J;
  }
  return q;
}

struct KktResult {
  Eigen::VectorXd z;
  Eigen::VectorXd mu;
  bool ok = false;
};

// [H  -E^T] [z ]   [-c]
// [E    0 ] [mu] = [ b]
KktResult solve_kkt(const Eigen::MatrixXd& H, const Eigen::VectorXd& c,
                    const Eigen::MatrixXd& E, const Eigen::VectorXd& b) {
  const Eigen::Index n = H.rows(), m = E.rows();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = H;
  K.topRightCorner(n, m) = -E.transpose();
  K.bottomLeftCorner(m, n) = E;
  Eigen::VectorXd rhs(n + m);
  rhs << -c, b;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  KktResult res;
  if (!lu.isInvertible()) return res;
  Eigen::VectorXd sol = lu.solve(rhs);
  res.z = sol.head(n);
  res.mu = sol.tail(m);
  res.ok = true;
  return res;
}

}  // namespace

QpSolution solve_discrete_qp(const DiscreteControlProblem& p) {
  const auto M = static_cast<Eigen::Index>(p.grid.steps);
  QuadraticData q = extract(p);

  QpSolution out;
  if (p.nlp.inequalities.empty()) {
    KktResult res = solve_kkt(q.H, q.c, q.E, q.be);
    if (!res.ok) throw std::runtime_error("discrete_bridge: singular KKT system");
    out.z = res.z;
    out.dyn_multipliers = res.mu.head(M);
    out.pin_multiplier = res.mu(M);
    return out;
  }

  if (p.grid.steps > 10)
    throw std::invalid_argument("discrete_bridge: active-set enumeration needs M <= 10");
  const double tol = 1e-9;
  for (unsigned long mask = 0; mask < (1UL << p.grid.steps); ++mask) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index k = 0; k < M; ++k)
      if (mask & (1UL << k)) act.push_back(k);
    Eigen::MatrixXd E(q.E.rows() + static_cast<Eigen::Index>(act.size()), q.E.cols());
    Eigen::VectorXd b(E.rows());
    E.topRows(q.E.rows()) = q.E;
    b.head(q.E.rows()) = q.be;
    for (std::size_t a = 0; a < act.size(); ++a) {
      E.row(q.E.rows() + static_cast<Eigen::Index>(a)) = q.G.row(act[a]);
      b(q.E.rows() + static_cast<Eigen::Index>(a)) = -q.g0(act[a]);
    }
    KktResult res = solve_kkt(q.H, q.c, E, b);
    if (!res.ok) continue;
    Eigen::VectorXd gval = q.G * res.z + q.g0;
    if ((gval.array() > tol).any()) continue;
    // inequality multipliers: lambda = -nu in the equality convention
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(M);
    bool sign_ok = true;
    for (std::size_t a = 0; a < act.size(); ++a) {
      const double l = -res.mu(q.E.rows() + static_cast<Eigen::Index>(a));
      if (l < -tol) {
        sign_ok = false;
        break;
      }
      lambda(act[a]) = std::max(0.0, l);
    }
    if (!sign_ok) continue;
    out.z = res.z;
    out.dyn_multipliers = res.mu.head(M);
    out.pin_multiplier = res.mu(M);
    out.ineq_multipliers = lambda;
    return out;
  }
  throw std::runtime_error("discrete_bridge: no KKT-consistent active set found");
}

FjCertificate certificate_from_qp(const DiscreteControlProblem& p, const QpSolution& qp) {
  FjCertificate cert;
  cert.r0 = 1.0;
  cert.mus.push_back(qp.dyn_multipliers);
  cert.mus.push_back(Eigen::VectorXd::Constant(1, qp.pin_multiplier));
  if (!p.nlp.inequalities.empty()) cert.lambdas.push_back(qp.ineq_multipliers);
  cert.xi = Eigen::VectorXd::Zero(p.nlp.dim);
  const double n = cert.norm_sum();
  cert.r0 /= n;
  for (auto& l : cert.lambdas) l /= n;
  for (auto& m : cert.mus) m /= n;
  return cert;
}

MultiplierComparison compare_multipliers(const FjCertificate& cert,
                                         const std::function<double(double, double)>& adjoint,
                                         const Eigen::VectorXd& x_nodes,
                                         const TimeGrid& grid,
                                         const DeterministicScenario& sc) {
  if (cert.r0 <= 0.0)
    throw std::invalid_argument("discrete_bridge: abnormal certificate, comparison undefined");
  const std::size_t M = grid.steps;
  if (cert.mus.empty() || cert.mus[0].size() != static_cast<Eigen::Index>(M))
    throw std::invalid_argument("discrete_bridge: certificate lacks the dynamics block");

  MultiplierComparison cmp;
  cmp.scaling_factor = 1.0 / cert.r0;
  for (std::size_t k = 0; k < M; ++k) {
    const double mu = cert.mus[0](static_cast<Eigen::Index>(k)) * cmp.scaling_factor;
    const double left = adjoint(grid.node(k), x_nodes(static_cast<Eigen::Index>(k)));
    const double right = adjoint(grid.node(k + 1), x_nodes(static_cast<Eigen::Index>(k + 1)));
    cmp.discrete.push_back(mu);
    cmp.adjoint_left.push_back(left);
    cmp.sup_error = std::max(cmp.sup_error, std::abs(mu - left));
    cmp.sup_error_right = std::max(cmp.sup_error_right, std::abs(mu - right));
  }
  cmp.transversality_error =
      std::abs(cmp.discrete.back() - sc.terminal_dx(x_nodes(static_cast<Eigen::Index>(M))));
  return cmp;
}

ConvergenceStudy convergence_study(const DeterministicScenario& sc,
                                   const std::vector<double>& dt_list,
                                   const std::function<double(double, double)>& adjoint) {
  ConvergenceStudy study;
  for (double dt : dt_list) {
    TimeGrid grid(sc.T, static_cast<std::size_t>(std::llround(sc.T / dt)));
    DiscreteControlProblem p = discretize(sc, grid);
    QpSolution qp = solve_discrete_qp(p);
    FjCertificate cert = certificate_from_qp(p, qp);
    Eigen::VectorXd x_nodes = qp.z.head(static_cast<Eigen::Index>(grid.steps) + 1);
    MultiplierComparison cmp = compare_multipliers(cert, adjoint, x_nodes, grid, sc);
    study.rows.push_back({grid.dt(), cmp.sup_error});
  }
  if (study.rows.size() >= 2) {
    bool above_noise = true;
    for (const auto& r : study.rows) above_noise = above_noise && r.sup_error > 1e-12;
    if (above_noise) {
      const auto n = static_cast<double>(study.rows.size());
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (const auto& r : study.rows) {
        const double lx = std::log(r.dt), ly = std::log(r.sup_error);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
      }
      study.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
      study.slope_valid = true;
    }
  }
  return study;
}

}  // namespace mfc
