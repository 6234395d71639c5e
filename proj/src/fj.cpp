#include "mfc/fj.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mfc {

namespace {

// Generators (columns) of the dual cone K^+. Supported for the cone
// kinds the toy suite uses; general polyhedral duals would need facet
// enumeration.
Eigen::MatrixXd dual_generators(const ConeSpec& cone) {
  using Kind = ConeSpec::Kind;
  switch (cone.kind()) {
    case Kind::Orthant:
      return Eigen::MatrixXd::Identity(cone.dim(), cone.dim());
    case Kind::Zero: {
      Eigen::MatrixXd g(cone.dim(), 2 * cone.dim());
      g << Eigen::MatrixXd::Identity(cone.dim(), cone.dim()),
          -Eigen::MatrixXd::Identity(cone.dim(), cone.dim());
      return g;
    }
    case Kind::Free:
      return Eigen::MatrixXd(cone.dim(), 0);
    case Kind::Product: {
      int cols = 0;
      std::vector<Eigen::MatrixXd> blocks;
      for (const auto& f : cone.factors()) {
        blocks.push_back(dual_generators(f));
        cols += static_cast<int>(blocks.back().cols());
      }
      Eigen::MatrixXd g = Eigen::MatrixXd::Zero(cone.dim(), cols);
      int r = 0, c = 0;
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        g.block(r, c, cone.factors()[i].dim(), blocks[i].cols()) = blocks[i];
        r += cone.factors()[i].dim();
        c += static_cast<int>(blocks[i].cols());
      }
      return g;
    }
    case Kind::Polyhedral: {
      Eigen::MatrixXd gens = cone.generators();
      if (gens.rows() != gens.cols())
        throw std::invalid_argument("fj: dual generators need a simplicial cone");
      Eigen::FullPivLU<Eigen::MatrixXd> lu(gens);
      if (!lu.isInvertible())
        throw std::invalid_argument("fj: dual generators need invertible generators");
      return lu.inverse().transpose();
    }
  }
  return {};
}

struct Evaluated {
  double f = 0.0;
  Eigen::VectorXd grad_f;
  std::vector<Eigen::VectorXd> g_vals;
  std::vector<Eigen::MatrixXd> g_jacs;
  std::vector<Eigen::VectorXd> h_vals;
  std::vector<Eigen::MatrixXd> h_jacs;
};

Evaluated evaluate_all(const NlpProblem& p, const Eigen::VectorXd& x) {
  Evaluated e;
  e.grad_f.resize(p.dim);
  e.f = p.objective(x, &e.grad_f);
  for (const auto& blk : p.inequalities) {
    Eigen::MatrixXd jac;
    e.g_vals.push_back(blk.g(x, &jac));
    e.g_jacs.push_back(jac);
  }
  for (const auto& blk : p.equalities) {
    Eigen::MatrixXd jac;
    e.h_vals.push_back(blk.h(x, &jac));
    e.h_jacs.push_back(jac);
  }
  return e;
}

// Active box bounds at x: -1 lower, +1 upper, 0 inactive.
std::vector<int> box_activity(const BoxSet& box, const Eigen::VectorXd& x, double band) {
  std::vector<int> a(static_cast<std::size_t>(x.size()), 0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::isfinite(box.lower(i)) && x(i) - box.lower(i) < band) a[i] = -1;
    else if (std::isfinite(box.upper(i)) && box.upper(i) - x(i) < band) a[i] = +1;
  }
  return a;
}

}  // namespace

double FjCertificate::norm_sum() const {
  double s = std::abs(r0);
  for (const auto& l : lambdas) s += l.norm();
  for (const auto& m : mus) s += m.norm();
  return s;
}

std::vector<int> active_inequalities(const NlpProblem& p, const Eigen::VectorXd& x_hat) {
  std::vector<int> active;
  for (std::size_t i = 0; i < p.inequalities.size(); ++i) {
    Eigen::VectorXd gv = p.inequalities[i].g(x_hat, nullptr);
    double band = 1e-6 * (1.0 + gv.norm());
    if (p.inequalities[i].cone.boundary_distance(-gv) < band)
      active.push_back(static_cast<int>(i));
  }
  return active;
}

bool is_feasible(const NlpProblem& p, const Eigen::VectorXd& x_hat, double tol,
                 std::string* violated) {
  if (!p.feasible_set.contains(x_hat, tol)) {
    if (violated) *violated = "box";
    return false;
  }
  for (std::size_t i = 0; i < p.inequalities.size(); ++i) {
    Eigen::VectorXd gv = p.inequalities[i].g(x_hat, nullptr);
    if (!p.inequalities[i].cone.contains(-gv, tol)) {
      if (violated) *violated = "ineq." + std::to_string(i);
      return false;
    }
  }
  for (std::size_t j = 0; j < p.equalities.size(); ++j) {
    Eigen::VectorXd hv = p.equalities[j].h(x_hat, nullptr);
    if (hv.lpNorm<Eigen::Infinity>() > tol) {
      if (violated) *violated = "eq." + std::to_string(j);
      return false;
    }
  }
  return true;
}

FjResidualReport evaluate_fj_residual(const NlpProblem& p, const Eigen::VectorXd& x_hat,
                                      const FjCertificate& cert, double tol) {
  std::string blk;
  if (!is_feasible(p, x_hat, tol, &blk))
    throw std::invalid_argument("fj: x_hat infeasible in block " + blk);

  Evaluated e = evaluate_all(p, x_hat);
  FjResidualReport rep;

  Eigen::VectorXd r = cert.r0 * e.grad_f;
  if (cert.xi.size() == p.dim) r += cert.xi;
  for (std::size_t i = 0; i < p.inequalities.size(); ++i) {
    r += e.g_jacs[i].transpose() * cert.lambdas[i];
    rep.slackness_residuals.push_back(std::abs(e.g_vals[i].dot(cert.lambdas[i])));
    if (!p.inequalities[i].cone.dual_contains(cert.lambdas[i], 1e-8))
      rep.dual_feasibility = false;
  }
  for (std::size_t j = 0; j < p.equalities.size(); ++j)
    r -= e.h_jacs[j].transpose() * cert.mus[j];

  if (cert.r0 < -1e-12) rep.dual_feasibility = false;
  rep.stationarity_residual = r.norm();
  rep.normalization_error = std::abs(cert.norm_sum() - 1.0);
  if (cert.xi.size() == p.dim)
    rep.xi_normal_residual = normal_cone_residual(p.feasible_set, x_hat, cert.xi, tol);
  return rep;
}

RecoveryResult recover_multipliers(const NlpProblem& p, const Eigen::VectorXd& x_hat) {
  std::string blk;
  if (!is_feasible(p, x_hat, 1e-8, &blk))
    throw std::invalid_argument("fj: x_hat infeasible in block " + blk);

  Evaluated e = evaluate_all(p, x_hat);
  std::vector<int> active = active_inequalities(p, x_hat);
  std::vector<int> box_act = box_activity(p.feasible_set, x_hat, 1e-8);

  // With no active inequality and an inactive box, the KKT system is an
  // unconstrained least-squares problem in mu at r0 = 1; solve it
  // directly instead of iterating.
  const bool box_inactive =
      std::none_of(box_act.begin(), box_act.end(), [](int a) { return a != 0; });
  if (active.empty() && box_inactive) {
    int eq_rows = 0;
    for (const auto& J : e.h_jacs) eq_rows += static_cast<int>(J.rows());
    Eigen::MatrixXd Jt(p.dim, eq_rows);
    int c = 0;
    for (const auto& J : e.h_jacs) {
      Jt.middleCols(c, J.rows()) = J.transpose();
      c += static_cast<int>(J.rows());
    }
    Eigen::VectorXd mu = eq_rows > 0
                             ? Jt.completeOrthogonalDecomposition().solve(e.grad_f).eval()
                             : Eigen::VectorXd();
    RecoveryResult out;
    out.certificate.r0 = 1.0;
    for (std::size_t i = 0; i < p.inequalities.size(); ++i)
      out.certificate.lambdas.push_back(
          Eigen::VectorXd::Zero(p.inequalities[i].cone.dim()));
    int pos = 0;
    for (const auto& J : e.h_jacs) {
      out.certificate.mus.push_back(mu.segment(pos, J.rows()));
      pos += static_cast<int>(J.rows());
    }
    out.certificate.xi = Eigen::VectorXd::Zero(p.dim);
    double resid = (e.grad_f - (eq_rows > 0 ? (Jt * mu).eval()
                                            : Eigen::VectorXd::Zero(p.dim).eval()))
                       .norm();
    double n = out.certificate.norm_sum();
    out.certificate.r0 /= n;
    for (auto& l : out.certificate.lambdas) l /= n;
    for (auto& m : out.certificate.mus) m /= n;
    out.achieved_residual = resid / n;
    out.converged = true;
    return out;
  }

  // Column layout of the stationarity map A z:
  //   r0 -> grad f            (z >= 0)
  //   per active ineq block: dual-cone generator coefficients (z >= 0)
  //   per equality block: mu components (free)
  //   per active box bound: signed normal-cone ray coefficient (z >= 0)
  std::vector<Eigen::VectorXd> cols;
  std::vector<bool> nonneg;
  cols.push_back(e.grad_f);
  nonneg.push_back(true);

  std::vector<std::pair<int, Eigen::MatrixXd>> lambda_blocks;  // (block, dual gens)
  for (int i : active) {
    Eigen::MatrixXd D = dual_generators(p.inequalities[static_cast<std::size_t>(i)].cone);
    lambda_blocks.emplace_back(i, D);
    for (Eigen::Index c = 0; c < D.cols(); ++c) {
      cols.push_back(e.g_jacs[static_cast<std::size_t>(i)].transpose() * D.col(c));
      nonneg.push_back(true);
    }
  }
  std::size_t mu_start = cols.size();
  for (std::size_t j = 0; j < p.equalities.size(); ++j)
    for (Eigen::Index r = 0; r < e.h_jacs[j].rows(); ++r) {
      cols.push_back(-e.h_jacs[j].transpose().col(r));
      nonneg.push_back(false);
    }
  std::size_t xi_start = cols.size();
  for (Eigen::Index i = 0; i < p.dim; ++i)
    if (box_act[static_cast<std::size_t>(i)] != 0) {
      Eigen::VectorXd ray = Eigen::VectorXd::Zero(p.dim);
      ray(i) = static_cast<double>(box_act[static_cast<std::size_t>(i)]);
      cols.push_back(ray);
      nonneg.push_back(true);
    }

  const std::size_t nz = cols.size();
  Eigen::MatrixXd A(p.dim, static_cast<Eigen::Index>(nz));
  for (std::size_t c = 0; c < nz; ++c) A.col(static_cast<Eigen::Index>(c)) = cols[c];

  auto unpack = [&](const Eigen::VectorXd& z) {
    FjCertificate cert;
    cert.r0 = z(0);
    cert.lambdas.assign(p.inequalities.size(), Eigen::VectorXd());
    for (std::size_t i = 0; i < p.inequalities.size(); ++i)
      cert.lambdas[i] = Eigen::VectorXd::Zero(p.inequalities[i].cone.dim());
    std::size_t pos = 1;
    for (const auto& [bi, D] : lambda_blocks) {
      Eigen::VectorXd coef = z.segment(static_cast<Eigen::Index>(pos), D.cols());
      cert.lambdas[static_cast<std::size_t>(bi)] = D * coef;
      pos += static_cast<std::size_t>(D.cols());
    }
    for (std::size_t j = 0; j < p.equalities.size(); ++j) {
      Eigen::Index rows = e.h_jacs[j].rows();
      cert.mus.push_back(z.segment(static_cast<Eigen::Index>(pos), rows));
      pos += static_cast<std::size_t>(rows);
    }
    cert.xi = Eigen::VectorXd::Zero(p.dim);
    pos = xi_start;
    for (Eigen::Index i = 0; i < p.dim; ++i)
      if (box_act[static_cast<std::size_t>(i)] != 0)
        cert.xi(i) = static_cast<double>(box_act[static_cast<std::size_t>(i)]) *
                     z(static_cast<Eigen::Index>(pos++));
    return cert;
  };

  // Minimize ||A z|| over the unit sphere intersected with the sign
  // cone: projected power iteration on c I - A^T A climbs toward the
  // smallest admissible singular direction; the homogeneous residual
  // ratio is rescaled to the normalization surface afterwards.
  Eigen::MatrixXd AtA = A.transpose() * A;
  const double c_shift = AtA.norm() + 1.0;

  Eigen::VectorXd z =
      Eigen::VectorXd::Ones(static_cast<Eigen::Index>(nz)).normalized();
  const int max_iter = 20000;
  int it = 0;
  for (; it < max_iter; ++it) {
    Eigen::VectorXd znew = c_shift * z - AtA * z;
    for (std::size_t c = 0; c < nz; ++c)
      if (nonneg[c] && znew(static_cast<Eigen::Index>(c)) < 0.0)
        znew(static_cast<Eigen::Index>(c)) = 0.0;
    double n = znew.norm();
    if (n < 1e-14) {
      // all mass projected away; restart from the objective ray
      znew = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nz));
      znew(0) = 1.0;
      n = 1.0;
    }
    znew /= n;
    if ((znew - z).lpNorm<Eigen::Infinity>() < 1e-15) {
      z = znew;
      break;
    }
    z = znew;
  }

  RecoveryResult out;
  out.certificate = unpack(z);
  // exact renormalization
  double n = out.certificate.norm_sum();
  if (n > 0) {
    out.certificate.r0 /= n;
    for (auto& l : out.certificate.lambdas) l /= n;
    for (auto& m : out.certificate.mus) m /= n;
    out.certificate.xi /= n;
  }
  out.achieved_residual = (A * z).norm() / (n > 0 ? n : 1.0);
  out.converged = it < max_iter;
  return out;
}

namespace {

struct StackedJacobian {
  Eigen::MatrixXd rows;  // restricted to the X1 coordinates
  int eq_rows = 0;
};

StackedJacobian stack_active_jacobians(const NlpProblem& p, const Evaluated& e,
                                       const std::vector<int>& active, bool include_ineq) {
  int split = p.split_index == 0 ? p.dim : p.split_index;
  int nrows = 0;
  if (include_ineq)
    for (int i : active) nrows += static_cast<int>(e.g_jacs[static_cast<std::size_t>(i)].rows());
  int eq_rows = 0;
  for (const auto& J : e.h_jacs) eq_rows += static_cast<int>(J.rows());
  StackedJacobian s;
  s.eq_rows = eq_rows;
  s.rows.resize(nrows + eq_rows, split);
  int r = 0;
  if (include_ineq)
    for (int i : active) {
      const auto& J = e.g_jacs[static_cast<std::size_t>(i)];
      s.rows.block(r, 0, J.rows(), split) = J.leftCols(split);
      r += static_cast<int>(J.rows());
    }
  for (const auto& J : e.h_jacs) {
    s.rows.block(r, 0, J.rows(), split) = J.leftCols(split);
    r += static_cast<int>(J.rows());
  }
  return s;
}

bool full_row_rank(const Eigen::MatrixXd& M, int* rank_out) {
  if (M.rows() == 0) {
    if (rank_out) *rank_out = 0;
    return true;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  double smax = svd.singularValues()(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-8 * std::max(smax, 1e-300)) ++rank;
  if (rank_out) *rank_out = rank;
  return rank == M.rows();
}

}  // namespace

CqReport check_licq(const NlpProblem& p, const Eigen::VectorXd& x_hat) {
  Evaluated e = evaluate_all(p, x_hat);
  CqReport rep;
  rep.active_set = active_inequalities(p, x_hat);
  StackedJacobian s = stack_active_jacobians(p, e, rep.active_set, true);
  rep.jacobian_rows = static_cast<int>(s.rows.rows());
  rep.licq = full_row_rank(s.rows, &rep.jacobian_rank);
  return rep;
}

CqReport check_mfcq(const NlpProblem& p, const Eigen::VectorXd& x_hat) {
  Evaluated e = evaluate_all(p, x_hat);
  CqReport rep;
  rep.active_set = active_inequalities(p, x_hat);

  StackedJacobian eq_only = stack_active_jacobians(p, e, {}, false);
  int rank = 0;
  bool eq_surjective = full_row_rank(eq_only.rows, &rank);
  rep.jacobian_rank = rank;
  rep.jacobian_rows = static_cast<int>(eq_only.rows.rows());
  if (!eq_surjective) return rep;

  // Strict rows: Dg d interior to -K_i means <xi, Dg d> < 0 for every
  // dual generator xi, so the search rows are (dual gens)^T Dg. The zero
  // cone has empty dual interior, which correctly yields mfcq false.
  std::vector<Eigen::MatrixXd> strict_storage;
  for (int i : rep.active_set) {
    const auto& blk = p.inequalities[static_cast<std::size_t>(i)];
    if (blk.cone.kind() == ConeSpec::Kind::Zero) return rep;
    Eigen::MatrixXd D = dual_generators(blk.cone);
    if (D.cols() == 0) continue;  // free cone: no restriction
    strict_storage.push_back(D.transpose() * e.g_jacs[static_cast<std::size_t>(i)]);
  }
  std::vector<const Eigen::MatrixXd*> strict_rows;
  for (const auto& m : strict_storage) strict_rows.push_back(&m);

  // Full equality Jacobian (all coordinates) for the direction constraint.
  int eq_rows = 0;
  for (const auto& J : e.h_jacs) eq_rows += static_cast<int>(J.rows());
  Eigen::MatrixXd Jh(eq_rows, p.dim);
  {
    int r = 0;
    for (const auto& J : e.h_jacs) {
      Jh.block(r, 0, J.rows(), p.dim) = J;
      r += static_cast<int>(J.rows());
    }
  }
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(p.dim, p.dim);
  if (eq_rows > 0) {
    Eigen::MatrixXd JJt = Jh * Jh.transpose();
    P -= Jh.transpose() * JJt.completeOrthogonalDecomposition().pseudoInverse() * Jh;
  }

  std::vector<int> box_act = box_activity(p.feasible_set, x_hat, 1e-8);
  auto clip_tangent = [&](Eigen::VectorXd d) {
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (box_act[static_cast<std::size_t>(i)] == -1 && d(i) < 0.0) d(i) = 0.0;
      if (box_act[static_cast<std::size_t>(i)] == +1 && d(i) > 0.0) d(i) = 0.0;
    }
    return d;
  };
  auto maxval = [&](const Eigen::VectorXd& d) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto* J : strict_rows)
      for (Eigen::Index r = 0; r < J->rows(); ++r) m = std::max(m, J->row(r).dot(d));
    return m;
  };

  // Subgradient descent on max_i (Dg d)_i over the tangent set.
  Eigen::VectorXd d = Eigen::VectorXd::Zero(p.dim);
  Eigen::VectorXd best_d = d;
  double best = strict_rows.empty() ? -1.0 : maxval(d);
  for (int iter = 0; iter < 800 && !strict_rows.empty(); ++iter) {
    // subgradient: row attaining the max
    Eigen::VectorXd sg = Eigen::VectorXd::Zero(p.dim);
    double m = -std::numeric_limits<double>::infinity();
    for (const auto* J : strict_rows)
      for (Eigen::Index r = 0; r < J->rows(); ++r) {
        double v = J->row(r).dot(d);
        if (v > m) {
          m = v;
          sg = J->row(r).transpose();
        }
      }
    double step = 1.0 / (1.0 + 0.05 * iter);
    d = clip_tangent(P * (d - step * sg));
    double dn = d.lpNorm<Eigen::Infinity>();
    if (dn > 1.0) d /= dn;
    d = clip_tangent(P * d);
    double v = maxval(d);
    if (v < best) {
      best = v;
      best_d = d;
    }
  }
  if (strict_rows.empty()) {
    // no active inequality: any c works, take c = x_hat
    rep.mfcq = true;
    rep.mfcq_witness = x_hat;
    return rep;
  }
  if (best < -1e-8) {
    // scale the direction into the box
    double t = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < p.dim; ++i) {
      if (best_d(i) > 1e-14 && std::isfinite(p.feasible_set.upper(i)))
        t = std::min(t, (p.feasible_set.upper(i) - x_hat(i)) / best_d(i));
      if (best_d(i) < -1e-14 && std::isfinite(p.feasible_set.lower(i)))
        t = std::min(t, (p.feasible_set.lower(i) - x_hat(i)) / best_d(i));
    }
    if (!std::isfinite(t)) t = 1.0;
    if (t > 0.0) {
      rep.mfcq = true;
      rep.mfcq_witness = x_hat + t * best_d;
    }
  }
  return rep;
}

bool check_kkt(const NlpProblem& p, const Eigen::VectorXd& x_hat,
               const FjCertificate& cert, double tol) {
  FjResidualReport rep = evaluate_fj_residual(p, x_hat, cert);
  if (!rep.dual_feasibility) return false;
  if (rep.stationarity_residual > tol) return false;
  for (double s : rep.slackness_residuals)
    if (s > tol) return false;
  if (rep.normalization_error > 1e-8) return false;
  return cert.r0 > tol;
}

Eigen::VectorXd brute_force_minimize(const NlpProblem& p,
                                     const std::vector<int>& points_per_axis,
                                     double eq_tol) {
  if (p.dim > 4) throw std::invalid_argument("brute_force: dim must be <= 4");
  if (static_cast<int>(points_per_axis.size()) != p.dim)
    throw std::invalid_argument("brute_force: need a resolution per axis");
  for (Eigen::Index i = 0; i < p.dim; ++i)
    if (!std::isfinite(p.feasible_set.lower(i)) || !std::isfinite(p.feasible_set.upper(i)))
      throw std::invalid_argument("brute_force: box must be bounded");

  Eigen::VectorXd best;
  double best_f = std::numeric_limits<double>::infinity();
  std::vector<int> idx(static_cast<std::size_t>(p.dim), 0);
  while (true) {
    Eigen::VectorXd x(p.dim);
    for (Eigen::Index i = 0; i < p.dim; ++i) {
      int n = points_per_axis[static_cast<std::size_t>(i)];
      double t = n > 1 ? static_cast<double>(idx[static_cast<std::size_t>(i)]) / (n - 1) : 0.0;
      x(i) = p.feasible_set.lower(i) + t * (p.feasible_set.upper(i) - p.feasible_set.lower(i));
    }
    if (is_feasible(p, x, eq_tol)) {
      double f = p.objective(x, nullptr);
      if (f < best_f) {
        best_f = f;
        best = x;
      }
    }
    // advance the multi-index
    Eigen::Index i = 0;
    for (; i < p.dim; ++i) {
      if (++idx[static_cast<std::size_t>(i)] < points_per_axis[static_cast<std::size_t>(i)]) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
    if (i == p.dim) break;
  }
  if (best.size() == 0) throw std::runtime_error("brute_force: empty feasible grid");
  return best;
}

}  // namespace mfc
