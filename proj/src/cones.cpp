#include "mfc/cones.hpp"

#include <cmath>
#include <stdexcept>

namespace mfc {

ConeSpec ConeSpec::orthant(int n) {
  if (n <= 0) throw std::invalid_argument("cone: dimension must be positive");
  ConeSpec c;
  c.kind_ = Kind::Orthant;
  c.dim_ = n;
  return c;
}

ConeSpec ConeSpec::zero(int n) {
  if (n <= 0) throw std::invalid_argument("cone: dimension must be positive");
  ConeSpec c;
  c.kind_ = Kind::Zero;
  c.dim_ = n;
  return c;
}

ConeSpec ConeSpec::free_space(int n) {
  if (n <= 0) throw std::invalid_argument("cone: dimension must be positive");
  ConeSpec c;
  c.kind_ = Kind::Free;
  c.dim_ = n;
  return c;
}

ConeSpec ConeSpec::product(std::vector<ConeSpec> factors) {
  if (factors.empty()) throw std::invalid_argument("cone: empty product");
  ConeSpec c;
  c.kind_ = Kind::Product;
  c.dim_ = 0;
  for (const auto& f : factors) c.dim_ += f.dim();
  c.factors_ = std::move(factors);
  return c;
}

ConeSpec ConeSpec::polyhedral(const Eigen::MatrixXd& generators) {
  if (generators.rows() == 0 || generators.cols() == 0)
    throw std::invalid_argument("cone: polyhedral needs at least one generator");
  for (Eigen::Index j = 0; j < generators.cols(); ++j)
    if (generators.col(j).norm() == 0.0)
      throw std::invalid_argument("cone: polyhedral generator column is all zero");
  ConeSpec c;
  c.kind_ = Kind::Polyhedral;
  c.dim_ = static_cast<int>(generators.rows());
  c.gens_ = generators;
  return c;
}

Eigen::MatrixXd ConeSpec::generators() const {
  switch (kind_) {
    case Kind::Orthant:
      return Eigen::MatrixXd::Identity(dim_, dim_);
    case Kind::Zero:
      return Eigen::MatrixXd(dim_, 0);
    case Kind::Free: {
      Eigen::MatrixXd g(dim_, 2 * dim_);
      g << Eigen::MatrixXd::Identity(dim_, dim_), -Eigen::MatrixXd::Identity(dim_, dim_);
      return g;
    }
    case Kind::Polyhedral:
      return gens_;
    case Kind::Product: {
      int cols = 0;
      for (const auto& f : factors_) cols += static_cast<int>(f.generators().cols());
      Eigen::MatrixXd g = Eigen::MatrixXd::Zero(dim_, cols);
      int r = 0, c = 0;
      for (const auto& f : factors_) {
        Eigen::MatrixXd gf = f.generators();
        g.block(r, c, f.dim(), gf.cols()) = gf;
        r += f.dim();
        c += static_cast<int>(gf.cols());
      }
      return g;
    }
  }
  return {};
}

namespace {

// Lawson-Hanson style active set; fine at desk dimensions.
Eigen::VectorXd nnls_impl(const Eigen::MatrixXd& G, const Eigen::VectorXd& y) {
  const Eigen::Index m = G.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  std::vector<bool> passive(static_cast<std::size_t>(m), false);
  const double tol = 1e-12 * (1.0 + y.norm());
  for (int outer = 0; outer < 4 * static_cast<int>(m) + 16; ++outer) {
    Eigen::VectorXd grad = G.transpose() * (y - G * w);
    Eigen::Index best = -1;
    double bestv = tol;
    for (Eigen::Index j = 0; j < m; ++j)
      if (!passive[static_cast<std::size_t>(j)] && grad(j) > bestv) {
        bestv = grad(j);
        best = j;
      }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;
    while (true) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index j = 0; j < m; ++j)
        if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
      Eigen::MatrixXd Gp(G.rows(), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t j = 0; j < idx.size(); ++j) Gp.col(static_cast<Eigen::Index>(j)) = G.col(idx[j]);
      Eigen::VectorXd z = Gp.colPivHouseholderQr().solve(y);
      if ((z.array() > 0.0).all()) {
        w.setZero();
        for (std::size_t j = 0; j < idx.size(); ++j) w(idx[j]) = z(static_cast<Eigen::Index>(j));
        break;
      }
      // shrink toward feasibility, drop the binding index
      double alpha = 1.0;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        double zj = z(static_cast<Eigen::Index>(j));
        if (zj <= 0.0) {
          double wj = w(idx[j]);
          if (wj - zj > 0.0) alpha = std::min(alpha, wj / (wj - zj));
        }
      }
      for (std::size_t j = 0; j < idx.size(); ++j)
        w(idx[j]) += alpha * (z(static_cast<Eigen::Index>(j)) - w(idx[j]));
      for (Eigen::Index j = 0; j < m; ++j)
        if (passive[static_cast<std::size_t>(j)] && w(j) <= 1e-14) {
          passive[static_cast<std::size_t>(j)] = false;
          w(j) = 0.0;
        }
    }
  }
  return w;
}

}  // namespace

Eigen::VectorXd nnls(const Eigen::MatrixXd& G, const Eigen::VectorXd& y) {
  return nnls_impl(G, y);
}

bool ConeSpec::contains(const Eigen::VectorXd& y, double tol) const {
  if (y.size() != dim_) throw std::invalid_argument("cone: dimension mismatch");
  switch (kind_) {
    case Kind::Orthant:
      return (y.array() >= -tol).all();
    case Kind::Zero:
      return y.lpNorm<Eigen::Infinity>() <= tol;
    case Kind::Free:
      return true;
    case Kind::Product: {
      int r = 0;
      for (const auto& f : factors_) {
        if (!f.contains(y.segment(r, f.dim()), tol)) return false;
        r += f.dim();
      }
      return true;
    }
    case Kind::Polyhedral: {
      Eigen::VectorXd w = nnls_impl(gens_, y);
      return (gens_ * w - y).lpNorm<Eigen::Infinity>() <= tol + 1e-12 * (1.0 + y.norm());
    }
  }
  return false;
}

bool ConeSpec::dual_contains(const Eigen::VectorXd& xi, double tol) const {
  if (xi.size() != dim_) throw std::invalid_argument("cone: dimension mismatch");
  if (kind_ == Kind::Product) {
    int r = 0;
    for (const auto& f : factors_) {
      if (!f.dual_contains(xi.segment(r, f.dim()), tol)) return false;
      r += f.dim();
    }
    return true;
  }
  Eigen::MatrixXd g = generators();
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    if (g.col(j).dot(xi) < -tol) return false;
  return true;  // zero cone has no generators: dual is the whole space
}

bool ConeSpec::interior_contains(const Eigen::VectorXd& y) const {
  if (y.size() != dim_) throw std::invalid_argument("cone: dimension mismatch");
  switch (kind_) {
    case Kind::Orthant:
      return (y.array() > 0.0).all();
    case Kind::Zero:
      return false;  // empty interior
    case Kind::Free:
      return true;
    case Kind::Product: {
      int r = 0;
      for (const auto& f : factors_) {
        if (!f.interior_contains(y.segment(r, f.dim()))) return false;
        r += f.dim();
      }
      return true;
    }
    case Kind::Polyhedral: {
      // dual generators are computable in closed form only for square
      // invertible generator matrices; other shapes report no interior
      if (gens_.rows() != gens_.cols()) return false;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(gens_);
      if (!lu.isInvertible()) return false;
      Eigen::MatrixXd dual_gens = lu.inverse();  // rows
      for (Eigen::Index i = 0; i < dual_gens.rows(); ++i)
        if (dual_gens.row(i).dot(y) <= 0.0) return false;
      return true;
    }
  }
  return false;
}

double ConeSpec::boundary_distance(const Eigen::VectorXd& y) const {
  if (y.size() != dim_) throw std::invalid_argument("cone: dimension mismatch");
  switch (kind_) {
    case Kind::Orthant:
      return std::abs(y.minCoeff());
    case Kind::Zero:
      return y.lpNorm<Eigen::Infinity>();  // every member is boundary
    case Kind::Free:
      return std::numeric_limits<double>::infinity();
    case Kind::Product: {
      double d = std::numeric_limits<double>::infinity();
      int r = 0;
      for (const auto& f : factors_) {
        d = std::min(d, f.boundary_distance(y.segment(r, f.dim())));
        r += f.dim();
      }
      return d;
    }
    case Kind::Polyhedral: {
      Eigen::VectorXd w = nnls_impl(gens_, y);
      double fit = (gens_ * w - y).norm();
      if (fit > 1e-8 * (1.0 + y.norm())) return fit;  // outside: distance to cone
      if (gens_.rows() == gens_.cols()) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(gens_);
        if (lu.isInvertible()) {
          Eigen::MatrixXd dual_gens = lu.inverse();
          double d = std::numeric_limits<double>::infinity();
          for (Eigen::Index i = 0; i < dual_gens.rows(); ++i)
            d = std::min(d, dual_gens.row(i).dot(y) / dual_gens.row(i).norm());
          return std::abs(d);
        }
      }
      return 0.0;  // conservative: treat as boundary
    }
  }
  return 0.0;
}

BoxSet::BoxSet(Eigen::VectorXd lo, Eigen::VectorXd up)
    : lower(std::move(lo)), upper(std::move(up)) {
  if (lower.size() != upper.size())
    throw std::invalid_argument("box: bound dimension mismatch");
  for (Eigen::Index i = 0; i < lower.size(); ++i)
    if (lower(i) > upper(i)) throw std::invalid_argument("box: lower > upper");
}

BoxSet BoxSet::whole_space(int n) {
  const double inf = std::numeric_limits<double>::infinity();
  return BoxSet(Eigen::VectorXd::Constant(n, -inf), Eigen::VectorXd::Constant(n, inf));
}

bool BoxSet::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != lower.size()) throw std::invalid_argument("box: dimension mismatch");
  return (x.array() >= lower.array() - tol).all() &&
         (x.array() <= upper.array() + tol).all();
}

Eigen::VectorXd BoxSet::project(const Eigen::VectorXd& x) const {
  return x.cwiseMax(lower).cwiseMin(upper);
}

double normal_cone_residual(const BoxSet& box, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& xi, double tol) {
  if (!box.contains(x, tol))
    throw std::invalid_argument("normal_cone_residual: x outside the box");
  double sup = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (xi(i) > 0.0) {
      if (std::isinf(box.upper(i))) return std::numeric_limits<double>::infinity();
      sup += (box.upper(i) - x(i)) * xi(i);
    } else if (xi(i) < 0.0) {
      if (std::isinf(box.lower(i))) return std::numeric_limits<double>::infinity();
      sup += (box.lower(i) - x(i)) * xi(i);
    }
  }
  return std::max(0.0, sup);
}

}  // namespace mfc
