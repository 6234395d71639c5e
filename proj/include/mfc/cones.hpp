#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace mfc {

inline constexpr double kMembershipTol = 1e-10;

/// A closed convex cone in finite dimension, represented by generators.
class ConeSpec {
 public:
  enum class Kind { Orthant, Zero, Free, Product, Polyhedral };

  static ConeSpec orthant(int n);
  static ConeSpec zero(int n);
  static ConeSpec free_space(int n);
  static ConeSpec product(std::vector<ConeSpec> factors);
  /// cone = {G w : w >= 0}, generators are the columns of G.
  static ConeSpec polyhedral(const Eigen::MatrixXd& generators);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  const std::vector<ConeSpec>& factors() const { return factors_; }

  /// Primal generators as columns (Free contributes +/- basis vectors).
  Eigen::MatrixXd generators() const;

  bool contains(const Eigen::VectorXd& y, double tol = kMembershipTol) const;
  bool dual_contains(const Eigen::VectorXd& xi, double tol = kMembershipTol) const;
  bool interior_contains(const Eigen::VectorXd& y) const;

  /// Distance of g to the cone boundary along feasibility: used for
  /// the active-set band in fj. Returns +inf when undecidable cheaply.
  double boundary_distance(const Eigen::VectorXd& y) const;

 private:
  ConeSpec() = default;
  Kind kind_ = Kind::Orthant;
  int dim_ = 0;
  std::vector<ConeSpec> factors_;
  Eigen::MatrixXd gens_;  // polyhedral only
};

/// Box {x : lower <= x <= upper}; entries may be +/- infinity.
struct BoxSet {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  BoxSet() = default;
  BoxSet(Eigen::VectorXd lo, Eigen::VectorXd up);

  static BoxSet whole_space(int n);
  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Eigen::VectorXd& x, double tol = kMembershipTol) const;
  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
};

/// sup_{c in box} <c - x, xi>, clamped at zero; zero iff xi lies in the
/// normal cone of the box at x. Throws if x is infeasible.
double normal_cone_residual(const BoxSet& box, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& xi, double tol = 1e-8);

/// min ||G w - y|| over w >= 0 (active-set NNLS, small dimensions).
Eigen::VectorXd nnls(const Eigen::MatrixXd& G, const Eigen::VectorXd& y);

}  // namespace mfc
