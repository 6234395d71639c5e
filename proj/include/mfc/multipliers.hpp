#pragma once

#include <Eigen/Dense>
#include <vector>

namespace mfc {

/// Multiplier bundle of the constrained maximum principle: objective
/// weight r0, one discrete measure (grid atom weights) per expectation
/// constraint, one nonnegative particle field eta per pathwise
/// constraint.
struct MultiplierSet {
  double r0 = 1.0;
  std::vector<Eigen::VectorXd> atom_weights;  // each of length M+1, entries >= 0
  std::vector<Eigen::MatrixXd> eta;           // each N x (M+1), entries >= 0
};

}  // namespace mfc
