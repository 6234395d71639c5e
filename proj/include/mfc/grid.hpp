#pragma once

#include <cstddef>
#include <stdexcept>

namespace mfc {

/// Uniform time grid on [0, T] with M steps and M+1 nodes.
struct TimeGrid {
  double horizon = 1.0;
  std::size_t steps = 1;

  TimeGrid() = default;
  TimeGrid(double T, std::size_t M) : horizon(T), steps(M) {
    if (T <= 0.0) throw std::invalid_argument("TimeGrid: horizon must be positive");
    if (M < 1) throw std::invalid_argument("TimeGrid: need at least one step");
  }

  double dt() const { return horizon / static_cast<double>(steps); }
  double node(std::size_t k) const { return static_cast<double>(k) * dt(); }
  std::size_t nodes() const { return steps + 1; }
};

}  // namespace mfc
