#include "mfc/emit.hpp"

#include <algorithm>

#include "mfc/csv.hpp"

namespace mfc {

void emit_moments_csv(const ParticleEnsemble& ens, const std::string& path) {
  csv::Writer w(path);
  w.row({"step", "t", "mean_x", "var_x", "mean_a"});
  for (std::size_t k = 0; k <= ens.grid.steps; ++k) {
    Moments m = empirical_moments(ens, k);
    w.row({std::to_string(k), csv::fmt(ens.grid.node(k)), csv::fmt(m.mean_x),
           csv::fmt(m.cov_x), csv::fmt(m.mean_a)});
  }
}

void emit_paths_csv(const ParticleEnsemble& ens, const std::string& path, int max_particles) {
  csv::Writer w(path);
  w.row({"step", "t", "particle", "x", "a"});
  int n = std::min(ens.N, max_particles);
  for (std::size_t k = 0; k <= ens.grid.steps; ++k)
    for (int i = 0; i < n; ++i)
      w.row({std::to_string(k), csv::fmt(ens.grid.node(k)), std::to_string(i),
             csv::fmt(ens.states(i, static_cast<Eigen::Index>(k))),
             csv::fmt(ens.controls(i, static_cast<Eigen::Index>(k)))});
}

void emit_adjoint_csv(const ParticleEnsemble& ens, const AdjointSolution& sol,
                      const std::string& path, int max_particles) {
  csv::Writer w(path);
  w.row({"step", "t", "particle", "y", "z"});
  int n = std::min(ens.N, max_particles);
  for (std::size_t k = 0; k <= ens.grid.steps; ++k)
    for (int i = 0; i < n; ++i) {
      double z = k < ens.grid.steps ? sol.Z(i, static_cast<Eigen::Index>(k)) : 0.0;
      w.row({std::to_string(k), csv::fmt(ens.grid.node(k)), std::to_string(i),
             csv::fmt(sol.Y(i, static_cast<Eigen::Index>(k))), csv::fmt(z)});
    }
}

}  // namespace mfc
