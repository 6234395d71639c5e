#pragma once

#include <string>

#include "mfc/mf_bsde.hpp"
#include "mfc/mvsde.hpp"

namespace mfc {

/// CSV emitters with fixed schemas (see README). Headers are always
/// written; numbers use shortest round-trip formatting; LF endings.
void emit_moments_csv(const ParticleEnsemble& ens, const std::string& path);
void emit_paths_csv(const ParticleEnsemble& ens, const std::string& path, int max_particles);
void emit_adjoint_csv(const ParticleEnsemble& ens, const AdjointSolution& sol,
                      const std::string& path, int max_particles);

}  // namespace mfc
