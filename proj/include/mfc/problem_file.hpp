#pragma once

#include <string>

#include "mfc/fj.hpp"

namespace mfc {

/// Structured-text program description. Grammar (see README):
///   dim = n
///   [objective]   term = coef e1 ... en        (one monomial per line)
///   [ineq.k]      cone = orthant|zero|free|polyhedral
///                 gen  = g1 ... gm             (polyhedral columns)
///                 row  = monomial ; monomial ; ...
///   [eq.k]        row  = monomial ; ...
///   [box]         lower = l1 ... ln / upper = u1 ... un ("inf" allowed)
NlpProblem parse_problem_text(const std::string& text);
NlpProblem parse_problem_file(const std::string& path);

}  // namespace mfc
