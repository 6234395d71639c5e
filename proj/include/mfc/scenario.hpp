#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfc/lq_mfc.hpp"

namespace mfc {

/// Parsed experiment configuration. The INI-like grammar is documented
/// in the README; unknown keys and sections are rejected.
struct Scenario {
  std::string mode;  // lq-unconstrained, lq-constrained, mfg, bridge, fj-suite, mvsde-check
  LqModel model;

  bool has_constraint = false;
  double h_value = 0.0;

  int N = 1000;
  std::size_t M = 50;
  std::uint64_t seed = 1;
  int max_iter = 50;
  double damping = 0.5;
  double tol = 1e-3;
  int outer_iter = 20;
  int picard_iter = 12;
  std::vector<double> dt_list;   // bridge mode
  std::string problems = "problems";  // fj-suite mode

  std::string source_text;  // raw file contents, hashed into the report
};

Scenario parse_scenario_text(const std::string& text);
Scenario parse_scenario_file(const std::string& path);

/// Apply one --set override "section.key=value" ("mode=..." for the
/// top-level key). Throws ParseError on unknown or malformed keys.
void apply_override(Scenario& sc, const std::string& assignment);

/// Install the h callback and the constrained flag from the parsed
/// fields; called after all overrides are applied.
void finalize_scenario(Scenario& sc);

}  // namespace mfc
