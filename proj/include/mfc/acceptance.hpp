#pragma once

#include <string>
#include <vector>

namespace mfc {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;   // measured values and thresholds
  double seconds = 0.0;
};

struct AcceptanceSummary {
  std::string suite;  // fast or full
  std::vector<CriterionResult> results;
  bool all_pass = false;
  double seconds = 0.0;

  std::string to_json() const;
};

/// Runs the whole criteria battery. The fast suite shrinks the Monte
/// Carlo sizes but keeps every threshold; full uses the stated sizes.
/// Throws std::invalid_argument on an unknown suite name.
AcceptanceSummary run_acceptance(const std::string& suite, const std::string& problems_dir);

}  // namespace mfc
