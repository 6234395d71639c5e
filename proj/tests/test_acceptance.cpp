#include <cstdio>

#include "mfc/acceptance.hpp"

// Runs the full criteria battery and prints one verdict line per
// criterion; exits nonzero if any fails.
int main() {
  mfc::AcceptanceSummary summary = mfc::run_acceptance("full", MFC_PROBLEMS_DIR);
  for (const auto& r : summary.results)
    std::printf("%s  criterion %d  %s  [%.1f s]\n    %s\n", r.pass ? "pass" : "FAIL", r.id,
                r.name.c_str(), r.seconds, r.detail.c_str());
  std::printf("%s in %.1f s\n", summary.all_pass ? "all criteria passed" : "CRITERIA FAILED",
              summary.seconds);
  return summary.all_pass ? 0 : 1;
}
