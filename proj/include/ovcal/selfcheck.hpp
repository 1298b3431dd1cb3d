#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ovcal {

struct GradCheckResult {
  std::string name;
  int points = 0;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass() const { return points > 0 && max_rel_err <= tolerance; }
};

struct GradSuiteReport {
  std::vector<GradCheckResult> results;
  bool all_pass() const {
    for (const auto& r : results)
      if (!r.pass()) return false;
    return !results.empty();
  }
};

/// Checks every analytic gradient in the library against central finite
/// differences (h = 1e-5) at `points` random non-degenerate evaluation
/// points per kernel. Relative error is ||analytic - fd|| / max(||fd||, 1e-6);
/// the tolerance is 1e-4 per kernel and 1e-3 for the full training-step
/// composite.
GradSuiteReport run_gradient_suite(uint64_t seed, int points = 100);

std::string format_report(const GradSuiteReport& report);

}  // namespace ovcal
