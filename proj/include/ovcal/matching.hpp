#pragma once

#include <vector>

#include "ovcal/linalg.hpp"

namespace ovcal {

struct MatchResult {
  std::vector<int> assignment;  // ground-truth index -> query index
  double total_cost = 0.0;
};

/// Minimum-total-cost injective assignment of N ground truths to M >= N
/// queries (Kuhn-Munkres). Among cost-equal optima the lexicographically
/// smallest assignment wins: ground truths in ascending order each take the
/// lowest query index that still admits an optimal completion.
MatchResult hungarian_match(const Matrix& cost);

}  // namespace ovcal
