#include "ovcal/matching.hpp"

#include <cmath>
#include <limits>

namespace ovcal {

namespace {

// Shortest-augmenting-path assignment on a compacted submatrix.
// rows.size() <= cols.size() required. Returns the optimal total cost.
double optimal_cost(const Matrix& cost, const std::vector<int>& rows,
                    const std::vector<int>& cols) {
  const int n = static_cast<int>(rows.size());
  const int m = static_cast<int>(cols.size());
  if (n == 0) return 0.0;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(m) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(m) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost.at(rows[static_cast<std::size_t>(i0 - 1)],
                                   cols[static_cast<std::size_t>(j - 1)]) -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }

  double total = 0.0;
  for (int j = 1; j <= m; ++j) {
    if (p[static_cast<std::size_t>(j)] == 0) continue;
    total += cost.at(rows[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)],
                     cols[static_cast<std::size_t>(j - 1)]);
  }
  return total;
}

}  // namespace

MatchResult hungarian_match(const Matrix& cost) {
  const int n = cost.rows;
  const int m = cost.cols;
  if (m < n) throw CapacityError("hungarian_match: fewer queries than ground truths");
  for (double c : cost.a)
    if (!std::isfinite(c)) throw DomainError("hungarian_match: non-finite cost");

  MatchResult result;
  if (n == 0) return result;

  std::vector<int> all_rows(static_cast<std::size_t>(n));
  std::vector<int> all_cols(static_cast<std::size_t>(m));
  for (int i = 0; i < n; ++i) all_rows[static_cast<std::size_t>(i)] = i;
  for (int j = 0; j < m; ++j) all_cols[static_cast<std::size_t>(j)] = j;

  const double best = optimal_cost(cost, all_rows, all_cols);
  const double tol = 1e-9 * std::max(1.0, std::fabs(best));

  // Fix assignments one ground truth at a time, always taking the smallest
  // query index that still completes to an optimal solution.
  result.assignment.assign(static_cast<std::size_t>(n), -1);
  std::vector<char> used(static_cast<std::size_t>(m), 0);
  double prefix = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<int> rest_rows;
    for (int r = i + 1; r < n; ++r) rest_rows.push_back(r);
    for (int q = 0; q < m; ++q) {
      if (used[static_cast<std::size_t>(q)]) continue;
      std::vector<int> rest_cols;
      for (int c = 0; c < m; ++c)
        if (!used[static_cast<std::size_t>(c)] && c != q) rest_cols.push_back(c);
      const double completion = optimal_cost(cost, rest_rows, rest_cols);
      if (prefix + cost.at(i, q) + completion <= best + tol) {
        result.assignment[static_cast<std::size_t>(i)] = q;
        used[static_cast<std::size_t>(q)] = 1;
        prefix += cost.at(i, q);
        break;
      }
    }
  }
  result.total_cost = prefix;
  return result;
}

}  // namespace ovcal
