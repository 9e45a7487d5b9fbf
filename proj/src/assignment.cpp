#include "avfuse/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace avfuse {

namespace {

// (forbidden cells used, summed finite cost), ordered lexicographically.
struct LexCost {
  double forbidden = 0.0;
  double cost = 0.0;

  LexCost operator+(const LexCost& o) const { return {forbidden + o.forbidden, cost + o.cost}; }
  LexCost operator-(const LexCost& o) const { return {forbidden - o.forbidden, cost - o.cost}; }
  bool operator<(const LexCost& o) const {
    return forbidden < o.forbidden || (forbidden == o.forbidden && cost < o.cost);
  }
};

const LexCost kInf{std::numeric_limits<double>::infinity(),
                   std::numeric_limits<double>::infinity()};

// Rows <= cols. Returns column per row.
std::vector<int> hungarian(const std::vector<std::vector<LexCost>>& a, int n, int m) {
  std::vector<LexCost> u(n + 1), v(m + 1);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<LexCost> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      LexCost delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const LexCost cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] = u[p[j]] + delta;
          v[j] = v[j] - delta;
        } else {
          minv[j] = minv[j] - delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

Assignment assign(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  if (rows == 0 || cols == 0) return {};
  const bool transposed = rows > cols;
  const int n = transposed ? cols : rows;
  const int m = transposed ? rows : cols;

  std::vector<std::vector<LexCost>> a(n, std::vector<LexCost>(m));
  bool any_finite = false;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double c = transposed ? cost(j, i) : cost(i, j);
      if (std::isfinite(c)) {
        a[i][j] = {0.0, c};
        any_finite = true;
      } else {
        a[i][j] = {1.0, 0.0};
      }
    }
  }
  if (!any_finite) return {};

  const std::vector<int> match = hungarian(a, n, m);
  Assignment out;
  for (int i = 0; i < n; ++i) {
    const int j = match[i];
    if (j < 0) continue;
    const std::size_t r = transposed ? j : i;
    const std::size_t c = transposed ? i : j;
    if (std::isfinite(cost(r, c))) out.emplace_back(r, c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double assignment_cost(const Eigen::MatrixXd& cost, const Assignment& a) {
  double total = 0.0;
  for (const auto& [r, c] : a) total += cost(r, c);
  return total;
}

}  // namespace avfuse
