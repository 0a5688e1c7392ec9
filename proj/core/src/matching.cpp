#include "hcq/matching.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hcq {

CostMatrix::CostMatrix(std::size_t q, std::size_t g, std::vector<double> v)
    : queries(q), targets(g), values(std::move(v)) {
  if (values.size() != q * g) throw std::invalid_argument("cost matrix size mismatch");
}

std::vector<long> Assignment::target_for_query(std::size_t queries) const {
  std::vector<long> out(queries, -1);
  for (std::size_t g = 0; g < query_for_target.size(); ++g) out[query_for_target[g]] = static_cast<long>(g);
  return out;
}

// Shortest augmenting path with row/column potentials; rows are targets,
// columns are queries. Column scans run in increasing query order and only
// strict improvements replace the current choice.
Assignment hungarian_match(const CostMatrix& cost) {
  const std::size_t n = cost.targets, m = cost.queries;
  if (n > m) throw std::invalid_argument("hungarian_match: more targets than queries");
  for (double c : cost.values) {
    if (!std::isfinite(c)) throw std::invalid_argument("hungarian_match: non-finite cost");
  }
  Assignment result;
  if (n == 0) return result;

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost.at(j - 1, i0 - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  result.query_for_target.assign(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) result.query_for_target[p[j] - 1] = j - 1;
  }
  for (std::size_t g = 0; g < n; ++g) result.total_cost += cost.at(result.query_for_target[g], g);
  return result;
}

}  // namespace hcq
