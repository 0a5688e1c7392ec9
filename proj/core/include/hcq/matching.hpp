#pragma once

#include <cstddef>
#include <vector>

namespace hcq {

/// Row-major [Q, G] assignment costs with the components kept for
/// diagnostics.
struct CostMatrix {
  std::size_t queries = 0;
  std::size_t targets = 0;
  std::vector<double> values;
  std::vector<double> class_cost;
  std::vector<double> mask_cost;

  CostMatrix() = default;
  CostMatrix(std::size_t q, std::size_t g, std::vector<double> v);
  double at(std::size_t q, std::size_t g) const { return values[q * targets + g]; }
};

struct Assignment {
  std::vector<std::size_t> query_for_target;  // one distinct query per GT
  double total_cost = 0.0;

  // -1 for unmatched queries.
  std::vector<long> target_for_query(std::size_t queries) const;
};

/// Minimum-cost one-to-one assignment of every target to a distinct query.
/// Throws std::invalid_argument when G > Q or a cost is non-finite.
Assignment hungarian_match(const CostMatrix& cost);

}  // namespace hcq
