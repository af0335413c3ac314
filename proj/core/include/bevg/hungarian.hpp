// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

namespace bevg {

/// Row-major K x M cost matrix: K proposals (rows), M targets (columns).
struct CostMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
};

struct Assignment {
  std::vector<int> row_of_col;  // proposal index assigned to each target
  double total = 0.0;           // summed in target order
};

/// Minimum-cost injective assignment of targets to proposals. Among optimal
/// assignments the lexicographically smallest row_of_col is returned.
/// Throws std::invalid_argument when K < M or a cost is not finite.
Assignment hungarian_match(const CostMatrix& cost);

/// Optimal assignment without the tie-break refinement (O(M^2 K)).
Assignment hungarian_raw(const CostMatrix& cost);

}  // namespace bevg
