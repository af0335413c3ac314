// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/hungarian.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bevg {

namespace {

void validate(const CostMatrix& cost) {
  if (cost.rows < 0 || cost.cols < 0 || cost.data.size() != static_cast<std::size_t>(cost.rows) * cost.cols) {
    throw std::invalid_argument("hungarian_match: malformed cost matrix");
  }
  if (cost.rows < cost.cols) {
    throw std::invalid_argument("hungarian_match: fewer proposals (" + std::to_string(cost.rows) +
                                ") than targets (" + std::to_string(cost.cols) + ")");
  }
  for (double v : cost.data) {
    if (!std::isfinite(v)) throw std::invalid_argument("hungarian_match: non-finite cost");
  }
}

// Shortest augmenting path with potentials. Targets are the "left" side
// (n = M), proposals the "right" side (m = K >= n). `banned` rows are skipped.
std::vector<int> solve(const CostMatrix& c, const std::vector<int>& targets, const std::vector<char>& banned) {
  const int n = static_cast<int>(targets.size());
  const int m = c.rows;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[j] || banned[j - 1]) continue;
        const double cur = c(j - 1, targets[i0 - 1]) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (j1 < 0) throw std::logic_error("hungarian: no free proposal");
      for (int j = 0; j <= m; ++j) {
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
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_of(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) row_of[p[j] - 1] = j - 1;
  }
  return row_of;
}

double total_of(const CostMatrix& c, const std::vector<int>& row_of_col) {
  double t = 0.0;
  for (std::size_t j = 0; j < row_of_col.size(); ++j) t += c(row_of_col[j], static_cast<int>(j));
  return t;
}

}  // namespace

Assignment hungarian_raw(const CostMatrix& cost) {
  validate(cost);
  Assignment a;
  if (cost.cols == 0) return a;
  std::vector<int> targets(cost.cols);
  for (int j = 0; j < cost.cols; ++j) targets[j] = j;
  a.row_of_col = solve(cost, targets, std::vector<char>(cost.rows, 0));
  a.total = total_of(cost, a.row_of_col);
  return a;
}

Assignment hungarian_match(const CostMatrix& cost) {
  Assignment best = hungarian_raw(cost);
  const int m = cost.cols;
  if (m == 0) return best;

  // Fix targets one at a time to the smallest row that still admits an
  // optimal completion.
  double scale = 1.0;
  for (double v : cost.data) scale = std::max(scale, std::abs(v));
  const double tol = 1e-12 * scale * m;
  const double opt = best.total;
  std::vector<char> banned(cost.rows, 0);
  std::vector<int> fixed;
  double fixed_cost = 0.0;
  for (int j = 0; j < m; ++j) {
    std::vector<int> rest;
    for (int jj = j + 1; jj < m; ++jj) rest.push_back(jj);
    for (int r = 0; r < cost.rows; ++r) {
      if (banned[r]) continue;
      double completion = 0.0;
      if (!rest.empty()) {
        banned[r] = 1;
        const std::vector<int> sub = solve(cost, rest, banned);
        banned[r] = 0;
        for (std::size_t k = 0; k < rest.size(); ++k) completion += cost(sub[k], rest[k]);
      }
      if (fixed_cost + cost(r, j) + completion <= opt + tol) {
        fixed.push_back(r);
        fixed_cost += cost(r, j);
        banned[r] = 1;
        break;
      }
    }
    if (static_cast<int>(fixed.size()) != j + 1) return best;  // numerical fallback
  }
  Assignment a;
  a.row_of_col = fixed;
  a.total = total_of(cost, fixed);
  return a.total > opt ? best : a;
}

}  // namespace bevg
