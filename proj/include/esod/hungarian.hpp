/// Minimal-cost one-to-one assignment for rectangular real matrices.
/// Ties between equal-cost assignments are broken toward the
/// lexicographically smallest (row, col) pair sequence.
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace esod {

/// Row-major rectangular cost matrix.
struct CostMatrix {
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  static CostMatrix zeros(std::size_t r, std::size_t c) {
    return {std::vector<double>(r * c, 0.0), r, c};
  }
};

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), sorted by row
  double cost = 0.0;
};

namespace detail {

// Potential-based shortest augmenting path method, n rows <= m cols,
// assigns every row. 1-based internal indexing.
inline double hungarian_cost_square(const CostMatrix& a) {
  const std::size_t n = a.rows, m = a.cols;
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = static_cast<int>(i);
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      int i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = a.at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = static_cast<int>(j0);
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
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double cost = 0.0;
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) cost += a.at(p[j] - 1, j - 1);
  return cost;
}

// Optimal cost assigning min(rows, cols) pairs.
inline double optimal_cost(const CostMatrix& a) {
  if (a.rows == 0 || a.cols == 0) return 0.0;
  if (a.rows <= a.cols) return hungarian_cost_square(a);
  CostMatrix t = CostMatrix::zeros(a.cols, a.rows);
  for (std::size_t r = 0; r < a.rows; ++r)
    for (std::size_t c = 0; c < a.cols; ++c) t.at(c, r) = a.at(r, c);
  return hungarian_cost_square(t);
}

inline CostMatrix drop(const CostMatrix& a, const std::vector<bool>& row_gone,
                       const std::vector<bool>& col_gone) {
  CostMatrix out;
  for (std::size_t r = 0; r < a.rows; ++r) {
    if (row_gone[r]) continue;
    for (std::size_t c = 0; c < a.cols; ++c)
      if (!col_gone[c]) out.data.push_back(a.at(r, c));
    ++out.rows;
  }
  out.cols = out.rows ? out.data.size() / out.rows : 0;
  return out;
}

}  // namespace detail

/// Solve the assignment problem: min(rows, cols) pairs of minimal total
/// cost, deterministic lexicographic tie-break. Empty matrix -> empty
/// assignment. Costs must be finite.
inline Assignment hungarian(const CostMatrix& cost) {
  for (double v : cost.data)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite cost");
  Assignment out;
  if (cost.rows == 0 || cost.cols == 0) return out;

  const std::size_t k = std::min(cost.rows, cost.cols);
  const double opt = detail::optimal_cost(cost);
  const double tol = 1e-9 * (1.0 + std::abs(opt));

  // Fix rows in order, each to the smallest column that keeps the
  // remaining subproblem able to reach the optimum.
  std::vector<bool> row_gone(cost.rows, false), col_gone(cost.cols, false);
  double fixed = 0.0;
  std::size_t assigned = 0;
  for (std::size_t r = 0; r < cost.rows && assigned < k; ++r) {
    // Whether assigned here or skipped, row r takes no further part.
    row_gone[r] = true;
    for (std::size_t c = 0; c < cost.cols; ++c) {
      if (col_gone[c]) continue;
      col_gone[c] = true;
      double rest = (assigned + 1 < k)
                        ? detail::optimal_cost(detail::drop(cost, row_gone, col_gone))
                        : 0.0;
      if (fixed + cost.at(r, c) + rest <= opt + tol) {
        fixed += cost.at(r, c);
        out.pairs.emplace_back(static_cast<int>(r), static_cast<int>(c));
        ++assigned;
        break;
      }
      col_gone[c] = false;
    }
  }
  out.cost = fixed;
  return out;
}

}  // namespace esod
