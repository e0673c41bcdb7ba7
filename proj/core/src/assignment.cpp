#include <algorithm>
#include <limits>

#include "bubbletrack/assignment.hpp"
#include "bubbletrack/error.hpp"

namespace bubbletrack {

namespace {

// rows <= cols. a(i, j) with 1-based potentials u (rows) and v (cols).
std::vector<std::size_t> hungarian(const Eigen::MatrixXd& a) {
  const auto n = static_cast<std::size_t>(a.rows());
  const auto m = static_cast<std::size_t>(a.cols());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
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
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

std::vector<std::optional<std::size_t>> solve_assignment(const Eigen::MatrixXd& cost) {
  if (!cost.allFinite()) throw DomainError("assignment cost matrix must be finite");
  const auto rows = static_cast<std::size_t>(cost.rows());
  const auto cols = static_cast<std::size_t>(cost.cols());
  std::vector<std::optional<std::size_t>> out(rows);
  if (rows == 0 || cols == 0) return out;
  if (rows <= cols) {
    const auto r2c = hungarian(cost);
    for (std::size_t r = 0; r < rows; ++r) out[r] = r2c[r];
  } else {
    const Eigen::MatrixXd t = cost.transpose();
    const auto c2r = hungarian(t);
    for (std::size_t c = 0; c < cols; ++c) out[c2r[c]] = c;
  }
  return out;
}

double assignment_cost(const Eigen::MatrixXd& cost,
                       const std::vector<std::optional<std::size_t>>& assignment) {
  double total = 0.0;
  for (std::size_t r = 0; r < assignment.size(); ++r) {
    if (assignment[r]) {
      total += cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(*assignment[r]));
    }
  }
  return total;
}

}  // namespace bubbletrack
