#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace bubbletrack {

/// Minimum-cost assignment on a rectangular cost matrix (Hungarian method,
/// shortest augmenting paths with potentials). Returns, for every row, the
/// assigned column or nullopt; exactly min(rows, cols) rows are assigned.
std::vector<std::optional<std::size_t>> solve_assignment(const Eigen::MatrixXd& cost);

/// Sum of cost(r, col[r]) over assigned rows, accumulated in row order.
double assignment_cost(const Eigen::MatrixXd& cost,
                       const std::vector<std::optional<std::size_t>>& assignment);

}  // namespace bubbletrack
