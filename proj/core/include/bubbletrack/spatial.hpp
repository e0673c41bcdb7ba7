#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bubbletrack/corpus.hpp"

namespace bubbletrack {

/// Static 2-d tree over a point set for exact nearest-neighbour queries.
/// Equidistant candidates resolve to the lowest point index.
class KdTree {
public:
  explicit KdTree(std::span<const Point> points);

  /// Index of the nearest point. Requires a non-empty tree.
  std::size_t nearest(Point query) const;

  std::size_t size() const { return points_.size(); }

private:
  struct Node {
    std::size_t point = 0;  // index into points_
    int left = -1;
    int right = -1;
    int axis = 0;
  };

  int build(std::span<std::size_t> ids, int depth);
  void search(int node, Point q, std::size_t& best, double& best_d2) const;

  std::vector<Point> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace bubbletrack
