#include <algorithm>
#include <limits>
#include <numeric>

#include "bubbletrack/error.hpp"
#include "bubbletrack/spatial.hpp"

namespace bubbletrack {

KdTree::KdTree(std::span<const Point> points) : points_(points.begin(), points.end()) {
  std::vector<std::size_t> ids(points_.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  nodes_.reserve(ids.size());
  root_ = build(ids, 0);
}

int KdTree::build(std::span<std::size_t> ids, int depth) {
  if (ids.empty()) return -1;
  const int axis = depth % 2;
  const auto key = [&](std::size_t i) { return axis == 0 ? points_[i].x : points_[i].y; };
  const std::size_t mid = ids.size() / 2;
  std::nth_element(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(mid), ids.end(),
                   [&](std::size_t a, std::size_t b) {
                     return key(a) < key(b) || (key(a) == key(b) && a < b);
                   });
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{ids[mid], -1, -1, axis});
  const int left = build(ids.subspan(0, mid), depth + 1);
  const int right = build(ids.subspan(mid + 1), depth + 1);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

void KdTree::search(int node, Point q, std::size_t& best, double& best_d2) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  const Point& p = points_[n.point];
  const double dx = p.x - q.x, dy = p.y - q.y;
  const double d2 = dx * dx + dy * dy;
  if (d2 < best_d2 || (d2 == best_d2 && n.point < best)) {
    best_d2 = d2;
    best = n.point;
  }
  const double diff = n.axis == 0 ? q.x - p.x : q.y - p.y;
  const int near = diff < 0 ? n.left : n.right;
  const int far = diff < 0 ? n.right : n.left;
  search(near, q, best, best_d2);
  // <= keeps equidistant points on the far side reachable for tie-breaking.
  if (diff * diff <= best_d2) search(far, q, best, best_d2);
}

std::size_t KdTree::nearest(Point query) const {
  if (root_ < 0) throw UsageError("nearest() on an empty KdTree");
  std::size_t best = std::numeric_limits<std::size_t>::max();
  double best_d2 = std::numeric_limits<double>::infinity();
  search(root_, query, best, best_d2);
  return best;
}

}  // namespace bubbletrack
