#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <queue>

#include "bubbletrack/error.hpp"
#include "bubbletrack/geometry.hpp"

namespace bubbletrack {

double Contour::perimeter() const {
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& a = points[i];
    const Point& b = points[(i + 1) % points.size()];
    total += std::hypot(b.x - a.x, b.y - a.y);
  }
  return total;
}

double Contour::signed_area() const {
  double twice = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& a = points[i];
    const Point& b = points[(i + 1) % points.size()];
    // (x, -y) coordinates
    twice += a.x * (-b.y) - b.x * (-a.y);
  }
  return 0.5 * twice;
}

namespace {

struct Component {
  std::size_t size = 0;
  int min_x = 0;
  int min_y = 0;
  int max_x = 0;
  int max_y = 0;
};

// Labels 8-connected components; returns label grid (0 = background) and
// component stats indexed by label - 1.
std::vector<Component> label_components(const BitMask& mask, std::vector<int>& labels) {
  const int w = mask.width(), h = mask.height();
  labels.assign(static_cast<std::size_t>(w) * h, 0);
  std::vector<Component> comps;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y) || labels[static_cast<std::size_t>(y) * w + x] != 0) continue;
      const int label = static_cast<int>(comps.size()) + 1;
      Component c{0, x, y, x, y};
      stack.push_back({x, y});
      labels[static_cast<std::size_t>(y) * w + x] = label;
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        ++c.size;
        c.min_x = std::min(c.min_x, cx);
        c.max_x = std::max(c.max_x, cx);
        c.min_y = std::min(c.min_y, cy);
        c.max_y = std::max(c.max_y, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h || !mask.at(nx, ny)) continue;
            int& l = labels[static_cast<std::size_t>(ny) * w + nx];
            if (l == 0) {
              l = label;
              stack.push_back({nx, ny});
            }
          }
        }
      }
      comps.push_back(c);
    }
  }
  return comps;
}

enum Dir { East = 0, South = 1, West = 2, North = 3 };
constexpr std::array<int, 4> kDx{1, 0, -1, 0};
constexpr std::array<int, 4> kDy{0, 1, 0, -1};

}  // namespace

Contour extract_contour(const BitMask& mask) {
  std::vector<int> labels;
  const auto comps = label_components(mask, labels);
  if (comps.empty()) throw DomainError("cannot extract a contour from an empty mask");

  // Largest by pixel count; ties -> smallest (top, left) bounding corner.
  std::size_t best = 0;
  for (std::size_t i = 1; i < comps.size(); ++i) {
    const Component& a = comps[i];
    const Component& b = comps[best];
    if (a.size > b.size ||
        (a.size == b.size && (a.min_y < b.min_y || (a.min_y == b.min_y && a.min_x < b.min_x)))) {
      best = i;
    }
  }
  const Component& comp = comps[best];
  const int label = static_cast<int>(best) + 1;

  // Local grid with a one-pixel background border; holes are filled by
  // flooding the background from the border (4-connected).
  const int gw = comp.max_x - comp.min_x + 3;
  const int gh = comp.max_y - comp.min_y + 3;
  std::vector<std::uint8_t> grid(static_cast<std::size_t>(gw) * gh, 1);
  for (int y = comp.min_y; y <= comp.max_y; ++y) {
    for (int x = comp.min_x; x <= comp.max_x; ++x) {
      if (labels[static_cast<std::size_t>(y) * mask.width() + x] == label) {
        grid[static_cast<std::size_t>(y - comp.min_y + 1) * gw + (x - comp.min_x + 1)] = 2;
      }
    }
  }
  // 1 = unknown background, 0 = outside, 2 = foreground
  std::queue<std::pair<int, int>> q;
  grid[0] = 0;
  q.push({0, 0});
  while (!q.empty()) {
    const auto [x, y] = q.front();
    q.pop();
    for (int d = 0; d < 4; ++d) {
      const int nx = x + kDx[d], ny = y + kDy[d];
      if (nx < 0 || ny < 0 || nx >= gw || ny >= gh) continue;
      std::uint8_t& g = grid[static_cast<std::size_t>(ny) * gw + nx];
      if (g == 1) {
        g = 0;
        q.push({nx, ny});
      }
    }
  }
  const auto filled = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= gw || y >= gh) return false;
    return grid[static_cast<std::size_t>(y) * gw + x] != 0;
  };

  // Crack following with the interior on the visual right, which runs
  // clockwise; the result is reversed at the end. At each vertex: turn left
  // when the ahead-left pixel is set (joins diagonal neighbours, i.e.
  // 8-connectivity), go straight when only ahead-right is set, otherwise
  // turn right.
  int sx = -1, sy = -1;
  for (int y = 0; y < gh && sx < 0; ++y) {
    for (int x = 0; x < gw; ++x) {
      if (grid[static_cast<std::size_t>(y) * gw + x] == 2) {
        sx = x;
        sy = y;
        break;
      }
    }
  }
  Contour contour;
  int vx = sx, vy = sy;
  int dir = East;
  const double ox = comp.min_x - 1.0, oy = comp.min_y - 1.0;
  do {
    contour.points.push_back({vx + ox, vy + oy});
    vx += kDx[dir];
    vy += kDy[dir];
    int lx, ly, rx, ry;
    switch (dir) {
      case East: lx = vx; ly = vy - 1; rx = vx; ry = vy; break;
      case South: lx = vx; ly = vy; rx = vx - 1; ry = vy; break;
      case West: lx = vx - 1; ly = vy; rx = vx - 1; ry = vy - 1; break;
      default: lx = vx - 1; ly = vy - 1; rx = vx; ry = vy - 1; break;
    }
    if (filled(lx, ly)) {
      dir = (dir + 3) % 4;
    } else if (!filled(rx, ry)) {
      dir = (dir + 1) % 4;
    }
  } while (!(vx == sx && vy == sy && dir == East));
  std::reverse(contour.points.begin() + 1, contour.points.end());
  return contour;
}

double equivalent_diameter(std::size_t n_pixels, const Calibration& calibration) {
  const double alpha = calibration.pixels_per_cm;
  return std::sqrt(static_cast<double>(n_pixels) * 4.0 / (std::numbers::pi * alpha * alpha));
}

ParamContour parameterize(const Contour& contour) {
  const std::size_t n = contour.points.size();
  ParamContour out;
  out.vertex_position.assign(n, 0.0);
  if (n == 0) return out;

  // Traversal order as contour indices, CCW in the y-up sense.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (contour.signed_area() < 0.0) std::reverse(order.begin() + 1, order.end());

  std::vector<double> arc(n + 1, 0.0);  // arc[k] = length from order[0] to order[k]
  for (std::size_t k = 0; k < n; ++k) {
    const Point& a = contour.points[order[k]];
    const Point& b = contour.points[order[(k + 1) % n]];
    arc[k + 1] = arc[k] + std::hypot(b.x - a.x, b.y - a.y);
  }
  const double perimeter = arc[n];
  out.perimeter = perimeter;

  double max_y = contour.points[0].y;
  for (const Point& p : contour.points) max_y = std::max(max_y, p.y);
  std::vector<bool> bottom(n);
  for (std::size_t k = 0; k < n; ++k) bottom[k] = contour.points[order[k]].y >= max_y - 0.5;

  std::size_t origin_k = 0;
  if (std::all_of(bottom.begin(), bottom.end(), [](bool b) { return b; })) {
    origin_k = 0;
  } else {
    // Start scanning just after a non-bottom vertex so no run wraps.
    std::size_t start = 0;
    while (bottom[start]) ++start;
    double best_len = -1.0, best_start_arc = 0.0;
    std::size_t best_first = 0, best_count = 0;
    for (std::size_t step = 1; step <= n; ++step) {
      const std::size_t k = (start + step) % n;
      if (!bottom[k] || bottom[(k + n - 1) % n]) continue;
      std::size_t count = 0;
      while (bottom[(k + count) % n]) ++count;
      const std::size_t last = (k + count - 1) % n;
      double len = arc[last] - arc[k];
      if (len < 0) len += perimeter;
      const double start_arc = arc[k];
      if (len > best_len || (len == best_len && start_arc < best_start_arc)) {
        best_len = len;
        best_start_arc = start_arc;
        best_first = k;
        best_count = count;
      }
    }
    const double mid = best_len / 2.0;
    double best_dist = INFINITY;
    for (std::size_t j = 0; j < best_count; ++j) {
      const std::size_t k = (best_first + j) % n;
      double along = arc[k] - arc[best_first];
      if (along < 0) along += perimeter;
      const double dist = std::abs(along - mid);
      if (dist < best_dist) {
        best_dist = dist;
        origin_k = k;
      }
    }
  }

  out.origin_index = order[origin_k];
  out.samples.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t k = (origin_k + j) % n;
    double along = arc[k] - arc[origin_k];
    if (along < 0) along += perimeter;
    double position = perimeter > 0 ? along / perimeter : 0.0;
    if (position >= 1.0) position = 0.0;
    out.samples.push_back({position, contour.points[order[k]]});
    out.vertex_position[order[k]] = position;
  }
  return out;
}

bool contains(const BitMask& mask, Point p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
  const double fx = std::floor(p.x), fy = std::floor(p.y);
  if (fx < 0 || fy < 0 || fx >= mask.width() || fy >= mask.height()) return false;
  return mask.at(static_cast<int>(fx), static_cast<int>(fy));
}

}  // namespace bubbletrack
