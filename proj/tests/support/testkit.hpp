#pragma once

// Fixtures and independent reference implementations shared by the unit
// tests, the acceptance runner and the benchmarks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "bubbletrack/corpus.hpp"
#include "bubbletrack/evaluation.hpp"
#include "bubbletrack/tracker.hpp"

namespace testkit {

using namespace bubbletrack;

/// Pixel (x, y) is set iff its center lies within radius r of (cx, cy).
inline BitMask rasterize_disk(int width, int height, double cx, double cy, double r) {
  BitMask m(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r) m.set(x, y);
    }
  }
  return m;
}

inline BitMask random_mask(std::mt19937_64& rng, int width, int height, double density) {
  std::bernoulli_distribution on(density);
  BitMask m(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) m.set(x, y, on(rng));
  }
  return m;
}

inline Detection make_detection(const BitMask& mask, Category category = Category::Bubble, double score = 1.0) {
  Detection d;
  d.mask = encode_mask(mask);
  d.bbox = *mask.bounds();
  d.category = category;
  d.score = score;
  return d;
}

inline Detection disk_detection(int width, int height, double cx, double cy, double r,
                                Category category = Category::Bubble, double score = 1.0) {
  return make_detection(rasterize_disk(width, height, cx, cy, r), category, score);
}

inline Dataset make_dataset(int width, int height, Calibration cal, std::vector<Frame> frames) {
  Dataset ds;
  ds.calibration = cal;
  ds.frame_width = width;
  ds.frame_height = height;
  ds.frames = std::move(frames);
  bool one_class = false;
  for (const Frame& f : ds.frames) {
    for (const Detection& d : f.detections) one_class = one_class || d.category == Category::Bubble;
  }
  ds.scheme = one_class ? LabelScheme::OneClass : LabelScheme::TwoClass;
  return ds;
}

/// Synthetic clip with known identities: (frame, detection index) -> id.
struct Scene {
  Dataset dataset;
  std::map<std::pair<int, std::size_t>, int> identity;
  std::map<int, std::map<int, Point>> truth;  // id -> frame -> center
};

/// Two bubbles on parallel straight paths, never overlapping.
inline Scene parallel_scene(int frames = 100) {
  Scene s;
  std::vector<Frame> fs;
  for (int t = 0; t < frames; ++t) {
    Frame f{t, {}};
    const Point a{40.0 + 2.0 * t, 80.0}, b{440.0 - 1.5 * t, 200.0 + 0.2 * t};
    f.detections.push_back(disk_detection(512, 320, a.x, a.y, 14.0));
    f.detections.push_back(disk_detection(512, 320, b.x, b.y, 18.0));
    s.identity[{t, 0}] = 1;
    s.identity[{t, 1}] = 2;
    s.truth[1][t] = a;
    s.truth[2][t] = b;
    fs.push_back(std::move(f));
  }
  s.dataset = make_dataset(512, 320, Calibration{100.0, 3000.0}, std::move(fs));
  return s;
}

/// Two bubbles whose paths cross at a shallow angle. Bubble 1 is hidden for
/// `occluded` frames right before the crossing and reappears afterwards.
struct CrossingParams {
  int frames = 40;
  int first_a = 0;          // frame at which bubble 1 is first seen
  int occlusion_start = 17;
  int occluded = 2;
};

inline Point crossing_a(int t) { return {60.0 + 6.0 * t, 100.0 + 1.2 * t}; }
inline Point crossing_b(int t) { return {303.0 - 6.0 * t, 150.0 - 1.2 * t}; }

inline Scene crossing_scene(const CrossingParams& p = {}) {
  Scene s;
  std::vector<Frame> fs;
  for (int t = 0; t < p.frames; ++t) {
    Frame f{t, {}};
    const Point a = crossing_a(t), b = crossing_b(t);
    const bool hidden = t >= p.occlusion_start && t < p.occlusion_start + p.occluded;
    if (t >= p.first_a && !hidden) {
      s.identity[{t, f.detections.size()}] = 1;
      f.detections.push_back(disk_detection(400, 256, a.x, a.y, 12.0));
    }
    s.identity[{t, f.detections.size()}] = 2;
    f.detections.push_back(disk_detection(400, 256, b.x, b.y, 12.0));
    s.truth[1][t] = a;
    s.truth[2][t] = b;
    fs.push_back(std::move(f));
  }
  s.dataset = make_dataset(400, 256, Calibration{100.0, 3000.0}, std::move(fs));
  return s;
}

/// Mean predicted-center error of the track holding `id` over the `n` frames
/// after `from`.
inline double post_gap_error(const Scene& s, const TrackerConfig& config, int id, int from, int n) {
  Tracker tracker(config);
  int track_id = -1;
  double total = 0.0;
  for (const Frame& f : s.dataset.frames) {
    for (const FrameAssignment& a : tracker.step(f)) {
      if (s.identity.at({f.index, a.detection_index}) == id) track_id = a.track_id;
    }
    if (f.index > from && f.index <= from + n) {
      for (const Track& t : tracker.tracks()) {
        if (t.id != track_id) continue;
        const Point c = t.predicted_bbox.center(), g = s.truth.at(id).at(f.index);
        total += std::hypot(c.x - g.x, c.y - g.y);
      }
    }
  }
  return total / n;
}

/// Kalman filter written with plain arrays and explicit loops, sharing no
/// code with the library. Same model: constant-velocity (u, v, s, r).
struct RefKalman {
  static constexpr int N = 7, M = 4;
  using Vec = std::array<double, N>;
  using Mat = std::array<std::array<double, N>, N>;
  Vec x{};
  Mat P{};
  std::array<double, N> q{1, 1, 1, 1, 0.01, 0.01, 0.0001};
  std::array<double, M> r{1, 1, 10, 10};

  void init(double u, double v, double s, double ratio) {
    x = {u, v, s, ratio, 0, 0, 0};
    for (auto& row : P) row.fill(0.0);
    const double p0[N] = {10, 10, 10, 10, 1e4, 1e4, 1e4};
    for (int i = 0; i < N; ++i) P[i][i] = p0[i];
  }

  bool predict() {
    // x' = F x, P' = F P F^T + Q with F = I + E(0,4) + E(1,5) + E(2,6).
    Vec nx = x;
    for (int i = 0; i < 3; ++i) nx[i] += x[i + 4];
    Mat fp = P;  // F P: rows 0..2 gain rows 4..6
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < N; ++j) fp[i][j] += P[i + 4][j];
    }
    Mat np = fp;  // (F P) F^T: columns 0..2 gain columns 4..6
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < 3; ++j) np[i][j] += fp[i][j + 4];
    }
    for (int i = 0; i < N; ++i) np[i][i] += q[i];
    x = nx;
    P = np;
    if (!(x[2] > 0.0)) {
      x[2] = 1e-6;
      return true;
    }
    return false;
  }

  void update(const std::array<double, M>& z) {
    // S = P[0:4,0:4] + R; K = P[:,0:4] S^-1 via Gauss-Jordan inversion.
    double s[M][2 * M] = {};
    for (int i = 0; i < M; ++i) {
      for (int j = 0; j < M; ++j) s[i][j] = P[i][j] + (i == j ? r[i] : 0.0);
      s[i][M + i] = 1.0;
    }
    for (int c = 0; c < M; ++c) {
      int piv = c;
      for (int i = c + 1; i < M; ++i) {
        if (std::abs(s[i][c]) > std::abs(s[piv][c])) piv = i;
      }
      std::swap(s[c], s[piv]);
      const double d = s[c][c];
      for (int j = 0; j < 2 * M; ++j) s[c][j] /= d;
      for (int i = 0; i < M; ++i) {
        if (i == c) continue;
        const double f = s[i][c];
        for (int j = 0; j < 2 * M; ++j) s[i][j] -= f * s[c][j];
      }
    }
    double k[N][M] = {};
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < M; ++j) {
        for (int l = 0; l < M; ++l) k[i][j] += P[i][l] * s[l][M + j];
      }
    }
    double y[M];
    for (int i = 0; i < M; ++i) y[i] = z[i] - x[i];
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < M; ++j) x[i] += k[i][j] * y[j];
    }
    Mat np{};
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) {
        double v = P[i][j];
        for (int l = 0; l < M; ++l) v -= k[i][l] * P[l][j];
        np[i][j] = v;
      }
    }
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) P[i][j] = 0.5 * (np[i][j] + np[j][i]);
    }
  }
};

/// Minimum assignment cost by enumerating every injective mapping of the
/// smaller side into the larger. Costs are summed in row order.
inline double brute_force_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t rows = cost.size(), cols = rows ? cost[0].size() : 0;
  const bool transpose = rows > cols;
  const std::size_t small = transpose ? cols : rows, large = transpose ? rows : cols;
  std::vector<std::size_t> perm(large);
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double total = 0.0;
    if (transpose) {
      // perm[0..small) are the rows given to columns 0..small-1
      std::vector<long> col_of(rows, -1);
      for (std::size_t j = 0; j < small; ++j) col_of[perm[j]] = static_cast<long>(j);
      for (std::size_t i = 0; i < rows; ++i) {
        if (col_of[i] >= 0) total += cost[i][static_cast<std::size_t>(col_of[i])];
      }
    } else {
      for (std::size_t i = 0; i < small; ++i) total += cost[i][perm[i]];
    }
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return small == 0 ? 0.0 : best;
}

/// AP as a sweep over rank cutoffs: each true positive at rank n contributes
/// precision@n / G.
inline double rank_sweep_ap(std::vector<std::pair<double, bool>> scored, std::size_t n_gt) {
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  double ap = 0.0;
  for (std::size_t n = 1; n <= scored.size(); ++n) {
    if (!scored[n - 1].second) continue;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) tp += scored[i].second ? 1 : 0;
    ap += (static_cast<double>(tp) / static_cast<double>(n)) / static_cast<double>(n_gt);
  }
  return ap;
}

/// Even-odd point-in-polygon by crossing count.
inline bool point_in_polygon(std::span<const Point> poly, double px, double py) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point a = poly[i], b = poly[j];
    if ((a.y > py) != (b.y > py)) {
      const double x = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y);
      if (px < x) inside = !inside;
    }
  }
  return inside;
}

/// Greedy score-ordered matching on decoded bitmaps, for cross-checking the
/// run-based IoU and the matcher.
inline std::vector<MatchRecord> reference_match(std::span<const Detection> dets, std::span<const Detection> gts,
                                                double threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<BitMask> gm;
  for (const Detection& g : gts) gm.push_back(g.decode());
  std::vector<bool> claimed(gts.size(), false);
  std::vector<MatchRecord> out(dets.size());
  for (const std::size_t d : order) {
    const BitMask dm = dets[d].decode();
    out[d].detection = d;
    out[d].score = dets[d].score;
    double best = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (claimed[g] || dets[d].category != gts[g].category) continue;
      std::size_t inter = 0, uni = 0;
      for (std::size_t i = 0; i < dm.bits().size(); ++i) {
        inter += dm.bits()[i] & gm[g].bits()[i];
        uni += dm.bits()[i] | gm[g].bits()[i];
      }
      const double iou = static_cast<double>(inter) / static_cast<double>(uni);
      if (iou >= threshold && iou > best) {
        best = iou;
        out[d].ground_truth = g;
        out[d].iou = iou;
      }
    }
    if (out[d].ground_truth) {
      claimed[*out[d].ground_truth] = true;
      out[d].is_tp = true;
    }
  }
  return out;
}

}  // namespace testkit
