#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bubbletrack/error.hpp"
#include "bubbletrack/kinematics.hpp"
#include "testkit.hpp"

using namespace bubbletrack;

namespace {

const Calibration kCal{100.0, 3000.0};

// A dataset of one-detection frames and the track that owns them.
struct Clip {
  Dataset dataset;
  Track track;
};

Clip clip_of(const std::vector<BitMask>& masks, int first_frame = 0) {
  Clip c;
  std::vector<Frame> frames;
  c.track.id = 1;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const int index = first_frame + static_cast<int>(i);
    const Detection d = testkit::make_detection(masks[i]);
    frames.push_back({index, {d}});
    c.track.observations[index] = Observation{index, 0, d.bbox, d.category, d.score};
  }
  c.dataset = testkit::make_dataset(masks.at(0).width(), masks.at(0).height(), kCal, std::move(frames));
  return c;
}

std::vector<BitMask> growing_disk(int frames, double r0, double dr_per_frame) {
  std::vector<BitMask> out;
  for (int t = 0; t < frames; ++t) out.push_back(testkit::rasterize_disk(200, 200, 100, 100, r0 + dr_per_frame * t));
  return out;
}

BitMask ellipse(int w, int h, double cx, double cy, double a, double b, double theta) {
  BitMask m(w, h);
  const double c = std::cos(theta), s = std::sin(theta);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const double u = c * dx + s * dy, v = -s * dx + c * dy;
      if (u * u / (a * a) + v * v / (b * b) <= 1.0) m.set(x, y);
    }
  }
  return m;
}

std::size_t wrap(long i, long n) { return static_cast<std::size_t>(((i % n) + n) % n); }

// Mirror index by walking: bounce off the ends, repeating the edge sample.
std::size_t bounce(long i, long n) {
  while (i < 0 || i >= n) i = i < 0 ? -1 - i : 2 * n - 1 - i;
  return static_cast<std::size_t>(i);
}

// Masked normalized 2-d convolution, evaluated directly with the product
// kernel.
VelocityMap dense_smooth(const VelocityMap& map, double sp, double st) {
  VelocityMap out = map;
  const long nb = static_cast<long>(map.bins()), nt = static_cast<long>(map.frames.size());
  const long rp = sp > 0 ? static_cast<long>(std::ceil(4 * sp)) : 0;
  const long rt = st > 0 ? static_cast<long>(std::ceil(4 * st)) : 0;
  const auto g = [](long k, double s) { return s > 0 ? std::exp(-0.5 * k * k / (s * s)) : 1.0; };
  for (long b = 0; b < nb; ++b) {
    for (long t = 0; t < nt; ++t) {
      if (!map.at(b, t)) continue;
      double num = 0, den = 0;
      for (long i = -rp; i <= rp; ++i) {
        for (long j = -rt; j <= rt; ++j) {
          const auto& v = map.at(wrap(b + i, nb), bounce(t + j, nt));
          if (!v) continue;
          num += g(i, sp) * g(j, st) * *v;
          den += g(i, sp) * g(j, st);
        }
      }
      out.at(b, t) = num / den;
    }
  }
  return out;
}

VelocityMap random_map(std::mt19937_64& rng, std::size_t bins, std::size_t frames, double absent) {
  std::vector<int> idx(frames);
  for (std::size_t i = 0; i < frames; ++i) idx[i] = static_cast<int>(3 * i);
  VelocityMap m = make_velocity_map(bins, idx);
  std::uniform_real_distribution<double> v(-30, 30), u(0, 1);
  for (auto& cell : m.values) {
    if (u(rng) >= absent) cell = v(rng);
  }
  return m;
}

}  // namespace

TEST(Match, IdenticalContoursHaveZeroDisplacement) {
  const Contour c = extract_contour(testkit::rasterize_disk(80, 80, 40, 40, 20));
  for (const InterfaceMatch& m : match_interfaces(c, c)) {
    EXPECT_EQ(m.source_index, m.target_index);
    EXPECT_EQ(m.source, m.target);
  }
}

TEST(Match, TranslationEqualsBruteForce) {
  const Contour c0 = extract_contour(testkit::rasterize_disk(100, 80, 40, 40, 22));
  Contour c1 = c0;
  for (Point& p : c1.points) p.x += 3.0;
  const auto matches = match_interfaces(c0, c1);
  ASSERT_EQ(matches.size(), c0.points.size());
  for (const InterfaceMatch& m : matches) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t j = 0; j < c1.points.size(); ++j) {
      const double d = std::hypot(c1.points[j].x - m.source.x, c1.points[j].y - m.source.y);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    ASSERT_EQ(m.target_index, best);
    EXPECT_LE(std::hypot(m.target.x - m.source.x, m.target.y - m.source.y), 3.0);
  }
}

TEST(Match, EqualsBruteForceOnIrregularShapes) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> axis(10, 60), angle(0, 3.14);
  for (int trial = 0; trial < 10; ++trial) {
    const Contour c0 = extract_contour(ellipse(160, 160, 80, 80, axis(rng), axis(rng), angle(rng)));
    const Contour c1 = extract_contour(ellipse(160, 160, 78, 83, axis(rng), axis(rng), angle(rng)));
    ASSERT_LE(c0.points.size(), 2000u);
    for (const InterfaceMatch& m : match_interfaces(c0, c1)) {
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t j = 0; j < c1.points.size(); ++j) {
        const double d = std::pow(c1.points[j].x - m.source.x, 2) + std::pow(c1.points[j].y - m.source.y, 2);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      ASSERT_EQ(m.target_index, best);
    }
  }
}

TEST(Match, ConcentricCirclesMoveRadiallyByFive) {
  const Contour c0 = extract_contour(testkit::rasterize_disk(200, 200, 100, 100, 50));
  const Contour c1 = extract_contour(testkit::rasterize_disk(200, 200, 100, 100, 55));
  for (const InterfaceMatch& m : match_interfaces(c0, c1)) {
    const double dx = m.target.x - m.source.x, dy = m.target.y - m.source.y;
    EXPECT_NEAR(std::hypot(dx, dy), 5.0, 1.0);
    EXPECT_GT(dx * (m.source.x - 100) + dy * (m.source.y - 100), 0.0);  // outward
  }
}

TEST(Speed, Examples) {
  BitMask m(20, 20);
  for (int y = 5; y < 15; ++y) {
    for (int x = 5; x < 15; ++x) m.set(x, y);
  }
  const InterfaceMatch out{0, 0, {15, 10}, {20, 10}};
  const InterfaceMatch in{0, 0, {15, 10}, {10, 10}};
  const InterfaceMatch none{0, 0, {15, 10}, {15, 10}};
  EXPECT_DOUBLE_EQ(signed_speed(out, m, kCal, 5), 30.0);
  EXPECT_DOUBLE_EQ(signed_speed(in, m, kCal, 5), -30.0);
  EXPECT_DOUBLE_EQ(signed_speed(none, m, kCal, 5), 0.0);
  EXPECT_THROW(signed_speed(out, m, kCal, 0), DomainError);
}

TEST(Speed, CornerOnMaskBoundaryUsesSourceSide) {
  // 4x4 block at (4,4); the larger mask adds pixels (3,4) and (3,5).
  BitMask small(16, 16), large(16, 16);
  for (int y = 4; y < 8; ++y) {
    for (int x = 4; x < 8; ++x) {
      small.set(x, y);
      large.set(x, y);
    }
  }
  large.set(3, 4);
  large.set(3, 5);
  // Corner (4,5) of the small contour is interior to the large mask; its
  // match (4,4) lies on the small boundary, and the pixel below-right of it
  // is set. Growth is still outward.
  const InterfaceMatch grow{0, 0, {4, 5}, {4, 4}};
  EXPECT_TRUE(contains(small, grow.target));
  EXPECT_GT(signed_speed(grow, small, kCal, 5, &large), 0.0);
  // Reverse direction: corner (3,4) of the large contour lies outside the
  // small mask.
  const InterfaceMatch shrink{0, 0, {3, 4}, {4, 4}};
  EXPECT_LT(signed_speed(shrink, large, kCal, 5, &small), 0.0);
  // Strictly inside or outside targets ignore the later mask.
  EXPECT_LT(signed_speed({0, 0, {4, 5}, {6, 6}}, small, kCal, 5, &large), 0.0);
  EXPECT_GT(signed_speed({0, 0, {4, 5}, {1, 1}}, small, kCal, 5, &large), 0.0);
}

TEST(Profile, SpeedIdentityAndOnePerVertex) {
  const BitMask a = ellipse(120, 120, 60, 60, 30, 20, 0.3), b = ellipse(120, 120, 62, 58, 33, 19, 0.5);
  const auto profile = velocity_profile(a, b, kCal, 5);
  EXPECT_EQ(profile.size(), extract_contour(a).points.size());
  for (const VelocitySample& s : profile) {
    const double d = std::hypot(s.displacement.x, s.displacement.y);
    EXPECT_NEAR(std::abs(s.speed) * kCal.pixels_per_cm * 5 / kCal.frame_rate, d, 1e-12);
    EXPECT_GE(s.position, 0.0);
    EXPECT_LT(s.position, 1.0);
  }
}

TEST(Profile, DilationIsOutward) {
  const auto profile = velocity_profile(testkit::rasterize_disk(200, 200, 100, 100, 50),
                                        testkit::rasterize_disk(200, 200, 100, 100, 55), kCal, 5);
  for (const VelocitySample& s : profile) {
    EXPECT_GT(s.speed, 0.0);
    // Each displacement is within 1 px of the 5 px radial growth.
    EXPECT_NEAR(s.speed, 30.0, 6.0);
  }
}

TEST(Profile, SignsOnRandomConvexShapes) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> axis(12, 40), angle(0, 3.14), grow(1.0, 6.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = axis(rng), b = axis(rng), th = angle(rng), g = grow(rng);
    const BitMask small = ellipse(120, 120, 60, 60, a, b, th), big = ellipse(120, 120, 60, 60, a + g, b + g, th);
    for (const VelocitySample& s : velocity_profile(small, big, kCal, 3)) ASSERT_GE(s.speed, 0.0);
    for (const VelocitySample& s : velocity_profile(big, small, kCal, 3)) ASSERT_LE(s.speed, 0.0);
  }
}

TEST(Profile, StaticBubbleIsZero) {
  const BitMask m = ellipse(90, 90, 45, 45, 20, 14, 0.7);
  for (const VelocitySample& s : velocity_profile(m, m, kCal, 5)) EXPECT_EQ(s.speed, 0.0);
}

TEST(Profile, UpwardTranslationSignPattern) {
  // Image y decreases upward.
  const BitMask a = testkit::rasterize_disk(200, 200, 100, 110, 40), b = testkit::rasterize_disk(200, 200, 100, 100, 40);
  for (const VelocitySample& s : velocity_profile(a, b, kCal, 5)) {
    if (std::abs(s.position - 0.5) < 0.05) EXPECT_GT(s.speed, 0.0) << s.position;
    if (s.position < 0.05 || s.position > 0.95) EXPECT_LT(s.speed, 0.0) << s.position;
  }
}

TEST(Spectrogram, SingleFrameTrackIsEmpty) {
  const Clip c = clip_of({testkit::rasterize_disk(64, 64, 32, 32, 10)});
  const VelocityMap m = spectrogram(c.dataset, c.track, KinematicsConfig{});
  EXPECT_TRUE(m.frames.empty());
  EXPECT_TRUE(m.values.empty());
  EXPECT_EQ(m.bins(), 200u);
}

TEST(Spectrogram, BinCenters) {
  const VelocityMap m = make_velocity_map(8, {0});
  EXPECT_DOUBLE_EQ(m.bin_centers[0], 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(m.bin_centers[7], 15.0 / 16.0);
}

TEST(Spectrogram, TooFewBinsIsDomainError) {
  const Clip c = clip_of(growing_disk(8, 30, 1));
  KinematicsConfig k;
  k.bins = 7;
  EXPECT_THROW(spectrogram(c.dataset, c.track, k), DomainError);
}

TEST(Spectrogram, DilationGridIsOutwardEverywhere) {
  const Clip c = clip_of(growing_disk(12, 50, 1.0));
  const VelocityMap m = spectrogram(c.dataset, c.track, KinematicsConfig{});
  ASSERT_EQ(m.frames.size(), 7u);
  for (const auto& v : m.values) {
    if (v) EXPECT_NEAR(*v, 30.0, 6.0);
  }
}

TEST(Spectrogram, NoAbsentBinsOnDenseContour) {
  // r = 40 gives a contour of about 320 vertices; every one of 200 bins gets a sample.
  const Clip c = clip_of(growing_disk(6, 40, 0.5));
  ASSERT_GE(extract_contour(c.dataset.frames[0].detections[0].decode()).points.size(), 300u);
  const VelocityMap m = spectrogram(c.dataset, c.track, KinematicsConfig{});
  for (const auto& v : m.values) EXPECT_TRUE(v.has_value());
}

TEST(Spectrogram, EvaluatedFramesAndStride) {
  Clip c = clip_of(growing_disk(20, 20, 0.5), 100);
  c.track.observations.erase(105);  // gap: 100 (needs 105) and 105 itself drop out
  EXPECT_EQ(evaluated_frames(c.track, 5, 1),
            (std::vector<int>{101, 102, 103, 104, 106, 107, 108, 109, 110, 111, 112, 113, 114}));
  EXPECT_EQ(evaluated_frames(c.track, 5, 4), (std::vector<int>{101, 106, 110, 114}));
}

TEST(MaxVelocity, SeriesLengthAndDilationValue) {
  const Clip c = clip_of(growing_disk(23, 50, 1.0));
  for (const int stride : {1, 2, 3, 5}) {
    KinematicsConfig k;
    k.stride = stride;
    const auto series = max_velocity_series(c.dataset, c.track, k);
    EXPECT_EQ(series.size(), static_cast<std::size_t>((23 - 5 + stride - 1) / stride));
    for (const auto& [frame, v] : series) EXPECT_NEAR(v, 30.0, 6.0 + 1e-9);
  }
}

TEST(MaxVelocity, StaticBubbleIsZero) {
  const Clip c = clip_of(std::vector<BitMask>(8, testkit::rasterize_disk(64, 64, 30, 30, 12)));
  for (const auto& [frame, v] : max_velocity_series(c.dataset, c.track, KinematicsConfig{})) EXPECT_EQ(v, 0.0);
}

TEST(Smooth, SigmaZeroIsIdentity) {
  std::mt19937_64 rng(1);
  const VelocityMap m = random_map(rng, 16, 9, 0.3);
  const VelocityMap s = smooth(m, 0.0, 0.0);
  EXPECT_EQ(s.values, m.values);
  EXPECT_TRUE(s.smoothed);
}

TEST(Smooth, ConstantFieldIsUnchanged) {
  VelocityMap m = make_velocity_map(12, {0, 1, 2, 3, 4});
  for (auto& v : m.values) v = 7.25;
  m.at(3, 2).reset();
  const VelocityMap s = smooth(m, 2.0, 1.5);
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    if (m.values[i]) {
      EXPECT_NEAR(*s.values[i], 7.25, 1e-12);
    } else {
      EXPECT_FALSE(s.values[i]);
    }
  }
}

TEST(Smooth, ImpulseGivesNormalizedKernel) {
  VelocityMap m = make_velocity_map(40, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19});
  for (auto& v : m.values) v = 0.0;
  m.at(20, 10) = 1.0;
  const double sp = 2.0, st = 1.5;
  const VelocityMap s = smooth(m, sp, st);
  double zp = 0, zt = 0;
  for (int k = -8; k <= 8; ++k) zp += std::exp(-0.5 * k * k / (sp * sp));
  for (int k = -6; k <= 6; ++k) zt += std::exp(-0.5 * k * k / (st * st));
  for (int b = 0; b < 40; ++b) {
    for (int t = 0; t < 20; ++t) {
      const int db = b - 20, dt = t - 10;
      const double expected = std::abs(db) <= 8 && std::abs(dt) <= 6
                                  ? std::exp(-0.5 * db * db / (sp * sp)) * std::exp(-0.5 * dt * dt / (st * st)) /
                                        (zp * zt)
                                  : 0.0;
      ASSERT_NEAR(*s.at(b, t), expected, 1e-12) << b << "," << t;
    }
  }
}

TEST(Smooth, MatchesDenseConvolutionWithAbsentCells) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const VelocityMap m = random_map(rng, 8 + trial, 3 + trial % 7, 0.35);
    const double sp = 0.5 * (trial % 5), st = 0.7 * (trial % 4);
    const VelocityMap fast = smooth(m, sp, st), slow = dense_smooth(m, sp, st);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      ASSERT_EQ(fast.values[i].has_value(), m.values[i].has_value());
      if (m.values[i]) ASSERT_NEAR(*fast.values[i], *slow.values[i], 1e-12) << "trial " << trial;
    }
  }
}

TEST(Smooth, IsLinear) {
  std::mt19937_64 rng(5);
  const VelocityMap m = random_map(rng, 30, 12, 0.2);
  VelocityMap scaled = m;
  for (auto& v : scaled.values) {
    if (v) *v *= -3.5;
  }
  const VelocityMap a = smooth(m, 2.0, 2.0), b = smooth(scaled, 2.0, 2.0);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i]) ASSERT_NEAR(*b.values[i], -3.5 * *a.values[i], 1e-12);
  }
}

TEST(Smooth, NegativeSigmaIsDomainError) {
  EXPECT_THROW(smooth(make_velocity_map(8, {0}), -1.0, 0.0), DomainError);
}
