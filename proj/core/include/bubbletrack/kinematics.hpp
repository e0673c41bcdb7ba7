#pragma once

// Signed interface velocity: contour points of one bubble matched to the
// nearest contour point delta frames later, outward motion positive.

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "bubbletrack/corpus.hpp"
#include "bubbletrack/geometry.hpp"
#include "bubbletrack/tracker.hpp"

namespace bubbletrack {

struct KinematicsConfig {
  int delta_frames = 5;
  int bins = 200;
  int stride = 1;
  double sigma_position = 2.0;  // bins
  double sigma_time = 2.0;      // evaluated frames

  void validate() const;
};

struct InterfaceMatch {
  std::size_t source_index = 0;  // vertex of the earlier contour
  std::size_t target_index = 0;  // nearest vertex of the later contour
  Point source;
  Point target;
};

/// For every vertex of `from`, the nearest vertex of `to` (ties: lowest
/// index). Many-to-one matches are allowed.
std::vector<InterfaceMatch> match_interfaces(const Contour& from, const Contour& to);

/// Speed in cm/s of one matched pair: |displacement| / alpha / (delta / fps),
/// positive when the target lies outside `mask_t`, negative inside, zero for
/// no displacement.
///
/// A pixel corner touches four pixels. A target corner with all four set is
/// inside, with none set outside. A corner on the boundary of `mask_t` is
/// ambiguous; it is resolved by the source's side of `mask_later` (inside:
/// outward motion, outside: inward), and by `contains` when that is
/// ambiguous too or `mask_later` is not given.
double signed_speed(const InterfaceMatch& match, const BitMask& mask_t, const Calibration& calibration,
                    int delta_frames, const BitMask* mask_later = nullptr);

struct VelocitySample {
  double position = 0.0;  // relative perimeter on the earlier contour
  double speed = 0.0;     // cm/s, signed
  Point displacement;     // px
  Point source_point;
  Point target_point;
};

/// One sample per vertex of the contour of `mask_t`.
std::vector<VelocitySample> velocity_profile(const BitMask& mask_t, const BitMask& mask_later,
                                             const Calibration& calibration, int delta_frames);

/// Profile of a tracked bubble between `frame` and `frame + delta`; nullopt
/// when the track is not observed at both.
std::optional<std::vector<VelocitySample>> velocity_profile(const Dataset& dataset, const Track& track,
                                                            int frame, int delta_frames);

/// Observed frames t of the track with t + delta also observed, thinned to
/// every stride-th.
std::vector<int> evaluated_frames(const Track& track, int delta_frames, int stride);

/// Signed speed grid over (relative-perimeter bin x frame). Absent cells are
/// nullopt, never zero.
struct VelocityMap {
  std::vector<double> bin_centers;           // (k + 0.5) / M
  std::vector<int> frames;
  std::vector<std::optional<double>> values;  // bin-major: values[bin * frames.size() + t]
  bool smoothed = false;

  std::size_t bins() const { return bin_centers.size(); }
  std::optional<double>& at(std::size_t bin, std::size_t t) { return values[bin * frames.size() + t]; }
  const std::optional<double>& at(std::size_t bin, std::size_t t) const {
    return values[bin * frames.size() + t];
  }
};

/// Empty grid with M bins and the given frames.
VelocityMap make_velocity_map(std::size_t bins, std::vector<int> frames);

/// Averages each frame's samples into position bins.
VelocityMap bin_profiles(const std::vector<std::pair<int, std::vector<VelocitySample>>>& profiles,
                         std::size_t bins);

/// Throws DomainError when config.bins < 8.
VelocityMap spectrogram(const Dataset& dataset, const Track& track, const KinematicsConfig& config);

/// Separable Gaussian smoothing; the position axis wraps, the time axis is
/// mirrored at its ends. Absent cells carry no weight and stay absent.
VelocityMap smooth(const VelocityMap& map, double sigma_position, double sigma_time);

/// (frame, max |speed|) for every evaluated frame.
std::vector<std::pair<int, double>> max_velocity_series(const Dataset& dataset, const Track& track,
                                                        const KinematicsConfig& config);

}  // namespace bubbletrack
