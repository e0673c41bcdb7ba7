#pragma once

// Motion-only multi-object tracker: constant-velocity Kalman boxes, optimal
// IoU assignment, plus the two observation-centric corrections
// (direction-consistency cost and re-update after occlusion).

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bubbletrack/corpus.hpp"

namespace bubbletrack {

using Vector7d = Eigen::Matrix<double, 7, 1>;
using Matrix7d = Eigen::Matrix<double, 7, 7>;
using Vector4d = Eigen::Vector4d;
using Matrix4d = Eigen::Matrix4d;

/// Mean layout: (u, v, s, r, du, dv, ds) with (u, v) the box center, s the
/// area and r = w / h.
struct KalmanState {
  Vector7d mean = Vector7d::Zero();
  Matrix7d covariance = Matrix7d::Identity();
};

/// Noise model. Defaults are the usual SORT values.
struct KalmanNoise {
  Matrix7d process;
  Matrix4d measurement;
  Matrix7d initial_covariance;

  KalmanNoise();
};

inline constexpr double kMinArea = 1e-6;

struct Prediction {
  KalmanState state;
  Box bbox;
  bool degenerate = false;  // predicted area was <= 0 and got clamped
};

struct Correction {
  KalmanState state;
  bool regularized = false;  // innovation covariance was singular
};

Vector4d to_measurement(const Box& box);
Box to_box(const Vector7d& mean);

KalmanState initiate(const Box& box, const KalmanNoise& noise = {});
Prediction predict(const KalmanState& state, const KalmanNoise& noise = {});
Correction update(const KalmanState& state, const Box& observation, const KalmanNoise& noise = {});

struct TrackerConfig {
  double iou_threshold = 0.3;
  int max_age = 30;
  int min_hits = 3;
  double ocm_weight = 0.2;
  int ocm_delta_t = 3;
  double score_threshold = 0.5;
  bool reupdate = true;
  KalmanNoise noise;

  /// Throws DomainError for values outside their ranges.
  void validate() const;
  /// Plain SORT: no direction term, no re-update.
  static TrackerConfig sort_mode();
};

enum class TrackStatus { Tentative, Confirmed, Lost, Dead };
std::string_view to_string(TrackStatus s);

struct Observation {
  int frame = 0;
  std::size_t detection_index = 0;  // index into the frame's detection list
  Box bbox;
  Category category = Category::Bubble;
  double score = 0.0;
};

struct Track {
  int id = 0;
  KalmanState state;
  std::map<int, Observation> observations;  // keyed by frame index
  TrackStatus status = TrackStatus::Tentative;
  int hits = 0;
  int hit_streak = 0;
  int age = 0;                // frames since birth
  int time_since_update = 0;  // frames since the last observation
  int last_observed_frame = 0;
  bool degenerate = false;
  Box predicted_bbox;

  std::map<int, Category> class_history() const;
  int first_frame() const { return observations.begin()->first; }
  int last_frame() const { return observations.rbegin()->first; }
  const Observation* at(int frame) const;

  // Posterior right after the last real observation; the re-update restarts
  // from here.
  KalmanState last_observed_state;
};

struct TrackSet {
  std::vector<Track> tracks;  // ascending id

  const Track* find(int id) const;
  std::vector<int> ids() const;
};

/// One live track as seen by the association step.
struct TrackCandidate {
  Box predicted;
  std::optional<Point> last_center;  // last observed box center
  std::optional<Point> direction;    // historical observation direction (unnormalized)
};

struct AssociationResult {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (track, detection)
  std::vector<std::size_t> unmatched_tracks;
  std::vector<std::size_t> unmatched_detections;
};

/// cost(i, j) = -IoU(track_i, det_j) + ocm_weight * angle(i, j) / pi.
Eigen::MatrixXd association_cost(std::span<const TrackCandidate> tracks, std::span<const Box> detections,
                                 const TrackerConfig& config);

/// Optimal assignment on association_cost, then drops pairs whose IoU is
/// below config.iou_threshold.
AssociationResult associate(std::span<const TrackCandidate> tracks, std::span<const Box> detections,
                            const TrackerConfig& config);

struct FrameAssignment {
  int track_id = 0;
  std::size_t detection_index = 0;
};

/// Sequential tracker over frames of strictly increasing index.
class Tracker {
public:
  explicit Tracker(TrackerConfig config = {});

  /// Advances to `frame` and returns the track of every accepted detection,
  /// in detection order. Throws UsageError on a non-increasing index.
  std::vector<FrameAssignment> step(const Frame& frame);

  const std::vector<Track>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return config_; }
  int numerical_warnings() const { return numerical_warnings_; }

  TrackSet finish() &&;

private:
  void advance(Track& track, int steps);
  void correct(Track& track, const Observation& obs);
  TrackCandidate candidate(const Track& track) const;

  TrackerConfig config_;
  std::vector<Track> tracks_;
  int next_id_ = 1;
  std::optional<int> last_frame_;
  int numerical_warnings_ = 0;
};

TrackSet run_tracker(const Dataset& dataset, const TrackerConfig& config = {});

/// Identity switches against known ground-truth identities: for every
/// identity, the number of times its assigned track id changes between
/// successive assigned frames. `identity` maps (frame, detection index) to a
/// ground-truth id.
std::size_t count_id_switches(const TrackSet& tracks,
                              const std::map<std::pair<int, std::size_t>, int>& identity);

}  // namespace bubbletrack
