#include <algorithm>
#include <cmath>
#include <numbers>

#include "bubbletrack/assignment.hpp"
#include "bubbletrack/error.hpp"
#include "bubbletrack/tracker.hpp"

namespace bubbletrack {

KalmanNoise::KalmanNoise() {
  process = Matrix7d::Identity();
  process.block<3, 3>(4, 4) *= 0.01;
  process(6, 6) *= 0.01;
  measurement = Matrix4d::Identity();
  measurement.block<2, 2>(2, 2) *= 10.0;
  initial_covariance = Matrix7d::Identity() * 10.0;
  initial_covariance.block<3, 3>(4, 4) *= 1000.0;
}

namespace {

Matrix7d transition() {
  Matrix7d f = Matrix7d::Identity();
  f(0, 4) = 1.0;
  f(1, 5) = 1.0;
  f(2, 6) = 1.0;
  return f;
}

Eigen::Matrix<double, 4, 7> observation_model() {
  Eigen::Matrix<double, 4, 7> h = Eigen::Matrix<double, 4, 7>::Zero();
  h.block<4, 4>(0, 0) = Matrix4d::Identity();
  return h;
}

}  // namespace

Vector4d to_measurement(const Box& box) {
  const Point c = box.center();
  return Vector4d(c.x, c.y, box.w * box.h, box.w / box.h);
}

Box to_box(const Vector7d& mean) {
  const double s = std::max(mean(2), kMinArea);
  const double r = std::max(mean(3), kMinArea);
  const double w = std::sqrt(s * r);
  const double h = s / w;
  return Box{mean(0) - 0.5 * w, mean(1) - 0.5 * h, w, h};
}

KalmanState initiate(const Box& box, const KalmanNoise& noise) {
  KalmanState st;
  st.mean.setZero();
  st.mean.head<4>() = to_measurement(box);
  st.covariance = noise.initial_covariance;
  return st;
}

Prediction predict(const KalmanState& state, const KalmanNoise& noise) {
  static const Matrix7d f = transition();
  Prediction p;
  p.state.mean = f * state.mean;
  p.state.covariance = f * state.covariance * f.transpose() + noise.process;
  if (!(p.state.mean(2) > 0.0)) {
    p.state.mean(2) = kMinArea;
    p.degenerate = true;
  }
  p.bbox = to_box(p.state.mean);
  return p;
}

Correction update(const KalmanState& state, const Box& observation, const KalmanNoise& noise) {
  static const Eigen::Matrix<double, 4, 7> h = observation_model();
  Correction c;
  const Vector4d innovation = to_measurement(observation) - h * state.mean;
  Matrix4d s = h * state.covariance * h.transpose() + noise.measurement;
  Eigen::FullPivLU<Matrix4d> lu(s);
  if (!lu.isInvertible()) {
    s += Matrix4d::Identity() * 1e-9;
    c.regularized = true;
  }
  // K = P H^T S^-1, computed as (S^-1 H P)^T with S symmetric.
  const Eigen::Matrix<double, 7, 4> gain = s.ldlt().solve(h * state.covariance).transpose();
  c.state.mean = state.mean + gain * innovation;
  const Matrix7d cov = (Matrix7d::Identity() - gain * h) * state.covariance;
  c.state.covariance = 0.5 * (cov + cov.transpose());
  return c;
}

void TrackerConfig::validate() const {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) throw DomainError("iou_threshold must be in [0, 1]");
  if (max_age < 1) throw DomainError("max_age must be >= 1");
  if (min_hits < 1) throw DomainError("min_hits must be >= 1");
  if (!(ocm_weight >= 0.0) || !std::isfinite(ocm_weight)) throw DomainError("ocm_weight must be >= 0");
  if (ocm_delta_t < 1) throw DomainError("ocm_delta_t must be >= 1");
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    throw DomainError("score_threshold must be in [0, 1]");
  }
}

TrackerConfig TrackerConfig::sort_mode() {
  TrackerConfig c;
  c.ocm_weight = 0.0;
  c.reupdate = false;
  return c;
}

std::string_view to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::Tentative: return "tentative";
    case TrackStatus::Confirmed: return "confirmed";
    case TrackStatus::Lost: return "lost";
    case TrackStatus::Dead: return "dead";
  }
  return "dead";
}

std::map<int, Category> Track::class_history() const {
  std::map<int, Category> out;
  for (const auto& [frame, obs] : observations) out.emplace(frame, obs.category);
  return out;
}

const Observation* Track::at(int frame) const {
  const auto it = observations.find(frame);
  return it == observations.end() ? nullptr : &it->second;
}

const Track* TrackSet::find(int id) const {
  const auto it = std::lower_bound(tracks.begin(), tracks.end(), id,
                                   [](const Track& t, int i) { return t.id < i; });
  if (it == tracks.end() || it->id != id) return nullptr;
  return &*it;
}

std::vector<int> TrackSet::ids() const {
  std::vector<int> out;
  out.reserve(tracks.size());
  for (const Track& t : tracks) out.push_back(t.id);
  return out;
}

Eigen::MatrixXd association_cost(std::span<const TrackCandidate> tracks, std::span<const Box> detections,
                                 const TrackerConfig& config) {
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(tracks.size()), static_cast<Eigen::Index>(detections.size()));
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const TrackCandidate& t = tracks[i];
    for (std::size_t j = 0; j < detections.size(); ++j) {
      double c = -box_iou(t.predicted, detections[j]);
      if (config.ocm_weight > 0.0 && t.direction && t.last_center) {
        const Point dc = detections[j].center();
        const double tx = dc.x - t.last_center->x, ty = dc.y - t.last_center->y;
        const double n1 = std::hypot(t.direction->x, t.direction->y);
        const double n2 = std::hypot(tx, ty);
        if (n1 > 0.0 && n2 > 0.0) {
          const double cosine = std::clamp((t.direction->x * tx + t.direction->y * ty) / (n1 * n2), -1.0, 1.0);
          c += config.ocm_weight * std::acos(cosine) / std::numbers::pi;
        }
      }
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
    }
  }
  return cost;
}

AssociationResult associate(std::span<const TrackCandidate> tracks, std::span<const Box> detections,
                            const TrackerConfig& config) {
  AssociationResult out;
  std::vector<bool> det_used(detections.size(), false);
  if (!tracks.empty() && !detections.empty()) {
    const Eigen::MatrixXd cost = association_cost(tracks, detections, config);
    const auto assignment = solve_assignment(cost);
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      if (!assignment[i]) continue;
      const std::size_t j = *assignment[i];
      if (box_iou(tracks[i].predicted, detections[j]) < config.iou_threshold) continue;
      out.matches.emplace_back(i, j);
      det_used[j] = true;
    }
  }
  std::vector<bool> track_used(tracks.size(), false);
  for (const auto& [i, j] : out.matches) track_used[i] = true;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (!track_used[i]) out.unmatched_tracks.push_back(i);
  }
  for (std::size_t j = 0; j < detections.size(); ++j) {
    if (!det_used[j]) out.unmatched_detections.push_back(j);
  }
  return out;
}

Tracker::Tracker(TrackerConfig config) : config_(std::move(config)) { config_.validate(); }

void Tracker::advance(Track& track, int steps) {
  for (int k = 0; k < steps; ++k) {
    const Prediction p = predict(track.state, config_.noise);
    track.state = p.state;
    track.predicted_bbox = p.bbox;
    track.degenerate = track.degenerate || p.degenerate;
    ++track.age;
    ++track.time_since_update;
    track.hit_streak = 0;
  }
}

void Tracker::correct(Track& track, const Observation& obs) {
  const int missing = obs.frame - track.last_observed_frame - 1;
  if (config_.reupdate && missing > 0) {
    // Re-run the filter from the last real observation along a straight
    // virtual path to the new one.
    const Box& from = track.observations.rbegin()->second.bbox;
    const Box& to = obs.bbox;
    const Point c0 = from.center(), c1 = to.center();
    KalmanState st = track.last_observed_state;
    for (int i = 1; i <= missing; ++i) {
      const double t = static_cast<double>(i) / (missing + 1);
      const double w = from.w + t * (to.w - from.w);
      const double h = from.h + t * (to.h - from.h);
      const Box virtual_box{c0.x + t * (c1.x - c0.x) - 0.5 * w, c0.y + t * (c1.y - c0.y) - 0.5 * h, w, h};
      st = predict(st, config_.noise).state;
      const Correction c = update(st, virtual_box, config_.noise);
      numerical_warnings_ += c.regularized ? 1 : 0;
      st = c.state;
    }
    st = predict(st, config_.noise).state;
    track.state = st;
  }
  const Correction c = update(track.state, obs.bbox, config_.noise);
  numerical_warnings_ += c.regularized ? 1 : 0;
  track.state = c.state;
  track.last_observed_state = c.state;
  track.observations.emplace(obs.frame, obs);
  track.last_observed_frame = obs.frame;
  track.time_since_update = 0;
  ++track.hits;
  ++track.hit_streak;
  track.status = track.hits >= config_.min_hits ? TrackStatus::Confirmed : TrackStatus::Tentative;
}

TrackCandidate Tracker::candidate(const Track& track) const {
  TrackCandidate c;
  c.predicted = track.predicted_bbox;
  const Observation& last = track.observations.rbegin()->second;
  const Point lc = last.bbox.center();
  c.last_center = lc;
  for (int dt = config_.ocm_delta_t; dt >= 1; --dt) {
    if (const Observation* prev = track.at(last.frame - dt)) {
      const Point pc = prev->bbox.center();
      if (pc.x != lc.x || pc.y != lc.y) c.direction = Point{lc.x - pc.x, lc.y - pc.y};
      break;
    }
  }
  return c;
}

std::vector<FrameAssignment> Tracker::step(const Frame& frame) {
  if (last_frame_ && frame.index <= *last_frame_) {
    throw UsageError("frame " + std::to_string(frame.index) + " presented after frame " +
                     std::to_string(*last_frame_));
  }
  const int steps = last_frame_ ? frame.index - *last_frame_ : 1;
  last_frame_ = frame.index;

  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    if (tracks_[i].status != TrackStatus::Dead) {
      advance(tracks_[i], steps);
      live.push_back(i);
    }
  }

  std::vector<std::size_t> accepted;
  std::vector<Box> boxes;
  for (std::size_t j = 0; j < frame.detections.size(); ++j) {
    if (frame.detections[j].score >= config_.score_threshold) {
      accepted.push_back(j);
      boxes.push_back(frame.detections[j].bbox);
    }
  }

  std::vector<TrackCandidate> candidates;
  candidates.reserve(live.size());
  for (const std::size_t i : live) candidates.push_back(candidate(tracks_[i]));
  const AssociationResult assoc = associate(candidates, boxes, config_);

  const auto observation = [&](std::size_t det) {
    const Detection& d = frame.detections[accepted[det]];
    return Observation{frame.index, accepted[det], d.bbox, d.category, d.score};
  };

  std::vector<FrameAssignment> out;
  for (const auto& [ti, dj] : assoc.matches) {
    Track& track = tracks_[live[ti]];
    correct(track, observation(dj));
    out.push_back({track.id, accepted[dj]});
  }
  for (const std::size_t ti : assoc.unmatched_tracks) {
    Track& track = tracks_[live[ti]];
    track.status = track.time_since_update >= config_.max_age ? TrackStatus::Dead : TrackStatus::Lost;
  }
  for (const std::size_t dj : assoc.unmatched_detections) {
    Track track;
    track.id = next_id_++;
    const Observation obs = observation(dj);
    track.state = initiate(obs.bbox, config_.noise);
    track.last_observed_state = track.state;
    track.predicted_bbox = obs.bbox;
    track.observations.emplace(obs.frame, obs);
    track.last_observed_frame = obs.frame;
    track.hits = 1;
    track.hit_streak = 1;
    track.status = config_.min_hits <= 1 ? TrackStatus::Confirmed : TrackStatus::Tentative;
    out.push_back({track.id, obs.detection_index});
    tracks_.push_back(std::move(track));
  }
  std::sort(out.begin(), out.end(),
            [](const FrameAssignment& a, const FrameAssignment& b) { return a.detection_index < b.detection_index; });
  return out;
}

TrackSet Tracker::finish() && { return TrackSet{std::move(tracks_)}; }

TrackSet run_tracker(const Dataset& dataset, const TrackerConfig& config) {
  Tracker tracker(config);
  for (const Frame& f : dataset.frames) tracker.step(f);
  return std::move(tracker).finish();
}

std::size_t count_id_switches(const TrackSet& tracks,
                              const std::map<std::pair<int, std::size_t>, int>& identity) {
  std::map<std::pair<int, std::size_t>, int> owner;
  for (const Track& t : tracks.tracks) {
    for (const auto& [frame, obs] : t.observations) owner[{frame, obs.detection_index}] = t.id;
  }
  // identity -> frame -> track id
  std::map<int, std::map<int, int>> seen;
  for (const auto& [key, gt] : identity) {
    const auto it = owner.find(key);
    if (it != owner.end()) seen[gt][key.first] = it->second;
  }
  std::size_t switches = 0;
  for (const auto& [gt, by_frame] : seen) {
    std::optional<int> previous;
    for (const auto& [frame, id] : by_frame) {
      if (previous && *previous != id) ++switches;
      previous = id;
    }
  }
  return switches;
}

}  // namespace bubbletrack
