#pragma once

// File formats written by the pipeline. Floats are always printed with six
// decimals so repeated runs produce identical bytes.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bubbletrack/analytics.hpp"
#include "bubbletrack/corpus.hpp"
#include "bubbletrack/evaluation.hpp"
#include "bubbletrack/geometry.hpp"
#include "bubbletrack/kinematics.hpp"
#include "bubbletrack/tracker.hpp"

namespace bubbletrack {

std::string format_fixed(double value);
/// Empty string for nullopt (an absent CSV cell).
std::string format_fixed(const std::optional<double>& value);

std::string tracker_config_json(const TrackerConfig& config);

/// tracks.json: {"config": {...}, "tracks": [{"id", "status", "frames": [...]}]}
std::string tracks_to_json(const TrackSet& tracks, const TrackerConfig& config);

/// Rebuilds tracks (observations, status) from tracks.json. Kalman state is
/// not persisted. Observations are checked against `dataset`.
TrackSet tracks_from_json(const std::string& text, const Dataset& dataset);

std::string features_csv(const std::vector<FrameFeatures>& features);
std::string track_features_csv(const TrackSet& tracks, const Dataset& dataset);
std::string departures_csv(const std::vector<DepartureEvent>& events, const Dataset& dataset);
std::string histogram_csv(const std::vector<HistogramBin>& bins);

/// Header: "position" then frame indices; one row per bin center.
std::string velocity_map_csv(const VelocityMap& map);
std::string max_velocity_csv(const std::vector<std::pair<int, double>>& series, const Dataset& dataset);
/// track_id, frame, vertex_index, x_px, y_px, position
std::string contours_csv(int track_id, const std::vector<std::pair<int, Contour>>& contours);

std::string eval_report_json(const EvalReport& report);

}  // namespace bubbletrack
