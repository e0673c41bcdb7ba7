#pragma once

// Per-frame and per-track bubble statistics: counts, vapor fractions,
// equivalent diameters, departure events and rates.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "bubbletrack/corpus.hpp"
#include "bubbletrack/tracker.hpp"

namespace bubbletrack {

struct FrameFeatures {
  int frame = 0;
  std::size_t bubble_count = 0;
  double vapor_fraction_total = 0.0;
  std::optional<double> vapor_fraction_attached;  // absent for one-class data
  std::vector<double> diameters_cm;               // one per detection, detection order
};

/// Fractions use the pixel union of the masks, so overlaps count once.
FrameFeatures frame_features(const Frame& frame, const Dataset& dataset);

/// Area of the track's mask at `frame` over the frame area; nullopt when the
/// track is not observed there.
std::optional<double> bubble_vapor_fraction(const Dataset& dataset, const Track& track, int frame);

struct DepartureEvent {
  int track_id = 0;
  int frame = 0;     // first frame of the confirming detached run
  int debounce = 1;
};

/// Attached -> detached transitions of a debounced class state. The state
/// switches only after `debounce_k` consecutive observations of the new
/// class; an event is reported when a settled attached state is replaced by
/// detached, at the first frame of that detached run. Observations are
/// taken in frame order; gaps are not counted as frames. With k = 1 this is
/// every adjacent attached -> detached pair.
std::vector<DepartureEvent> departure_events(int track_id, const std::map<int, Category>& class_history,
                                             int debounce_k);
std::vector<DepartureEvent> departure_events(const Track& track, int debounce_k);

/// All departure events of a track set, ordered by (frame, track id). Empty
/// for one-class data.
std::vector<DepartureEvent> all_departures(const TrackSet& tracks, LabelScheme scheme, int debounce_k);

struct DepartureRate {
  std::size_t events = 0;
  std::size_t departed_tracks = 0;  // tracks with at least one event
  double duration_s = 0.0;
  double events_per_s = 0.0;
  double tracks_per_s = 0.0;
};

/// Events divided by clip duration. Throws DomainError for a non-positive
/// duration.
DepartureRate departure_rate(std::span<const DepartureEvent> events, double clip_duration_s);

struct HistogramBin {
  double center_mm = 0.0;  // bins are [center - w/2, center + w/2)
  std::size_t count = 0;
};

/// Equivalent diameters in bins centered on multiples of `bin_width_mm`,
/// dense from the smallest to the largest occupied bin.
std::vector<HistogramBin> diameter_histogram(std::span<const Frame> frames, const Calibration& calibration,
                                             double bin_width_mm);

}  // namespace bubbletrack
