#include <algorithm>
#include <cmath>
#include <set>

#include "bubbletrack/analytics.hpp"
#include "bubbletrack/error.hpp"
#include "bubbletrack/geometry.hpp"

namespace bubbletrack {

namespace {

// Marks the set runs of `rle` in a column-major grid; returns newly set pixels.
std::size_t paint(const Rle& rle, std::vector<std::uint8_t>& grid) {
  std::size_t added = 0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    const std::size_t run = rle.counts[i];
    if (i % 2 == 1) {
      for (std::size_t k = pos; k < pos + run; ++k) {
        added += grid[k] == 0 ? 1 : 0;
        grid[k] = 1;
      }
    }
    pos += run;
  }
  return added;
}

}  // namespace

FrameFeatures frame_features(const Frame& frame, const Dataset& dataset) {
  FrameFeatures f;
  f.frame = frame.index;
  f.bubble_count = frame.detections.size();
  const std::size_t total = static_cast<std::size_t>(dataset.frame_width) * dataset.frame_height;

  std::vector<std::uint8_t> grid(total, 0);
  std::size_t union_all = 0;
  // Attached masks first: their union is a prefix of the full union.
  for (const Detection& d : frame.detections) {
    if (d.category == Category::Attached) union_all += paint(d.mask, grid);
  }
  const std::size_t union_attached = union_all;
  for (const Detection& d : frame.detections) {
    if (d.category != Category::Attached) union_all += paint(d.mask, grid);
  }
  f.vapor_fraction_total = static_cast<double>(union_all) / static_cast<double>(total);
  if (dataset.scheme == LabelScheme::TwoClass) {
    f.vapor_fraction_attached = static_cast<double>(union_attached) / static_cast<double>(total);
  }
  f.diameters_cm.reserve(frame.detections.size());
  for (const Detection& d : frame.detections) {
    f.diameters_cm.push_back(equivalent_diameter(d.area(), dataset.calibration));
  }
  return f;
}

std::optional<double> bubble_vapor_fraction(const Dataset& dataset, const Track& track, int frame) {
  const Observation* obs = track.at(frame);
  if (obs == nullptr) return std::nullopt;
  const Frame* f = dataset.find_frame(frame);
  if (f == nullptr || obs->detection_index >= f->detections.size()) {
    throw UsageError("track " + std::to_string(track.id) + " references a missing detection at frame " +
                     std::to_string(frame));
  }
  const double total = static_cast<double>(dataset.frame_width) * dataset.frame_height;
  return static_cast<double>(f->detections[obs->detection_index].area()) / total;
}

std::vector<DepartureEvent> departure_events(int track_id, const std::map<int, Category>& class_history,
                                             int debounce_k) {
  if (debounce_k < 1) throw DomainError("debounce window must be >= 1");
  std::vector<DepartureEvent> events;
  std::optional<Category> settled;
  std::optional<Category> run_class;
  int run_length = 0;
  int run_start = 0;
  for (const auto& [frame, category] : class_history) {
    if (run_class && *run_class == category) {
      ++run_length;
    } else {
      run_class = category;
      run_length = 1;
      run_start = frame;
    }
    if (run_length == debounce_k && settled != category) {
      if (settled == Category::Attached && category == Category::Detached) {
        events.push_back({track_id, run_start, debounce_k});
      }
      settled = category;
    }
  }
  return events;
}

std::vector<DepartureEvent> departure_events(const Track& track, int debounce_k) {
  return departure_events(track.id, track.class_history(), debounce_k);
}

std::vector<DepartureEvent> all_departures(const TrackSet& tracks, LabelScheme scheme, int debounce_k) {
  if (debounce_k < 1) throw DomainError("debounce window must be >= 1");
  std::vector<DepartureEvent> out;
  if (scheme == LabelScheme::OneClass) return out;
  for (const Track& t : tracks.tracks) {
    const auto events = departure_events(t, debounce_k);
    out.insert(out.end(), events.begin(), events.end());
  }
  std::sort(out.begin(), out.end(), [](const DepartureEvent& a, const DepartureEvent& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.track_id < b.track_id;
  });
  return out;
}

DepartureRate departure_rate(std::span<const DepartureEvent> events, double clip_duration_s) {
  if (!(clip_duration_s > 0.0) || !std::isfinite(clip_duration_s)) {
    throw DomainError("clip duration must be positive");
  }
  std::set<int> departed;
  for (const DepartureEvent& e : events) departed.insert(e.track_id);
  DepartureRate r;
  r.events = events.size();
  r.departed_tracks = departed.size();
  r.duration_s = clip_duration_s;
  r.events_per_s = static_cast<double>(r.events) / clip_duration_s;
  r.tracks_per_s = static_cast<double>(r.departed_tracks) / clip_duration_s;
  return r;
}

std::vector<HistogramBin> diameter_histogram(std::span<const Frame> frames, const Calibration& calibration,
                                             double bin_width_mm) {
  if (!(bin_width_mm > 0.0) || !std::isfinite(bin_width_mm)) throw DomainError("bin width must be positive");
  std::map<long long, std::size_t> counts;
  for (const Frame& f : frames) {
    for (const Detection& d : f.detections) {
      const double mm = 10.0 * equivalent_diameter(d.area(), calibration);
      ++counts[std::llround(mm / bin_width_mm)];
    }
  }
  std::vector<HistogramBin> out;
  if (counts.empty()) return out;
  for (long long k = counts.begin()->first; k <= counts.rbegin()->first; ++k) {
    const auto it = counts.find(k);
    out.push_back({static_cast<double>(k) * bin_width_mm, it == counts.end() ? 0 : it->second});
  }
  return out;
}

}  // namespace bubbletrack
