#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bubbletrack/error.hpp"
#include "bubbletrack/report.hpp"

namespace bubbletrack {

using ojson = nlohmann::ordered_json;

std::string format_fixed(double value) {
  if (value == 0.0) value = 0.0;  // no "-0.000000"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string format_fixed(const std::optional<double>& value) {
  return value ? format_fixed(*value) : std::string();
}

namespace {

double round6(double v) {
  const double r = std::round(v * 1e6) / 1e6;
  return r == 0.0 ? 0.0 : r;
}

ojson number_or_null(const std::optional<double>& v) { return v ? ojson(round6(*v)) : ojson(nullptr); }

ojson tracker_config_object(const TrackerConfig& c) {
  ojson j;
  j["iou_threshold"] = round6(c.iou_threshold);
  j["max_age"] = c.max_age;
  j["min_hits"] = c.min_hits;
  j["ocm_weight"] = round6(c.ocm_weight);
  j["ocm_delta_t"] = c.ocm_delta_t;
  j["score_threshold"] = round6(c.score_threshold);
  j["reupdate"] = c.reupdate;
  const auto diag = [](const auto& m) {
    ojson a = ojson::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(round6(m(i, i)));
    return a;
  };
  j["process_noise_diag"] = diag(c.noise.process);
  j["measurement_noise_diag"] = diag(c.noise.measurement);
  j["initial_covariance_diag"] = diag(c.noise.initial_covariance);
  return j;
}

}  // namespace

std::string tracker_config_json(const TrackerConfig& config) { return tracker_config_object(config).dump(); }

std::string tracks_to_json(const TrackSet& tracks, const TrackerConfig& config) {
  ojson doc;
  doc["config"] = tracker_config_object(config);
  ojson arr = ojson::array();
  for (const Track& t : tracks.tracks) {
    ojson jt;
    jt["id"] = t.id;
    jt["status"] = std::string(to_string(t.status));
    ojson frames = ojson::array();
    for (const auto& [frame, obs] : t.observations) {
      ojson jf;
      jf["index"] = frame;
      jf["bbox"] = {round6(obs.bbox.x), round6(obs.bbox.y), round6(obs.bbox.w), round6(obs.bbox.h)};
      jf["category"] = std::string(to_string(obs.category));
      jf["score"] = round6(obs.score);
      jf["mask_ref"] = {{"frame", frame}, {"detection_index", obs.detection_index}};
      frames.push_back(std::move(jf));
    }
    jt["frames"] = std::move(frames);
    arr.push_back(std::move(jt));
  }
  doc["tracks"] = std::move(arr);
  return doc.dump(1) + "\n";
}

TrackSet tracks_from_json(const std::string& text, const Dataset& dataset) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("", std::string("tracks file: ") + e.what());
  }
  TrackSet out;
  try {
    const auto& tracks = doc.at("tracks");
    for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
      const auto& jt = tracks[ti];
      Track t;
      t.id = jt.at("id").get<int>();
      const std::string status = jt.value("status", "dead");
      t.status = status == "tentative"   ? TrackStatus::Tentative
                 : status == "confirmed" ? TrackStatus::Confirmed
                 : status == "lost"      ? TrackStatus::Lost
                                         : TrackStatus::Dead;
      for (const auto& jf : jt.at("frames")) {
        Observation obs;
        obs.frame = jf.at("index").get<int>();
        obs.detection_index = jf.at("mask_ref").at("detection_index").get<std::size_t>();
        const Frame* frame = dataset.find_frame(obs.frame);
        if (frame == nullptr || obs.detection_index >= frame->detections.size()) {
          throw ValidationError("tracks[" + std::to_string(ti) + "]: frame " + std::to_string(obs.frame) +
                                " detection " + std::to_string(obs.detection_index) + " is not in the dataset");
        }
        const Detection& d = frame->detections[obs.detection_index];
        obs.bbox = d.bbox;
        obs.category = d.category;
        obs.score = d.score;
        if (!t.observations.emplace(obs.frame, obs).second) {
          throw ValidationError("tracks[" + std::to_string(ti) + "]: duplicate frame " + std::to_string(obs.frame));
        }
      }
      if (t.observations.empty()) continue;
      t.hits = static_cast<int>(t.observations.size());
      t.last_observed_frame = t.last_frame();
      out.tracks.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("tracks", e.what());
  }
  std::sort(out.tracks.begin(), out.tracks.end(), [](const Track& a, const Track& b) { return a.id < b.id; });
  return out;
}

std::string features_csv(const std::vector<FrameFeatures>& features) {
  std::ostringstream os;
  os << "frame,bubble_count,vapor_fraction_total,vapor_fraction_attached\n";
  for (const FrameFeatures& f : features) {
    os << f.frame << ',' << f.bubble_count << ',' << format_fixed(f.vapor_fraction_total) << ','
       << format_fixed(f.vapor_fraction_attached) << '\n';
  }
  return os.str();
}

std::string track_features_csv(const TrackSet& tracks, const Dataset& dataset) {
  std::ostringstream os;
  os << "track_id,frame,diameter_cm,category,bubble_vapor_fraction\n";
  const double total = static_cast<double>(dataset.frame_width) * dataset.frame_height;
  for (const Track& t : tracks.tracks) {
    for (const auto& [frame, obs] : t.observations) {
      const Frame* f = dataset.find_frame(frame);
      const Detection& d = f->detections[obs.detection_index];
      os << t.id << ',' << frame << ',' << format_fixed(equivalent_diameter(d.area(), dataset.calibration)) << ','
         << to_string(obs.category) << ',' << format_fixed(static_cast<double>(d.area()) / total) << '\n';
    }
  }
  return os.str();
}

std::string departures_csv(const std::vector<DepartureEvent>& events, const Dataset& dataset) {
  std::ostringstream os;
  os << "track_id,frame,time_s\n";
  for (const DepartureEvent& e : events) {
    os << e.track_id << ',' << e.frame << ',' << format_fixed(dataset.timestamp_s(e.frame)) << '\n';
  }
  return os.str();
}

std::string histogram_csv(const std::vector<HistogramBin>& bins) {
  std::ostringstream os;
  os << "bin_center_mm,count\n";
  for (const HistogramBin& b : bins) os << format_fixed(b.center_mm) << ',' << b.count << '\n';
  return os.str();
}

std::string velocity_map_csv(const VelocityMap& map) {
  std::ostringstream os;
  os << "position";
  for (const int f : map.frames) os << ',' << f;
  os << '\n';
  for (std::size_t b = 0; b < map.bins(); ++b) {
    os << format_fixed(map.bin_centers[b]);
    for (std::size_t t = 0; t < map.frames.size(); ++t) os << ',' << format_fixed(map.at(b, t));
    os << '\n';
  }
  return os.str();
}

std::string max_velocity_csv(const std::vector<std::pair<int, double>>& series, const Dataset& dataset) {
  std::ostringstream os;
  os << "frame,time_s,max_speed_cm_s\n";
  for (const auto& [frame, v] : series) {
    os << frame << ',' << format_fixed(dataset.timestamp_s(frame)) << ',' << format_fixed(v) << '\n';
  }
  return os.str();
}

std::string contours_csv(int track_id, const std::vector<std::pair<int, Contour>>& contours) {
  std::ostringstream os;
  os << "track_id,frame,vertex_index,x_px,y_px,position\n";
  for (const auto& [frame, contour] : contours) {
    const ParamContour param = parameterize(contour);
    for (std::size_t i = 0; i < contour.points.size(); ++i) {
      os << track_id << ',' << frame << ',' << i << ',' << format_fixed(contour.points[i].x) << ','
         << format_fixed(contour.points[i].y) << ',' << format_fixed(param.vertex_position[i]) << '\n';
    }
  }
  return os.str();
}

std::string eval_report_json(const EvalReport& report) {
  const auto counts_object = [](const std::vector<ThresholdCounts>& counts) {
    ojson j;
    for (const ThresholdCounts& c : counts) {
      char key[16];
      std::snprintf(key, sizeof key, "%.2f", c.threshold);
      j[key] = {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
    }
    return j;
  };
  ojson doc;
  doc["AP"] = number_or_null(report.ap);
  doc["AP50"] = number_or_null(report.ap50);
  doc["AP75"] = number_or_null(report.ap75);
  doc["AP_interp101"] = number_or_null(report.ap_interp101);
  doc["iou_mode"] = report.mode == IouMode::Mask ? "mask" : "box";
  ojson per_class = ojson::object();
  for (const auto& [category, cr] : report.per_class) {
    ojson c;
    c["AP"] = number_or_null(cr.ap);
    c["AP50"] = number_or_null(cr.ap50);
    c["AP75"] = number_or_null(cr.ap75);
    c["AP_interp101"] = number_or_null(cr.ap_interp101);
    c["ground_truths"] = cr.ground_truths;
    c["detections"] = cr.detections;
    c["counts"] = counts_object(cr.counts);
    per_class[std::string(to_string(category))] = std::move(c);
  }
  doc["per_class"] = std::move(per_class);
  doc["counts"] = counts_object(report.counts);
  return doc.dump(2) + "\n";
}

}  // namespace bubbletrack
