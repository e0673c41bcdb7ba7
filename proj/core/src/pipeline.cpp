#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "bubbletrack/analytics.hpp"
#include "bubbletrack/error.hpp"
#include "bubbletrack/pipeline.hpp"
#include "bubbletrack/report.hpp"
#include "bubbletrack/version.hpp"

namespace bubbletrack {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

void AnalyticsConfig::validate() const {
  if (debounce < 1) throw DomainError("debounce must be >= 1");
  if (!(histogram_bin_mm > 0.0)) throw DomainError("histogram bin width must be positive");
}

void RunConfig::validate() const {
  tracker.validate();
  kinematics.validate();
  analytics.validate();
  if (workers < 1) throw DomainError("workers must be >= 1");
}

namespace {

template <class T>
void take(const nlohmann::json& section, const std::string& section_name, const char* key, T& target) {
  const auto it = section.find(key);
  if (it == section.end()) return;
  try {
    target = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError("config " + section_name + "." + key + ": wrong type");
  }
}

void reject_unknown(const nlohmann::json& section, const std::string& name, std::initializer_list<const char*> known) {
  if (!section.is_object()) throw UsageError("config " + name + ": expected object");
  for (const auto& [key, value] : section.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw UsageError("config " + (name.empty() ? key : name + "." + key) + ": unknown key");
    }
  }
}

}  // namespace

void apply_config_json(RunConfig& config, const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("", std::string("config: ") + e.what());
  }
  reject_unknown(doc, "", {"tracker", "kinematics", "analytics", "evaluation", "workers"});
  if (doc.contains("tracker")) {
    const auto& t = doc["tracker"];
    reject_unknown(t, "tracker",
                   {"iou_threshold", "max_age", "min_hits", "ocm_weight", "ocm_delta_t", "score_threshold", "reupdate"});
    take(t, "tracker", "iou_threshold", config.tracker.iou_threshold);
    take(t, "tracker", "max_age", config.tracker.max_age);
    take(t, "tracker", "min_hits", config.tracker.min_hits);
    take(t, "tracker", "ocm_weight", config.tracker.ocm_weight);
    take(t, "tracker", "ocm_delta_t", config.tracker.ocm_delta_t);
    take(t, "tracker", "score_threshold", config.tracker.score_threshold);
    take(t, "tracker", "reupdate", config.tracker.reupdate);
  }
  if (doc.contains("kinematics")) {
    const auto& k = doc["kinematics"];
    reject_unknown(k, "kinematics", {"delta_frames", "bins", "stride", "sigma_position", "sigma_time"});
    take(k, "kinematics", "delta_frames", config.kinematics.delta_frames);
    take(k, "kinematics", "bins", config.kinematics.bins);
    take(k, "kinematics", "stride", config.kinematics.stride);
    take(k, "kinematics", "sigma_position", config.kinematics.sigma_position);
    take(k, "kinematics", "sigma_time", config.kinematics.sigma_time);
  }
  if (doc.contains("analytics")) {
    const auto& a = doc["analytics"];
    reject_unknown(a, "analytics", {"debounce", "histogram_bin_mm"});
    take(a, "analytics", "debounce", config.analytics.debounce);
    take(a, "analytics", "histogram_bin_mm", config.analytics.histogram_bin_mm);
  }
  if (doc.contains("evaluation")) {
    const auto& e = doc["evaluation"];
    reject_unknown(e, "evaluation", {"iou_mode"});
    std::string mode = config.iou_mode == IouMode::Mask ? "mask" : "box";
    take(e, "evaluation", "iou_mode", mode);
    if (mode != "mask" && mode != "box") throw UsageError("config evaluation.iou_mode: expected mask or box");
    config.iou_mode = mode == "mask" ? IouMode::Mask : IouMode::Box;
  }
  take(doc, "", "workers", config.workers);
}

void apply_config_file(RunConfig& config, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("", "cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_json(config, ss.str());
}

namespace {

ojson config_echo(const RunConfig& c) {
  ojson j;
  j["input"] = c.input.string();
  j["ground_truth"] = c.ground_truth.empty() ? ojson(nullptr) : ojson(c.ground_truth.string());
  j["tracks"] = c.tracks.empty() ? ojson(nullptr) : ojson(c.tracks.string());
  j["out_dir"] = c.out_dir.string();
  j["tracker"] = ojson::parse(tracker_config_json(c.tracker));
  j["kinematics"] = {{"delta_frames", c.kinematics.delta_frames},
                     {"bins", c.kinematics.bins},
                     {"stride", c.kinematics.stride},
                     {"sigma_position", c.kinematics.sigma_position},
                     {"sigma_time", c.kinematics.sigma_time}};
  j["analytics"] = {{"debounce", c.analytics.debounce}, {"histogram_bin_mm", c.analytics.histogram_bin_mm}};
  j["evaluation"] = {{"iou_mode", c.iou_mode == IouMode::Mask ? "mask" : "box"}};
  j["workers"] = c.workers;
  j["track_id"] = c.track_id ? ojson(*c.track_id) : ojson(nullptr);
  return j;
}

}  // namespace

std::string config_echo_json(const RunConfig& config) { return config_echo(config).dump(2); }

ExitCode classify(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
      dynamic_cast<const DecodeError*>(&e)) {
    return ExitCode::InputError;
  }
  if (dynamic_cast<const UsageError*>(&e) || dynamic_cast<const DomainError*>(&e)) return ExitCode::UsageError;
  return ExitCode::InternalError;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += threads) body(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Pipeline::Pipeline(RunConfig config, std::string command)
    : config_(std::move(config)), command_(std::move(command)) {}

template <class F>
void Pipeline::stage(const std::string& name, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  try {
    body();
  } catch (...) {
    stages_.push_back({name, elapsed(), false});
    if (!failed_stage_) failed_stage_ = name;
    throw;
  }
  stages_.push_back({name, elapsed(), true});
  std::cerr << "stage " << name << ": " << format_fixed(stages_.back().seconds) << " s\n";
}

void Pipeline::write(const fs::path& name, const std::string& content) const {
  const fs::path path = config_.out_dir / name;
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("error writing '" + path.string() + "'");
}

const Dataset& Pipeline::dataset() {
  if (!dataset_) {
    stage("load", [&] {
      config_.validate();
      if (!fs::exists(config_.input)) throw ParseError("", "input file '" + config_.input.string() + "' not found");
      dataset_ = load_dataset(config_.input);
    });
  }
  return *dataset_;
}

const TrackSet& Pipeline::tracks() {
  if (!tracks_) {
    const Dataset& ds = dataset();
    if (!config_.tracks.empty()) {
      stage("load_tracks", [&] {
        std::ifstream in(config_.tracks, std::ios::binary);
        if (!in) throw ParseError("", "cannot open tracks file '" + config_.tracks.string() + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        tracks_ = tracks_from_json(ss.str(), ds);
      });
    } else {
      stage("tracking", [&] { tracks_ = run_tracker(ds, config_.tracker); });
    }
  }
  return *tracks_;
}

void Pipeline::track() {
  const TrackSet& ts = tracks();
  stage("write_tracks", [&] { write("tracks.json", tracks_to_json(ts, config_.tracker)); });
}

void Pipeline::features() {
  const Dataset& ds = dataset();
  const TrackSet& ts = tracks();
  stage("features", [&] {
    std::vector<FrameFeatures> per_frame(ds.frames.size());
    parallel_for(ds.frames.size(), config_.workers,
                 [&](std::size_t i) { per_frame[i] = frame_features(ds.frames[i], ds); });
    const auto departures = all_departures(ts, ds.scheme, config_.analytics.debounce);
    const DepartureRate rate = departure_rate(departures, ds.duration_s());
    const auto histogram = diameter_histogram(ds.frames, ds.calibration, config_.analytics.histogram_bin_mm);

    write("features.csv", features_csv(per_frame));
    write("tracks_features.csv", track_features_csv(ts, ds));
    write("departures.csv", departures_csv(departures, ds));
    write("histogram.csv", histogram_csv(histogram));

    ojson summary;
    summary["label_scheme"] = ds.scheme == LabelScheme::OneClass ? "one-class" : "two-class";
    summary["frames"] = ds.frames.size();
    summary["detections"] = ds.detection_count();
    summary["tracks"] = ts.tracks.size();
    summary["clip_duration_s"] = std::stod(format_fixed(rate.duration_s));
    summary["debounce"] = config_.analytics.debounce;
    if (ds.scheme == LabelScheme::OneClass) {
      summary["departure_events"] = nullptr;
      summary["departed_tracks"] = nullptr;
      summary["departure_rate_hz"] = nullptr;
      summary["departed_tracks_rate_hz"] = nullptr;
    } else {
      summary["departure_events"] = rate.events;
      summary["departed_tracks"] = rate.departed_tracks;
      summary["departure_rate_hz"] = std::stod(format_fixed(rate.events_per_s));
      summary["departed_tracks_rate_hz"] = std::stod(format_fixed(rate.tracks_per_s));
    }
    write("features_summary.json", summary.dump(2) + "\n");
  });
}

void Pipeline::velocity_into(const Track& track, const fs::path& dir) {
  const Dataset& ds = dataset();
  const KinematicsConfig& k = config_.kinematics;
  const VelocityMap raw = spectrogram(ds, track, k);
  const VelocityMap smoothed = smooth(raw, k.sigma_position, k.sigma_time);
  const auto series = max_velocity_series(ds, track, k);
  std::vector<std::pair<int, Contour>> contours;
  for (const auto& [frame, obs] : track.observations) {
    contours.emplace_back(frame, extract_contour(ds.find_frame(frame)->detections[obs.detection_index].decode()));
  }

  ojson sidecar;
  sidecar["track_id"] = track.id;
  sidecar["units"] = "cm/s";
  sidecar["delta_frames"] = k.delta_frames;
  sidecar["bins"] = k.bins;
  sidecar["stride"] = k.stride;
  sidecar["sigma_position_bins"] = k.sigma_position;
  sidecar["sigma_time_frames"] = k.sigma_time;
  sidecar["frame_rate_fps"] = ds.calibration.frame_rate;
  sidecar["pixels_per_cm"] = ds.calibration.pixels_per_cm;
  sidecar["evaluated_frames"] = raw.frames.size();
  sidecar["position_origin"] = "bottom middle, counter-clockwise";
  sidecar["sign"] = "positive outward";

  write(dir / "spectrogram.csv", velocity_map_csv(raw));
  write(dir / "spectrogram_smoothed.csv", velocity_map_csv(smoothed));
  write(dir / "spectrogram.json", sidecar.dump(2) + "\n");
  write(dir / "max_velocity.csv", max_velocity_csv(series, ds));
  write(dir / "contours.csv", contours_csv(track.id, contours));
}

void Pipeline::velocity(int track_id) {
  const TrackSet& ts = tracks();
  stage("velocity", [&] {
    const Track* track = ts.find(track_id);
    if (track == nullptr) {
      std::string ids;
      for (const int id : ts.ids()) ids += (ids.empty() ? "" : ", ") + std::to_string(id);
      throw UsageError("unknown track id " + std::to_string(track_id) + "; available ids: [" + ids + "]");
    }
    if (evaluated_frames(*track, config_.kinematics.delta_frames, 1).empty()) {
      throw UsageError("track " + std::to_string(track_id) + " (frames " + std::to_string(track->first_frame()) +
                       ".." + std::to_string(track->last_frame()) + ") has no pair of observations " +
                       std::to_string(config_.kinematics.delta_frames) + " frames apart");
    }
    velocity_into(*track, ".");
  });
}

void Pipeline::velocity_all() {
  const TrackSet& ts = tracks();
  stage("velocity", [&] {
    std::vector<const Track*> eligible;
    for (const Track& t : ts.tracks) {
      if (!evaluated_frames(t, config_.kinematics.delta_frames, 1).empty()) eligible.push_back(&t);
    }
    parallel_for(eligible.size(), config_.workers, [&](std::size_t i) {
      velocity_into(*eligible[i], fs::path("velocity") / ("track_" + std::to_string(eligible[i]->id)));
    });
  });
}

void Pipeline::evaluate() {
  const Dataset& ds = dataset();
  stage("evaluate", [&] {
    if (config_.ground_truth.empty()) throw UsageError("evaluation needs --ground-truth");
    if (!fs::exists(config_.ground_truth)) {
      throw ParseError("", "ground-truth file '" + config_.ground_truth.string() + "' not found");
    }
    const Dataset gt = load_dataset(config_.ground_truth);
    write("eval_report.json", eval_report_json(bubbletrack::evaluate(ds, gt, config_.iou_mode)));
  });
}

void Pipeline::all() {
  track();
  features();
  velocity_all();
  if (!config_.ground_truth.empty()) evaluate();
}

void Pipeline::fail(const std::exception& e) {
  error_ = e.what();
  exit_code_ = static_cast<int>(classify(e));
}

void Pipeline::write_manifest() const {
  ojson m;
  m["tool"] = "bubbletrack";
  m["version"] = kVersion;
  m["command"] = command_;
  m["status"] = error_ ? "failed" : "ok";
  m["exit_code"] = exit_code_;
  m["failed_stage"] = failed_stage_ ? ojson(*failed_stage_) : ojson(nullptr);
  m["error"] = error_ ? ojson(*error_) : ojson(nullptr);
  m["config"] = config_echo(config_);
  ojson stages = ojson::array();
  for (const StageRecord& s : stages_) {
    stages.push_back({{"name", s.name}, {"seconds", s.seconds}, {"ok", s.ok}});
  }
  m["stages"] = std::move(stages);
  m["libraries"] = {{"eigen", kEigenVersion}, {"nlohmann_json", kJsonVersion}};
  std::error_code ec;
  fs::create_directories(config_.out_dir, ec);
  std::ofstream out(config_.out_dir / "run_manifest.json", std::ios::binary);
  out << m.dump(2) << "\n";
}

}  // namespace bubbletrack
