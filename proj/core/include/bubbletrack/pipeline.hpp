#pragma once

// End-to-end runs: load, track, features, velocity, evaluate. Every stage is
// timed and recorded in a run manifest that is written even when a stage
// fails.

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bubbletrack/corpus.hpp"
#include "bubbletrack/evaluation.hpp"
#include "bubbletrack/kinematics.hpp"
#include "bubbletrack/tracker.hpp"

namespace bubbletrack {

struct AnalyticsConfig {
  int debounce = 3;
  double histogram_bin_mm = 0.5;

  void validate() const;
};

struct RunConfig {
  std::filesystem::path input;
  std::filesystem::path ground_truth;  // empty when absent
  std::filesystem::path tracks;        // existing tracks.json; empty = track in-run
  std::filesystem::path out_dir = ".";
  TrackerConfig tracker;
  KinematicsConfig kinematics;
  AnalyticsConfig analytics;
  IouMode iou_mode = IouMode::Mask;
  int workers = 1;
  std::optional<int> track_id;

  void validate() const;
};

/// Applies a JSON config document ({"tracker": {...}, "kinematics": {...},
/// "analytics": {...}, "evaluation": {"iou_mode": ...}, "workers": n}) on top
/// of `config`. Unknown keys are rejected with UsageError.
void apply_config_json(RunConfig& config, const std::string& json_text);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Every effective setting, including defaults.
std::string config_echo_json(const RunConfig& config);

struct StageRecord {
  std::string name;
  double seconds = 0.0;
  bool ok = true;
};

enum class ExitCode : int { Ok = 0, InputError = 2, UsageError = 3, InternalError = 4 };

/// Exit code for an exception escaping a run.
ExitCode classify(const std::exception& e);

class Pipeline {
public:
  explicit Pipeline(RunConfig config, std::string command = "all");

  void track();
  void features();
  /// One track: files go straight into out_dir. Throws UsageError for an
  /// unknown id or a track without a delta-frame pair.
  void velocity(int track_id);
  /// Every track with at least one delta-frame pair, into
  /// out_dir/velocity/track_<id>/.
  void velocity_all();
  void evaluate();
  /// track + features + velocity_all, then evaluate when ground truth is set.
  void all();

  /// Records a failure for the manifest.
  void fail(const std::exception& e);
  /// run_manifest.json in out_dir.
  void write_manifest() const;

  const std::vector<StageRecord>& stages() const { return stages_; }
  const Dataset& dataset();
  const TrackSet& tracks();

private:
  template <class F>
  void stage(const std::string& name, F&& body);
  void velocity_into(const Track& track, const std::filesystem::path& dir);
  void write(const std::filesystem::path& name, const std::string& content) const;

  RunConfig config_;
  std::string command_;
  std::optional<Dataset> dataset_;
  std::optional<TrackSet> tracks_;
  std::vector<StageRecord> stages_;
  std::string current_stage_;
  std::optional<std::string> error_;
  std::optional<std::string> failed_stage_;
  int exit_code_ = 0;
};

/// Runs `body` over [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

}  // namespace bubbletrack
