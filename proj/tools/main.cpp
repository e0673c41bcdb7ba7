// bubbletrack command-line front end.
//
//   bubbletrack track    --input det.json --out-dir out
//   bubbletrack features --input det.json [--tracks out/tracks.json]
//   bubbletrack velocity --input det.json --track-id 3
//   bubbletrack evaluate --input det.json --ground-truth gt.json
//   bubbletrack all      --input det.json [--ground-truth gt.json]
//   bubbletrack convert-coco --input coco.json --fps 3000 --px-per-cm 100 --output det.json

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bubbletrack/corpus.hpp"
#include "bubbletrack/error.hpp"
#include "bubbletrack/pipeline.hpp"

namespace {

using namespace bubbletrack;

// Flag values; unset optionals leave the config file (or default) in place.
struct Overrides {
  std::string input, ground_truth, config, tracks, out_dir;
  std::optional<int> workers, delta_frames, bins, stride, debounce, track_id;
  std::optional<double> sigma_pos, sigma_time, iou_threshold, histogram_bin_mm;
  std::optional<std::string> iou_mode;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--input", o.input, "Ingestion JSON with per-frame detections")->required();
  cmd->add_option("--ground-truth", o.ground_truth, "Ground-truth ingestion JSON");
  cmd->add_option("--config", o.config, "JSON config file");
  cmd->add_option("--tracks", o.tracks, "Reuse an existing tracks.json instead of tracking");
  cmd->add_option("--out-dir", o.out_dir, "Output directory (default .)");
  cmd->add_option("--workers", o.workers, "Worker threads for per-frame and per-track work");
  cmd->add_option("--delta-frames", o.delta_frames, "Frame gap for interface velocity");
  cmd->add_option("--bins", o.bins, "Relative-perimeter bins");
  cmd->add_option("--stride", o.stride, "Evaluate every n-th eligible frame");
  cmd->add_option("--sigma-pos", o.sigma_pos, "Gaussian sigma along the perimeter, in bins");
  cmd->add_option("--sigma-time", o.sigma_time, "Gaussian sigma along time, in evaluated frames");
  cmd->add_option("--debounce", o.debounce, "Consecutive observations to confirm a class change");
  cmd->add_option("--histogram-bin-mm", o.histogram_bin_mm, "Diameter histogram bin width");
  cmd->add_option("--iou-threshold", o.iou_threshold, "Minimum IoU for a track-detection match");
  cmd->add_option("--iou-mode", o.iou_mode, "Evaluation IoU: mask or box");
}

RunConfig build_config(const Overrides& o) {
  RunConfig c;
  if (!o.config.empty()) apply_config_file(c, o.config);
  c.input = o.input;
  c.ground_truth = o.ground_truth;
  c.tracks = o.tracks;
  if (!o.out_dir.empty()) c.out_dir = o.out_dir;
  if (o.workers) c.workers = *o.workers;
  if (o.delta_frames) c.kinematics.delta_frames = *o.delta_frames;
  if (o.bins) c.kinematics.bins = *o.bins;
  if (o.stride) c.kinematics.stride = *o.stride;
  if (o.sigma_pos) c.kinematics.sigma_position = *o.sigma_pos;
  if (o.sigma_time) c.kinematics.sigma_time = *o.sigma_time;
  if (o.debounce) c.analytics.debounce = *o.debounce;
  if (o.histogram_bin_mm) c.analytics.histogram_bin_mm = *o.histogram_bin_mm;
  if (o.iou_threshold) c.tracker.iou_threshold = *o.iou_threshold;
  if (o.iou_mode) {
    if (*o.iou_mode != "mask" && *o.iou_mode != "box") throw UsageError("--iou-mode must be mask or box");
    c.iou_mode = *o.iou_mode == "mask" ? IouMode::Mask : IouMode::Box;
  }
  c.track_id = o.track_id;
  return c;
}

int run_pipeline(const std::string& command, const Overrides& o) {
  RunConfig config;
  config.out_dir = o.out_dir.empty() ? "." : o.out_dir;
  std::optional<Pipeline> pipeline;
  try {
    config = build_config(o);
    pipeline.emplace(config, command);
    if (command == "track") {
      pipeline->track();
    } else if (command == "features") {
      pipeline->features();
    } else if (command == "velocity") {
      if (!config.track_id) throw UsageError("velocity needs --track-id");
      pipeline->velocity(*config.track_id);
    } else if (command == "evaluate") {
      pipeline->evaluate();
    } else {
      pipeline->all();
    }
  } catch (const std::exception& e) {
    if (!pipeline) pipeline.emplace(config, command);
    pipeline->fail(e);
    pipeline->write_manifest();
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(classify(e));
  }
  pipeline->write_manifest();
  return 0;
}

int convert_coco(const std::string& input, double fps, double px_per_cm, const std::string& output) {
  try {
    const Dataset ds = load_coco(input, calibrate(px_per_cm, 1.0, fps));
    std::ofstream out(output, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + output + "'");
    out << dataset_to_json(ds);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(classify(e));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bubble tracking and boiling-feature extraction from segmentation output"};
  app.require_subcommand(1);

  Overrides o;
  const char* pipeline_commands[][2] = {
      {"track", "Link detections into tracks (tracks.json)"},
      {"features", "Counts, vapor fractions, diameters, departures"},
      {"velocity", "Interface-velocity spectrogram of one track"},
      {"evaluate", "Average precision against ground truth (eval_report.json)"},
      {"all", "track, features, velocity for every track, evaluate when ground truth is given"},
  };
  for (const auto& [name, help] : pipeline_commands) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, o);
    if (std::string(name) == "velocity") cmd->add_option("--track-id", o.track_id, "Track to analyse")->required();
  }

  std::string coco_in, coco_out;
  double fps = 0.0, px_per_cm = 0.0;
  CLI::App* coco = app.add_subcommand("convert-coco", "Convert COCO instance annotations to the ingestion format");
  coco->add_option("--input", coco_in, "COCO JSON")->required();
  coco->add_option("--output", coco_out, "Ingestion JSON to write")->required();
  coco->add_option("--fps", fps, "Frame rate")->required();
  coco->add_option("--px-per-cm", px_per_cm, "Pixels per centimetre")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::UsageError);
  }

  try {
    if (coco->parsed()) return convert_coco(coco_in, fps, px_per_cm, coco_out);
    for (const auto& [name, help] : pipeline_commands) {
      if (app.got_subcommand(name)) return run_pipeline(name, o);
    }
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
  }
  return static_cast<int>(ExitCode::InternalError);
}
