#pragma once

// Detection and segmentation quality against ground truth: IoU, greedy
// score-ordered matching, non-interpolated average precision.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bubbletrack/corpus.hpp"

namespace bubbletrack {

enum class IouMode { Mask, Box };

/// |a & b| / |a | b| computed on the runs. Throws DomainError when both
/// masks are empty and UsageError on differing dimensions.
double mask_iou(const Rle& a, const Rle& b);
double mask_iou(const BitMask& a, const BitMask& b);
double detection_iou(const Detection& a, const Detection& b, IouMode mode);

struct MatchRecord {
  std::size_t detection = 0;                // index into the detection list
  std::optional<std::size_t> ground_truth;  // matched ground truth, if any
  double iou = 0.0;                         // IoU with the matched ground truth (0 if none)
  double score = 0.0;
  bool is_tp = false;
};

/// Greedy matching on a precomputed IoU matrix (rows = detections, cols =
/// ground truths). Detections go in descending score order, ties in input
/// order; each claims the unclaimed ground truth of highest IoU >=
/// `iou_threshold` (ties: lowest index). Records are returned in
/// detection-index order. `unmatched_gt` receives ground truths left over.
std::vector<MatchRecord> match_by_iou(std::span<const double> scores, const Eigen::MatrixXd& iou,
                                      double iou_threshold, std::vector<std::size_t>* unmatched_gt = nullptr);

/// Same-frame, same-class matching of detections against ground truths.
std::vector<MatchRecord> match_detections(std::span<const Detection> detections,
                                          std::span<const Detection> ground_truths, double iou_threshold,
                                          IouMode mode = IouMode::Mask);

/// Sum over ranks of (recall_n - recall_{n-1}) * precision_n with records
/// ranked by descending score (stable). nullopt when n_ground_truth == 0.
std::optional<double> average_precision(std::span<const MatchRecord> records, std::size_t n_ground_truth);

/// 101-point interpolated AP (precision envelope sampled at recall 0, 0.01,
/// ..., 1), for comparison with common toolkits.
std::optional<double> interpolated_ap101(std::span<const MatchRecord> records, std::size_t n_ground_truth);

/// 0.50, 0.55, ..., 0.95
std::vector<double> iou_thresholds();

struct ThresholdCounts {
  double threshold = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct ClassReport {
  std::optional<double> ap;    // mean over iou_thresholds()
  std::optional<double> ap50;
  std::optional<double> ap75;
  std::optional<double> ap_interp101;
  std::size_t ground_truths = 0;
  std::size_t detections = 0;
  std::vector<ThresholdCounts> counts;
};

struct EvalReport {
  IouMode mode = IouMode::Mask;
  std::optional<double> ap;  // mean over classes of the per-class AP
  std::optional<double> ap50;
  std::optional<double> ap75;
  std::optional<double> ap_interp101;
  std::map<Category, ClassReport> per_class;
  std::vector<ThresholdCounts> counts;  // summed over classes
};

/// Throws UsageError when the frame sets differ (message lists the missing
/// indices on each side) or the label schemes are incompatible.
EvalReport evaluate(const Dataset& predictions, const Dataset& ground_truth, IouMode mode = IouMode::Mask);

}  // namespace bubbletrack
