#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "bubbletrack/error.hpp"
#include "bubbletrack/evaluation.hpp"

namespace bubbletrack {

namespace {

std::size_t rle_intersection(const Rle& a, const Rle& b) {
  std::size_t ia = 0, ib = 0;
  std::uint64_t left_a = a.counts.empty() ? 0 : a.counts[0];
  std::uint64_t left_b = b.counts.empty() ? 0 : b.counts[0];
  std::size_t inter = 0;
  while (ia < a.counts.size() && ib < b.counts.size()) {
    if (left_a == 0) {
      if (++ia < a.counts.size()) left_a = a.counts[ia];
      continue;
    }
    if (left_b == 0) {
      if (++ib < b.counts.size()) left_b = b.counts[ib];
      continue;
    }
    const std::uint64_t step = std::min(left_a, left_b);
    if (ia % 2 == 1 && ib % 2 == 1) inter += step;
    left_a -= step;
    left_b -= step;
  }
  return inter;
}

}  // namespace

double mask_iou(const Rle& a, const Rle& b) {
  if (a.width != b.width || a.height != b.height) throw UsageError("IoU of masks with different dimensions");
  const std::size_t inter = rle_intersection(a, b);
  const std::size_t uni = a.area() + b.area() - inter;
  if (uni == 0) throw DomainError("IoU of two empty masks is undefined");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double mask_iou(const BitMask& a, const BitMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw UsageError("IoU of masks with different dimensions");
  }
  std::size_t inter = 0, uni = 0;
  const auto ab = a.bits(), bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    inter += (ab[i] & bb[i]) != 0 ? 1 : 0;
    uni += (ab[i] | bb[i]) != 0 ? 1 : 0;
  }
  if (uni == 0) throw DomainError("IoU of two empty masks is undefined");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double detection_iou(const Detection& a, const Detection& b, IouMode mode) {
  return mode == IouMode::Mask ? mask_iou(a.mask, b.mask) : box_iou(a.bbox, b.bbox);
}

std::vector<MatchRecord> match_by_iou(std::span<const double> scores, const Eigen::MatrixXd& iou,
                                      double iou_threshold, std::vector<std::size_t>* unmatched_gt) {
  const std::size_t nd = scores.size();
  const auto ng = static_cast<std::size_t>(iou.cols());
  std::vector<std::size_t> order(nd);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<MatchRecord> records(nd);
  std::vector<bool> claimed(ng, false);
  for (const std::size_t d : order) {
    MatchRecord& r = records[d];
    r.detection = d;
    r.score = scores[d];
    std::optional<std::size_t> best;
    double best_iou = iou_threshold;
    for (std::size_t g = 0; g < ng; ++g) {
      if (claimed[g]) continue;
      const double v = iou(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(g));
      if (v >= best_iou && (!best || v > best_iou)) {
        best = g;
        best_iou = v;
      }
    }
    if (best) {
      claimed[*best] = true;
      r.ground_truth = best;
      r.iou = best_iou;
      r.is_tp = true;
    }
  }
  if (unmatched_gt != nullptr) {
    unmatched_gt->clear();
    for (std::size_t g = 0; g < ng; ++g) {
      if (!claimed[g]) unmatched_gt->push_back(g);
    }
  }
  return records;
}

std::vector<MatchRecord> match_detections(std::span<const Detection> detections,
                                          std::span<const Detection> ground_truths, double iou_threshold,
                                          IouMode mode) {
  Eigen::MatrixXd iou(static_cast<Eigen::Index>(detections.size()), static_cast<Eigen::Index>(ground_truths.size()));
  std::vector<double> scores;
  scores.reserve(detections.size());
  for (std::size_t d = 0; d < detections.size(); ++d) {
    scores.push_back(detections[d].score);
    for (std::size_t g = 0; g < ground_truths.size(); ++g) {
      // Cross-class pairs can never clear a threshold.
      iou(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(g)) =
          detections[d].category == ground_truths[g].category ? detection_iou(detections[d], ground_truths[g], mode)
                                                              : -1.0;
    }
  }
  return match_by_iou(scores, iou, iou_threshold);
}

namespace {

std::vector<std::size_t> ranked(std::span<const MatchRecord> records) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return records[a].score > records[b].score; });
  return order;
}

}  // namespace

std::optional<double> average_precision(std::span<const MatchRecord> records, std::size_t n_ground_truth) {
  if (n_ground_truth == 0) return std::nullopt;
  const double n_gt = static_cast<double>(n_ground_truth);
  double ap = 0.0, previous_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (const std::size_t i : ranked(records)) {
    ++seen;
    tp += records[i].is_tp ? 1 : 0;
    const double recall = static_cast<double>(tp) / n_gt;
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - previous_recall) * precision;
    previous_recall = recall;
  }
  return ap;
}

std::optional<double> interpolated_ap101(std::span<const MatchRecord> records, std::size_t n_ground_truth) {
  if (n_ground_truth == 0) return std::nullopt;
  std::vector<double> recall, precision;
  std::size_t tp = 0, seen = 0;
  for (const std::size_t i : ranked(records)) {
    ++seen;
    tp += records[i].is_tp ? 1 : 0;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_ground_truth));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(seen));
  }
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

std::vector<double> iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

namespace {

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::string list_indices(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  return os.str();
}

bool has_category(const Dataset& ds, bool bubble) {
  for (const Frame& f : ds.frames) {
    for (const Detection& d : f.detections) {
      if ((d.category == Category::Bubble) == bubble) return true;
    }
  }
  return false;
}

}  // namespace

EvalReport evaluate(const Dataset& predictions, const Dataset& ground_truth, IouMode mode) {
  std::vector<int> missing_in_pred, missing_in_gt;
  {
    std::set<int> p, g;
    for (const Frame& f : predictions.frames) p.insert(f.index);
    for (const Frame& f : ground_truth.frames) g.insert(f.index);
    std::set_difference(g.begin(), g.end(), p.begin(), p.end(), std::back_inserter(missing_in_pred));
    std::set_difference(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(missing_in_gt));
  }
  if (!missing_in_pred.empty() || !missing_in_gt.empty()) {
    std::string msg = "prediction and ground-truth frame sets differ;";
    if (!missing_in_pred.empty()) msg += " missing from predictions: [" + list_indices(missing_in_pred) + "];";
    if (!missing_in_gt.empty()) msg += " missing from ground truth: [" + list_indices(missing_in_gt) + "];";
    msg.pop_back();
    throw UsageError(msg);
  }
  if (predictions.frame_width != ground_truth.frame_width || predictions.frame_height != ground_truth.frame_height) {
    throw UsageError("prediction and ground-truth frame dimensions differ");
  }

  const bool one_class = has_category(ground_truth, true) || has_category(predictions, true);
  if (one_class && (has_category(ground_truth, false) || has_category(predictions, false))) {
    throw UsageError("one-class and two-class label sets cannot be compared");
  }
  const std::vector<Category> classes =
      one_class ? std::vector<Category>{Category::Bubble} : std::vector<Category>{Category::Attached, Category::Detached};
  const auto thresholds = iou_thresholds();

  EvalReport report;
  report.mode = mode;
  for (const double t : thresholds) report.counts.push_back({t, 0, 0, 0});

  std::vector<std::optional<double>> class_ap, class_ap50, class_ap75, class_interp;
  for (const Category c : classes) {
    ClassReport cr;
    // Per-frame detections and ground truths of this class, with their IoU.
    struct FrameData {
      std::vector<double> scores;
      Eigen::MatrixXd iou;
    };
    std::vector<FrameData> frames;
    for (std::size_t fi = 0; fi < predictions.frames.size(); ++fi) {
      const Frame& pf = predictions.frames[fi];
      const Frame& gf = ground_truth.frames[fi];
      std::vector<const Detection*> dets, gts;
      for (const Detection& d : pf.detections) {
        if (d.category == c) dets.push_back(&d);
      }
      for (const Detection& g : gf.detections) {
        if (g.category == c) gts.push_back(&g);
      }
      cr.detections += dets.size();
      cr.ground_truths += gts.size();
      FrameData fd;
      fd.iou.resize(static_cast<Eigen::Index>(dets.size()), static_cast<Eigen::Index>(gts.size()));
      for (std::size_t d = 0; d < dets.size(); ++d) {
        fd.scores.push_back(dets[d]->score);
        for (std::size_t g = 0; g < gts.size(); ++g) {
          fd.iou(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(g)) = detection_iou(*dets[d], *gts[g], mode);
        }
      }
      frames.push_back(std::move(fd));
    }

    std::vector<std::optional<double>> per_threshold;
    for (std::size_t ti = 0; ti < thresholds.size(); ++ti) {
      std::vector<MatchRecord> records;
      ThresholdCounts counts{thresholds[ti], 0, 0, 0};
      std::vector<std::size_t> unmatched;
      for (const FrameData& fd : frames) {
        const auto recs = match_by_iou(fd.scores, fd.iou, thresholds[ti], &unmatched);
        for (const MatchRecord& r : recs) (r.is_tp ? counts.tp : counts.fp) += 1;
        counts.fn += unmatched.size();
        records.insert(records.end(), recs.begin(), recs.end());
      }
      cr.counts.push_back(counts);
      report.counts[ti].tp += counts.tp;
      report.counts[ti].fp += counts.fp;
      report.counts[ti].fn += counts.fn;
      const auto ap = average_precision(records, cr.ground_truths);
      per_threshold.push_back(ap);
      if (ti == 0) {
        cr.ap50 = ap;
        cr.ap_interp101 = interpolated_ap101(records, cr.ground_truths);
      }
      if (ti == 5) cr.ap75 = ap;
    }
    if (cr.ground_truths > 0) cr.ap = mean_of(per_threshold);
    class_ap.push_back(cr.ap);
    class_ap50.push_back(cr.ap50);
    class_ap75.push_back(cr.ap75);
    class_interp.push_back(cr.ap_interp101);
    report.per_class.emplace(c, std::move(cr));
  }
  report.ap = mean_of(class_ap);
  report.ap50 = mean_of(class_ap50);
  report.ap75 = mean_of(class_ap75);
  report.ap_interp101 = mean_of(class_interp);
  return report;
}

}  // namespace bubbletrack
