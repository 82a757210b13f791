// COCO-style detection evaluation: score-ordered greedy matching, cumulative
// precision/recall, 101-point interpolated AP, and mAP over classes, IoU
// thresholds and object-size buckets.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tinydef/fws_loss.h"

namespace tinydef {

inline constexpr double kSmallAreaMax = 32.0 * 32.0;   // small: area < 32^2
inline constexpr double kMediumAreaMax = 96.0 * 96.0;  // medium: [32^2, 96^2)

enum class SizeBucket { kSmall, kMedium, kLarge };
SizeBucket size_bucket(double area);

enum class AreaRange { kAll, kSmall, kMedium, kLarge };
bool in_area_range(double area, AreaRange range);

struct Detection {
  std::int64_t image_id = 0;
  int class_id = 0;
  BoxCWH box;
  double score = 0.0;
};

struct GroundTruth {
  std::int64_t image_id = 0;
  int class_id = 0;
  BoxCWH box;
  double area = 0.0;  // pixel area; box.w * box.h when not annotated
};

// 0.50, 0.55, ..., 0.95
std::vector<double> coco_iou_thresholds();

struct EvalConfig {
  std::vector<double> iou_thresholds = coco_iou_thresholds();
  int max_detections = 300;
  double score_cut = 0.5;       // for the headline precision / recall
  double pr_iou_threshold = 0.5;

  void validate() const;
};

enum class MatchOutcome { kTruePositive, kFalsePositive, kIgnored };

struct MatchResult {
  std::vector<std::size_t> order;     // detection indices, score-descending
  std::vector<MatchOutcome> outcome;  // parallel to `order`
  std::vector<int> matched_gt;        // gt index or -1, parallel to `order`
  int num_gt = 0;                     // ground truths inside the area range
  int unmatched_gt = 0;               // false negatives
};

// Matches one (image, class) group. Detections are ranked by descending score
// (stable) and cut to max_det; each claims the best-IoU unmatched ground truth
// with IoU >= iou_thr. Ground truths outside `range` may still absorb a
// detection, which is then ignored rather than counted.
MatchResult match_detections(std::span<const Detection> dets,
                             std::span<const GroundTruth> gts, double iou_thr,
                             int max_det, AreaRange range = AreaRange::kAll);

struct PRCurve {
  std::vector<double> recall;
  std::vector<double> precision;
};

// `flags` are true for TP, false for FP, already in descending-score order.
// With total_gt == 0 the curve is empty.
PRCurve pr_curve(const std::vector<bool>& flags, int total_gt);

// 101-point interpolation over recall 0.00, 0.01, ..., 1.00.
double average_precision(const PRCurve& curve);

struct ClassReport {
  int class_id = 0;
  int num_gt = 0;
  int num_det = 0;
  std::vector<double> ap;  // one entry per IoU threshold, area range "all"
};

struct EvalReport {
  std::vector<double> iou_thresholds;
  std::vector<ClassReport> classes;      // classes with >= 1 ground truth
  std::vector<int> excluded_classes;     // detections but no ground truth
  std::vector<double> map_per_threshold;
  std::optional<double> map50;           // present iff 0.5 is a threshold
  double map50_95 = 0.0;                 // mean over all configured thresholds
  std::optional<double> ap_small;        // absent when the bucket has no GT
  std::optional<double> ap_medium;
  std::optional<double> ap_large;
  double precision = 0.0;
  double recall = 0.0;
  int true_positives = 0;
  int false_positives = 0;
  int total_gt = 0;
};

EvalReport evaluate(std::span<const Detection> dets,
                    std::span<const GroundTruth> gts, const EvalConfig& cfg);

}  // namespace tinydef
