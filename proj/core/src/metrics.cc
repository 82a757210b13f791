#include "tinydef/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <utility>

#include "tinydef/tensor.h"

namespace tinydef {

SizeBucket size_bucket(double area) {
  if (area < kSmallAreaMax) return SizeBucket::kSmall;
  if (area < kMediumAreaMax) return SizeBucket::kMedium;
  return SizeBucket::kLarge;
}

bool in_area_range(double area, AreaRange range) {
  switch (range) {
    case AreaRange::kAll:
      return true;
    case AreaRange::kSmall:
      return size_bucket(area) == SizeBucket::kSmall;
    case AreaRange::kMedium:
      return size_bucket(area) == SizeBucket::kMedium;
    case AreaRange::kLarge:
      return size_bucket(area) == SizeBucket::kLarge;
  }
  return false;
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t(10);
  for (int i = 0; i < 10; ++i) t[i] = 0.5 + 0.05 * i;
  return t;
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) {
    throw ContractViolation("eval: at least one IoU threshold is required");
  }
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    const double t = iou_thresholds[i];
    if (!(t > 0.0 && t <= 1.0)) {
      throw ContractViolation("eval: IoU thresholds must lie in (0, 1]");
    }
    if (i > 0 && !(t > iou_thresholds[i - 1])) {
      throw ContractViolation("eval: IoU thresholds must be strictly increasing");
    }
  }
  if (max_detections < 1) {
    throw ContractViolation("eval: max_detections must be >= 1");
  }
  if (!(pr_iou_threshold > 0.0 && pr_iou_threshold <= 1.0)) {
    throw ContractViolation("eval: pr_iou_threshold must lie in (0, 1]");
  }
}

MatchResult match_detections(std::span<const Detection> dets,
                             std::span<const GroundTruth> gts, double iou_thr,
                             int max_det, AreaRange range) {
  MatchResult r;
  r.order.resize(dets.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return dets[a].score > dets[b].score;
                   });
  if (static_cast<int>(r.order.size()) > max_det) r.order.resize(max_det);

  // Ground truths inside the range come first; the matcher never trades a
  // real match for an ignored one.
  std::vector<std::size_t> gt_order(gts.size());
  std::iota(gt_order.begin(), gt_order.end(), std::size_t{0});
  std::vector<char> ignore(gts.size());
  for (std::size_t g = 0; g < gts.size(); ++g) {
    ignore[g] = !in_area_range(gts[g].area, range);
  }
  std::stable_sort(gt_order.begin(), gt_order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return ignore[a] < ignore[b];
                   });
  r.num_gt = static_cast<int>(std::count(ignore.begin(), ignore.end(), 0));

  std::vector<char> taken(gts.size(), 0);
  for (std::size_t di : r.order) {
    const Detection& d = dets[di];
    double best_iou = std::min(iou_thr, 1.0 - 1e-10);
    int best = -1;
    for (std::size_t g : gt_order) {
      if (taken[g]) continue;
      if (best >= 0 && !ignore[best] && ignore[g]) break;
      const double v = iou(d.box, gts[g].box);
      if (v < best_iou) continue;
      best_iou = v;
      best = static_cast<int>(g);
    }
    r.matched_gt.push_back(best);
    if (best < 0) {
      const bool out_of_range = !in_area_range(d.box.w * d.box.h, range);
      r.outcome.push_back(out_of_range ? MatchOutcome::kIgnored
                                       : MatchOutcome::kFalsePositive);
    } else {
      taken[best] = 1;
      r.outcome.push_back(ignore[best] ? MatchOutcome::kIgnored
                                       : MatchOutcome::kTruePositive);
    }
  }
  int matched = 0;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (taken[g] && !ignore[g]) ++matched;
  }
  r.unmatched_gt = r.num_gt - matched;
  return r;
}

PRCurve pr_curve(const std::vector<bool>& flags, int total_gt) {
  PRCurve c;
  if (total_gt <= 0) return c;
  int tp = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) ++tp;
    c.recall.push_back(static_cast<double>(tp) / total_gt);
    c.precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  return c;
}

double average_precision(const PRCurve& curve) {
  const std::size_t n = curve.recall.size();
  if (n == 0) return 0.0;
  if (curve.precision.size() != n) {
    throw ContractViolation("average_precision: recall/precision length mismatch");
  }
  std::vector<double> envelope = curve.precision;
  for (std::size_t i = n - 1; i > 0; --i) {
    envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
  }
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    const auto it = std::lower_bound(curve.recall.begin(), curve.recall.end(), r);
    if (it == curve.recall.end()) break;
    sum += envelope[static_cast<std::size_t>(it - curve.recall.begin())];
  }
  return sum / 101.0;
}

namespace {

struct Group {
  std::vector<Detection> dets;
  std::vector<GroundTruth> gts;
};

// Keyed by (class, image) so a class's images are visited in id order.
using GroupMap = std::map<std::pair<int, std::int64_t>, Group>;

struct ScoredOutcome {
  double score;
  MatchOutcome outcome;
};

struct ClassCurve {
  std::vector<ScoredOutcome> ranked;
  int num_gt = 0;
};

ClassCurve class_curve(const GroupMap& groups, int class_id, double thr,
                       int max_det, AreaRange range) {
  ClassCurve cc;
  auto it = groups.lower_bound({class_id, std::numeric_limits<std::int64_t>::min()});
  for (; it != groups.end() && it->first.first == class_id; ++it) {
    const Group& g = it->second;
    const MatchResult m = match_detections(g.dets, g.gts, thr, max_det, range);
    cc.num_gt += m.num_gt;
    for (std::size_t k = 0; k < m.order.size(); ++k) {
      cc.ranked.push_back({g.dets[m.order[k]].score, m.outcome[k]});
    }
  }
  std::stable_sort(cc.ranked.begin(), cc.ranked.end(),
                   [](const ScoredOutcome& a, const ScoredOutcome& b) {
                     return a.score > b.score;
                   });
  return cc;
}

std::optional<double> class_ap(const GroupMap& groups, int class_id, double thr,
                               int max_det, AreaRange range) {
  const ClassCurve cc = class_curve(groups, class_id, thr, max_det, range);
  if (cc.num_gt == 0) return std::nullopt;
  std::vector<bool> flags;
  for (const auto& so : cc.ranked) {
    if (so.outcome == MatchOutcome::kIgnored) continue;
    flags.push_back(so.outcome == MatchOutcome::kTruePositive);
  }
  return average_precision(pr_curve(flags, cc.num_gt));
}

// Mean AP over classes with ground truth in `range`; nullopt if none.
std::optional<double> mean_ap(const GroupMap& groups, const std::set<int>& classes,
                              double thr, int max_det, AreaRange range) {
  double sum = 0.0;
  int n = 0;
  for (int c : classes) {
    if (auto ap = class_ap(groups, c, thr, max_det, range)) {
      sum += *ap;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

}  // namespace

EvalReport evaluate(std::span<const Detection> dets,
                    std::span<const GroundTruth> gts, const EvalConfig& cfg) {
  cfg.validate();
  for (const auto& d : dets) {
    d.box.validate();
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      throw ContractViolation("eval: detection score must lie in [0, 1]");
    }
  }
  for (const auto& g : gts) {
    g.box.validate();
    if (!(g.area > 0.0)) throw ContractViolation("eval: GT area must be > 0");
  }

  // Per-image cap on detections across all classes.
  std::map<std::int64_t, std::vector<std::size_t>> by_image;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    by_image[dets[i].image_id].push_back(i);
  }
  GroupMap groups;
  for (auto& [image, idx] : by_image) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return dets[a].score > dets[b].score;
    });
    if (static_cast<int>(idx.size()) > cfg.max_detections) {
      idx.resize(cfg.max_detections);
    }
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) {
      groups[{dets[i].class_id, image}].dets.push_back(dets[i]);
    }
  }
  for (const auto& g : gts) groups[{g.class_id, g.image_id}].gts.push_back(g);

  std::set<int> gt_classes, det_classes;
  std::map<int, int> gt_count, det_count;
  for (const auto& [key, group] : groups) {
    gt_count[key.first] += static_cast<int>(group.gts.size());
    det_count[key.first] += static_cast<int>(group.dets.size());
    if (!group.gts.empty()) gt_classes.insert(key.first);
    if (!group.dets.empty()) det_classes.insert(key.first);
  }

  EvalReport rep;
  rep.iou_thresholds = cfg.iou_thresholds;
  for (int c : det_classes) {
    if (!gt_classes.count(c)) rep.excluded_classes.push_back(c);
  }
  for (int c : gt_classes) {
    ClassReport cr{c, gt_count[c], det_count[c], {}};
    for (double thr : cfg.iou_thresholds) {
      cr.ap.push_back(
          class_ap(groups, c, thr, cfg.max_detections, AreaRange::kAll).value());
    }
    rep.classes.push_back(std::move(cr));
    rep.total_gt += gt_count[c];
  }

  for (std::size_t t = 0; t < cfg.iou_thresholds.size(); ++t) {
    double sum = 0.0;
    for (const auto& cr : rep.classes) sum += cr.ap[t];
    rep.map_per_threshold.push_back(
        rep.classes.empty() ? 0.0 : sum / static_cast<double>(rep.classes.size()));
    if (std::abs(cfg.iou_thresholds[t] - 0.5) < 1e-12) {
      rep.map50 = rep.map_per_threshold.back();
    }
  }
  rep.map50_95 = std::accumulate(rep.map_per_threshold.begin(),
                                 rep.map_per_threshold.end(), 0.0) /
                 static_cast<double>(rep.map_per_threshold.size());

  auto bucket_ap = [&](AreaRange range) -> std::optional<double> {
    double sum = 0.0;
    for (double thr : cfg.iou_thresholds) {
      auto m = mean_ap(groups, gt_classes, thr, cfg.max_detections, range);
      if (!m) return std::nullopt;
      sum += *m;
    }
    return sum / static_cast<double>(cfg.iou_thresholds.size());
  };
  rep.ap_small = bucket_ap(AreaRange::kSmall);
  rep.ap_medium = bucket_ap(AreaRange::kMedium);
  rep.ap_large = bucket_ap(AreaRange::kLarge);

  for (int c : det_classes) {
    const ClassCurve cc = class_curve(groups, c, cfg.pr_iou_threshold,
                                      cfg.max_detections, AreaRange::kAll);
    for (const auto& so : cc.ranked) {
      if (so.score < cfg.score_cut) continue;
      if (so.outcome == MatchOutcome::kTruePositive) ++rep.true_positives;
      if (so.outcome == MatchOutcome::kFalsePositive) ++rep.false_positives;
    }
  }
  const int predicted = rep.true_positives + rep.false_positives;
  rep.precision = predicted > 0 ? static_cast<double>(rep.true_positives) / predicted : 0.0;
  rep.recall = rep.total_gt > 0
                   ? static_cast<double>(rep.true_positives) / rep.total_gt
                   : 0.0;
  return rep;
}

}  // namespace tinydef
