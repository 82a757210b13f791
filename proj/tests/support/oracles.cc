#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

namespace oracle {

using tinydef::AreaRange;
using tinydef::BoxCWH;
using tinydef::Detection;
using tinydef::GroundTruth;
using tinydef::MatchOutcome;
using tinydef::Shape4;
using tinydef::Tensor4;

tinydef::Tensor4 conv2d(const Tensor4& x, const Tensor4& w,
                        const std::vector<double>& bias, int stride, int pad_h,
                        int pad_w, int groups) {
  const int oc = w.batch(), icg = w.channels(), kh = w.height(), kw = w.width();
  const int oh = (x.height() + 2 * pad_h - kh) / stride + 1;
  const int ow = (x.width() + 2 * pad_w - kw) / stride + 1;
  const int ocg = oc / groups;
  Tensor4 y(Shape4{x.batch(), oc, oh, ow});
  for (int b = 0; b < x.batch(); ++b)
    for (int o = 0; o < oc; ++o)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double acc = bias.empty() ? 0.0 : bias[o];
          const int g = o / ocg;
          for (int c = 0; c < icg; ++c)
            for (int u = 0; u < kh; ++u)
              for (int v = 0; v < kw; ++v) {
                const int yy = i * stride + u - pad_h;
                const int xx = j * stride + v - pad_w;
                if (yy < 0 || yy >= x.height() || xx < 0 || xx >= x.width()) continue;
                acc += w(o, c, u, v) * x(b, g * icg + c, yy, xx);
              }
          y(b, o, i, j) = acc;
        }
  return y;
}

std::vector<std::complex<double>> dft2_plane(
    const std::vector<std::complex<double>>& plane, int h, int w, bool inverse) {
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<std::complex<double>> out(plane.size());
  for (int u = 0; u < h; ++u)
    for (int v = 0; v < w; ++v) {
      std::complex<double> acc = 0.0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double ang = sign * 2.0 * std::numbers::pi *
                             (static_cast<double>(u) * y / h +
                              static_cast<double>(v) * x / w);
          acc += plane[y * w + x] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      out[u * w + v] = inverse ? acc / static_cast<double>(h * w) : acc;
    }
  return out;
}

std::array<double, 4> central_diff(const std::function<double(const BoxCWH&)>& f,
                                   const BoxCWH& x, double rel_step) {
  std::array<double, 4> g{};
  for (int k = 0; k < 4; ++k) {
    BoxCWH lo = x, hi = x;
    double* plo[4] = {&lo.cx, &lo.cy, &lo.w, &lo.h};
    double* phi[4] = {&hi.cx, &hi.cy, &hi.w, &hi.h};
    const double base = *plo[k];
    const double h = rel_step * std::max(1.0, std::abs(base));
    *plo[k] = base - h;
    *phi[k] = base + h;
    g[k] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

namespace {

double box_iou(const BoxCWH& a, const BoxCWH& b) {
  const double ax1 = a.cx - a.w / 2, ax2 = a.cx + a.w / 2;
  const double ay1 = a.cy - a.h / 2, ay2 = a.cy + a.h / 2;
  const double bx1 = b.cx - b.w / 2, bx2 = b.cx + b.w / 2;
  const double by1 = b.cy - b.h / 2, by2 = b.cy + b.h / 2;
  const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = iw * ih;
  return inter / ((ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter);
}

bool in_range(double area, AreaRange r) {
  switch (r) {
    case AreaRange::kAll:
      return true;
    case AreaRange::kSmall:
      return area < 1024.0;
    case AreaRange::kMedium:
      return area >= 1024.0 && area < 9216.0;
    case AreaRange::kLarge:
      return area >= 9216.0;
  }
  return false;
}

// Comparable choice made by one detection.
struct Key {
  int tier = 0;  // 2 in-range match, 1 out-of-range match, 0 none
  double iou = 0.0;
  int pos = -1;
  auto operator<=>(const Key&) const = default;
};

struct Search {
  const std::vector<std::vector<double>>* ious;
  const std::vector<bool>* ignored;
  const std::vector<int>* gt_pos;
  double thr;
  std::vector<Key> current, best;
  std::vector<int> current_gt, best_gt;
  std::vector<bool> used;
  bool have_best = false;

  void run(std::size_t k) {
    if (k == ious->size()) {
      if (!have_best || current > best) {
        best = current;
        best_gt = current_gt;
        have_best = true;
      }
      return;
    }
    current.push_back({});
    current_gt.push_back(-1);
    run(k + 1);
    current.pop_back();
    current_gt.pop_back();
    for (std::size_t g = 0; g < used.size(); ++g) {
      const double v = (*ious)[k][g];
      if (used[g] || v < thr) continue;
      used[g] = true;
      current.push_back({(*ignored)[g] ? 1 : 2, v, (*gt_pos)[g]});
      current_gt.push_back(static_cast<int>(g));
      run(k + 1);
      current.pop_back();
      current_gt.pop_back();
      used[g] = false;
    }
  }
};

std::vector<std::size_t> score_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

}  // namespace

ExhaustiveMatch exhaustive_match(const std::vector<Detection>& dets,
                                 const std::vector<GroundTruth>& gts, double thr,
                                 int max_det, AreaRange range) {
  ExhaustiveMatch m;
  m.order = score_order(dets);
  if (static_cast<int>(m.order.size()) > max_det) m.order.resize(max_det);

  std::vector<bool> ignored(gts.size());
  for (std::size_t g = 0; g < gts.size(); ++g) {
    ignored[g] = !in_range(gts[g].area, range);
    if (!ignored[g]) ++m.num_gt;
  }
  // Position among ground truths once in-range ones are listed first; a
  // larger position wins an exact tie.
  std::vector<int> pos(gts.size());
  int p = 0;
  for (std::size_t g = 0; g < gts.size(); ++g) if (!ignored[g]) pos[g] = p++;
  for (std::size_t g = 0; g < gts.size(); ++g) if (ignored[g]) pos[g] = p++;

  std::vector<std::vector<double>> ious(m.order.size(),
                                        std::vector<double>(gts.size()));
  for (std::size_t k = 0; k < m.order.size(); ++k)
    for (std::size_t g = 0; g < gts.size(); ++g)
      ious[k][g] = box_iou(dets[m.order[k]].box, gts[g].box);

  Search s{&ious, &ignored, &pos, std::min(thr, 1.0 - 1e-10), {}, {}, {}, {},
           std::vector<bool>(gts.size(), false)};
  s.run(0);
  for (std::size_t k = 0; k < m.order.size(); ++k) {
    const int g = s.best_gt[k];
    if (g < 0) {
      const BoxCWH& b = dets[m.order[k]].box;
      m.outcome.push_back(in_range(b.w * b.h, range) ? MatchOutcome::kFalsePositive
                                                     : MatchOutcome::kIgnored);
    } else {
      m.outcome.push_back(ignored[g] ? MatchOutcome::kIgnored
                                     : MatchOutcome::kTruePositive);
    }
  }
  return m;
}

int max_cardinality_tp(const std::vector<Detection>& dets,
                       const std::vector<GroundTruth>& gts, double thr) {
  int best = 0;
  std::vector<bool> used(gts.size(), false);
  std::function<void(std::size_t, int)> go = [&](std::size_t k, int tp) {
    if (k == dets.size()) {
      best = std::max(best, tp);
      return;
    }
    go(k + 1, tp);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || box_iou(dets[k].box, gts[g].box) < thr) continue;
      used[g] = true;
      go(k + 1, tp + 1);
      used[g] = false;
    }
  };
  go(0, 0);
  return best;
}

double ap101(const std::vector<bool>& tp_flags, int total_gt) {
  if (total_gt <= 0) return 0.0;
  std::vector<double> rec, prec;
  int tp = 0;
  for (std::size_t i = 0; i < tp_flags.size(); ++i) {
    tp += tp_flags[i] ? 1 : 0;
    rec.push_back(static_cast<double>(tp) / total_gt);
    prec.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double level = k / 100.0;
    double best = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
      if (rec[i] >= level) best = std::max(best, prec[i]);
    }
    sum += best;
  }
  return sum / 101.0;
}

OracleReport evaluate(const std::vector<Detection>& dets,
                      const std::vector<GroundTruth>& gts,
                      const std::vector<double>& thresholds, int max_det) {
  // Per-image cap across classes, then regroup by (class, image).
  std::map<std::int64_t, std::vector<std::size_t>> per_image;
  for (std::size_t i = 0; i < dets.size(); ++i) per_image[dets[i].image_id].push_back(i);
  std::map<std::pair<int, std::int64_t>, std::vector<Detection>> gdets;
  for (auto& [img, idx] : per_image) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return dets[a].score > dets[b].score;
    });
    if (static_cast<int>(idx.size()) > max_det) idx.resize(max_det);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) gdets[{dets[i].class_id, img}].push_back(dets[i]);
  }
  std::map<std::pair<int, std::int64_t>, std::vector<GroundTruth>> ggts;
  std::map<int, bool> classes;
  for (const auto& g : gts) {
    ggts[{g.class_id, g.image_id}].push_back(g);
    classes[g.class_id] = true;
  }
  std::vector<std::int64_t> images;
  for (const auto& [key, _] : gdets) images.push_back(key.second);
  for (const auto& [key, _] : ggts) images.push_back(key.second);
  std::sort(images.begin(), images.end());
  images.erase(std::unique(images.begin(), images.end()), images.end());

  // AP of one class, or -1 when it has no in-range ground truth.
  auto class_ap = [&](int c, double thr, AreaRange range) {
    struct Entry {
      double score;
      std::int64_t image;
      std::size_t rank;
      MatchOutcome outcome;
    };
    std::vector<Entry> entries;
    int num_gt = 0;
    for (std::int64_t img : images) {
      static const std::vector<Detection> kNoDets;
      static const std::vector<GroundTruth> kNoGts;
      auto di = gdets.find({c, img});
      auto gi = ggts.find({c, img});
      const auto& d = di == gdets.end() ? kNoDets : di->second;
      const auto& g = gi == ggts.end() ? kNoGts : gi->second;
      const ExhaustiveMatch m = exhaustive_match(d, g, thr, max_det, range);
      num_gt += m.num_gt;
      for (std::size_t k = 0; k < m.order.size(); ++k) {
        entries.push_back({d[m.order[k]].score, img, k, m.outcome[k]});
      }
    }
    if (num_gt == 0) return -1.0;
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.image != b.image) return a.image < b.image;
      return a.rank < b.rank;
    });
    std::vector<bool> flags;
    for (const auto& e : entries) {
      if (e.outcome != MatchOutcome::kIgnored) {
        flags.push_back(e.outcome == MatchOutcome::kTruePositive);
      }
    }
    return ap101(flags, num_gt);
  };

  auto mean_over_classes = [&](double thr, AreaRange range, bool* any) {
    double sum = 0.0;
    int n = 0;
    for (const auto& [c, _] : classes) {
      const double ap = class_ap(c, thr, range);
      if (ap < 0) continue;
      sum += ap;
      ++n;
    }
    *any = n > 0;
    return n > 0 ? sum / n : 0.0;
  };

  OracleReport r;
  for (double thr : thresholds) {
    bool any = false;
    r.map_per_threshold.push_back(mean_over_classes(thr, AreaRange::kAll, &any));
  }
  r.map50_95 = std::accumulate(r.map_per_threshold.begin(),
                               r.map_per_threshold.end(), 0.0) /
               static_cast<double>(thresholds.size());

  auto bucket = [&](AreaRange range, bool* has) {
    double sum = 0.0;
    *has = true;
    for (double thr : thresholds) {
      bool any = false;
      sum += mean_over_classes(thr, range, &any);
      if (!any) {
        *has = false;
        return 0.0;
      }
    }
    return sum / static_cast<double>(thresholds.size());
  };
  r.ap_small = bucket(AreaRange::kSmall, &r.has_small);
  r.ap_medium = bucket(AreaRange::kMedium, &r.has_medium);
  r.ap_large = bucket(AreaRange::kLarge, &r.has_large);
  return r;
}

}  // namespace oracle
