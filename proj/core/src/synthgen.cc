#include "tinydef/synthgen.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"
#include "tinydef/image_io.h"
#include "tinydef/metrics_io.h"
#include "tinydef/random_init.h"

namespace tinydef {

namespace {

constexpr std::uint64_t kLayoutStream = 0;
constexpr std::uint64_t kRenderStream = 1;

// Area ranges per bucket, px^2.
constexpr double kSmallMinArea = 4.0 * 4.0;
constexpr double kLargeMaxArea = 160.0 * 160.0;

constexpr std::array<std::array<double, 3>, kNumClasses> kPalette{{
    {0.92, 0.92, 0.88},
    {0.55, 0.42, 0.25},
    {0.30, 0.30, 0.34},
    {0.95, 0.80, 0.10},
    {0.85, 0.35, 0.10},
    {0.10, 0.60, 0.90},
    {0.40, 0.25, 0.15},
    {0.85, 0.10, 0.60},
    {0.10, 0.10, 0.10},
}};

double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

bool overlaps(const BoxCWH& a, const BoxCWH& b, double margin) {
  const Corners ca = cwh_to_corners(a), cb = cwh_to_corners(b);
  return ca.x1 < cb.x2 + margin && cb.x1 < ca.x2 + margin &&
         ca.y1 < cb.y2 + margin && cb.y1 < ca.y2 + margin;
}

// Squared distance from p to segment ab.
double segment_dist2(double px, double py, double ax, double ay, double bx,
                     double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return dx * dx + dy * dy;
}

void render_background(Tensor4& img, Rng& rng) {
  const int s = img.height();
  const std::array<double, 3> base{uniform(rng, 0.30, 0.45),
                                   uniform(rng, 0.40, 0.55),
                                   uniform(rng, 0.30, 0.50)};
  const double fx = uniform(rng, 0.005, 0.03), fy = uniform(rng, 0.005, 0.03);
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> noise(-0.04, 0.04);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double wave =
          0.08 * std::sin(2.0 * std::numbers::pi * (fx * x + fy * y) + phase);
      for (int c = 0; c < 3; ++c) {
        img(0, c, y, x) = std::clamp(base[c] + wave + noise(rng), 0.0, 1.0);
      }
    }
  }
}

void render_object(Tensor4& img, const AnnotationRecord& a) {
  const Corners k = cwh_to_corners(a.box);
  const auto& color = kPalette[static_cast<std::size_t>(a.class_id - 1)];
  const ClassStyle style = class_style(a.class_id);
  const double half_t = std::max(0.75, 0.125 * std::min(a.box.w, a.box.h));
  const int x0 = std::max(0, static_cast<int>(std::floor(k.x1)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(k.x2)));
  const int y0 = std::max(0, static_cast<int>(std::floor(k.y1)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(k.y2)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      if (px < k.x1 || px > k.x2 || py < k.y1 || py > k.y2) continue;
      bool hit = false;
      switch (style) {
        case ClassStyle::kRectangle:
          hit = true;
          break;
        case ClassStyle::kLine:
          hit = segment_dist2(px, py, k.x1, k.y1, k.x2, k.y2) <= half_t * half_t;
          break;
        case ClassStyle::kBlob: {
          const double u = (px - a.box.cx) / (a.box.w / 2);
          const double v = (py - a.box.cy) / (a.box.h / 2);
          hit = u * u + v * v <= 1.0;
          break;
        }
      }
      if (!hit) continue;
      for (int c = 0; c < 3; ++c) img(0, c, y, x) = color[c];
    }
  }
}

}  // namespace

ClassStyle class_style(int class_id) {
  if (class_id < 1 || class_id > kNumClasses) {
    throw ContractViolation("class id out of range: " + std::to_string(class_id));
  }
  if (class_id <= 3) return ClassStyle::kRectangle;
  if (class_id <= 6) return ClassStyle::kLine;
  return ClassStyle::kBlob;
}

void SceneSpec::validate() const {
  if (image_size < 160) {
    throw ContractViolation("SceneSpec: image_size must be >= 160");
  }
  if (num_classes != kNumClasses) {
    throw ContractViolation("SceneSpec: exactly 9 classes are supported");
  }
  if (!(objects_per_image_mean > 0.0)) {
    throw ContractViolation("SceneSpec: objects_per_image_mean must be > 0");
  }
  if (frac_small < 0 || frac_medium < 0 || frac_large < 0 ||
      std::abs(frac_small + frac_medium + frac_large - 1.0) > 1e-6) {
    throw ContractViolation("SceneSpec: size mix must be nonnegative and sum to 1");
  }
  if (max_objects < 1 || placement_attempts < 1) {
    throw ContractViolation("SceneSpec: max_objects and attempts must be >= 1");
  }
}

SceneLayout generate_layout(const SceneSpec& spec, std::int64_t image_id) {
  spec.validate();
  Rng rng = make_rng(spec.seed, static_cast<std::uint64_t>(image_id) * 2 + kLayoutStream);
  SceneLayout layout;
  const int drawn = std::poisson_distribution<int>(spec.objects_per_image_mean)(rng);
  layout.requested = std::clamp(drawn, 1, spec.max_objects);

  std::discrete_distribution<int> pick_class(spec.class_weights.begin(),
                                             spec.class_weights.end());
  std::discrete_distribution<int> pick_bucket(
      {spec.frac_small, spec.frac_medium, spec.frac_large});
  const double s = spec.image_size;

  for (int i = 0; i < layout.requested; ++i) {
    const int class_id = pick_class(rng) + 1;
    double area = 0.0;
    switch (pick_bucket(rng)) {
      case 0:
        area = log_uniform(rng, kSmallMinArea, kSmallAreaMax);
        break;
      case 1:
        area = log_uniform(rng, kSmallAreaMax, kMediumAreaMax);
        break;
      default:
        area = log_uniform(rng, kMediumAreaMax, kLargeMaxArea);
        break;
    }
    const double aspect = log_uniform(rng, 1.0 / 3.0, 3.0);
    const double w = std::sqrt(area * aspect);
    const double h = std::sqrt(area / aspect);

    bool placed = false;
    for (int attempt = 0; attempt < spec.placement_attempts && !placed; ++attempt) {
      const BoxCWH box{uniform(rng, w / 2, s - w / 2), uniform(rng, h / 2, s - h / 2),
                       w, h};
      const bool clear = std::none_of(
          layout.annotations.begin(), layout.annotations.end(),
          [&](const AnnotationRecord& a) { return overlaps(a.box, box, 2.0); });
      if (clear) {
        layout.annotations.push_back({image_id, class_id, box});
        placed = true;
      }
    }
    if (!placed) {
      ++layout.skipped;
      std::clog << "synthgen: image " << image_id << " object " << i
                << " skipped after " << spec.placement_attempts
                << " placement attempts\n";
    }
  }
  return layout;
}

Scene generate_scene(const SceneSpec& spec, std::int64_t image_id) {
  Scene scene{Tensor4(Shape4{1, 3, spec.image_size, spec.image_size}),
              generate_layout(spec, image_id)};
  Rng rng = make_rng(spec.seed, static_cast<std::uint64_t>(image_id) * 2 + kRenderStream);
  render_background(scene.image, rng);
  for (const auto& a : scene.layout.annotations) render_object(scene.image, a);
  return scene;
}

std::vector<GroundTruth> to_ground_truth(std::span<const AnnotationRecord> anns) {
  std::vector<GroundTruth> out;
  out.reserve(anns.size());
  for (const auto& a : anns) {
    out.push_back({a.image_id, a.class_id, a.box, a.area()});
  }
  return out;
}

BoxCWH LetterboxTransform::apply(const BoxCWH& b) const {
  return {b.cx * scale + pad_x, b.cy * scale + pad_y, b.w * scale, b.h * scale};
}

BoxCWH LetterboxTransform::invert(const BoxCWH& b) const {
  return {(b.cx - pad_x) / scale, (b.cy - pad_y) / scale, b.w / scale,
          b.h / scale};
}

LetterboxResult letterbox(const Tensor4& image, int target) {
  if (target < 1) throw ContractViolation("letterbox: target must be >= 1");
  const int h = image.height(), w = image.width();
  LetterboxTransform t;
  t.target = target;
  t.scale = static_cast<double>(target) / std::max(h, w);
  t.content_w = std::clamp(static_cast<int>(std::lround(w * t.scale)), 1, target);
  t.content_h = std::clamp(static_cast<int>(std::lround(h * t.scale)), 1, target);
  t.pad_x = (target - t.content_w) / 2;
  t.pad_y = (target - t.content_h) / 2;

  if (h == target && w == target) return {image, t};

  Tensor4 out(Shape4{image.batch(), image.channels(), target, target},
              kLetterboxGray);
  const double sy = static_cast<double>(h) / t.content_h;
  const double sx = static_cast<double>(w) / t.content_w;
  for (int b = 0; b < image.batch(); ++b) {
    for (int c = 0; c < image.channels(); ++c) {
      for (int oy = 0; oy < t.content_h; ++oy) {
        const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, h - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int ox = 0; ox < t.content_w; ++ox) {
          const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, w - 1.0);
          const int x0 = static_cast<int>(fx);
          const int x1 = std::min(x0 + 1, w - 1);
          const double wx = fx - x0;
          const double top = image(b, c, y0, x0) * (1 - wx) + image(b, c, y0, x1) * wx;
          const double bot = image(b, c, y1, x0) * (1 - wx) + image(b, c, y1, x1) * wx;
          out(b, c, oy + t.pad_y, ox + t.pad_x) = top * (1 - wy) + bot * wy;
        }
      }
    }
  }
  return {std::move(out), t};
}

DatasetStats dataset_stats(std::span<const AnnotationRecord> anns,
                           int num_images, int num_classes) {
  if (anns.empty()) throw ContractViolation("dataset_stats: no annotations");
  DatasetStats st;
  st.total_objects = static_cast<int>(anns.size());
  st.per_class_counts.assign(static_cast<std::size_t>(num_classes), 0);
  std::map<std::int64_t, int> per_image;
  int small = 0, medium = 0, large = 0;
  double area_sum = 0.0;
  for (const auto& a : anns) {
    if (a.class_id < 1 || a.class_id > num_classes) {
      throw ContractViolation("dataset_stats: class id out of range");
    }
    ++st.per_class_counts[static_cast<std::size_t>(a.class_id - 1)];
    ++per_image[a.image_id];
    area_sum += a.area();
    switch (size_bucket(a.area())) {
      case SizeBucket::kSmall:
        ++small;
        break;
      case SizeBucket::kMedium:
        ++medium;
        break;
      case SizeBucket::kLarge:
        ++large;
        break;
    }
  }
  const double n = st.total_objects;
  st.frac_small = small / n;
  st.frac_medium = medium / n;
  st.frac_large = large / n;
  st.mean_area = area_sum / n;
  st.num_images = std::max(num_images, static_cast<int>(per_image.size()));
  for (const auto& [image, count] : per_image) ++st.objects_per_image_histogram[count];
  const int empty = st.num_images - static_cast<int>(per_image.size());
  if (empty > 0) st.objects_per_image_histogram[0] += empty;
  st.mean_objects_per_image = n / st.num_images;
  return st;
}

DatasetSummary write_dataset(const std::filesystem::path& dir,
                             const SceneSpec& spec, int num_images) {
  spec.validate();
  if (num_images < 1) throw ContractViolation("write_dataset: need >= 1 image");
  std::filesystem::create_directories(dir / "images");

  DatasetSummary summary;
  std::vector<AnnotationRecord> all;
  for (int i = 0; i < num_images; ++i) {
    const Scene scene = generate_scene(spec, i);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.ppm", i);
    write_ppm(dir / "images" / name, scene.image);
    summary.skipped += scene.layout.skipped;
    all.insert(all.end(), scene.layout.annotations.begin(),
               scene.layout.annotations.end());
  }
  summary.images = num_images;
  summary.objects = static_cast<int>(all.size());

  std::ofstream ann(dir / "annotations.jsonl");
  write_ground_truth_jsonl(ann, to_ground_truth(all));

  nlohmann::json manifest{
      {"generator", "tinydef synthgen"},
      {"seed", spec.seed},
      {"images", num_images},
      {"image_size", spec.image_size},
      {"num_classes", spec.num_classes},
      {"objects_per_image_mean", spec.objects_per_image_mean},
      {"size_mix", {spec.frac_small, spec.frac_medium, spec.frac_large}},
      {"class_weights", spec.class_weights},
      {"objects", summary.objects},
      {"skipped", summary.skipped}};
  if (!all.empty()) {
    summary.stats = dataset_stats(all, num_images);
    manifest["stats"] = {{"frac_small", summary.stats.frac_small},
                         {"frac_medium", summary.stats.frac_medium},
                         {"frac_large", summary.stats.frac_large},
                         {"mean_area", summary.stats.mean_area},
                         {"mean_area_target", spec.mean_area_target},
                         {"mean_objects_per_image",
                          summary.stats.mean_objects_per_image},
                         {"per_class_counts", summary.stats.per_class_counts}};
  }
  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump(2) << '\n';
  return summary;
}

}  // namespace tinydef
