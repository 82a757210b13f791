// Synthetic small-object scenes whose size and count statistics follow an
// aerial transmission-line defect dataset, plus aspect-preserving letterbox
// preprocessing.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tinydef/fws_loss.h"
#include "tinydef/metrics.h"
#include "tinydef/tensor.h"

namespace tinydef {

inline constexpr int kNumClasses = 9;

enum class ClassStyle { kRectangle, kLine, kBlob };
ClassStyle class_style(int class_id);

struct SceneSpec {
  int image_size = 640;
  int num_classes = kNumClasses;
  double objects_per_image_mean = 7.34;
  // Bucket mix from the instance counts 69,413 / 4,022 / 13 of 73,448.
  double frac_small = 69413.0 / 73448.0;
  double frac_medium = 4022.0 / 73448.0;
  double frac_large = 13.0 / 73448.0;
  double mean_area_target = 422.12;  // reported by dataset_stats, not enforced
  // Relative class frequencies (class 1 first). Class 1 carries 43,808 of
  // 73,448 instances and class 9 only 37; the rest share the remainder.
  std::array<double, kNumClasses> class_weights{
      43808.0, 4229.0, 4229.0, 4229.0, 4229.0, 4229.0, 4229.0, 4229.0, 37.0};
  std::uint64_t seed = 0;
  int max_objects = 30;
  int placement_attempts = 100;

  void validate() const;
};

struct AnnotationRecord {
  std::int64_t image_id = 0;
  int class_id = 1;
  BoxCWH box;  // pixels
  double area() const { return box.w * box.h; }
};

struct SceneLayout {
  std::vector<AnnotationRecord> annotations;
  int requested = 0;
  int skipped = 0;  // objects dropped after exhausting placement attempts
};

// Object placement only; deterministic in (spec.seed, image_id).
SceneLayout generate_layout(const SceneSpec& spec, std::int64_t image_id);

struct Scene {
  Tensor4 image;  // (1, 3, S, S), values in [0, 1]
  SceneLayout layout;
};

Scene generate_scene(const SceneSpec& spec, std::int64_t image_id);

std::vector<GroundTruth> to_ground_truth(std::span<const AnnotationRecord> anns);

// --- letterbox ------------------------------------------------------------

inline constexpr double kLetterboxGray = 114.0 / 255.0;

struct LetterboxTransform {
  double scale = 1.0;
  int pad_x = 0;  // left
  int pad_y = 0;  // top
  int content_w = 0;
  int content_h = 0;
  int target = 640;

  BoxCWH apply(const BoxCWH& b) const;
  BoxCWH invert(const BoxCWH& b) const;
};

struct LetterboxResult {
  Tensor4 image;
  LetterboxTransform transform;
};

// Scales the longer side to `target` (bilinear, half-pixel centers) and pads
// the short side symmetrically with gray. Works on every batch and channel.
LetterboxResult letterbox(const Tensor4& image, int target = 640);

// --- statistics -----------------------------------------------------------

struct DatasetStats {
  int total_objects = 0;
  int num_images = 0;
  double frac_small = 0.0;
  double frac_medium = 0.0;
  double frac_large = 0.0;
  double mean_area = 0.0;
  double mean_objects_per_image = 0.0;
  std::map<int, int> objects_per_image_histogram;  // count -> images
  std::vector<int> per_class_counts;               // index class_id - 1
};

// `num_images` counts images even when they hold no annotation; pass 0 to
// use the number of distinct image ids.
DatasetStats dataset_stats(std::span<const AnnotationRecord> anns,
                           int num_images = 0, int num_classes = kNumClasses);

// Writes images/<id>.ppm, annotations.jsonl and manifest.json under `dir`.
struct DatasetSummary {
  int images = 0;
  int objects = 0;
  int skipped = 0;
  DatasetStats stats;
};

DatasetSummary write_dataset(const std::filesystem::path& dir,
                             const SceneSpec& spec, int num_images);

}  // namespace tinydef
