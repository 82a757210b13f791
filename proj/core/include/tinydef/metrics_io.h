// JSON-lines exchange format for boxes, one record per line:
//   {"image_id": 3, "class_id": 1, "cx": 10.5, "cy": 20, "w": 8, "h": 6,
//    "score": 0.9, "area": 48}
// `score` is required for detections; `area` is optional for ground truth and
// defaults to w * h.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tinydef/metrics.h"
#include "tinydef/tensor_io.h"

namespace tinydef {

std::vector<GroundTruth> read_ground_truth_jsonl(std::istream& is);
std::vector<Detection> read_detections_jsonl(std::istream& is);
std::vector<GroundTruth> load_ground_truth_jsonl(const std::filesystem::path& p);
std::vector<Detection> load_detections_jsonl(const std::filesystem::path& p);

void write_ground_truth_jsonl(std::ostream& os, const std::vector<GroundTruth>& gts);
void write_detections_jsonl(std::ostream& os, const std::vector<Detection>& dets);

// Pretty-printed JSON (2-space indent) and a fixed-width text table.
std::string eval_report_json(const EvalReport& r);
std::string eval_report_table(const EvalReport& r);

}  // namespace tinydef
