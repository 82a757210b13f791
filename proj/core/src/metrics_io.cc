#include "tinydef/metrics_io.h"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace tinydef {

namespace {

using nlohmann::json;

template <class Fn>
void for_each_record(std::istream& is, Fn&& fn) {
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw FormatError("jsonl line " + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
}

BoxCWH box_of(const json& j) {
  BoxCWH b{j.at("cx").get<double>(), j.at("cy").get<double>(),
           j.at("w").get<double>(), j.at("h").get<double>()};
  b.validate();
  return b;
}

json box_json(std::int64_t image_id, int class_id, const BoxCWH& b) {
  return json{{"image_id", image_id}, {"class_id", class_id}, {"cx", b.cx},
              {"cy", b.cy},           {"w", b.w},               {"h", b.h}};
}

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::ifstream open_or_throw(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw FormatError("cannot open " + p.string());
  return is;
}

}  // namespace

std::vector<GroundTruth> read_ground_truth_jsonl(std::istream& is) {
  std::vector<GroundTruth> out;
  for_each_record(is, [&](const json& j) {
    GroundTruth g;
    g.image_id = j.at("image_id").get<std::int64_t>();
    g.class_id = j.at("class_id").get<int>();
    g.box = box_of(j);
    g.area = j.contains("area") ? j.at("area").get<double>() : g.box.w * g.box.h;
    out.push_back(g);
  });
  return out;
}

std::vector<Detection> read_detections_jsonl(std::istream& is) {
  std::vector<Detection> out;
  for_each_record(is, [&](const json& j) {
    Detection d;
    d.image_id = j.at("image_id").get<std::int64_t>();
    d.class_id = j.at("class_id").get<int>();
    d.box = box_of(j);
    d.score = j.at("score").get<double>();
    out.push_back(d);
  });
  return out;
}

std::vector<GroundTruth> load_ground_truth_jsonl(const std::filesystem::path& p) {
  auto is = open_or_throw(p);
  return read_ground_truth_jsonl(is);
}

std::vector<Detection> load_detections_jsonl(const std::filesystem::path& p) {
  auto is = open_or_throw(p);
  return read_detections_jsonl(is);
}

void write_ground_truth_jsonl(std::ostream& os,
                              const std::vector<GroundTruth>& gts) {
  for (const auto& g : gts) {
    json j = box_json(g.image_id, g.class_id, g.box);
    j["area"] = g.area;
    os << j.dump() << '\n';
  }
}

void write_detections_jsonl(std::ostream& os,
                            const std::vector<Detection>& dets) {
  for (const auto& d : dets) {
    json j = box_json(d.image_id, d.class_id, d.box);
    j["score"] = d.score;
    os << j.dump() << '\n';
  }
}

std::string eval_report_json(const EvalReport& r) {
  json classes = json::array();
  for (const auto& c : r.classes) {
    classes.push_back({{"class_id", c.class_id},
                       {"num_gt", c.num_gt},
                       {"num_det", c.num_det},
                       {"ap", c.ap}});
  }
  json j{{"iou_thresholds", r.iou_thresholds},
         {"map_per_threshold", r.map_per_threshold},
         {"map50", optional_json(r.map50)},
         {"map50_95", r.map50_95},
         {"ap_small", optional_json(r.ap_small)},
         {"ap_medium", optional_json(r.ap_medium)},
         {"ap_large", optional_json(r.ap_large)},
         {"precision", r.precision},
         {"recall", r.recall},
         {"true_positives", r.true_positives},
         {"false_positives", r.false_positives},
         {"total_gt", r.total_gt},
         {"classes", classes},
         {"excluded_classes", r.excluded_classes}};
  return j.dump(2);
}

std::string eval_report_table(const EvalReport& r) {
  std::ostringstream os;
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) {
      s << std::fixed << std::setprecision(4) << *v;
    } else {
      s << "n/a";
    }
    return s.str();
  };
  os << std::fixed << std::setprecision(4);
  os << "metric        value\n";
  os << "mAP50         " << opt(r.map50) << "\n";
  os << "mAP50:95      " << r.map50_95 << "\n";
  os << "AP_s          " << opt(r.ap_small) << "\n";
  os << "AP_m          " << opt(r.ap_medium) << "\n";
  os << "AP_l          " << opt(r.ap_large) << "\n";
  os << "P             " << r.precision << "\n";
  os << "R             " << r.recall << "\n";
  os << "\nIoU thr   mAP\n";
  for (std::size_t t = 0; t < r.iou_thresholds.size(); ++t) {
    os << std::setw(7) << std::setprecision(2) << r.iou_thresholds[t] << "   "
       << std::setprecision(4) << r.map_per_threshold[t] << "\n";
  }
  os << "\nclass   #gt   #det   AP@first-thr\n";
  for (const auto& c : r.classes) {
    os << std::setw(5) << c.class_id << std::setw(6) << c.num_gt
       << std::setw(7) << c.num_det << "   " << c.ap.front() << "\n";
  }
  if (!r.excluded_classes.empty()) {
    os << "excluded (no ground truth):";
    for (int c : r.excluded_classes) os << ' ' << c;
    os << "\n";
  }
  return os.str();
}

}  // namespace tinydef
