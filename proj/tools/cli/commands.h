// Subcommand implementations behind the `tinydef` executable. Each command
// takes a plain options struct, does its work, and returns a JSON report plus
// the exit code; argument parsing and manifest writing live in main.cc.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tinydef/metrics.h"
#include "tinydef/random_init.h"
#include "tinydef/synthgen.h"

namespace tinydef::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitUsage = 2 };

struct CommandResult {
  int exit_code = kExitOk;
  Json report;
  std::string table;  // human-readable view; empty means render `report`
};

// Generic table view for reports without a dedicated one.
std::string render_table(const Json& report);

// --- gen ------------------------------------------------------------------

struct GenOptions {
  std::uint64_t seed = 0;
  int images = 10;
  int image_size = 640;
  int max_objects = 30;
  double objects_mean = 7.34;
  std::filesystem::path out = ".";
};

CommandResult cmd_gen(const GenOptions& o);

// --- eval -----------------------------------------------------------------

struct EvalOptions {
  std::filesystem::path gt;
  std::filesystem::path pred;
  std::vector<double> iou_thresholds = coco_iou_thresholds();
  int max_det = 300;
  double score_cut = 0.5;
  std::optional<std::filesystem::path> out;
};

CommandResult cmd_eval(const EvalOptions& o);

// --- fuse-check -----------------------------------------------------------

struct FuseCheckOptions {
  std::uint64_t seed = 0;
  int trials = 200;
  int width = 16;    // channel counts drawn from [1, width]
  int spatial = 32;  // height and width drawn from [1, spatial]
  double tol = 1e-9;
  bool corrupt = false;  // perturb every fused kernel; must then fail
  bool difference_only = false;
  std::optional<std::filesystem::path> export_stem;
};

struct FuseCheckOutcome {
  int trials = 0;
  double max_deviation = 0.0;
  double seconds = 0.0;
  bool pass = false;
};

FuseCheckOutcome run_fuse_trials(const FuseCheckOptions& o);
CommandResult cmd_fuse_check(const FuseCheckOptions& o);

// --- bench ----------------------------------------------------------------

struct BenchShape {
  int batch = 1;
  int in_channels = 1;
  int out_channels = 1;
  int height = 1;
  int width = 1;
};

// "cin,cout,h,w[,batch]" entries separated by ';'. Throws ContractViolation.
std::vector<BenchShape> parse_bench_shapes(std::string_view text);
std::vector<BenchShape> default_bench_shapes();

struct BenchOptions {
  std::uint64_t seed = 0;
  std::vector<BenchShape> shapes = default_bench_shapes();
  int reps = 20;
};

CommandResult cmd_bench(const BenchOptions& o);

// --- regress / gamma-curve ------------------------------------------------

struct RegressOptions {
  std::uint64_t seed = 0;
  int pairs = 100;
  int steps = 2000;
  double lr = 1e-4;
  double alpha = 1.9;
  double delta = 3.0;
  double d = 0.0;
  double u = 0.95;
  double theta = 4.0;
  double min_iou = 0.1;
  double target_iou = 0.9;
  std::filesystem::path out = ".";
};

CommandResult cmd_regress(const RegressOptions& o);

struct GammaCurveOptions {
  double alpha = 1.9;
  double delta = 3.0;
  double beta_max = 10.0;
  int samples = 1001;
  std::filesystem::path out = ".";
};

CommandResult cmd_gamma_curve(const GammaCurveOptions& o);

// --- featmap --------------------------------------------------------------

struct FeatmapOptions {
  std::uint64_t seed = 0;
  int size = 64;
  int channels = 8;
  int strip_kernel = 31;
  std::string tap = "all";  // post-branch | pre-merge | output | all
  std::filesystem::path out = ".";
};

CommandResult cmd_featmap(const FeatmapOptions& o);

// --- pipeline -------------------------------------------------------------

struct OracleDetectorConfig {
  double jitter = 0.0;       // std of center offset and log-extent, relative
  double shift = 0.0;        // fixed x offset as a fraction of box width
  double score_noise = 0.0;  // std of additive score noise around 0.9
};

// Ground truth turned into detections: boxes are moved into letterbox space,
// perturbed there and mapped back.
std::vector<Detection> oracle_detector(std::span<const GroundTruth> gts,
                                       const LetterboxTransform& t,
                                       const OracleDetectorConfig& cfg,
                                       Rng& rng);

struct PipelineOptions {
  std::uint64_t seed = 0;
  int images = 4;
  int image_size = 640;
  int input_size = 320;
  int width = 8;
  int strip_kernel = 31;
  int max_objects = 30;
  OracleDetectorConfig detector;
  bool featmaps = true;
  std::filesystem::path out = ".";
};

struct PipelineOutcome {
  std::vector<GroundTruth> gts;
  std::vector<Detection> dets;
  EvalReport eval;
  double block_fusion_deviation = 0.0;
  std::vector<std::string> featmaps;
  double seconds = 0.0;
};

PipelineOutcome run_pipeline(const PipelineOptions& o);
CommandResult cmd_pipeline(const PipelineOptions& o);

// --- manifest -------------------------------------------------------------

// Writes <out>/run-manifest.json with the resolved options and the outcome.
void write_manifest(const std::filesystem::path& out, std::string_view command,
                    const Json& options, const CommandResult& result);

}  // namespace tinydef::cli
