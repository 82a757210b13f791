// tinydef: command-line front end. Every subcommand prints its report
// (JSON or table) on stdout and writes run-manifest.json into --out.
//
// --config names a flat key=value file. Keys are long option names without
// the dashes; a flag given on the command line wins over the file.

#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cli/commands.h"
#include "tinydef/tensor_io.h"

namespace {

using tinydef::cli::CommandResult;
using tinydef::cli::Json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Appends `--key=value` for every config entry whose option is not already
// on the command line, so explicit flags win.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream is(path);
  if (!is) throw CLI::ValidationError("--config", "cannot read " + path);

  std::set<std::string> given;
  for (const auto& a : args) {
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));
  }
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError(
          "--config", path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!given.count(key)) args.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
  }
  return args;
}

Json resolved_options(const CLI::App& app) {
  Json j = Json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->count() == 0) {
      const bool flag = opt->get_expected_max() == 0;
      j[name] = flag ? std::string("false") : opt->get_default_str();
    } else if (opt->results().size() == 1) {
      j[name] = opt->results().front();
    } else {
      j[name] = opt->results();
    }
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = tinydef::cli;
  CLI::App app{"tinydef: small-object detection building blocks and checks"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();

  std::uint64_t seed = 0;
  std::string out = ".";
  std::string config;
  std::string format = "json";
  std::optional<double> tol;
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--out", out, "Output directory");
  app.add_option("--config", config, "Flat key=value config file");
  app.add_option("--format", format, "Report format")
      ->check(CLI::IsMember({"json", "table"}));
  app.add_option("--tol", tol, "Override the check tolerance (fuse-check)");

  cli::GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic dataset");
  gen_cmd->add_option("--images", gen.images, "Number of images");
  gen_cmd->add_option("--image-size", gen.image_size, "Square image side in px");
  gen_cmd->add_option("--max-objects", gen.max_objects, "Objects per image cap");
  gen_cmd->add_option("--objects-mean", gen.objects_mean,
                      "Poisson mean of objects per image");

  cli::EvalOptions ev;
  std::string gt_path, pred_path;
  auto* eval_cmd = app.add_subcommand("eval", "COCO-style evaluation of JSONL files");
  eval_cmd->add_option("--gt", gt_path, "Ground truth JSONL")->required();
  eval_cmd->add_option("--pred", pred_path, "Detections JSONL")->required();
  eval_cmd->add_option("--iou-thr", ev.iou_thresholds, "IoU thresholds")
      ->delimiter(',');
  eval_cmd->add_option("--max-det", ev.max_det, "Detections kept per image");
  eval_cmd->add_option("--score-cut", ev.score_cut,
                       "Score cut for headline precision/recall");

  cli::FuseCheckOptions fc;
  std::string export_stem;
  auto* fuse_cmd =
      app.add_subcommand("fuse-check", "Fused vs training-path EEConv trials");
  fuse_cmd->add_option("--trials", fc.trials, "Number of random trials");
  fuse_cmd->add_option("--width", fc.width, "Max channel count");
  fuse_cmd->add_option("--spatial", fc.spatial, "Max height and width");
  fuse_cmd->add_flag("--corrupt", fc.corrupt,
                     "Perturb fused kernels (negative control)");
  fuse_cmd->add_flag("--difference-only", fc.difference_only,
                     "Drop the vanilla branch");
  fuse_cmd->add_option("--export", export_stem,
                       "Write the last fused kernel as <stem>.t4 + <stem>.json");

  cli::BenchOptions bench;
  std::string shapes;
  auto* bench_cmd = app.add_subcommand("bench", "MAC counts and wall-clock");
  bench_cmd->add_option("--shapes", shapes, "cin,cout,h,w[,batch];...");
  bench_cmd->add_option("--reps", bench.reps, "Repetitions per shape (>= 20)");

  cli::RegressOptions reg;
  auto* reg_cmd = app.add_subcommand("regress", "Box regression demo");
  reg_cmd->add_option("--pairs", reg.pairs, "Number of box pairs");
  reg_cmd->add_option("--steps", reg.steps, "Gradient steps");
  reg_cmd->add_option("--lr", reg.lr, "Learning rate");
  reg_cmd->add_option("--alpha", reg.alpha, "Wise alpha");
  reg_cmd->add_option("--delta", reg.delta, "Wise delta");
  reg_cmd->add_option("--d", reg.d, "Focaler lower bound");
  reg_cmd->add_option("--u", reg.u, "Focaler upper bound");
  reg_cmd->add_option("--theta", reg.theta, "SIoU shape exponent");
  reg_cmd->add_option("--min-iou", reg.min_iou, "Minimum initial IoU");
  reg_cmd->add_option("--target-iou", reg.target_iou,
                      "Final mean IoU needed for exit code 0");

  cli::GammaCurveOptions gc;
  auto* gamma_cmd = app.add_subcommand("gamma-curve", "Sample gamma(beta) to CSV");
  gamma_cmd->add_option("--alpha", gc.alpha, "Wise alpha");
  gamma_cmd->add_option("--delta", gc.delta, "Wise delta");
  gamma_cmd->add_option("--beta-max", gc.beta_max, "Largest beta sampled");
  gamma_cmd->add_option("--samples", gc.samples, "Number of samples");

  cli::FeatmapOptions fm;
  auto* fm_cmd = app.add_subcommand("featmap", "Dump CSDMAM tap points as PGM");
  fm_cmd->add_option("--size", fm.size, "Input side in px");
  fm_cmd->add_option("--channels", fm.channels, "Feature width");
  fm_cmd->add_option("--strip-kernel", fm.strip_kernel, "Strip kernel length");
  fm_cmd->add_option("--tap", fm.tap, "post-branch | pre-merge | output | all");

  cli::PipelineOptions pl;
  auto* pl_cmd = app.add_subcommand("pipeline", "End-to-end smoke run");
  pl_cmd->add_option("--images", pl.images, "Number of images");
  pl_cmd->add_option("--image-size", pl.image_size, "Generated image side");
  pl_cmd->add_option("--input-size", pl.input_size, "Letterbox target side");
  pl_cmd->add_option("--width", pl.width, "Block stack width");
  pl_cmd->add_option("--strip-kernel", pl.strip_kernel, "Strip kernel length");
  pl_cmd->add_option("--max-objects", pl.max_objects, "Objects per image cap");
  pl_cmd->add_option("--jitter", pl.detector.jitter, "Relative box jitter");
  pl_cmd->add_option("--shift", pl.detector.shift,
                     "Fixed x offset as a fraction of box width");
  pl_cmd->add_option("--score-noise", pl.detector.score_noise, "Score noise std");
  pl_cmd->add_option("--featmaps", pl.featmaps, "Dump feature maps of image 0");

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = merge_config(std::move(args));
    std::vector<char*> cargs;
    for (auto& a : args) cargs.push_back(a.data());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  CommandResult result;
  try {
    if (name == "gen") {
      gen.seed = seed;
      gen.out = out;
      result = cli::cmd_gen(gen);
    } else if (name == "eval") {
      ev.gt = gt_path;
      ev.pred = pred_path;
      ev.out = out;
      result = cli::cmd_eval(ev);
    } else if (name == "fuse-check") {
      fc.seed = seed;
      if (tol) fc.tol = *tol;
      if (!export_stem.empty()) fc.export_stem = export_stem;
      result = cli::cmd_fuse_check(fc);
    } else if (name == "bench") {
      bench.seed = seed;
      if (!shapes.empty()) bench.shapes = cli::parse_bench_shapes(shapes);
      result = cli::cmd_bench(bench);
    } else if (name == "regress") {
      reg.seed = seed;
      reg.out = out;
      result = cli::cmd_regress(reg);
    } else if (name == "gamma-curve") {
      gc.out = out;
      result = cli::cmd_gamma_curve(gc);
    } else if (name == "featmap") {
      fm.seed = seed;
      fm.out = out;
      result = cli::cmd_featmap(fm);
    } else if (name == "pipeline") {
      pl.seed = seed;
      pl.out = out;
      result = cli::cmd_pipeline(pl);
    }
  } catch (const tinydef::ContractViolation& e) {
    std::cerr << "tinydef " << name << ": " << e.what() << '\n';
    return cli::kExitUsage;
  } catch (const tinydef::FormatError& e) {
    std::cerr << "tinydef " << name << ": " << e.what() << '\n';
    return cli::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "tinydef " << name << ": " << e.what() << '\n';
    return cli::kExitCheckFailed;
  }

  Json options = resolved_options(app);
  options.update(resolved_options(*sub));
  std::filesystem::create_directories(out);
  cli::write_manifest(out, name, options, result);

  if (format == "table") {
    std::cout << (result.table.empty() ? cli::render_table(result.report)
                                       : result.table);
  } else {
    std::cout << result.report.dump(2) << '\n';
  }
  return result.exit_code;
}
