#include "commands.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tinydef/csdmam.h"
#include "tinydef/diffconv.h"
#include "tinydef/diffconv_io.h"
#include "tinydef/image_io.h"
#include "tinydef/metrics_io.h"
#include "tinydef/spd.h"

namespace tinydef::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

void write_json(const std::filesystem::path& p, const Json& j) {
  open_out(p) << j.dump(2) << '\n';
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Json stats_json(const DatasetStats& s) {
  Json hist = Json::object();
  for (const auto& [count, images] : s.objects_per_image_histogram) {
    hist[std::to_string(count)] = images;
  }
  return {{"total_objects", s.total_objects},
          {"num_images", s.num_images},
          {"frac_small", s.frac_small},
          {"frac_medium", s.frac_medium},
          {"frac_large", s.frac_large},
          {"mean_area", s.mean_area},
          {"mean_objects_per_image", s.mean_objects_per_image},
          {"per_class_counts", s.per_class_counts},
          {"objects_per_image_histogram", hist}};
}

std::string scalar_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

std::string render_table(const Json& report) {
  std::ostringstream os;
  for (const auto& [key, value] : report.items()) {
    const bool rows = value.is_array() && !value.empty() &&
                      std::all_of(value.begin(), value.end(),
                                  [](const Json& e) { return e.is_object(); });
    if (!rows) {
      os << key << ": "
         << (value.is_structured() ? value.dump() : scalar_text(value)) << '\n';
      continue;
    }
    os << key << ":\n ";
    for (const auto& [col, _] : value.front().items()) os << ' ' << col;
    os << '\n';
    for (const auto& row : value) {
      os << ' ';
      for (const auto& [col, cell] : row.items()) os << ' ' << scalar_text(cell);
      os << '\n';
    }
  }
  return os.str();
}

// --- gen ------------------------------------------------------------------

CommandResult cmd_gen(const GenOptions& o) {
  require(o.images >= 1, "gen: --images must be >= 1");
  SceneSpec spec;
  spec.seed = o.seed;
  spec.image_size = o.image_size;
  spec.max_objects = o.max_objects;
  spec.objects_per_image_mean = o.objects_mean;
  const DatasetSummary s = write_dataset(o.out, spec, o.images);
  CommandResult r;
  r.report = {{"command", "gen"},
              {"images", s.images},
              {"objects", s.objects},
              {"skipped", s.skipped},
              {"annotations", (o.out / "annotations.jsonl").string()}};
  if (s.objects > 0) r.report["stats"] = stats_json(s.stats);
  return r;
}

// --- eval -----------------------------------------------------------------

CommandResult cmd_eval(const EvalOptions& o) {
  EvalConfig cfg;
  cfg.iou_thresholds = o.iou_thresholds;
  cfg.max_detections = o.max_det;
  cfg.score_cut = o.score_cut;
  cfg.validate();
  const auto gts = load_ground_truth_jsonl(o.gt);
  const auto dets = load_detections_jsonl(o.pred);
  const EvalReport rep = evaluate(dets, gts, cfg);
  CommandResult r;
  r.report = Json::parse(eval_report_json(rep));
  r.table = eval_report_table(rep);
  if (o.out) write_json(*o.out / "eval-report.json", r.report);
  return r;
}

// --- fuse-check -----------------------------------------------------------

FuseCheckOutcome run_fuse_trials(const FuseCheckOptions& o) {
  require(o.trials >= 1, "fuse-check: --trials must be >= 1");
  require(o.width >= 1, "fuse-check: --width must be >= 1");
  require(o.spatial >= 1, "fuse-check: --spatial must be >= 1");
  const auto t0 = Clock::now();
  Rng rng = make_rng(o.seed, 0xf05e);
  FuseCheckOutcome out;
  for (int t = 0; t < o.trials; ++t) {
    const int cin = uniform_int(rng, 1, o.width);
    const int cout = uniform_int(rng, 1, o.width);
    const Shape4 shape{uniform_int(rng, 1, 2), cin, uniform_int(rng, 1, o.spatial),
                       uniform_int(rng, 1, o.spatial)};
    ConvBranchSet bs = random_branch_set(cin, cout, rng);
    bs.mode = o.difference_only ? BranchMode::kDifferenceOnly : BranchMode::kAllFour;
    const Tensor4 x = random_tensor(shape, rng);
    FusedConv f = fuse(bs);
    if (o.corrupt) {
      for (double& b : f.b_final) b += 1e-3;
      f.w_final(0, 0, 1, 1) += 1e-3;
    }
    if (o.export_stem && t == o.trials - 1) save_fused(*o.export_stem, f);
    const double dev =
        max_abs_diff(eeconv_forward_train(x, bs), eeconv_forward_fused(x, f));
    out.max_deviation = std::max(out.max_deviation, dev);
    ++out.trials;
  }
  out.seconds = seconds_since(t0);
  out.pass = out.max_deviation <= o.tol;
  return out;
}

CommandResult cmd_fuse_check(const FuseCheckOptions& o) {
  const FuseCheckOutcome f = run_fuse_trials(o);
  CommandResult r;
  r.exit_code = f.pass ? kExitOk : kExitCheckFailed;
  r.report = {{"command", "fuse-check"},
              {"trials", f.trials},
              {"width", o.width},
              {"spatial", o.spatial},
              {"branches", o.difference_only ? "difference-only" : "all-four"},
              {"corrupted", o.corrupt},
              {"max_deviation", f.max_deviation},
              {"tolerance", o.tol},
              {"seconds", f.seconds},
              {"pass", f.pass}};
  if (o.export_stem) r.report["exported"] = o.export_stem->string();
  return r;
}

// --- bench ----------------------------------------------------------------

std::vector<BenchShape> parse_bench_shapes(std::string_view text) {
  std::vector<BenchShape> shapes;
  while (!text.empty()) {
    const auto semi = text.find(';');
    std::string_view entry = text.substr(0, semi);
    text = semi == std::string_view::npos ? std::string_view{} : text.substr(semi + 1);
    if (entry.empty()) continue;
    std::vector<int> nums;
    while (!entry.empty()) {
      const auto comma = entry.find(',');
      const std::string_view tok = entry.substr(0, comma);
      int v = 0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      require(ec == std::errc{} && ptr == tok.data() + tok.size() && v >= 1,
              "bench: bad shape field '" + std::string(tok) + "'");
      nums.push_back(v);
      entry = comma == std::string_view::npos ? std::string_view{}
                                              : entry.substr(comma + 1);
    }
    require(nums.size() == 4 || nums.size() == 5,
            "bench: a shape is cin,cout,h,w[,batch]");
    shapes.push_back({nums.size() == 5 ? nums[4] : 1, nums[0], nums[1], nums[2],
                      nums[3]});
  }
  require(!shapes.empty(), "bench: empty shape list");
  return shapes;
}

std::vector<BenchShape> default_bench_shapes() {
  return {{1, 8, 8, 32, 32}, {1, 16, 16, 32, 32}, {1, 32, 32, 16, 16},
          {1, 16, 32, 64, 64}};
}

CommandResult cmd_bench(const BenchOptions& o) {
  require(o.reps >= 20, "bench: --reps must be >= 20");
  require(!o.shapes.empty(), "bench: no shapes");
  Rng rng = make_rng(o.seed, 0xbe0c);
  Json rows = Json::array();
  bool ratios_exact = true;
  for (const BenchShape& s : o.shapes) {
    const ConvBranchSet bs = random_branch_set(s.in_channels, s.out_channels, rng);
    const FusedConv fused = fuse(bs);
    const Tensor4 x =
        random_tensor({s.batch, s.in_channels, s.height, s.width}, rng);
    const std::vector<Conv2dParams> branches{
        Conv2dParams(cdc_effective_kernel(bs.w_cdc), bs.b_cdc, 1, 1, 1),
        Conv2dParams(hdc_effective_kernel(bs.w_hdc), bs.b_hdc, 1, 1, 1),
        Conv2dParams(vdc_effective_kernel(bs.w_vdc), bs.b_vdc, 1, 1, 1),
        Conv2dParams(bs.w_van, bs.b_van, 1, 1, 1)};

    std::vector<double> t_fused, t_branch;
    double sink = 0.0;
    for (int rep = 0; rep < o.reps; ++rep) {
      auto t0 = Clock::now();
      const Tensor4 yf = eeconv_forward_fused(x, fused);
      t_fused.push_back(seconds_since(t0) * 1e3);
      t0 = Clock::now();
      Tensor4 sum = conv2d(x, branches[0]);
      for (std::size_t b = 1; b < branches.size(); ++b) {
        sum = add(sum, conv2d(x, branches[b]));
      }
      const Tensor4 yb = activation(batchnorm_infer(sum, bs.bn), bs.act);
      t_branch.push_back(seconds_since(t0) * 1e3);
      sink += yf.values()[0] + yb.values()[0];
    }
    (void)sink;

    const auto fm =
        eeconv_fused_macs(s.batch, s.in_channels, s.out_channels, s.height, s.width);
    const auto bm = eeconv_branchwise_macs(s.batch, s.in_channels, s.out_channels,
                                           s.height, s.width);
    const ConvShape vanilla{s.batch, s.in_channels, s.out_channels, s.height, s.width};
    ratios_exact = ratios_exact && bm == 4 * fm && fm == flop_count(vanilla);
    rows.push_back({{"batch", s.batch},
                    {"in_channels", s.in_channels},
                    {"out_channels", s.out_channels},
                    {"height", s.height},
                    {"width", s.width},
                    {"fused_macs", fm},
                    {"branchwise_macs", bm},
                    {"vanilla_macs", flop_count(vanilla)},
                    {"mac_ratio", static_cast<double>(bm) / static_cast<double>(fm)},
                    {"fused_median_ms", median(t_fused)},
                    {"branchwise_median_ms", median(t_branch)}});
  }
  CommandResult r;
  r.report = {{"command", "bench"},
              {"reps", o.reps},
              {"mac_ratio_exact", ratios_exact},
              {"shapes", rows}};
  r.exit_code = ratios_exact ? kExitOk : kExitCheckFailed;
  return r;
}

// --- regress / gamma-curve ------------------------------------------------

CommandResult cmd_regress(const RegressOptions& o) {
  require(o.pairs >= 1, "regress: --pairs must be >= 1");
  RegressConfig cfg;
  cfg.steps = o.steps;
  cfg.lr = o.lr;
  cfg.loss.wise.alpha = o.alpha;
  cfg.loss.wise.delta = o.delta;
  cfg.loss.focaler.d = o.d;
  cfg.loss.focaler.u = o.u;
  cfg.loss.siou.theta = o.theta;
  cfg.loss.validate();

  const auto t0 = Clock::now();
  const RegressReport rep =
      regress_demo(make_regress_pairs(o.pairs, o.seed, o.min_iou), cfg);
  const double secs = seconds_since(t0);

  auto csv = open_out(o.out / "regress.csv");
  csv << "step,mean_loss,mean_iou,ema_mean,mean_gamma\n";
  csv.precision(10);
  int first_hit = -1;
  for (const RegressStep& s : rep.trajectory) {
    csv << s.step << ',' << s.mean_loss << ',' << s.mean_iou << ',' << s.ema_mean
        << ',' << s.mean_gamma << '\n';
    if (first_hit < 0 && s.mean_iou >= o.target_iou) first_hit = s.step;
  }

  CommandResult r;
  const bool pass = rep.final_mean_iou >= o.target_iou;
  r.exit_code = pass ? kExitOk : kExitCheckFailed;
  r.report = {{"command", "regress"},
              {"pairs", o.pairs},
              {"steps", o.steps},
              {"lr", o.lr},
              {"initial_mean_iou", rep.initial_mean_iou},
              {"final_mean_iou", rep.final_mean_iou},
              {"target_iou", o.target_iou},
              {"first_step_at_target", first_hit},
              {"diverged", rep.diverged},
              {"divergence_step", rep.divergence_step},
              {"final_ema_mean", rep.state.ema_mean},
              {"seconds", secs},
              {"pass", pass},
              {"csv", (o.out / "regress.csv").string()}};
  write_json(o.out / "regress-summary.json", r.report);
  return r;
}

CommandResult cmd_gamma_curve(const GammaCurveOptions& o) {
  require(o.samples >= 2, "gamma-curve: --samples must be >= 2");
  require(o.beta_max > 0.0, "gamma-curve: --beta-max must be > 0");
  WiseConfig cfg;
  cfg.alpha = o.alpha;
  cfg.delta = o.delta;
  cfg.validate();

  auto csv = open_out(o.out / "gamma-curve.csv");
  csv << "beta,gamma\n";
  csv.precision(12);
  double best_beta = 0.0, best_gamma = -1.0;
  for (int i = 0; i < o.samples; ++i) {
    const double beta = o.beta_max * i / (o.samples - 1);
    const double g = wise_gamma(beta, cfg);
    csv << beta << ',' << g << '\n';
    if (g > best_gamma) {
      best_gamma = g;
      best_beta = beta;
    }
  }
  CommandResult r;
  r.report = {{"command", "gamma-curve"},
              {"alpha", o.alpha},
              {"delta", o.delta},
              {"samples", o.samples},
              {"argmax_beta", best_beta},
              {"max_gamma", best_gamma},
              {"analytic_argmax", 1.0 / std::log(o.alpha)},
              {"gamma_at_delta", wise_gamma(o.delta, cfg)},
              {"csv", (o.out / "gamma-curve.csv").string()}};
  return r;
}

// --- featmap --------------------------------------------------------------

CommandResult cmd_featmap(const FeatmapOptions& o) {
  static const std::vector<std::string> kTaps{"post-branch", "pre-merge", "output"};
  require(o.tap == "all" || std::find(kTaps.begin(), kTaps.end(), o.tap) != kTaps.end(),
          "featmap: --tap must be post-branch, pre-merge, output or all");
  require(o.channels >= 2, "featmap: --channels must be >= 2");
  SceneSpec spec;
  spec.seed = o.seed;
  spec.image_size = std::max(o.size, 160);
  const Scene scene = generate_scene(spec, 0);
  const Tensor4 x = letterbox(scene.image, o.size).image;

  Rng rng = make_rng(o.seed, 0xfea7);
  const EEBlockParams block = fuse_block(random_eeblock(3, o.channels, 1, rng));
  const CsdmamParams att = random_csdmam(o.channels, o.strip_kernel, rng);
  CsdmamTaps taps;
  csdmam_forward(eeblock_forward(x, block), att, &taps);

  std::filesystem::create_directories(o.out);
  Json written = Json::array();
  auto dump = [&](const std::string& name, const Tensor4& t) {
    if (o.tap != "all" && o.tap != name) return;
    const auto path = o.out / ("featmap-" + name + ".pgm");
    write_featmap_pgm(path, t);
    written.push_back(path.string());
  };
  dump("post-branch", taps.dmam_out);
  dump("pre-merge", taps.pre_merge);
  dump("output", taps.output);

  CommandResult r;
  r.report = {{"command", "featmap"},
              {"size", o.size},
              {"channels", o.channels},
              {"strip_kernel", o.strip_kernel},
              {"tap", o.tap},
              {"files", written}};
  return r;
}

// --- pipeline -------------------------------------------------------------

std::vector<Detection> oracle_detector(std::span<const GroundTruth> gts,
                                       const LetterboxTransform& t,
                                       const OracleDetectorConfig& cfg, Rng& rng) {
  require(cfg.jitter >= 0 && cfg.score_noise >= 0 && cfg.shift >= 0,
          "oracle detector: noise levels must be >= 0");
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<Detection> dets;
  dets.reserve(gts.size());
  for (const GroundTruth& g : gts) {
    BoxCWH b = t.apply(g.box);
    if (cfg.jitter > 0.0) {
      b.cx += cfg.jitter * b.w * n01(rng);
      b.cy += cfg.jitter * b.h * n01(rng);
      b.w *= std::exp(cfg.jitter * n01(rng));
      b.h *= std::exp(cfg.jitter * n01(rng));
    }
    b.cx += cfg.shift * b.w;
    double score = 0.9;
    if (cfg.score_noise > 0.0) {
      score = std::clamp(score + cfg.score_noise * n01(rng), 1e-3, 1.0);
    }
    dets.push_back({g.image_id, g.class_id, t.invert(b), score});
  }
  return dets;
}

PipelineOutcome run_pipeline(const PipelineOptions& o) {
  require(o.images >= 1, "pipeline: --images must be >= 1");
  require(o.width >= 1, "pipeline: --width must be >= 1");
  require(o.input_size % kDefaultSpdScale == 0,
          "pipeline: --input-size must be even for the SPD stage");
  const auto t0 = Clock::now();
  SceneSpec spec;
  spec.seed = o.seed;
  spec.image_size = o.image_size;
  spec.max_objects = o.max_objects;

  Rng rng = make_rng(o.seed, 0x919e);
  const EEBlockParams block_train = random_eeblock(3, o.width, 1, rng);
  const EEBlockParams block = fuse_block(block_train);
  const SpdConfig spd(
      random_conv({2 * o.width, o.width * kDefaultSpdScale * kDefaultSpdScale},
                  rng),
      kDefaultSpdScale);
  const CsdmamParams att = random_csdmam(2 * o.width, o.strip_kernel, rng);
  Rng det_rng = make_rng(o.seed, 0xde7);

  PipelineOutcome out;
  for (int i = 0; i < o.images; ++i) {
    const Scene scene = generate_scene(spec, i);
    const LetterboxResult lb = letterbox(scene.image, o.input_size);
    const Tensor4 e = eeblock_forward(lb.image, block);
    if (i == 0) {
      out.block_fusion_deviation =
          max_abs_diff(e, eeblock_forward(lb.image, block_train));
    }
    const Tensor4 s = spdconv_forward(e, spd);
    CsdmamTaps taps;
    const Tensor4 y = csdmam_forward(s, att, &taps);
    if (!y.all_finite()) throw ConsistencyError("pipeline: non-finite features");

    if (i == 0 && o.featmaps) {
      std::filesystem::create_directories(o.out / "featmaps");
      const std::vector<std::pair<std::string, const Tensor4*>> dumps{
          {"eeblock", &e},
          {"spdconv", &s},
          {"csdmam-post-branch", &taps.dmam_out},
          {"csdmam-pre-merge", &taps.pre_merge},
          {"csdmam-output", &taps.output}};
      write_ppm(o.out / "featmaps" / "input.ppm", lb.image);
      out.featmaps.push_back((o.out / "featmaps" / "input.ppm").string());
      for (const auto& [name, t] : dumps) {
        const auto p = o.out / "featmaps" / (name + ".pgm");
        write_featmap_pgm(p, *t);
        out.featmaps.push_back(p.string());
      }
    }

    const auto gts = to_ground_truth(scene.layout.annotations);
    const auto dets = oracle_detector(gts, lb.transform, o.detector, det_rng);
    out.gts.insert(out.gts.end(), gts.begin(), gts.end());
    out.dets.insert(out.dets.end(), dets.begin(), dets.end());
  }
  out.eval = evaluate(out.dets, out.gts, EvalConfig{});
  out.seconds = seconds_since(t0);
  return out;
}

CommandResult cmd_pipeline(const PipelineOptions& o) {
  const PipelineOutcome p = run_pipeline(o);
  std::filesystem::create_directories(o.out);
  {
    auto gt = open_out(o.out / "ground_truth.jsonl");
    write_ground_truth_jsonl(gt, p.gts);
    auto det = open_out(o.out / "detections.jsonl");
    write_detections_jsonl(det, p.dets);
  }
  const Json eval = Json::parse(eval_report_json(p.eval));
  write_json(o.out / "eval-report.json", eval);

  CommandResult r;
  r.report = {{"command", "pipeline"},
              {"images", o.images},
              {"objects", p.gts.size()},
              {"detections", p.dets.size()},
              {"jitter", o.detector.jitter},
              {"shift", o.detector.shift},
              {"score_noise", o.detector.score_noise},
              {"block_fusion_deviation", p.block_fusion_deviation},
              {"map50", eval["map50"]},
              {"map50_95", eval["map50_95"]},
              {"featmaps", p.featmaps},
              {"seconds", p.seconds}};
  r.table = render_table(r.report) + eval_report_table(p.eval);
  return r;
}

// --- manifest -------------------------------------------------------------

void write_manifest(const std::filesystem::path& out, std::string_view command,
                    const Json& options, const CommandResult& result) {
  const Json m{{"tool", "tinydef"},
               {"command", command},
               {"options", options},
               {"exit_code", result.exit_code},
               {"report", result.report}};
  write_json(out / "run-manifest.json", m);
}

}  // namespace tinydef::cli
