#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "badfusion/attack_config.hpp"
#include "badfusion/defenses.hpp"
#include "badfusion/error.hpp"
#include "badfusion/file_util.hpp"
#include "badfusion/fusion_sim.hpp"
#include "badfusion/kitti_io.hpp"
#include "badfusion/manifest.hpp"
#include "badfusion/metrics.hpp"
#include "badfusion/parallel.hpp"
#include "badfusion/poisoning.hpp"

namespace badfusion::cli {
namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string root;
  std::string out;
  std::string config;
  unsigned jobs = default_jobs();
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool verbose = false;
};

struct Context {
  GlobalOptions global;
  std::ostream& out;
  std::ostream& err;

  void log(const std::string& msg) const {
    if (global.verbose) err << "[badfusion] " << msg << "\n";
  }
};

fs::path require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorKind::InvalidArgument, std::string(flag) + " is required");
  return value;
}

std::optional<std::string> config_text(const Context& ctx) {
  if (ctx.global.config.empty()) return std::nullopt;
  return read_text(ctx.global.config);
}

// ---------------------------------------------------------------------------
// poison
// ---------------------------------------------------------------------------

struct PoisonArgs {
  std::string split{kStandardSplit};
  std::string predictions;
};

int cmd_poison(const Context& ctx, const PoisonArgs& args) {
  const fs::path root = require_path(ctx.global.root, "--root");
  const fs::path out = require_path(ctx.global.out, "--out");
  PoisonConfig config;
  if (const auto text = config_text(ctx)) config = parse_poison_config(*text);
  if (ctx.global.seed_given) config.rng_seed = ctx.global.seed;
  if (!args.predictions.empty()) {
    config.predictions = args.predictions;
    config.placement_source = PlacementSource::Predicted;
  }
  validate(config);

  const auto start = std::chrono::steady_clock::now();
  const DatasetIndex index = split_dataset(root, args.split);
  ctx.log("split: " + std::to_string(index.train_ids.size()) + " train / " +
          std::to_string(index.valid_ids.size()) + " val");
  const PoisonManifest manifest = poison_dataset(index, config, out, ctx.global.jobs);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ctx.log("finished in " + std::to_string(secs) + " s");

  ctx.out << "phase              " << to_string(config.phase) << "\n"
          << "goal               " << to_string(config.goal.kind) << "\n"
          << "split frames       " << manifest.totals.split_frames << "\n"
          << "frames poisoned    " << manifest.totals.poisoned_frames << "\n"
          << "vehicles poisoned  " << manifest.totals.poisoned_vehicles << "\n"
          << "frames skipped     " << manifest.totals.skipped << "\n";
  if (manifest.vehicle_count() > 0) {
    ctx.out << format_survival_summary(survival_histogram(manifest));
  }
  ctx.out << "manifest           " << (out / kManifestFileName).string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string manifest;
};

int cmd_analyze(const Context& ctx, const AnalyzeArgs& args) {
  fs::path manifest_path = args.manifest;
  if (manifest_path.empty()) {
    manifest_path = require_path(ctx.global.root, "--manifest or --root") / kManifestFileName;
  }
  const PoisonManifest manifest = read_manifest(manifest_path);
  const SurvivalStats stats = survival_histogram(manifest);
  const std::string csv = format_histogram_csv(stats);
  const std::string summary = format_survival_summary(stats);
  if (!ctx.global.out.empty()) {
    const fs::path out = ctx.global.out;
    ensure_directory(out);
    write_text(out / "effective_pixels.csv", csv);
    write_text(out / "effective_pixels_summary.txt", summary);
    ctx.log("wrote " + (out / "effective_pixels.csv").string());
  } else {
    ctx.out << csv;
  }
  ctx.out << summary;
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string clean_results;
  std::string poisoned_results;
  std::string manifest;
  std::string ground_truth;
  std::string ids;
  std::string goal;
};

EvalOptions parse_eval_options(std::string_view text, std::optional<GoalKind>& goal) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("eval config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::ParseError, "eval config must be a JSON object");
  EvalOptions o;
  try {
    if (j.contains("ap_iou_threshold")) o.ap.iou_threshold = j.at("ap_iou_threshold").get<double>();
    if (j.contains("ap_interpolation")) {
      const auto s = j.at("ap_interpolation").get<std::string>();
      if (s == "11-point") o.ap.interpolation = ApInterpolation::Point11;
      else if (s == "40-point") o.ap.interpolation = ApInterpolation::Point40;
      else throw Error(ErrorKind::InvalidArgument, "ap_interpolation must be 11-point or 40-point");
    }
    if (j.contains("ap_iou")) {
      const auto s = j.at("ap_iou").get<std::string>();
      if (s == "3d") o.ap.iou = IouKind::Box3D;
      else if (s == "bev") o.ap.iou = IouKind::Bev;
      else throw Error(ErrorKind::InvalidArgument, "ap_iou must be 3d or bev");
    }
    if (j.contains("match_iou")) o.match_iou = j.at("match_iou").get<double>();
    if (j.contains("shrink_ratio")) o.shrink_ratio = j.at("shrink_ratio").get<double>();
    if (j.contains("disappear_iou")) o.disappear_iou = j.at("disappear_iou").get<double>();
    if (j.contains("score_threshold")) o.score_threshold = j.at("score_threshold").get<double>();
    if (j.contains("goal")) {
      goal = goal_kind_from_string(j.at("goal").get<std::string>());
      if (!goal) throw Error(ErrorKind::InvalidArgument, "unknown goal " + j.at("goal").dump());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("eval config: ") + e.what());
  }
  return o;
}

int cmd_eval(const Context& ctx, const EvalArgs& args) {
  const fs::path clean_dir = require_path(args.clean_results, "--clean-results");
  const fs::path poisoned_dir = require_path(args.poisoned_results, "--poisoned-results");
  const PoisonManifest manifest = read_manifest(require_path(args.manifest, "--manifest"));

  std::optional<GoalKind> goal;
  EvalOptions options;
  if (const auto text = config_text(ctx)) options = parse_eval_options(*text, goal);
  if (!args.goal.empty()) {
    goal = goal_kind_from_string(args.goal);
    if (!goal) throw Error(ErrorKind::InvalidArgument, "unknown goal " + args.goal);
  }
  if (!goal) goal = manifest.config.goal.kind;

  fs::path gt_dir = args.ground_truth;
  std::vector<std::string> ids;
  if (!args.ids.empty()) {
    ids = read_id_list(args.ids);
  } else {
    const fs::path root = require_path(ctx.global.root, "--root or --ids");
    ids = split_dataset(root).valid_ids;
  }
  if (gt_dir.empty()) {
    gt_dir = DatasetLayout::for_root(require_path(ctx.global.root, "--root or --ground-truth"))
                 .label("x")
                 .parent_path();
  }
  ctx.log("evaluating " + std::to_string(ids.size()) + " frames");

  const FrameLabels gt = load_label_dir(gt_dir, ids, ErrorKind::MissingArtifact);
  const FrameLabels clean = load_label_dir(clean_dir, ids, ErrorKind::FrameMismatch);
  std::vector<std::string> poisoned_ids;
  for (const auto& f : manifest.frames) poisoned_ids.push_back(f.frame_id);
  const FrameLabels poisoned = load_label_dir(poisoned_dir, poisoned_ids, ErrorKind::FrameMismatch);

  const EvalReport report = evaluate(clean, poisoned, gt, manifest, *goal, options);
  if (!ctx.global.out.empty()) {
    const fs::path out = ctx.global.out;
    ensure_directory(out);
    write_text(out / "eval_report.json", format_eval_report(report));
    ctx.log("wrote " + (out / "eval_report.json").string());
  }
  ctx.out << format_eval_table(report);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// export-dense
// ---------------------------------------------------------------------------

struct ExportArgs {
  std::string split{kStandardSplit};
  std::string subset = "train";
  int width = 0;
  int height = 0;
  int stride = 0;
};

int cmd_export_dense(const Context& ctx, const ExportArgs& args) {
  const fs::path root = require_path(ctx.global.root, "--root");
  const fs::path out = require_path(ctx.global.out, "--out");
  PoisonConfig config;
  if (const auto text = config_text(ctx)) config = parse_poison_config(*text);
  const int w = args.width > 0 ? args.width : config.trigger.width;
  const int h = args.height > 0 ? args.height : config.trigger.height;
  const int stride = args.stride > 0 ? args.stride : config.stride;
  ExportSplit subset = ExportSplit::Train;
  if (args.subset == "val") subset = ExportSplit::Valid;
  else if (args.subset == "all") subset = ExportSplit::All;

  const DatasetIndex index = split_dataset(root, args.split);
  const auto summary = export_dense_region_dataset(index, w, h, out, subset, stride, ctx.global.jobs);
  if (summary.records == 0) {
    ctx.err << "warning: no vehicles with projected LiDAR points; wrote zero records\n";
  }
  ctx.out << "frames             " << summary.frames << "\n"
          << "records            " << summary.records << "\n"
          << "skipped vehicles   " << summary.skipped_vehicles << "\n"
          << "trigger size       " << w << "x" << h << "\n"
          << "annotations        " << (out / "annotations.json").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// defend
// ---------------------------------------------------------------------------

struct DefendArgs {
  std::string kind;
  std::optional<int> noise_max;
  std::optional<int> quality;
};

int cmd_defend(const Context& ctx, const DefendArgs& args) {
  const fs::path root = require_path(ctx.global.root, "--root");
  const fs::path out = require_path(ctx.global.out, "--out");
  DefenseSpec spec;
  if (const auto text = config_text(ctx)) spec = parse_defense_spec(*text);
  if (!args.kind.empty()) {
    const auto k = defense_kind_from_string(args.kind);
    if (!k) throw Error(ErrorKind::InvalidArgument, "unknown defense kind " + args.kind);
    spec.kind = *k;
  }
  if (args.noise_max) spec.noise_max = *args.noise_max;
  if (args.quality) spec.jpeg_quality = *args.quality;
  if (ctx.global.seed_given) spec.rng_seed = ctx.global.seed;
  spec.validate();

  const auto summary = apply_defense(root, spec, out, ctx.global.jobs);
  ctx.out << "defense            " << to_string(spec.kind) << "\n";
  if (spec.kind == DefenseKind::GaussianNoise) {
    ctx.out << "noise_max          " << spec.noise_max << "\n";
  } else {
    ctx.out << "jpeg_quality       " << spec.jpeg_quality << "\n";
  }
  ctx.out << "images             " << summary.images << "\n"
          << "files copied       " << summary.copied_files << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"BadFusion: poisoned LiDAR-camera dataset builder and evaluator", "badfusion"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(toolkit_version()));

  GlobalOptions global;
  if (const char* env = std::getenv("BADFUSION_ROOT"); env && *env) global.root = env;
  app.add_option("--root", global.root, "Dataset root (default: $BADFUSION_ROOT)");
  app.add_option("--out", global.out, "Output directory");
  app.add_option("--config", global.config, "JSON config file for the subcommand");
  app.add_option("--jobs", global.jobs, "Worker threads")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", global.seed, "RNG seed override");
  app.add_flag("--verbose,-v", global.verbose, "Progress messages on stderr");

  PoisonArgs poison_args;
  auto* poison = app.add_subcommand("poison", "Build a poisoned dataset and its manifest");
  poison->add_option("--split", poison_args.split,
                     "'standard' (root/ImageSets) or a directory with train.txt/val.txt");
  poison->add_option("--predictions", poison_args.predictions,
                     "Dense-region prediction file; switches placement to Predicted");

  AnalyzeArgs analyze_args;
  auto* analyze = app.add_subcommand("analyze", "Effective-pixel histogram of a manifest");
  analyze->add_option("--manifest", analyze_args.manifest,
                      "Manifest path (default: <root>/poison_manifest.json)");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Clean mAP, poisoned mAP and ASR");
  eval->add_option("--clean-results", eval_args.clean_results, "Detections on clean inputs")->required();
  eval->add_option("--poisoned-results", eval_args.poisoned_results, "Detections on triggered inputs")
      ->required();
  eval->add_option("--manifest", eval_args.manifest, "Manifest of the triggered inputs")->required();
  eval->add_option("--ground-truth", eval_args.ground_truth,
                   "Clean label directory (default: the root's label_2)");
  eval->add_option("--ids", eval_args.ids, "Frame id list (default: the root's val split)");
  eval->add_option("--goal", eval_args.goal, "Resizing | DisappearFarther | DisappearCloser");

  ExportArgs export_args;
  auto* export_dense = app.add_subcommand("export-dense", "Dense-region training set for a predictor");
  export_dense->add_option("--split", export_args.split, "Split source, as for poison");
  export_dense->add_option("--subset", export_args.subset, "Frames to export")
      ->check(CLI::IsMember({"train", "val", "all"}));
  export_dense->add_option("--width", export_args.width, "Trigger width")->check(CLI::PositiveNumber);
  export_dense->add_option("--height", export_args.height, "Trigger height")->check(CLI::PositiveNumber);
  export_dense->add_option("--stride", export_args.stride, "Sliding-window stride")
      ->check(CLI::PositiveNumber);

  DefendArgs defend_args;
  int noise_max = 0, quality = 0;
  auto* defend = app.add_subcommand("defend", "Apply an input-space defense to every camera image");
  defend->add_option("--kind", defend_args.kind, "GaussianNoise | JpegCompress");
  auto* noise_opt = defend->add_option("--noise-max", noise_max, "Noise amplitude bound (0..255)");
  auto* quality_opt = defend->add_option("--quality", quality, "JPEG quality (1..100)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  global.seed_given = seed_opt->count() > 0;
  if (*noise_opt) defend_args.noise_max = noise_max;
  if (*quality_opt) defend_args.quality = quality;

  Context ctx{global, out, err};
  try {
    if (*poison) return cmd_poison(ctx, poison_args);
    if (*analyze) return cmd_analyze(ctx, analyze_args);
    if (*eval) return cmd_eval(ctx, eval_args);
    if (*export_dense) return cmd_export_dense(ctx, export_args);
    if (*defend) return cmd_defend(ctx, defend_args);
  } catch (const Error& e) {
    err << "badfusion: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "badfusion: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace badfusion::cli
