// Command line front end: layout generation, synthetic datasets, per-frame
// estimation, dataset evaluation, and overlay rendering.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 fallback under
// --strict (estimate only).

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

#include "courtreg/courtreg.hpp"
#include "courtreg/image.hpp"

namespace {

using namespace courtreg;

constexpr int kOk = 0;
constexpr int kUsageError = 1;
constexpr int kDataError = 2;
constexpr int kStrictFallback = 3;

CameraSide parse_camera_side(const std::string& s) {
  if (s == "y_zero") return CameraSide::y_zero;
  if (s == "y_max") return CameraSide::y_max;
  throw std::invalid_argument("camera side must be y_zero or y_max");
}

struct GridArgs {
  double length_cm = 2800.0;
  double width_cm = 1500.0;
  int rows = 7;
  int cols = 13;
  double w0_cm = 175.0;
  std::string camera_side = "y_zero";
  std::string out;
};

int run_grid(const GridArgs& args) {
  KeypointLayout layout;
  std::vector<double> offsets;
  double r = 0.0;
  try {
    SamplingSpec spec;
    spec.rows = args.rows;
    spec.cols = args.cols;
    spec.w0_cm = args.w0_cm;
    spec.camera_side = parse_camera_side(args.camera_side);
    offsets = perspective_offsets(args.width_cm, args.rows, args.w0_cm);
    r = perspective_common_difference(args.width_cm, args.rows, args.w0_cm);
    layout = build_layout(CourtTemplate::rectangular(args.length_cm, args.width_cm), spec);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  }

  std::printf("row gaps (cm):");
  for (std::size_t i = 0; i + 1 < offsets.size(); ++i)
    std::printf(" %g", offsets[i + 1] - offsets[i]);
  std::printf("\n");
  if (r == 0.0)
    std::printf("uniform grid (common difference 0)\n");
  else
    std::printf("common difference: %g cm\n", r);

  try {
    write_json_file(args.out, layout_to_json(layout));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  }
  std::printf("wrote %d-class layout to %s\n", layout.num_classes, args.out.c_str());
  return kOk;
}

struct SynthArgs {
  int n = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string layout_path;
  double dropout = 0.0;
  double jitter = 0.0;
  int blobs = 0;
  int stride = 4;
  int radius = 10;
  int min_visible = 20;
  double min_area = 0.7;
  bool soft = false;
  bool labels = false;
  int jobs = 1;
};

int run_synth(const SynthArgs& args) {
  ViewSamplerConfig view_cfg;
  CorruptionConfig corrupt_cfg;
  DatasetOptions opts;
  try {
    if (args.n < 1) throw std::invalid_argument("--n must be at least 1");
    view_cfg.min_visible_keypoints = args.min_visible;
    view_cfg.min_court_area_fraction = args.min_area;
    view_cfg.validate();
    corrupt_cfg.dropout_rate = args.dropout;
    corrupt_cfg.jitter_sigma_px = args.jitter;
    corrupt_cfg.false_blob_count = args.blobs;
    corrupt_cfg.disk_radius_px = args.radius;
    corrupt_cfg.validate();
    opts.stride = args.stride;
    opts.disk_radius_px = args.radius;
    opts.soft_scores = args.soft;
    opts.write_label_maps = args.labels;
    opts.jobs = args.jobs;
    if (opts.stride < 1) throw std::invalid_argument("--stride must be at least 1");
    if (opts.jobs < 1) throw std::invalid_argument("--jobs must be at least 1");
    if (args.soft && args.labels)
      throw std::invalid_argument("--soft and --labels are mutually exclusive");
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  }

  try {
    const KeypointLayout layout = args.layout_path.empty()
                                      ? build_layout(CourtTemplate::fiba(), SamplingSpec{})
                                      : read_layout_file(args.layout_path);
    generate_dataset(args.n, view_cfg, corrupt_cfg, layout, args.out, args.seed, opts);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  }
  std::printf("generated %d frames in %s\n", args.n, args.out.c_str());
  return kOk;
}

struct EstimateArgs {
  std::string heatmaps;
  std::string layout;
  std::string fallback;
  std::string out;
  std::uint64_t seed = 0;
  double threshold_px = 35.0;
  int min_support = 3;
  int stride = 4;
  bool strict = false;
};

int run_estimate(const EstimateArgs& args) {
  RansacConfig cfg;
  try {
    cfg.reproj_threshold_px = args.threshold_px;
    cfg.seed = args.seed;
    cfg.validate();
    if (args.min_support < 1) throw std::invalid_argument("--min-support must be at least 1");
    if (args.stride < 1) throw std::invalid_argument("--stride must be at least 1");
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  }

  RegistrationResult result;
  try {
    const KeypointLayout layout = read_layout_file(args.layout);
    const Homography fallback = read_homography_file(args.fallback);
    HeatmapTensor tensor;
    auto payload = read_tensor_file(args.heatmaps);
    if (auto* scores = std::get_if<HeatmapTensor>(&payload)) {
      tensor = std::move(*scores);
    } else {
      tensor = one_hot_tensor(std::get<ClassMap>(payload), layout.num_classes);
    }
    tensor.stride = args.stride;
    result = estimate_frame(tensor, layout, cfg, fallback, args.min_support);

    nlohmann::json j = {
        {"homography", homography_to_json(result.homography)},
        {"inlier_count", result.inlier_count},
        {"decoded_count", result.decoded_count},
        {"used_fallback", result.used_fallback},
        {"fallback_reason", result.fallback_reason
                                ? nlohmann::json(to_string(*result.fallback_reason))
                                : nlohmann::json(nullptr)},
    };
    write_json_file(args.out, j);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  }

  if (result.used_fallback)
    std::printf("fallback used (%s), %d keypoints decoded\n",
                to_string(*result.fallback_reason), result.decoded_count);
  else
    std::printf("estimated from %d inliers of %d decoded keypoints\n", result.inlier_count,
                result.decoded_count);
  if (args.strict && result.used_fallback) return kStrictFallback;
  return kOk;
}

struct EvalArgs {
  std::string manifest;
  std::string layout;
  std::string fallback;
  std::string out;
  std::uint64_t seed = 0;
  double threshold_px = 35.0;
  int min_support = 3;
  int jobs = 1;
};

int run_eval(const EvalArgs& args) {
  RansacConfig cfg;
  try {
    cfg.reproj_threshold_px = args.threshold_px;
    cfg.seed = args.seed;
    cfg.validate();
    if (args.min_support < 1) throw std::invalid_argument("--min-support must be at least 1");
    if (args.jobs < 1) throw std::invalid_argument("--jobs must be at least 1");
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  }

  EvaluationReport report;
  try {
    const Manifest manifest = read_manifest_file(args.manifest);
    const KeypointLayout layout = read_layout_file(args.layout);
    const Homography fallback = read_homography_file(args.fallback);
    report = evaluate_dataset(manifest, layout, cfg, fallback, args.jobs);
    write_json_file(args.out, report_to_json(report));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  }

  std::printf("mean frame error: %.2f cm\n", report.mean_error_cm);
  std::printf("frames below 1 m: %.1f%%\n", report.pct_below_100cm);
  std::printf("fallbacks: %d/%d, failures: %d/%d\n", report.fallback_count, report.frame_count,
              report.failure_count, report.frame_count);
  return kOk;
}

struct OverlayArgs {
  std::string image;
  std::string homography;
  std::string court_template;
  std::string out;
};

int run_overlay(const OverlayArgs& args) {
  try {
    ImageRgb8 img = read_png(args.image);
    nlohmann::json hj = read_json_file(args.homography);
    if (hj.is_object() && hj.contains("homography")) hj = hj.at("homography");  // estimate output
    const Homography h = homography_from_json(hj);
    const CourtTemplate court = template_from_json(read_json_file(args.court_template));
    draw_court_overlay(img, court, h);
    write_png(args.out, img);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  }
  std::printf("wrote %s\n", args.out.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planar court registration toolkit"};
  app.require_subcommand(1);

  GridArgs grid;
  CLI::App* grid_cmd = app.add_subcommand("grid", "build a keypoint layout");
  grid_cmd->add_option("--length-cm", grid.length_cm, "court length in cm");
  grid_cmd->add_option("--width-cm", grid.width_cm, "court width in cm");
  grid_cmd->add_option("--rows", grid.rows, "keypoint rows across the width");
  grid_cmd->add_option("--cols", grid.cols, "keypoint columns along the length");
  grid_cmd->add_option("--w0-cm", grid.w0_cm, "gap between the two rows nearest the camera");
  grid_cmd->add_option("--camera-side", grid.camera_side, "y_zero or y_max");
  grid_cmd->add_option("--out", grid.out, "layout json path")->required();

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--n", synth.n, "number of frames")->required();
  synth_cmd->add_option("--seed", synth.seed, "master seed");
  synth_cmd->add_option("--out", synth.out, "output directory")->required();
  synth_cmd->add_option("--layout", synth.layout_path, "layout json (default: FIBA grid)");
  synth_cmd->add_option("--dropout", synth.dropout, "per-disk dropout rate");
  synth_cmd->add_option("--jitter", synth.jitter, "disk jitter sigma, heatmap px");
  synth_cmd->add_option("--blobs", synth.blobs, "false disks per frame");
  synth_cmd->add_option("--stride", synth.stride, "heatmap stride");
  synth_cmd->add_option("--radius", synth.radius, "disk radius, heatmap px");
  synth_cmd->add_option("--min-visible", synth.min_visible, "visible keypoints required per view");
  synth_cmd->add_option("--min-area", synth.min_area,
                        "projected court area required, as a fraction of the frame");
  synth_cmd->add_option("--jobs", synth.jobs, "worker threads");
  synth_cmd->add_flag("--soft", synth.soft, "write gaussian score bumps instead of one-hot");
  synth_cmd->add_flag("--labels", synth.labels, "write compact label maps instead of scores");

  EstimateArgs estimate;
  CLI::App* estimate_cmd = app.add_subcommand("estimate", "register one frame");
  estimate_cmd->add_option("--heatmaps", estimate.heatmaps, "tensor file")->required();
  estimate_cmd->add_option("--layout", estimate.layout, "layout json")->required();
  estimate_cmd->add_option("--fallback", estimate.fallback, "fallback homography json")->required();
  estimate_cmd->add_option("--out", estimate.out, "result json path")->required();
  estimate_cmd->add_option("--seed", estimate.seed, "ransac seed");
  estimate_cmd->add_option("--threshold-px", estimate.threshold_px, "inlier threshold, px");
  estimate_cmd->add_option("--min-support", estimate.min_support, "decode support threshold");
  estimate_cmd->add_option("--stride", estimate.stride, "heatmap stride");
  estimate_cmd->add_flag("--strict", estimate.strict, "exit 3 when the fallback is used");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a dataset");
  eval_cmd->add_option("--manifest", eval.manifest, "manifest json")->required();
  eval_cmd->add_option("--layout", eval.layout, "layout json")->required();
  eval_cmd->add_option("--fallback", eval.fallback, "fallback homography json")->required();
  eval_cmd->add_option("--out", eval.out, "report json path")->required();
  eval_cmd->add_option("--seed", eval.seed, "ransac seed");
  eval_cmd->add_option("--threshold-px", eval.threshold_px, "inlier threshold, px");
  eval_cmd->add_option("--min-support", eval.min_support, "decode support threshold");
  eval_cmd->add_option("--jobs", eval.jobs, "worker threads");

  OverlayArgs overlay;
  CLI::App* overlay_cmd = app.add_subcommand("overlay", "draw court lines on a frame");
  overlay_cmd->add_option("--image", overlay.image, "input png")->required();
  overlay_cmd->add_option("--homography", overlay.homography,
                          "homography json, or an estimate result")
      ->required();
  overlay_cmd->add_option("--template", overlay.court_template, "court template json")->required();
  overlay_cmd->add_option("--out", overlay.out, "output png")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  if (grid_cmd->parsed()) return run_grid(grid);
  if (synth_cmd->parsed()) return run_synth(synth);
  if (estimate_cmd->parsed()) return run_estimate(estimate);
  if (eval_cmd->parsed()) return run_eval(eval);
  if (overlay_cmd->parsed()) return run_overlay(overlay);
  return kUsageError;
}
