#include <sys/wait.h>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "courtreg/courtreg.hpp"
#include "courtreg/image.hpp"
#include "test_util.hpp"

namespace courtreg {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;
using testing::sample_view;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the installed binary through the shell, capturing streams into files.
RunResult run_cli(const std::string& args, const TempDir& dir) {
  const fs::path out = dir / "cli_stdout.txt";
  const fs::path err = dir / "cli_stderr.txt";
  const std::string cmd =
      std::string(COURTREG_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file())
      files[fs::relative(entry.path(), dir).string()] = slurp(entry.path());
  return files;
}

int count_color(const ImageRgb8& img, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  int n = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const std::uint8_t* p = img.px(x, y);
      n += p[0] == r && p[1] == g && p[2] == b;
    }
  return n;
}

TEST(Cli, HelpAndUsageExitCodes) {
  TempDir dir;
  EXPECT_EQ(run_cli("--help", dir).exit_code, 0);
  EXPECT_EQ(run_cli("", dir).exit_code, 1);
  EXPECT_EQ(run_cli("frobnicate", dir).exit_code, 1);
  EXPECT_EQ(run_cli("grid", dir).exit_code, 1);  // missing required --out
}

TEST(Cli, GridReportsTheRowProgression) {
  TempDir dir;
  const fs::path layout_path = dir / "layout.json";
  const RunResult r = run_cli("grid --out " + layout_path.string(), dir);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_TRUE(contains(r.out, "row gaps (cm): 175 205 235 265 295 325")) << r.out;
  EXPECT_TRUE(contains(r.out, "common difference: 30 cm")) << r.out;
  EXPECT_EQ(read_layout_file(layout_path).num_classes, 94);

  const RunResult uniform =
      run_cli("grid --w0-cm 250 --out " + (dir / "u.json").string(), dir);
  EXPECT_EQ(uniform.exit_code, 0);
  EXPECT_TRUE(contains(uniform.out, "uniform grid")) << uniform.out;

  const RunResult thin = run_cli("grid --rows 2 --out " + (dir / "t.json").string(), dir);
  EXPECT_EQ(thin.exit_code, 1);
  EXPECT_TRUE(contains(thin.err, "rows")) << thin.err;

  const RunResult infeasible = run_cli(
      "grid --width-cm 1000 --rows 3 --w0-cm 1100 --out " + (dir / "i.json").string(), dir);
  EXPECT_EQ(infeasible.exit_code, 1);
  EXPECT_TRUE(contains(infeasible.err, "gap")) << infeasible.err;
}

TEST(Cli, SynthEvalPipelineEndToEnd) {
  TempDir dir;
  const fs::path data = dir / "data";
  const RunResult synth =
      run_cli("synth --n 3 --seed 9 --labels --out " + data.string(), dir);
  ASSERT_EQ(synth.exit_code, 0) << synth.err;
  EXPECT_TRUE(contains(synth.out, "generated 3 frames")) << synth.out;
  for (const char* name :
       {"frame_0000.kchm", "frame_0002_gt.json", "manifest.json", "fallback_average.json"})
    EXPECT_TRUE(fs::exists(data / name)) << name;

  const fs::path layout = dir / "layout.json";
  ASSERT_EQ(run_cli("grid --out " + layout.string(), dir).exit_code, 0);

  const fs::path report_path = dir / "report.json";
  const RunResult eval = run_cli("eval --manifest " + (data / "manifest.json").string() +
                                     " --layout " + layout.string() + " --fallback " +
                                     (data / "fallback_average.json").string() + " --out " +
                                     report_path.string(),
                                 dir);
  ASSERT_EQ(eval.exit_code, 0) << eval.err;
  EXPECT_TRUE(contains(eval.out, "mean frame error:")) << eval.out;
  EXPECT_TRUE(contains(eval.out, "frames below 1 m: 100.0%")) << eval.out;

  const EvaluationReport report = report_from_json(read_json_file(report_path));
  EXPECT_EQ(report.frame_count, 3);
  EXPECT_EQ(report.failure_count, 0);
  EXPECT_EQ(report.pct_below_100cm, 100.0);
}

TEST(Cli, SynthIsDeterministicAtTheCliLevel) {
  TempDir dir;
  const std::string args = "synth --n 2 --seed 5 --labels --out ";
  ASSERT_EQ(run_cli(args + (dir / "a").string(), dir).exit_code, 0);
  ASSERT_EQ(run_cli(args + (dir / "b").string() + " --jobs 2", dir).exit_code, 0);
  EXPECT_EQ(read_tree(dir / "a"), read_tree(dir / "b"));
}

TEST(Cli, SynthRejectsBadFlags) {
  TempDir dir;
  const std::string out = " --out " + (dir / "d").string();
  EXPECT_EQ(run_cli("synth --n 0" + out, dir).exit_code, 1);
  EXPECT_EQ(run_cli("synth --n 1 --soft --labels" + out, dir).exit_code, 1);
  const RunResult r = run_cli("synth --n 1 --dropout 1.5" + out, dir);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_TRUE(contains(r.err, "error:")) << r.err;
}

TEST(Cli, EstimatePerfectFrameAndStrictFallback) {
  TempDir dir;
  const fs::path data = dir / "data";
  ASSERT_EQ(run_cli("synth --n 1 --seed 3 --labels --out " + data.string(), dir).exit_code, 0);
  const fs::path layout = dir / "layout.json";
  ASSERT_EQ(run_cli("grid --out " + layout.string(), dir).exit_code, 0);
  const std::string common = " --layout " + layout.string() + " --fallback " +
                             (data / "fallback_average.json").string();

  const fs::path result_path = dir / "result.json";
  const RunResult good = run_cli("estimate --heatmaps " + (data / "frame_0000.kchm").string() +
                                     common + " --out " + result_path.string(),
                                 dir);
  ASSERT_EQ(good.exit_code, 0) << good.err;
  EXPECT_TRUE(contains(good.out, "estimated from")) << good.out;
  const nlohmann::json result = read_json_file(result_path);
  EXPECT_FALSE(result.at("used_fallback").get<bool>());
  EXPECT_TRUE(result.at("fallback_reason").is_null());

  const fs::path blank_path = dir / "blank.kchm";
  write_tensor_file(blank_path, ClassMap::filled(135, 240, 93));
  const std::string blank_args =
      "estimate --heatmaps " + blank_path.string() + common + " --out " + result_path.string();
  const RunResult lenient = run_cli(blank_args, dir);
  EXPECT_EQ(lenient.exit_code, 0);
  EXPECT_TRUE(contains(lenient.out, "fallback used (too_few_keypoints)")) << lenient.out;
  EXPECT_EQ(run_cli(blank_args + " --strict", dir).exit_code, 3);
}

TEST(Cli, EstimateMissingInputIsADataError) {
  TempDir dir;
  const fs::path layout = dir / "layout.json";
  ASSERT_EQ(run_cli("grid --out " + layout.string(), dir).exit_code, 0);
  write_json_file(dir / "fallback.json", homography_to_json(sample_view(1)));
  const RunResult r = run_cli("estimate --heatmaps " + (dir / "absent.kchm").string() +
                                  " --layout " + layout.string() + " --fallback " +
                                  (dir / "fallback.json").string() + " --out " +
                                  (dir / "r.json").string(),
                              dir);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_TRUE(contains(r.err, "error:")) << r.err;
}

TEST(Cli, EvalUsageAndDataErrors) {
  TempDir dir;
  const fs::path layout = dir / "layout.json";
  ASSERT_EQ(run_cli("grid --out " + layout.string(), dir).exit_code, 0);
  write_json_file(dir / "fallback.json", homography_to_json(sample_view(1)));
  const std::string common = " --layout " + layout.string() + " --fallback " +
                             (dir / "fallback.json").string() + " --out " +
                             (dir / "report.json").string();

  write_json_file(dir / "empty.json",
                  nlohmann::json{{"frames", nlohmann::json::array()},
                                 {"frame_size", {960, 540}}});
  EXPECT_EQ(
      run_cli("eval --manifest " + (dir / "empty.json").string() + common + " --jobs 0", dir)
          .exit_code,
      1);
  EXPECT_EQ(run_cli("eval --manifest " + (dir / "empty.json").string() + common, dir).exit_code,
            2);
}

TEST(Cli, OverlayDrawsCourtLines) {
  TempDir dir;
  write_png(dir / "frame.png", ImageRgb8::filled(960, 540, 25, 70, 35));
  write_json_file(dir / "h.json", homography_to_json(sample_view(5)));
  write_json_file(dir / "court.json", template_to_json(CourtTemplate::fiba()));
  const fs::path out_path = dir / "overlay.png";
  const RunResult r = run_cli("overlay --image " + (dir / "frame.png").string() +
                                  " --homography " + (dir / "h.json").string() + " --template " +
                                  (dir / "court.json").string() + " --out " + out_path.string(),
                              dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(contains(r.out, "wrote")) << r.out;
  EXPECT_GT(count_color(read_png(out_path), 255, 221, 0), 300);
}

TEST(Cli, OverlayAcceptsEstimateResults) {
  TempDir dir;
  write_png(dir / "frame.png", ImageRgb8::filled(960, 540, 25, 70, 35));
  const nlohmann::json result{{"homography", homography_to_json(sample_view(5))},
                              {"inlier_count", 91},
                              {"decoded_count", 91},
                              {"used_fallback", false},
                              {"fallback_reason", nullptr}};
  write_json_file(dir / "result.json", result);
  write_json_file(dir / "court.json", template_to_json(CourtTemplate::fiba()));
  const fs::path out_path = dir / "overlay.png";
  const RunResult r = run_cli("overlay --image " + (dir / "frame.png").string() +
                                  " --homography " + (dir / "result.json").string() +
                                  " --template " + (dir / "court.json").string() + " --out " +
                                  out_path.string(),
                              dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_GT(count_color(read_png(out_path), 255, 221, 0), 300);
}

TEST(Cli, OverlayMalformedHomographyIsADataError) {
  TempDir dir;
  write_png(dir / "frame.png", ImageRgb8::filled(32, 32, 0, 0, 0));
  std::ofstream(dir / "h.json") << "{ not json";
  write_json_file(dir / "court.json", template_to_json(CourtTemplate::fiba()));
  const RunResult r = run_cli("overlay --image " + (dir / "frame.png").string() +
                                  " --homography " + (dir / "h.json").string() + " --template " +
                                  (dir / "court.json").string() + " --out " +
                                  (dir / "o.png").string(),
                              dir);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_TRUE(contains(r.err, "error:")) << r.err;
}

}  // namespace
}  // namespace courtreg
