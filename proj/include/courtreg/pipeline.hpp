#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "courtreg/court.hpp"
#include "courtreg/heatmap.hpp"
#include "courtreg/homography.hpp"
#include "courtreg/io.hpp"
#include "courtreg/rng.hpp"

namespace courtreg {

enum class FallbackReason { no_model, degenerate, too_few_keypoints };

inline const char* to_string(FallbackReason r) {
  switch (r) {
    case FallbackReason::no_model: return "no_model";
    case FallbackReason::degenerate: return "degenerate";
    case FallbackReason::too_few_keypoints: return "too_few_keypoints";
  }
  return "no_model";
}

inline std::optional<FallbackReason> fallback_reason_from_string(const std::string& s) {
  if (s == "no_model") return FallbackReason::no_model;
  if (s == "degenerate") return FallbackReason::degenerate;
  if (s == "too_few_keypoints") return FallbackReason::too_few_keypoints;
  return std::nullopt;
}

// Outcome of registering one frame. The homography is the estimate, or the
// supplied fallback when estimation was not possible; used_fallback and
// fallback_reason are set together.
struct RegistrationResult {
  Homography homography;
  int inlier_count = 0;
  int decoded_count = 0;
  bool used_fallback = false;
  std::optional<FallbackReason> fallback_reason;
};

// Decode, drop classes without court coordinates, fit robustly, and reject
// implausible results. Falls back (in this order of causes) when fewer than
// four usable keypoints decode, when RANSAC reaches no consensus, or when
// the fitted map is degenerate.
inline RegistrationResult estimate_frame(const HeatmapTensor& tensor,
                                         const KeypointLayout& layout,
                                         const RansacConfig& cfg, const Homography& fallback,
                                         int min_support = 3) {
  RegistrationResult out;
  const auto decoded = decode_keypoints(tensor, layout, min_support);
  out.decoded_count = static_cast<int>(decoded.size());

  std::vector<Correspondence> corrs;
  corrs.reserve(decoded.size());
  for (const auto& k : decoded) {
    const KeypointEntry& e = layout.entry(k.class_id);
    if (!e.usable_for_homography || !e.court_xy_cm) continue;
    corrs.push_back(Correspondence{k.class_id, *e.court_xy_cm, k.image_xy});
  }

  auto fall_back = [&](FallbackReason reason) {
    out.homography = fallback;
    out.inlier_count = 0;
    out.used_fallback = true;
    out.fallback_reason = reason;
    return out;
  };

  if (corrs.size() < 4) return fall_back(FallbackReason::too_few_keypoints);
  const RansacResult fit = ransac_homography(corrs, cfg);
  if (!fit.homography) return fall_back(FallbackReason::no_model);
  if (is_degenerate(*fit.homography)) return fall_back(FallbackReason::degenerate);
  out.homography = *fit.homography;
  out.inlier_count = fit.inlier_count;
  return out;
}

// Probes on the lower half of the frame, where the court is expected: middle
// and bottom row, left/center/right.
inline std::array<Vec2, 6> metric_probes(double frame_w, double frame_h) {
  return {Vec2(0.0, frame_h / 2.0), Vec2(frame_w / 2.0, frame_h / 2.0),
          Vec2(frame_w, frame_h / 2.0), Vec2(0.0, frame_h),
          Vec2(frame_w / 2.0, frame_h), Vec2(frame_w, frame_h)};
}

// RMS distance in court centimeters between the inverse projections of the
// probes under the two maps. +infinity when any probe maps to infinity.
inline double frame_error_cm(const Homography& gt, const Homography& est,
                             std::span<const Vec2> probes) {
  const Eigen::Matrix3d inv_gt = gt.inverse_matrix();
  const Eigen::Matrix3d inv_est = est.inverse_matrix();
  double acc = 0.0;
  for (const Vec2& p : probes) {
    const auto a = try_apply(inv_gt, p);
    const auto b = try_apply(inv_est, p);
    if (!a || !b) return std::numeric_limits<double>::infinity();
    acc += (*a - *b).squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(probes.size()));
}

inline double frame_error_cm(const Homography& gt, const Homography& est, double frame_w,
                             double frame_h) {
  const auto probes = metric_probes(frame_w, frame_h);
  return frame_error_cm(gt, est, std::span<const Vec2>(probes));
}

// ---- dataset manifest ----------------------------------------------------

struct ManifestEntry {
  std::string id;
  std::string heatmaps;       // tensor file, relative to the manifest
  std::string gt_homography;  // homography json, relative to the manifest
  std::optional<std::string> image;
};

struct Manifest {
  std::vector<ManifestEntry> frames;
  int frame_width = 960;
  int frame_height = 540;
  std::filesystem::path base_dir;  // entries resolve against this

  std::filesystem::path resolve(const std::string& rel) const {
    const std::filesystem::path p(rel);
    return p.is_absolute() ? p : base_dir / p;
  }
};

inline nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : m.frames) {
    nlohmann::json jf{{"id", f.id}, {"heatmaps", f.heatmaps}, {"gt_homography", f.gt_homography}};
    if (f.image) jf["image"] = *f.image;
    frames.push_back(jf);
  }
  return {{"frames", frames}, {"frame_size", {m.frame_width, m.frame_height}}};
}

inline Manifest manifest_from_json(const nlohmann::json& j,
                                   const std::filesystem::path& base_dir) {
  Manifest m;
  m.base_dir = base_dir;
  try {
    const auto& size = j.at("frame_size");
    if (!size.is_array() || size.size() != 2)
      throw IoError("manifest json: frame_size must be [width, height]");
    m.frame_width = size[0].get<int>();
    m.frame_height = size[1].get<int>();
    if (m.frame_width < 1 || m.frame_height < 1)
      throw IoError("manifest json: frame_size must be positive");
    for (const auto& jf : j.at("frames")) {
      ManifestEntry e;
      e.id = jf.at("id").get<std::string>();
      e.heatmaps = jf.at("heatmaps").get<std::string>();
      e.gt_homography = jf.at("gt_homography").get<std::string>();
      if (jf.contains("image")) e.image = jf.at("image").get<std::string>();
      m.frames.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("manifest json: ") + e.what());
  }
  return m;
}

inline Manifest read_manifest_file(const std::filesystem::path& path) {
  return manifest_from_json(read_json_file(path), path.parent_path());
}

inline void write_manifest_file(const std::filesystem::path& path, const Manifest& m) {
  write_json_file(path, manifest_to_json(m));
}

// ---- dataset evaluation ----------------------------------------------------

// One row per manifest entry. `failed` marks frames whose inputs could not
// be read or parsed; those carry no error value.
struct FrameRecord {
  std::string id;
  double error_cm = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string message;
  int inlier_count = 0;
  int decoded_count = 0;
  bool used_fallback = false;
  std::optional<FallbackReason> fallback_reason;
};

// per_frame_error_cm lists readable frames in manifest order. Failed frames
// are excluded from the mean but count against pct_below_100cm, which is a
// fraction of the whole manifest.
struct EvaluationReport {
  std::vector<double> per_frame_error_cm;
  double mean_error_cm = std::numeric_limits<double>::quiet_NaN();
  double global_rms_cm = std::numeric_limits<double>::quiet_NaN();
  double pct_below_100cm = 0.0;
  int frame_count = 0;
  int fallback_count = 0;
  int failure_count = 0;
  std::vector<FrameRecord> frames;
};

namespace detail {

inline HeatmapTensor tensor_for_frame(TensorFilePayload payload, const KeypointLayout& layout,
                                      int frame_width) {
  HeatmapTensor t;
  if (auto* scores = std::get_if<HeatmapTensor>(&payload)) {
    t = std::move(*scores);
  } else {
    t = one_hot_tensor(std::get<ClassMap>(payload), layout.num_classes);
  }
  if (t.width < 1 || frame_width % t.width != 0)
    throw IoError("heatmap width does not divide the frame width");
  t.stride = frame_width / t.width;
  return t;
}

}  // namespace detail

// Runs the registration pipeline over a manifest. Frames with unreadable or
// malformed inputs are flagged and the run continues. Per-frame RANSAC seeds
// derive from (cfg.seed, manifest index), so reports are identical for any
// `jobs` value.
inline EvaluationReport evaluate_dataset(const Manifest& manifest, const KeypointLayout& layout,
                                         const RansacConfig& cfg, const Homography& fallback,
                                         int jobs = 1) {
  if (manifest.frames.empty())
    throw std::invalid_argument("evaluate: empty dataset");
  if (jobs < 1) throw std::invalid_argument("evaluate: jobs must be positive");

  const std::size_t n = manifest.frames.size();
  std::vector<FrameRecord> records(n);

  auto run_frame = [&](std::size_t i) {
    FrameRecord& rec = records[i];
    const ManifestEntry& entry = manifest.frames[i];
    rec.id = entry.id;
    try {
      HeatmapTensor tensor = detail::tensor_for_frame(
          read_tensor_file(manifest.resolve(entry.heatmaps)), layout, manifest.frame_width);
      const Homography gt = read_homography_file(manifest.resolve(entry.gt_homography));
      RansacConfig frame_cfg = cfg;
      frame_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
      const RegistrationResult res = estimate_frame(tensor, layout, frame_cfg, fallback);
      rec.error_cm = frame_error_cm(gt, res.homography,
                                    static_cast<double>(manifest.frame_width),
                                    static_cast<double>(manifest.frame_height));
      rec.inlier_count = res.inlier_count;
      rec.decoded_count = res.decoded_count;
      rec.used_fallback = res.used_fallback;
      rec.fallback_reason = res.fallback_reason;
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.message = e.what();
    }
  };

  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) run_frame(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) run_frame(i);
    };
    std::vector<std::thread> pool;
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    pool.reserve(count);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  EvaluationReport report;
  report.frame_count = static_cast<int>(n);
  report.frames = std::move(records);
  double sum = 0.0, sum_sq = 0.0;
  int below = 0;
  for (const FrameRecord& rec : report.frames) {
    if (rec.failed) {
      ++report.failure_count;
      continue;
    }
    report.per_frame_error_cm.push_back(rec.error_cm);
    sum += rec.error_cm;
    sum_sq += rec.error_cm * rec.error_cm;
    if (rec.used_fallback) ++report.fallback_count;
    if (rec.error_cm < 100.0) ++below;
  }
  if (!report.per_frame_error_cm.empty()) {
    const auto m = static_cast<double>(report.per_frame_error_cm.size());
    report.mean_error_cm = sum / m;
    report.global_rms_cm = std::sqrt(sum_sq / m);
  }
  report.pct_below_100cm = 100.0 * below / static_cast<double>(n);
  return report;
}

namespace detail {

inline nlohmann::json error_to_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return "inf";
  return v;
}

inline double error_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

}  // namespace detail

inline nlohmann::json report_to_json(const EvaluationReport& r) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : r.frames) {
    nlohmann::json jf{{"id", f.id},
                      {"failed", f.failed},
                      {"error_cm", detail::error_to_json(f.error_cm)},
                      {"inlier_count", f.inlier_count},
                      {"decoded_count", f.decoded_count},
                      {"used_fallback", f.used_fallback},
                      {"fallback_reason",
                       f.fallback_reason ? nlohmann::json(to_string(*f.fallback_reason))
                                         : nlohmann::json(nullptr)}};
    if (f.failed) jf["message"] = f.message;
    frames.push_back(jf);
  }
  nlohmann::json per_frame = nlohmann::json::array();
  for (double v : r.per_frame_error_cm) per_frame.push_back(detail::error_to_json(v));
  return {{"mean_error_cm", detail::error_to_json(r.mean_error_cm)},
          {"global_rms_cm", detail::error_to_json(r.global_rms_cm)},
          {"pct_below_100cm", r.pct_below_100cm},
          {"frame_count", r.frame_count},
          {"fallback_count", r.fallback_count},
          {"failure_count", r.failure_count},
          {"per_frame_error_cm", per_frame},
          {"frames", frames}};
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
  EvaluationReport r;
  try {
    r.mean_error_cm = detail::error_from_json(j.at("mean_error_cm"));
    r.global_rms_cm = detail::error_from_json(j.at("global_rms_cm"));
    r.pct_below_100cm = j.at("pct_below_100cm").get<double>();
    r.frame_count = j.at("frame_count").get<int>();
    r.fallback_count = j.at("fallback_count").get<int>();
    r.failure_count = j.at("failure_count").get<int>();
    for (const auto& v : j.at("per_frame_error_cm"))
      r.per_frame_error_cm.push_back(detail::error_from_json(v));
    for (const auto& jf : j.at("frames")) {
      FrameRecord f;
      f.id = jf.at("id").get<std::string>();
      f.failed = jf.at("failed").get<bool>();
      f.error_cm = detail::error_from_json(jf.at("error_cm"));
      f.inlier_count = jf.at("inlier_count").get<int>();
      f.decoded_count = jf.at("decoded_count").get<int>();
      f.used_fallback = jf.at("used_fallback").get<bool>();
      if (!jf.at("fallback_reason").is_null())
        f.fallback_reason = fallback_reason_from_string(jf.at("fallback_reason").get<std::string>());
      if (jf.contains("message")) f.message = jf.at("message").get<std::string>();
      r.frames.push_back(f);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("report json: ") + e.what());
  }
  return r;
}

}  // namespace courtreg
