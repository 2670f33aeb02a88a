#pragma once

#include <Eigen/Dense>

#include <array>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "courtreg/court.hpp"
#include "courtreg/heatmap.hpp"
#include "courtreg/homography.hpp"
#include "courtreg/pipeline.hpp"
#include "courtreg/rng.hpp"

namespace courtreg {

// Broadcast-style camera pose ranges. The camera sits behind the y = 0
// sideline, above the floor, with zero roll, aimed near the court center.
struct ViewSamplerConfig {
  double focal_px_min = 900.0;
  double focal_px_max = 1600.0;
  double camera_height_cm_min = 400.0;
  double camera_height_cm_max = 900.0;
  double camera_distance_cm_min = 800.0;
  double camera_distance_cm_max = 2500.0;
  double lateral_offset_cm = 800.0;   // +- around the halfway plane
  double look_at_jitter_cm = 400.0;   // +- around the court center, both axes
  int min_visible_keypoints = 20;
  // match footage keeps the court dominant in frame; views where the
  // projected court shrinks below this fraction of the frame area are
  // rejected (their keypoint disks merge into unusable supervision)
  double min_court_area_fraction = 0.7;
  int frame_width = 960;
  int frame_height = 540;
  int max_attempts = 100;

  void validate() const {
    if (!(focal_px_min > 0.0) || focal_px_max < focal_px_min)
      throw std::invalid_argument("view sampler: bad focal range");
    if (!(camera_height_cm_min > 0.0) || camera_height_cm_max < camera_height_cm_min)
      throw std::invalid_argument("view sampler: bad height range");
    if (!(camera_distance_cm_min > 0.0) || camera_distance_cm_max < camera_distance_cm_min)
      throw std::invalid_argument("view sampler: bad distance range");
    if (lateral_offset_cm < 0.0 || look_at_jitter_cm < 0.0)
      throw std::invalid_argument("view sampler: offsets must be non-negative");
    if (min_visible_keypoints < 4)
      throw std::invalid_argument("view sampler: at least 4 visible keypoints required");
    if (min_court_area_fraction < 0.0)
      throw std::invalid_argument("view sampler: area fraction must be non-negative");
    if (frame_width < 1 || frame_height < 1)
      throw std::invalid_argument("view sampler: frame must be non-empty");
    if (max_attempts < 1)
      throw std::invalid_argument("view sampler: max_attempts must be positive");
  }
};

namespace detail {

// Shoelace sign of the projected court boundary, corners in court order
// (0,0) -> (L,0) -> (L,W) -> (0,W). Cameras on the y = 0 side see this
// negative in y-down image coordinates.
inline double projected_court_area_sign(const std::array<Vec2, 4>& q) {
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec2& a = q[static_cast<std::size_t>(i)];
    const Vec2& b = q[static_cast<std::size_t>((i + 1) % 4)];
    acc += a.x() * b.y() - b.x() * a.y();
  }
  return acc;
}

}  // namespace detail

// Draws pinhole poses until one shows enough of the court: all four court
// corners project with positive depth into a 4x-enlarged frame window with
// consistent orientation, the projected court covers at least
// min_court_area_fraction of the frame, at least min_visible_keypoints grid
// points land inside the frame, and the induced homography is not
// degenerate. Throws when max_attempts rejections pass without success.
inline Homography sample_view_homography(const ViewSamplerConfig& cfg,
                                         const KeypointLayout& layout, Rng& rng) {
  cfg.validate();
  const double l = layout.court.length_cm, w = layout.court.width_cm;
  const double fw = cfg.frame_width, fh = cfg.frame_height;

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const double focal = rng.uniform(cfg.focal_px_min, cfg.focal_px_max);
    const double lateral = rng.uniform(-cfg.lateral_offset_cm, cfg.lateral_offset_cm);
    const double distance = rng.uniform(cfg.camera_distance_cm_min, cfg.camera_distance_cm_max);
    const double height = rng.uniform(cfg.camera_height_cm_min, cfg.camera_height_cm_max);
    const double look_x = l / 2.0 + rng.uniform(-cfg.look_at_jitter_cm, cfg.look_at_jitter_cm);
    const double look_y = w / 2.0 + rng.uniform(-cfg.look_at_jitter_cm, cfg.look_at_jitter_cm);

    const Eigen::Vector3d cam(l / 2.0 + lateral, -distance, height);
    const Eigen::Vector3d look(look_x, look_y, 0.0);
    const Eigen::Vector3d forward = (look - cam).normalized();
    Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ());
    const double rn = right.norm();
    if (rn < 1e-9) continue;  // looking straight down
    right /= rn;              // horizontal: zero roll
    const Eigen::Vector3d down = forward.cross(right);

    Eigen::Matrix3d rot;  // world -> camera
    rot.row(0) = right;
    rot.row(1) = down;
    rot.row(2) = forward;
    Eigen::Matrix3d k;
    k << focal, 0.0, fw / 2.0, 0.0, focal, fh / 2.0, 0.0, 0.0, 1.0;

    Eigen::Matrix3d m;
    m.col(0) = rot.col(0);
    m.col(1) = rot.col(1);
    m.col(2) = -rot * cam;
    m = k * m;
    // keep w positive exactly where depth is positive
    if (m(2, 2) <= kHomographyEps) continue;

    Homography h;
    try {
      h = Homography::from_matrix(m);
    } catch (const DegenerateInputError&) {
      continue;
    }

    const std::array<Vec2, 4> corners{Vec2(0.0, 0.0), Vec2(l, 0.0), Vec2(l, w), Vec2(0.0, w)};
    std::array<Vec2, 4> proj;
    bool ok = true;
    for (std::size_t i = 0; i < 4 && ok; ++i) {
      const Eigen::Vector3d q =
          h.matrix() * Eigen::Vector3d(corners[i].x(), corners[i].y(), 1.0);
      if (q.z() <= kHomographyEps) {
        ok = false;
        break;
      }
      proj[i] = Vec2(q.x() / q.z(), q.y() / q.z());
      ok = std::abs(proj[i].x() - fw / 2.0) <= 4.0 * fw && std::abs(proj[i].y() - fh / 2.0) <= 4.0 * fh;
    }
    if (!ok) continue;
    const double area2 = detail::projected_court_area_sign(proj);
    if (area2 >= 0.0) continue;
    if (std::abs(area2) / 2.0 < cfg.min_court_area_fraction * fw * fh) continue;

    int visible = 0;
    for (const auto& e : layout.entries) {
      if (e.role != ClassRole::court || !e.court_xy_cm) continue;
      const Eigen::Vector3d q =
          h.matrix() * Eigen::Vector3d(e.court_xy_cm->x(), e.court_xy_cm->y(), 1.0);
      if (q.z() <= kHomographyEps) continue;
      const double x = q.x() / q.z(), y = q.y() / q.z();
      if (x >= 0.0 && x < fw && y >= 0.0 && y < fh) ++visible;
    }
    if (visible < cfg.min_visible_keypoints) continue;
    if (is_degenerate(h)) continue;
    return h;
  }
  throw std::runtime_error("view sampler: rejection budget exhausted");
}

// Detector-noise model applied to a ground-truth class map: whole disks
// drop out to background, surviving disks jitter by a Gaussian offset, and
// false disks of random court classes appear. All-zero settings are an
// exact no-op.
struct CorruptionConfig {
  double dropout_rate = 0.0;
  double jitter_sigma_px = 0.0;  // heatmap pixels
  int false_blob_count = 0;
  std::uint64_t seed = 0;
  int disk_radius_px = 10;

  void validate() const {
    if (dropout_rate < 0.0 || dropout_rate > 1.0)
      throw std::invalid_argument("corruption: dropout_rate must be in [0, 1]");
    if (jitter_sigma_px < 0.0)
      throw std::invalid_argument("corruption: jitter_sigma_px must be non-negative");
    if (false_blob_count < 0)
      throw std::invalid_argument("corruption: false_blob_count must be non-negative");
    if (disk_radius_px < 0)
      throw std::invalid_argument("corruption: disk_radius_px must be non-negative");
  }
};

namespace detail {

struct DiskPixels {
  int class_id = 0;
  std::vector<std::size_t> pixels;
  Vec2 centroid{0.0, 0.0};
};

inline std::vector<DiskPixels> extract_disks(const ClassMap& map, std::uint16_t background,
                                             int num_classes) {
  std::vector<std::vector<std::size_t>> byclass(static_cast<std::size_t>(num_classes));
  std::size_t i = 0;
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x, ++i) {
      const std::uint16_t label = map.labels[i];
      if (label == background) continue;
      if (label >= num_classes)
        throw std::invalid_argument("corruption: label outside the layout classes");
      byclass[label].push_back(i);
    }
  std::vector<DiskPixels> disks;
  for (int c = 0; c < num_classes; ++c) {
    auto& px = byclass[static_cast<std::size_t>(c)];
    if (px.empty()) continue;
    DiskPixels d;
    d.class_id = c;
    double sx = 0.0, sy = 0.0;
    for (std::size_t p : px) {
      sx += static_cast<double>(p % static_cast<std::size_t>(map.width));
      sy += static_cast<double>(p / static_cast<std::size_t>(map.width));
    }
    d.centroid = Vec2(sx / static_cast<double>(px.size()), sy / static_cast<double>(px.size()));
    d.pixels = std::move(px);
    disks.push_back(std::move(d));
  }
  return disks;
}

}  // namespace detail

inline ClassMap corrupt_class_map(const ClassMap& map, const KeypointLayout& layout,
                                  const CorruptionConfig& cfg) {
  cfg.validate();
  const auto background = static_cast<std::uint16_t>(layout.background_id());
  const auto disks = detail::extract_disks(map, background, layout.num_classes);
  Rng rng(cfg.seed);

  struct Survivor {
    const detail::DiskPixels* disk;
    Vec2 offset;
  };
  std::vector<Survivor> survivors;
  bool any_jitter = false;
  for (const auto& d : disks) {
    if (rng.uniform() < cfg.dropout_rate) continue;
    Vec2 offset(0.0, 0.0);
    if (cfg.jitter_sigma_px > 0.0) {
      offset = Vec2(rng.normal(cfg.jitter_sigma_px), rng.normal(cfg.jitter_sigma_px));
      any_jitter = true;
    }
    survivors.push_back(Survivor{&d, offset});
  }

  if (!any_jitter && cfg.false_blob_count == 0) {
    // pure dropout: survivors keep their exact pixel sets
    ClassMap out = ClassMap::filled(map.height, map.width, background);
    for (const auto& s : survivors)
      for (std::size_t p : s.disk->pixels)
        out.labels[p] = static_cast<std::uint16_t>(s.disk->class_id);
    return out;
  }

  std::vector<int> court_classes;
  for (const auto& e : layout.entries)
    if (e.role == ClassRole::court) court_classes.push_back(e.id);
  if (cfg.false_blob_count > 0 && court_classes.empty())
    throw std::invalid_argument("corruption: layout has no court classes for false blobs");

  std::vector<DiskStamp> stamps;
  stamps.reserve(survivors.size() + static_cast<std::size_t>(cfg.false_blob_count));
  for (const auto& s : survivors)
    stamps.push_back(DiskStamp{s.disk->class_id, s.disk->centroid + s.offset});
  for (int b = 0; b < cfg.false_blob_count; ++b) {
    const int cls = court_classes[rng.uniform_index(court_classes.size())];
    const Vec2 center(rng.uniform(0.0, static_cast<double>(map.width)),
                      rng.uniform(0.0, static_cast<double>(map.height)));
    stamps.push_back(DiskStamp{cls, center});
  }
  return stamp_disks(stamps, map.height, map.width, cfg.disk_radius_px, background);
}

// Gaussian score bumps on the disk supports instead of one-hot labels; the
// remainder of each pixel's mass goes to background, so the tensor stays
// normalized.
inline HeatmapTensor soft_score_tensor(const ClassMap& map, const KeypointLayout& layout,
                                       int stride, int radius_px) {
  const auto background = static_cast<std::uint16_t>(layout.background_id());
  const auto disks = detail::extract_disks(map, background, layout.num_classes);
  HeatmapTensor t = HeatmapTensor::zeros(layout.num_classes, map.height, map.width, stride);
  const std::size_t p = t.plane();
  float* bg = t.scores.data() + static_cast<std::size_t>(background) * p;
  for (std::size_t i = 0; i < p; ++i) bg[i] = 1.0f;
  const double sigma = std::max(radius_px, 1) / 2.0;
  for (const auto& d : disks) {
    float* plane = t.scores.data() + static_cast<std::size_t>(d.class_id) * p;
    for (std::size_t px : d.pixels) {
      const double x = static_cast<double>(px % static_cast<std::size_t>(map.width));
      const double y = static_cast<double>(px / static_cast<std::size_t>(map.width));
      const double d2 = (Vec2(x, y) - d.centroid).squaredNorm();
      const auto score = static_cast<float>(std::exp(-d2 / (2.0 * sigma * sigma)));
      plane[px] = score;
      bg[px] = 1.0f - score;
    }
  }
  return t;
}

struct DatasetOptions {
  int stride = 4;
  int disk_radius_px = 10;
  bool soft_scores = false;      // Gaussian bumps instead of one-hot planes
  bool write_label_maps = false; // compact u16 files instead of float tensors
  int jobs = 1;
};

namespace detail {

inline std::string frame_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04zu", i);
  return buf;
}

}  // namespace detail

// Writes n frames (score tensor + ground-truth homography each), a manifest,
// and the average of all ground-truth homographies as fallback_average.json.
// Output is byte-identical for a fixed master_seed regardless of jobs.
inline Manifest generate_dataset(int n, const ViewSamplerConfig& view_cfg,
                                 const CorruptionConfig& corrupt_cfg,
                                 const KeypointLayout& layout,
                                 const std::filesystem::path& out_dir,
                                 std::uint64_t master_seed, const DatasetOptions& opts = {}) {
  if (n < 1) throw std::invalid_argument("generate: frame count must be positive");
  if (opts.stride < 1) throw std::invalid_argument("generate: stride must be positive");
  if (opts.disk_radius_px < 0) throw std::invalid_argument("generate: radius must be non-negative");
  if (opts.jobs < 1) throw std::invalid_argument("generate: jobs must be positive");
  view_cfg.validate();
  corrupt_cfg.validate();
  layout.validate();
  std::filesystem::create_directories(out_dir);

  Manifest manifest;
  manifest.frame_width = view_cfg.frame_width;
  manifest.frame_height = view_cfg.frame_height;
  manifest.base_dir = out_dir;
  manifest.frames.resize(static_cast<std::size_t>(n));
  std::vector<Homography> gts(static_cast<std::size_t>(n));

  auto run_frame = [&](std::size_t i) {
    const std::uint64_t frame_seed = derive_seed(master_seed, static_cast<std::uint64_t>(i));
    Rng view_rng(derive_seed(frame_seed, 0));
    const Homography gt = sample_view_homography(view_cfg, layout, view_rng);
    const ClassMap clean = render_gt_class_map(layout, gt, view_cfg.frame_width,
                                               view_cfg.frame_height, opts.stride,
                                               opts.disk_radius_px);
    CorruptionConfig cc = corrupt_cfg;
    cc.seed = derive_seed(frame_seed, 1);
    cc.disk_radius_px = opts.disk_radius_px;
    const ClassMap corrupted = corrupt_class_map(clean, layout, cc);

    const std::string id = detail::frame_id(i);
    const std::string tensor_name = id + ".kchm";
    const std::string gt_name = id + "_gt.json";
    if (opts.write_label_maps) {
      write_tensor_file(out_dir / tensor_name, corrupted);
    } else if (opts.soft_scores) {
      write_tensor_file(out_dir / tensor_name,
                        soft_score_tensor(corrupted, layout, opts.stride, opts.disk_radius_px));
    } else {
      write_tensor_file(out_dir / tensor_name,
                        one_hot_tensor(corrupted, layout.num_classes, opts.stride));
    }
    write_json_file(out_dir / gt_name, homography_to_json(gt));
    manifest.frames[i] = ManifestEntry{id, tensor_name, gt_name, std::nullopt};
    gts[i] = gt;
  };

  if (opts.jobs == 1) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) run_frame(i);
  } else {
    std::atomic<std::size_t> next{0};
    const auto total = static_cast<std::size_t>(n);
    auto worker = [&] {
      for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) run_frame(i);
    };
    std::vector<std::thread> pool;
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(opts.jobs), total);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  write_manifest_file(out_dir / "manifest.json", manifest);
  write_json_file(out_dir / "fallback_average.json",
                  homography_to_json(average_homography(gts, layout)));
  return manifest;
}

}  // namespace courtreg
