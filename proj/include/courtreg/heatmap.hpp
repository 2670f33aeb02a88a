#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "courtreg/court.hpp"
#include "courtreg/homography.hpp"

namespace courtreg {

// Per-class score planes at reduced resolution, channel-major then row-major.
// `stride` is the input-to-heatmap downscale factor; it is carried alongside
// the data because decoded coordinates are reported in input pixels.
struct HeatmapTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  int stride = 4;
  std::vector<float> scores;

  static HeatmapTensor zeros(int c, int h, int w, int stride = 4) {
    if (c < 1 || h < 1 || w < 1 || stride < 1)
      throw std::invalid_argument("heatmap tensor: dimensions must be positive");
    HeatmapTensor t;
    t.channels = c;
    t.height = h;
    t.width = w;
    t.stride = stride;
    t.scores.assign(static_cast<std::size_t>(c) * h * w, 0.0f);
    return t;
  }

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }

  float at(int c, int y, int x) const {
    return scores[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float& at(int c, int y, int x) {
    return scores[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  // true when every pixel carries a distribution: non-negative scores
  // summing to one within `tol`
  bool is_normalized(double tol = 1e-4) const {
    const std::size_t p = plane();
    std::vector<double> sums(p, 0.0);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] < 0.0f) return false;
      sums[i % p] += scores[i];
    }
    for (double s : sums)
      if (std::abs(s - 1.0) > tol) return false;
    return true;
  }
};

// Hard class labels at heatmap resolution, row-major.
struct ClassMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint16_t> labels;

  static ClassMap filled(int h, int w, std::uint16_t label) {
    if (h < 1 || w < 1)
      throw std::invalid_argument("class map: dimensions must be positive");
    ClassMap m;
    m.height = h;
    m.width = w;
    m.labels.assign(static_cast<std::size_t>(h) * w, label);
    return m;
  }

  std::uint16_t at(int y, int x) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint16_t& at(int y, int x) {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
};

struct DecodedKeypoint {
  int class_id = -1;
  Vec2 image_xy{0.0, 0.0};  // input pixels
  int support = 0;          // winning pixels
  double score = 0.0;       // mean winning score
};

// Heatmap cell (hx, hy) covers a stride x stride block of input pixels; its
// center sits at stride*h + (stride-1)/2. Both directions of that map.
inline Vec2 heatmap_to_input(const Vec2& hm_xy, int stride) {
  const double off = (stride - 1) * 0.5;
  return Vec2(hm_xy.x() * stride + off, hm_xy.y() * stride + off);
}

inline Vec2 input_to_heatmap(const Vec2& input_xy, int stride) {
  const double off = (stride - 1) * 0.5;
  return Vec2((input_xy.x() - off) / stride, (input_xy.y() - off) / stride);
}

// One ground-truth disk: a class id and its center in heatmap coordinates.
struct DiskStamp {
  int class_id = 0;
  Vec2 center_hm{0.0, 0.0};
};

// Paints disks of `radius_px` onto a background-filled map. Centers land on
// the pixel lattice (nearest cell); where disks overlap the nearer center
// wins and exact ties go to the lower class id. The result is independent of
// stamp order.
inline ClassMap stamp_disks(std::span<const DiskStamp> stamps, int height, int width,
                            int radius_px, std::uint16_t background) {
  if (radius_px < 0) throw std::invalid_argument("stamp disks: radius must be non-negative");
  ClassMap out = ClassMap::filled(height, width, background);
  if (stamps.empty()) return out;
  std::vector<long> best_d2(out.labels.size(), std::numeric_limits<long>::max());
  const long r2 = static_cast<long>(radius_px) * radius_px;
  for (const DiskStamp& s : stamps) {
    const long cx = std::lround(s.center_hm.x());
    const long cy = std::lround(s.center_hm.y());
    const long x0 = std::max(0l, cx - radius_px), x1 = std::min<long>(width - 1, cx + radius_px);
    const long y0 = std::max(0l, cy - radius_px), y1 = std::min<long>(height - 1, cy + radius_px);
    for (long y = y0; y <= y1; ++y) {
      const long dy2 = (y - cy) * (y - cy);
      for (long x = x0; x <= x1; ++x) {
        const long d2 = (x - cx) * (x - cx) + dy2;
        if (d2 > r2) continue;
        const std::size_t i = static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x);
        if (d2 < best_d2[i] || (d2 == best_d2[i] && s.class_id < out.labels[i])) {
          best_d2[i] = d2;
          out.labels[i] = static_cast<std::uint16_t>(s.class_id);
        }
      }
    }
  }
  return out;
}

// Projects every located layout keypoint into the image and stamps its disk
// at heatmap resolution. Points behind the camera (non-positive w) and
// centers farther than the radius outside the map are omitted.
inline ClassMap render_gt_class_map(const KeypointLayout& layout, const Homography& h,
                                    int input_width, int input_height, int stride = 4,
                                    int radius_px = 10) {
  if (input_width < 1 || input_height < 1 || stride < 1)
    throw std::invalid_argument("render: frame dimensions and stride must be positive");
  const int hm_w = input_width / stride, hm_h = input_height / stride;
  if (hm_w < 1 || hm_h < 1)
    throw std::invalid_argument("render: frame smaller than one heatmap cell");
  std::vector<DiskStamp> stamps;
  const Eigen::Matrix3d& m = h.matrix();
  for (const auto& e : layout.entries) {
    if (!e.court_xy_cm) continue;
    const Eigen::Vector3d q = m * Eigen::Vector3d(e.court_xy_cm->x(), e.court_xy_cm->y(), 1.0);
    if (q.z() <= kHomographyEps) continue;
    const Vec2 c = input_to_heatmap(Vec2(q.x() / q.z(), q.y() / q.z()), stride);
    if (c.x() < -radius_px || c.x() > hm_w - 1 + radius_px || c.y() < -radius_px ||
        c.y() > hm_h - 1 + radius_px)
      continue;
    stamps.push_back(DiskStamp{e.id, c});
  }
  return stamp_disks(stamps, hm_h, hm_w, radius_px, static_cast<std::uint16_t>(layout.background_id()));
}

// Per-pixel argmax (ties to the lower class), then a score-weighted centroid
// per class. Classes with fewer than `min_support` winning pixels and the
// background class yield no keypoint. Results are ordered by class id.
inline std::vector<DecodedKeypoint> decode_keypoints(const HeatmapTensor& t,
                                                     const KeypointLayout& layout,
                                                     int min_support = 3) {
  if (t.channels != layout.num_classes)
    throw std::invalid_argument("decode: tensor channels do not match layout classes");
  if (min_support < 1) throw std::invalid_argument("decode: min_support must be at least 1");
  const std::size_t p = t.plane();
  std::vector<float> best_score(t.scores.begin(), t.scores.begin() + static_cast<std::ptrdiff_t>(p));
  std::vector<std::uint16_t> best_class(p, 0);
  for (int c = 1; c < t.channels; ++c) {
    const float* sc = t.scores.data() + static_cast<std::size_t>(c) * p;
    for (std::size_t i = 0; i < p; ++i) {
      if (sc[i] > best_score[i]) {
        best_score[i] = sc[i];
        best_class[i] = static_cast<std::uint16_t>(c);
      }
    }
  }

  struct Acc {
    double wx = 0.0, wy = 0.0, w = 0.0, ux = 0.0, uy = 0.0;
    int n = 0;
  };
  std::vector<Acc> acc(static_cast<std::size_t>(t.channels));
  std::size_t i = 0;
  for (int y = 0; y < t.height; ++y) {
    for (int x = 0; x < t.width; ++x, ++i) {
      Acc& a = acc[best_class[i]];
      const double s = best_score[i];
      a.wx += s * x;
      a.wy += s * y;
      a.w += s;
      a.ux += x;
      a.uy += y;
      ++a.n;
    }
  }

  std::vector<DecodedKeypoint> out;
  for (int c = 0; c < t.channels; ++c) {
    if (c == layout.background_id()) continue;
    const Acc& a = acc[static_cast<std::size_t>(c)];
    if (a.n < min_support) continue;
    DecodedKeypoint k;
    k.class_id = c;
    const Vec2 centroid = a.w > 0.0 ? Vec2(a.wx / a.w, a.wy / a.w)
                                    : Vec2(a.ux / a.n, a.uy / a.n);
    k.image_xy = heatmap_to_input(centroid, t.stride);
    k.support = a.n;
    k.score = a.w / a.n;
    out.push_back(k);
  }
  return out;
}

// Loss weights favoring keypoint classes over background by three orders of
// magnitude; the background dominates the pixel count otherwise.
inline std::vector<double> keypoint_class_weights(const KeypointLayout& layout,
                                                  double keypoint_alpha = 1000.0,
                                                  double background_alpha = 1.0) {
  std::vector<double> alpha(static_cast<std::size_t>(layout.num_classes), keypoint_alpha);
  alpha[static_cast<std::size_t>(layout.background_id())] = background_alpha;
  return alpha;
}

// Class-weighted cross entropy against hard labels, averaged over pixels:
// (1/|px|) * sum alpha[gt] * -log(max(pred[gt], 1e-12)). In strict mode the
// prediction must be normalized per pixel.
inline double weighted_ce_loss(const HeatmapTensor& pred, const ClassMap& gt,
                               std::span<const double> alpha, bool strict = true) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw std::invalid_argument("loss: prediction and labels differ in size");
  if (alpha.size() != static_cast<std::size_t>(pred.channels))
    throw std::invalid_argument("loss: one weight per class required");
  for (std::uint16_t l : gt.labels)
    if (l >= alpha.size()) throw std::invalid_argument("loss: label out of range");
  if (strict && !pred.is_normalized())
    throw std::invalid_argument("loss: prediction is not normalized");
  const std::size_t p = pred.plane();
  double total = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const std::uint16_t k = gt.labels[i];
    const double s = std::max(static_cast<double>(pred.scores[k * p + i]), 1e-12);
    total -= alpha[k] * std::log(s);
  }
  return total / static_cast<double>(p);
}

// Expands hard labels into a one-hot score tensor.
inline HeatmapTensor one_hot_tensor(const ClassMap& map, int num_classes, int stride = 4) {
  for (std::uint16_t l : map.labels)
    if (l >= num_classes)
      throw std::invalid_argument("one hot: label out of class range");
  HeatmapTensor t = HeatmapTensor::zeros(num_classes, map.height, map.width, stride);
  const std::size_t p = t.plane();
  for (std::size_t i = 0; i < p; ++i)
    t.scores[static_cast<std::size_t>(map.labels[i]) * p + i] = 1.0f;
  return t;
}

}  // namespace courtreg
