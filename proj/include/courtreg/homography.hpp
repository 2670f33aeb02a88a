#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "courtreg/court.hpp"
#include "courtreg/rng.hpp"

namespace courtreg {

struct DegenerateInputError : std::runtime_error {
  explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

struct MapsToInfinityError : std::runtime_error {
  explicit MapsToInfinityError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr double kHomographyEps = 1e-12;

// Plane-to-plane projective map, court centimeters to image pixels.
// Invertible by construction; stored with h(2,2) = 1 when that entry is
// meaningful, unit Frobenius norm otherwise.
class Homography {
 public:
  Homography() : h_(Eigen::Matrix3d::Identity()) {}

  static Homography from_matrix(const Eigen::Matrix3d& m) {
    if (!m.allFinite())
      throw DegenerateInputError("homography: matrix has non-finite entries");
    const double fro = m.norm();
    if (fro <= kHomographyEps)
      throw DegenerateInputError("homography: zero matrix");
    Eigen::Matrix3d n = std::abs(m(2, 2)) > kHomographyEps * fro ? (m / m(2, 2)).eval()
                                                                 : (m / fro).eval();
    if (std::abs(n.determinant()) <= kHomographyEps)
      throw DegenerateInputError("homography: singular matrix");
    Homography h;
    h.h_ = n;
    return h;
  }

  const Eigen::Matrix3d& matrix() const { return h_; }
  Eigen::Matrix3d inverse_matrix() const { return h_.inverse(); }

 private:
  Eigen::Matrix3d h_;
};

// Dehomogenized application; empty when the point lies on the line mapped to
// infinity (|w| below kHomographyEps).
inline std::optional<Vec2> try_apply(const Eigen::Matrix3d& h, const Vec2& p) {
  const Eigen::Vector3d q = h * Eigen::Vector3d(p.x(), p.y(), 1.0);
  if (std::abs(q.z()) <= kHomographyEps) return std::nullopt;
  return Vec2(q.x() / q.z(), q.y() / q.z());
}

inline Vec2 apply(const Homography& h, const Vec2& court_xy) {
  if (auto p = try_apply(h.matrix(), court_xy)) return *p;
  throw MapsToInfinityError("homography: point maps to infinity");
}

inline Vec2 apply_inverse(const Homography& h, const Vec2& image_xy) {
  if (auto p = try_apply(h.inverse_matrix(), image_xy)) return *p;
  throw MapsToInfinityError("homography: point maps to infinity under inverse");
}

struct Correspondence {
  int class_id = -1;
  Vec2 court_xy_cm{0.0, 0.0};
  Vec2 image_xy_px{0.0, 0.0};
};

namespace detail {

// Similarity moving the centroid to the origin and the mean distance to
// sqrt(2); standard conditioning for the DLT system.
inline Eigen::Matrix3d hartley_transform(std::span<const Vec2> pts) {
  Vec2 c(0.0, 0.0);
  for (const Vec2& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const Vec2& p : pts) mean_dist += (p - c).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (mean_dist <= kHomographyEps)
    throw DegenerateInputError("homography fit: points coincide");
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0.0, -s * c.x(), 0.0, s, -s * c.y(), 0.0, 0.0, 1.0;
  return t;
}

inline Vec2 affine2(const Eigen::Matrix3d& t, const Vec2& p) {
  return Vec2(t(0, 0) * p.x() + t(0, 1) * p.y() + t(0, 2),
              t(1, 0) * p.x() + t(1, 1) * p.y() + t(1, 2));
}

inline Homography solve_dlt(const Eigen::Matrix<double, Eigen::Dynamic, 9>& a,
                            const Eigen::Matrix3d& tc, const Eigen::Matrix3d& ti) {
  Eigen::JacobiSVD<Eigen::Matrix<double, Eigen::Dynamic, 9>> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double largest = sv(0);
  // with eight rows the nullspace is one larger; the ninth singular value is zero
  const double second_smallest = sv(7);
  const double smallest = a.rows() >= 9 ? sv(8) : 0.0;
  if (largest <= 0.0 || second_smallest - smallest <= 1e-9 * largest)
    throw DegenerateInputError("homography fit: solution not unique");
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return Homography::from_matrix(ti.inverse() * hn * tc);
}

inline void fill_design_rows(Eigen::Ref<Eigen::Matrix<double, Eigen::Dynamic, 9>> a,
                             Eigen::Index i, const Vec2& cp, const Vec2& ip) {
  a.row(2 * i) << cp.x(), cp.y(), 1.0, 0.0, 0.0, 0.0, -ip.x() * cp.x(), -ip.x() * cp.y(), -ip.x();
  a.row(2 * i + 1) << 0.0, 0.0, 0.0, cp.x(), cp.y(), 1.0, -ip.y() * cp.x(), -ip.y() * cp.y(), -ip.y();
}

}  // namespace detail

// Direct linear transform in normalized coordinates. Algebraic least squares
// for n > 4; throws DegenerateInputError when the two smallest singular
// values of the design matrix are within 1e-9 (relative) of each other.
inline Homography dlt_homography(std::span<const Vec2> court_pts, std::span<const Vec2> image_pts) {
  if (court_pts.size() != image_pts.size())
    throw std::invalid_argument("homography fit: point count mismatch");
  const auto n = static_cast<Eigen::Index>(court_pts.size());
  if (n < 4)
    throw std::invalid_argument("homography fit: at least 4 correspondences required");
  const Eigen::Matrix3d tc = detail::hartley_transform(court_pts);
  const Eigen::Matrix3d ti = detail::hartley_transform(image_pts);
  Eigen::Matrix<double, Eigen::Dynamic, 9> a(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i)
    detail::fill_design_rows(a, i, detail::affine2(tc, court_pts[static_cast<std::size_t>(i)]),
                             detail::affine2(ti, image_pts[static_cast<std::size_t>(i)]));
  return detail::solve_dlt(a, tc, ti);
}

inline Homography dlt_homography(std::span<const Correspondence> corrs) {
  std::vector<Vec2> court(corrs.size()), image(corrs.size());
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    court[i] = corrs[i].court_xy_cm;
    image[i] = corrs[i].image_xy_px;
  }
  return dlt_homography(std::span<const Vec2>(court), std::span<const Vec2>(image));
}

struct RansacConfig {
  double reproj_threshold_px = 35.0;
  int max_iterations = 2000;
  int min_inliers = 4;
  std::uint64_t seed = 0;
  // fixed iteration count by default so runtime and output are reproducible
  bool adaptive_exit = false;

  void validate() const {
    if (!(reproj_threshold_px > 0.0))
      throw std::invalid_argument("ransac: threshold must be positive");
    if (max_iterations < 1)
      throw std::invalid_argument("ransac: max_iterations must be at least 1");
    if (min_inliers < 4)
      throw std::invalid_argument("ransac: min_inliers must be at least 4");
  }
};

struct RansacResult {
  std::optional<Homography> homography;  // empty: no model reached min_inliers
  std::vector<bool> inlier_mask;
  int inlier_count = 0;
  double mean_inlier_error_px = 0.0;
  int best_iteration = -1;
};

namespace detail {

inline bool any_three_collinear(const std::array<Vec2, 4>& p) {
  for (int skip = 0; skip < 4; ++skip) {
    const Vec2& a = p[static_cast<std::size_t>((skip + 1) % 4)];
    const Vec2& b = p[static_cast<std::size_t>((skip + 2) % 4)];
    const Vec2& c = p[static_cast<std::size_t>((skip + 3) % 4)];
    const Vec2 u = b - a, v = c - a;
    const double area2 = std::abs(u.x() * v.y() - u.y() * v.x());
    if (area2 <= 1e-8 * u.norm() * v.norm()) return true;
  }
  return false;
}

// Exact fit to four correspondence pairs. Solved through the 9x9 normal
// matrix with fixed-size storage; the squared conditioning is harmless here
// because the sample is normalized and the system has an exact solution.
inline Homography fit_minimal(std::span<const Correspondence> corrs,
                              const std::array<std::size_t, 4>& idx) {
  std::array<Vec2, 4> court, image;
  for (std::size_t i = 0; i < 4; ++i) {
    court[i] = corrs[idx[i]].court_xy_cm;
    image[i] = corrs[idx[i]].image_xy_px;
  }
  const Eigen::Matrix3d tc = hartley_transform(court);
  const Eigen::Matrix3d ti = hartley_transform(image);
  Eigen::Matrix<double, 9, 9> ata = Eigen::Matrix<double, 9, 9>::Zero();
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2 cp = affine2(tc, court[i]);
    const Vec2 ip = affine2(ti, image[i]);
    Eigen::Matrix<double, 9, 1> r1, r2;
    r1 << cp.x(), cp.y(), 1.0, 0.0, 0.0, 0.0, -ip.x() * cp.x(), -ip.x() * cp.y(), -ip.x();
    r2 << 0.0, 0.0, 0.0, cp.x(), cp.y(), 1.0, -ip.y() * cp.x(), -ip.y() * cp.y(), -ip.y();
    ata.noalias() += r1 * r1.transpose() + r2 * r2.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(ata);
  const auto& ev = eig.eigenvalues();  // ascending
  const double largest = std::sqrt(std::max(ev(8), 0.0));
  const double second_smallest = std::sqrt(std::max(ev(1), 0.0));
  // eight equations in nine unknowns: the smallest singular value is
  // structurally zero, uniqueness needs the next one clearly away from it
  if (largest <= 0.0 || second_smallest <= 1e-9 * largest)
    throw DegenerateInputError("homography fit: solution not unique");
  const Eigen::Matrix<double, 9, 1> h = eig.eigenvectors().col(0);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return Homography::from_matrix(ti.inverse() * hn * tc);
}

struct InlierStats {
  int count = 0;
  double mean_error = std::numeric_limits<double>::infinity();
};

inline InlierStats score_model(const Homography& h, std::span<const Correspondence> corrs,
                               double threshold, std::vector<bool>* mask) {
  const Eigen::Matrix3d& m = h.matrix();
  InlierStats s;
  double err_sum = 0.0;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    bool in = false;
    if (auto p = try_apply(m, corrs[i].court_xy_cm)) {
      const double err = (*p - corrs[i].image_xy_px).norm();
      if (err < threshold) {
        in = true;
        ++s.count;
        err_sum += err;
      }
    }
    if (mask) (*mask)[i] = in;
  }
  if (s.count > 0) s.mean_error = err_sum / s.count;
  return s;
}

}  // namespace detail

// Seeded RANSAC over decoded correspondences. Minimal samples with three
// collinear court points are rejected before fitting; candidates are ranked
// by inlier count, then mean inlier error, then iteration index. The winner
// is refit on its inliers and the mask recomputed against the refit model.
inline RansacResult ransac_homography(std::span<const Correspondence> corrs,
                                      const RansacConfig& cfg) {
  cfg.validate();
  const std::size_t n = corrs.size();
  if (n < 4)
    throw std::invalid_argument("ransac: at least 4 correspondences required");

  std::optional<Homography> best;
  detail::InlierStats best_stats;
  int best_iteration = -1;
  int iterations_needed = cfg.max_iterations;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    if (cfg.adaptive_exit && iter >= iterations_needed) break;
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(iter)));
    std::array<std::size_t, 4> idx{};
    int got = 0;
    while (got < 4) {
      const std::size_t k = rng.uniform_index(n);
      bool dup = false;
      for (int j = 0; j < got; ++j) dup = dup || idx[static_cast<std::size_t>(j)] == k;
      if (!dup) idx[static_cast<std::size_t>(got++)] = k;
    }
    std::array<Vec2, 4> sample_court;
    for (int j = 0; j < 4; ++j)
      sample_court[static_cast<std::size_t>(j)] = corrs[idx[static_cast<std::size_t>(j)]].court_xy_cm;
    if (detail::any_three_collinear(sample_court)) continue;

    Homography h;
    try {
      h = detail::fit_minimal(corrs, idx);
    } catch (const DegenerateInputError&) {
      continue;
    }
    const auto stats = detail::score_model(h, corrs, cfg.reproj_threshold_px, nullptr);
    if (stats.count > best_stats.count ||
        (stats.count == best_stats.count && stats.mean_error < best_stats.mean_error)) {
      best = h;
      best_stats = stats;
      best_iteration = iter;
      if (cfg.adaptive_exit && stats.count > 0) {
        const double w = static_cast<double>(stats.count) / static_cast<double>(n);
        const double denom = std::log1p(-std::min(w * w * w * w, 1.0 - 1e-12));
        if (denom < 0.0) {
          const double need = std::log(0.01) / denom;
          iterations_needed = std::min(
              iterations_needed,
              static_cast<int>(std::min(std::ceil(need), 1e9)) + 1);
        }
      }
    }
  }

  RansacResult result;
  result.inlier_mask.assign(n, false);
  if (!best || best_stats.count < cfg.min_inliers) return result;

  // refit on the consensus set; keep the minimal-sample model if the refit
  // degenerates
  std::vector<Correspondence> inliers;
  detail::score_model(*best, corrs, cfg.reproj_threshold_px, &result.inlier_mask);
  inliers.reserve(static_cast<std::size_t>(best_stats.count));
  for (std::size_t i = 0; i < n; ++i)
    if (result.inlier_mask[i]) inliers.push_back(corrs[i]);
  Homography final_h = *best;
  if (inliers.size() > 4) {
    try {
      final_h = dlt_homography(std::span<const Correspondence>(inliers));
    } catch (const DegenerateInputError&) {
    }
  }
  const auto final_stats =
      detail::score_model(final_h, corrs, cfg.reproj_threshold_px, &result.inlier_mask);
  result.homography = final_h;
  result.inlier_count = final_stats.count;
  result.mean_inlier_error_px = final_stats.count > 0 ? final_stats.mean_error : 0.0;
  result.best_iteration = best_iteration;
  return result;
}

// A court-to-image homography is unusable for registration when the frame
// center probes pull apart implausibly on the court plane: half a frame
// width must not span 1800 cm or more.
inline bool is_degenerate(const Homography& h, const Vec2& probe_a = Vec2(240.0, 270.0),
                          const Vec2& probe_b = Vec2(720.0, 270.0),
                          double max_probe_distance_cm = 1800.0) {
  const Eigen::Matrix3d inv = h.inverse_matrix();
  const auto pa = try_apply(inv, probe_a);
  const auto pb = try_apply(inv, probe_b);
  if (!pa || !pb) return true;
  return (*pa - *pb).norm() >= max_probe_distance_cm;
}

// Pointwise average of several homographies: project the usable layout
// keypoints through each, average per keypoint, refit. Useful as a static
// fallback when per-frame estimation fails.
inline Homography average_homography(std::span<const Homography> hs,
                                     const KeypointLayout& layout) {
  if (hs.empty())
    throw std::invalid_argument("average homography: empty input");
  std::vector<Vec2> court, image;
  for (const auto& e : layout.entries) {
    if (!e.usable_for_homography || !e.court_xy_cm) continue;
    Vec2 acc(0.0, 0.0);
    for (const Homography& h : hs) acc += apply(h, *e.court_xy_cm);
    court.push_back(*e.court_xy_cm);
    image.push_back(acc / static_cast<double>(hs.size()));
  }
  if (court.size() < 4)
    throw std::invalid_argument("average homography: layout has fewer than 4 usable keypoints");
  return dlt_homography(std::span<const Vec2>(court), std::span<const Vec2>(image));
}

}  // namespace courtreg
