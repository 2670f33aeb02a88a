#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace courtreg {

using Vec2 = Eigen::Vector2d;

// Court-plane markings, coordinates in centimeters. x runs along the court
// length, y along the width; the origin is the corner where both are zero.
struct Segment {
  Vec2 a{0.0, 0.0};
  Vec2 b{0.0, 0.0};
};

struct Arc {
  Vec2 center{0.0, 0.0};
  double radius_cm = 0.0;
  double start_deg = 0.0;
  double end_deg = 0.0;
};

using Drawable = std::variant<Segment, Arc>;

struct CourtTemplate {
  double length_cm = 2800.0;
  double width_cm = 1500.0;
  std::vector<Drawable> lines;

  // Boundary rectangle plus halfway line for the given playing surface.
  static CourtTemplate rectangular(double length_cm, double width_cm) {
    CourtTemplate t;
    t.length_cm = length_cm;
    t.width_cm = width_cm;
    const double l = length_cm, w = width_cm;
    t.lines = {
        Segment{{0.0, 0.0}, {l, 0.0}},
        Segment{{l, 0.0}, {l, w}},
        Segment{{l, w}, {0.0, w}},
        Segment{{0.0, w}, {0.0, 0.0}},
        Segment{{l * 0.5, 0.0}, {l * 0.5, w}},
    };
    t.validate();
    return t;
  }

  // Full-size FIBA court.
  static CourtTemplate fiba() { return rectangular(2800.0, 1500.0); }

  void validate() const {
    if (!(length_cm > 0.0) || !(width_cm > 0.0))
      throw std::invalid_argument("court template: dimensions must be positive");
    const double tol = 1e-9;
    auto inside = [&](const Vec2& p) {
      return p.x() >= -tol && p.x() <= length_cm + tol && p.y() >= -tol &&
             p.y() <= width_cm + tol;
    };
    for (const Drawable& d : lines) {
      if (const auto* s = std::get_if<Segment>(&d)) {
        if (!inside(s->a) || !inside(s->b))
          throw std::invalid_argument("court template: segment endpoint outside court");
      } else {
        const auto& a = std::get<Arc>(d);
        if (!(a.radius_cm > 0.0))
          throw std::invalid_argument("court template: arc radius must be positive");
        // sample the sweep; endpoints alone can miss an excursion
        const double step = 2.0;
        const int n = std::max(2, static_cast<int>(std::ceil(std::abs(a.end_deg - a.start_deg) / step)) + 1);
        for (int i = 0; i < n; ++i) {
          const double t = static_cast<double>(i) / (n - 1);
          const double ang = (a.start_deg + t * (a.end_deg - a.start_deg)) * std::numbers::pi / 180.0;
          const Vec2 p = a.center + a.radius_cm * Vec2(std::cos(ang), std::sin(ang));
          if (!inside(p))
            throw std::invalid_argument("court template: arc leaves court");
        }
      }
    }
  }
};

// Which sideline the broadcast camera sits behind. Rows are counted from the
// camera outward, so y_zero means row 0 lies on the y = 0 sideline.
enum class CameraSide { y_zero, y_max };

struct SamplingSpec {
  int rows = 7;
  int cols = 13;
  double w0_cm = 175.0;  // gap between the two rows nearest the camera
  CameraSide camera_side = CameraSide::y_zero;

  void validate() const {
    if (rows < 3) throw std::invalid_argument("sampling spec: rows must be at least 3");
    if (cols < 2) throw std::invalid_argument("sampling spec: cols must be at least 2");
    if (!(w0_cm > 0.0)) throw std::invalid_argument("sampling spec: w0_cm must be positive");
  }
};

// Common difference r of the row-gap progression w_i = w0 + i*r, chosen so
// the gaps sum to width_cm. Negative r packs rows toward the far side.
inline double perspective_common_difference(double width_cm, int rows, double w0_cm) {
  return 2.0 / (rows - 2) * (width_cm / (rows - 1) - w0_cm);
}

// Cumulative row offsets across the court width, offsets[0] = 0 and
// offsets[rows-1] = width_cm. Gaps grow linearly away from the camera, which
// roughly equalizes their apparent image-space spacing.
inline std::vector<double> perspective_offsets(double width_cm, int rows, double w0_cm) {
  if (rows < 3) throw std::invalid_argument("perspective offsets: rows must be at least 3");
  if (!(width_cm > 0.0)) throw std::invalid_argument("perspective offsets: width must be positive");
  if (!(w0_cm > 0.0)) throw std::invalid_argument("perspective offsets: w0 must be positive");
  const double r = perspective_common_difference(width_cm, rows, w0_cm);
  std::vector<double> offsets(static_cast<std::size_t>(rows), 0.0);
  double acc = 0.0;
  for (int i = 0; i + 1 < rows; ++i) {
    const double gap = w0_cm + static_cast<double>(i) * r;
    if (!(gap > 0.0))
      throw std::invalid_argument("perspective offsets: gap " + std::to_string(i) +
                                  " is not positive; w0 too large for this row count");
    acc += gap;
    offsets[static_cast<std::size_t>(i) + 1] = acc;
  }
  // the gaps sum to width_cm by construction; snap the far edge exactly
  offsets.back() = width_cm;
  return offsets;
}

enum class ClassRole { court, basket, background };

struct KeypointEntry {
  int id = 0;
  std::optional<Vec2> court_xy_cm;  // empty for baskets and background
  ClassRole role = ClassRole::court;
  bool usable_for_homography = false;
};

// Dense class table for one court: rows*cols grid keypoints, two basket
// classes kept for detector compatibility, and a background class last.
struct KeypointLayout {
  CourtTemplate court;
  SamplingSpec spec;
  std::vector<KeypointEntry> entries;
  int num_classes = 0;

  int background_id() const { return num_classes - 1; }

  const KeypointEntry& entry(int id) const {
    return entries.at(static_cast<std::size_t>(id));
  }

  int court_keypoint_count() const {
    int n = 0;
    for (const auto& e : entries)
      if (e.role == ClassRole::court) ++n;
    return n;
  }

  void validate() const {
    court.validate();
    spec.validate();
    if (num_classes < 2 || entries.size() != static_cast<std::size_t>(num_classes))
      throw std::invalid_argument("layout: entry count must equal num_classes");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      if (e.id != static_cast<int>(i))
        throw std::invalid_argument("layout: ids must be dense and ordered");
      switch (e.role) {
        case ClassRole::court:
          if (!e.court_xy_cm || !e.usable_for_homography)
            throw std::invalid_argument("layout: court entries need coordinates and must be usable");
          break;
        case ClassRole::basket:
          if (e.usable_for_homography)
            throw std::invalid_argument("layout: basket entries are not usable for homography");
          break;
        case ClassRole::background:
          if (e.id != num_classes - 1)
            throw std::invalid_argument("layout: background must be the last class");
          break;
      }
    }
    if (entries.back().role != ClassRole::background)
      throw std::invalid_argument("layout: background must be the last class");
  }
};

// Grid keypoint ids are row*cols + col, rows counted away from the camera,
// columns left to right at uniform spacing. Basket classes follow the grid,
// background is last.
inline KeypointLayout build_layout(const CourtTemplate& court, const SamplingSpec& spec) {
  court.validate();
  spec.validate();
  const auto offsets = perspective_offsets(court.width_cm, spec.rows, spec.w0_cm);

  KeypointLayout layout;
  layout.court = court;
  layout.spec = spec;
  layout.num_classes = spec.rows * spec.cols + 3;
  layout.entries.reserve(static_cast<std::size_t>(layout.num_classes));

  const double col_gap = court.length_cm / (spec.cols - 1);
  for (int row = 0; row < spec.rows; ++row) {
    const double y = spec.camera_side == CameraSide::y_zero
                         ? offsets[static_cast<std::size_t>(row)]
                         : court.width_cm - offsets[static_cast<std::size_t>(row)];
    for (int col = 0; col < spec.cols; ++col) {
      const double x = col + 1 == spec.cols ? court.length_cm : col * col_gap;
      KeypointEntry e;
      e.id = row * spec.cols + col;
      e.court_xy_cm = Vec2(x, y);
      e.role = ClassRole::court;
      e.usable_for_homography = true;
      layout.entries.push_back(e);
    }
  }
  for (int k = 0; k < 2; ++k) {
    KeypointEntry e;
    e.id = spec.rows * spec.cols + k;
    e.role = ClassRole::basket;
    e.usable_for_homography = false;  // off the court plane
    layout.entries.push_back(e);
  }
  KeypointEntry bg;
  bg.id = layout.num_classes - 1;
  bg.role = ClassRole::background;
  bg.usable_for_homography = false;
  layout.entries.push_back(bg);
  return layout;
}

// Class id permutation under a horizontal image flip: grid columns reflect,
// the two baskets swap, background maps to itself.
inline std::vector<int> flip_permutation(const KeypointLayout& layout) {
  layout.validate();
  const int rows = layout.spec.rows, cols = layout.spec.cols;
  std::vector<int> perm(static_cast<std::size_t>(layout.num_classes), 0);
  for (int row = 0; row < rows; ++row)
    for (int col = 0; col < cols; ++col)
      perm[static_cast<std::size_t>(row * cols + col)] = row * cols + (cols - 1 - col);
  perm[static_cast<std::size_t>(rows * cols)] = rows * cols + 1;
  perm[static_cast<std::size_t>(rows * cols + 1)] = rows * cols;
  perm[static_cast<std::size_t>(layout.num_classes - 1)] = layout.num_classes - 1;
  return perm;
}

}  // namespace courtreg
