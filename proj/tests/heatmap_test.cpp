#include "courtreg/heatmap.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "test_util.hpp"

namespace courtreg {
namespace {

using testing::default_layout;
using testing::sample_view;

// Layout with bare court points at the given coordinates plus background.
KeypointLayout point_layout(const std::vector<Vec2>& points) {
  KeypointLayout layout;
  layout.court = CourtTemplate::fiba();
  layout.num_classes = static_cast<int>(points.size()) + 1;
  for (std::size_t i = 0; i < points.size(); ++i) {
    KeypointEntry e;
    e.id = static_cast<int>(i);
    e.court_xy_cm = points[i];
    e.role = ClassRole::court;
    e.usable_for_homography = true;
    layout.entries.push_back(e);
  }
  KeypointEntry bg;
  bg.id = layout.num_classes - 1;
  bg.role = ClassRole::background;
  layout.entries.push_back(bg);
  return layout;
}

// Translation placing court (0,0) on the center of heatmap cell (hx, hy).
Homography place_at_cell(double hx, double hy, int stride = 4) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  const Vec2 input = heatmap_to_input(Vec2(hx, hy), stride);
  m(0, 2) = input.x();
  m(1, 2) = input.y();
  return Homography::from_matrix(m);
}

int lattice_disk_pixel_count(int radius) {
  int count = 0;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) ++count;
  return count;
}

TEST(CoordinateMap, RoundtripAndPixelCenters) {
  EXPECT_EQ(heatmap_to_input(Vec2(0.0, 0.0), 4), Vec2(1.5, 1.5));
  EXPECT_EQ(heatmap_to_input(Vec2(120.0, 67.0), 4), Vec2(481.5, 269.5));
  for (int stride : {1, 2, 4, 8}) {
    const Vec2 p(37.25, 11.75);
    const Vec2 roundtrip = input_to_heatmap(heatmap_to_input(p, stride), stride);
    EXPECT_NEAR((roundtrip - p).norm(), 0.0, 1e-12);
  }
}

TEST(Render, CenteredDiskCoversLatticeDisk) {
  ASSERT_EQ(lattice_disk_pixel_count(10), 317);  // radius-10 lattice disk
  const auto layout = point_layout({Vec2(0.0, 0.0)});
  const ClassMap map = render_gt_class_map(layout, place_at_cell(120.0, 67.0), 960, 540, 4, 10);
  ASSERT_EQ(map.width, 240);
  ASSERT_EQ(map.height, 135);
  int count = 0;
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) {
      const bool inside = (x - 120) * (x - 120) + (y - 67) * (y - 67) <= 100;
      EXPECT_EQ(map.at(y, x), inside ? 0 : 1) << "pixel " << x << "," << y;
      count += map.at(y, x) == 0;
    }
  EXPECT_EQ(count, 317);
}

TEST(Render, RadiusZeroKeepsOnePixel) {
  const auto layout = point_layout({Vec2(0.0, 0.0)});
  const ClassMap map = render_gt_class_map(layout, place_at_cell(120.0, 67.0), 960, 540, 4, 0);
  int count = 0;
  for (std::uint16_t l : map.labels) count += l == 0;
  EXPECT_EQ(count, 1);
  EXPECT_EQ(map.at(67, 120), 0);
}

TEST(Render, CentersBeyondMapPlusRadiusAreOmitted) {
  const auto layout = point_layout({Vec2(0.0, 0.0)});
  // one radius outside: exactly the rim pixel survives
  const ClassMap edge = render_gt_class_map(layout, place_at_cell(-10.0, 67.0), 960, 540, 4, 10);
  int count = 0;
  for (std::uint16_t l : edge.labels) count += l == 0;
  EXPECT_EQ(count, 1);
  EXPECT_EQ(edge.at(67, 0), 0);
  // beyond that: nothing
  const ClassMap gone = render_gt_class_map(layout, place_at_cell(-11.0, 67.0), 960, 540, 4, 10);
  for (std::uint16_t l : gone.labels) EXPECT_EQ(l, 1);
}

TEST(Render, OverlapGoesToNearerCenterThenLowerClass) {
  const auto layout = point_layout({Vec2(0.0, 0.0), Vec2(100.0, 0.0)});
  // centers 8 cells apart on one row: disks share a band, midline ties
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  const Vec2 a = heatmap_to_input(Vec2(50.0, 30.0), 4);
  m(0, 0) = (heatmap_to_input(Vec2(58.0, 30.0), 4).x() - a.x()) / 100.0;
  m(0, 2) = a.x();
  m(1, 2) = a.y();
  const ClassMap map =
      render_gt_class_map(layout, Homography::from_matrix(m), 960, 540, 4, 10);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) {
      const long da = (x - 50L) * (x - 50L) + (y - 30L) * (y - 30L);
      const long db = (x - 58L) * (x - 58L) + (y - 30L) * (y - 30L);
      std::uint16_t expect = 2;
      if (da <= 100 && (db > 100 || da <= db))
        expect = 0;  // nearer, or tie resolved to the lower id
      else if (db <= 100)
        expect = 1;
      EXPECT_EQ(map.at(y, x), expect) << "pixel " << x << "," << y;
    }
}

TEST(Decode, SymmetricDiskRecoversExactCenter) {
  const auto layout = point_layout({Vec2(0.0, 0.0)});
  const ClassMap map = render_gt_class_map(layout, place_at_cell(50.0, 30.0), 960, 540, 4, 10);
  const HeatmapTensor t = one_hot_tensor(map, layout.num_classes, 4);
  const auto decoded = decode_keypoints(t, layout);
  ASSERT_EQ(decoded.size(), 1u);
  EXPECT_EQ(decoded[0].class_id, 0);
  EXPECT_EQ(decoded[0].support, 317);
  EXPECT_DOUBLE_EQ(decoded[0].score, 1.0);
  EXPECT_NEAR(decoded[0].image_xy.x(), 201.5, 1e-9);
  EXPECT_NEAR(decoded[0].image_xy.y(), 121.5, 1e-9);
}

TEST(Decode, AllBackgroundDecodesNothing) {
  const auto& layout = default_layout();
  const ClassMap map =
      ClassMap::filled(135, 240, static_cast<std::uint16_t>(layout.background_id()));
  const auto decoded = decode_keypoints(one_hot_tensor(map, layout.num_classes, 4), layout);
  EXPECT_TRUE(decoded.empty());
}

TEST(Decode, MinSupportGatesSmallBlobs) {
  const auto layout = point_layout({Vec2(0.0, 0.0)});
  ClassMap map = ClassMap::filled(135, 240, 1);
  map.at(10, 10) = 0;
  map.at(10, 11) = 0;
  const HeatmapTensor t = one_hot_tensor(map, layout.num_classes, 4);
  EXPECT_TRUE(decode_keypoints(t, layout, 3).empty());
  const auto decoded = decode_keypoints(t, layout, 2);
  ASSERT_EQ(decoded.size(), 1u);
  EXPECT_EQ(decoded[0].support, 2);
}

TEST(Decode, RejectsClassCountMismatch) {
  const auto& layout = default_layout();
  const HeatmapTensor t = HeatmapTensor::zeros(10, 135, 240, 4);
  EXPECT_THROW(decode_keypoints(t, layout), std::invalid_argument);
  EXPECT_THROW(
      decode_keypoints(HeatmapTensor::zeros(layout.num_classes, 135, 240, 4), layout, 0),
      std::invalid_argument);
}

TEST(Decode, ArgmaxTiesGoToLowerClass) {
  const auto layout = point_layout({Vec2(0.0, 0.0), Vec2(100.0, 0.0)});
  HeatmapTensor t = HeatmapTensor::zeros(3, 8, 8, 4);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) t.at(2, y, x) = 1.0f;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      t.at(0, y, x) = 0.5f;
      t.at(1, y, x) = 0.5f;  // exact tie with class 0
      t.at(2, y, x) = 0.0f;
    }
  const auto decoded = decode_keypoints(t, layout, 3);
  ASSERT_EQ(decoded.size(), 1u);
  EXPECT_EQ(decoded[0].class_id, 0);
  EXPECT_EQ(decoded[0].support, 16);
}

// Rendering then decoding a full synthetic view must find exactly the
// classes present in the map and place untruncated disks within half a
// heatmap cell of the projected keypoint.
TEST(Decode, RenderRoundtripOverSampledViews) {
  const auto& layout = default_layout();
  const int full_disk = lattice_disk_pixel_count(10);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Homography h = sample_view(seed);
    const ClassMap map = render_gt_class_map(layout, h, 960, 540, 4, 10);
    std::map<int, int> support;
    for (std::uint16_t l : map.labels)
      if (l != layout.background_id()) ++support[l];

    const auto decoded = decode_keypoints(one_hot_tensor(map, layout.num_classes, 4), layout);
    std::set<int> decoded_ids;
    for (const auto& k : decoded) decoded_ids.insert(k.class_id);

    // exhaustive and free of spurious classes
    for (const auto& [cls, n] : support) {
      if (n < 3) continue;
      EXPECT_TRUE(decoded_ids.count(cls)) << "seed " << seed << " class " << cls;
    }
    for (int cls : decoded_ids) EXPECT_TRUE(support.count(cls)) << "seed " << seed;

    for (const auto& k : decoded) {
      if (support[k.class_id] != full_disk) continue;  // truncated by border or neighbor
      const Vec2 projected = apply(h, *layout.entry(k.class_id).court_xy_cm);
      const Vec2 center_hm = input_to_heatmap(projected, 4);
      const Vec2 decoded_hm = input_to_heatmap(k.image_xy, 4);
      EXPECT_LE(std::abs(decoded_hm.x() - center_hm.x()), 0.5 + 1e-9) << "seed " << seed;
      EXPECT_LE(std::abs(decoded_hm.y() - center_hm.y()), 0.5 + 1e-9) << "seed " << seed;
    }
  }
}

TEST(Decode, FlipEquivarianceWithinOneInputPixel) {
  const auto& layout = default_layout();
  const auto perm = flip_permutation(layout);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Homography h = sample_view(seed + 200);
    const ClassMap map = render_gt_class_map(layout, h, 960, 540, 4, 10);
    const HeatmapTensor t = one_hot_tensor(map, layout.num_classes, 4);

    HeatmapTensor flipped = HeatmapTensor::zeros(t.channels, t.height, t.width, t.stride);
    for (int c = 0; c < t.channels; ++c)
      for (int y = 0; y < t.height; ++y)
        for (int x = 0; x < t.width; ++x)
          flipped.at(perm[static_cast<std::size_t>(c)], y, t.width - 1 - x) = t.at(c, y, x);

    std::map<int, Vec2> base;
    for (const auto& k : decode_keypoints(t, layout)) base[k.class_id] = k.image_xy;
    const auto mirrored = decode_keypoints(flipped, layout);
    ASSERT_EQ(mirrored.size(), base.size());
    for (const auto& k : mirrored) {
      const int orig = perm[static_cast<std::size_t>(k.class_id)];
      ASSERT_TRUE(base.count(orig));
      EXPECT_LE(std::abs(k.image_xy.x() - (960.0 - base[orig].x())), 1.0 + 1e-9);
      EXPECT_NEAR(k.image_xy.y(), base[orig].y(), 1e-9);
    }
  }
}

TEST(Loss, PerfectOneHotPredictionIsZero) {
  const auto& layout = default_layout();
  const ClassMap map = render_gt_class_map(layout, sample_view(5), 960, 540, 4, 10);
  const HeatmapTensor pred = one_hot_tensor(map, layout.num_classes, 4);
  const auto alpha = keypoint_class_weights(layout);
  EXPECT_LE(weighted_ce_loss(pred, map, alpha), 1e-11 * 1000.0);
}

TEST(Loss, UniformPredictionOnBackgroundIsLogClassCount) {
  const auto& layout = default_layout();
  const int c = layout.num_classes;
  HeatmapTensor pred = HeatmapTensor::zeros(c, 16, 16, 4);
  for (float& s : pred.scores) s = 1.0f / static_cast<float>(c);
  const ClassMap gt = ClassMap::filled(16, 16, static_cast<std::uint16_t>(layout.background_id()));
  const auto alpha = keypoint_class_weights(layout);
  const double on_background = weighted_ce_loss(pred, gt, alpha);
  EXPECT_NEAR(on_background, std::log(94.0), 1e-6);
  EXPECT_NEAR(std::log(94.0), 4.5433, 2e-5);

  // same mistake on a keypoint class costs exactly the weight ratio more
  const ClassMap gt_kp = ClassMap::filled(16, 16, 0);
  EXPECT_NEAR(weighted_ce_loss(pred, gt_kp, alpha), 1000.0 * on_background,
              1e-9 * 1000.0 * on_background);
}

TEST(Loss, MovingMassTowardTruthDecreasesLoss) {
  const auto layout = point_layout({Vec2(0.0, 0.0)});
  HeatmapTensor pred = HeatmapTensor::zeros(2, 4, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      pred.at(0, y, x) = 0.3f;
      pred.at(1, y, x) = 0.7f;
    }
  const ClassMap gt = ClassMap::filled(4, 4, 0);
  const auto alpha = keypoint_class_weights(layout);
  const double before = weighted_ce_loss(pred, gt, alpha);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      pred.at(0, y, x) = 0.4f;
      pred.at(1, y, x) = 0.6f;
    }
  EXPECT_LT(weighted_ce_loss(pred, gt, alpha), before);
}

TEST(Loss, ValidatesShapesAndNormalization) {
  const auto layout = point_layout({Vec2(0.0, 0.0)});
  const auto alpha = keypoint_class_weights(layout);
  HeatmapTensor pred = HeatmapTensor::zeros(2, 4, 4, 4);
  const ClassMap gt = ClassMap::filled(4, 4, 0);

  const ClassMap wrong_size = ClassMap::filled(5, 4, 0);
  EXPECT_THROW(weighted_ce_loss(pred, wrong_size, alpha), std::invalid_argument);
  const std::vector<double> short_alpha{1.0};
  EXPECT_THROW(weighted_ce_loss(pred, gt, short_alpha), std::invalid_argument);

  // all-zero scores are not a distribution
  EXPECT_FALSE(pred.is_normalized());
  EXPECT_THROW(weighted_ce_loss(pred, gt, alpha), std::invalid_argument);
  // non-strict mode accepts them and clamps the log
  EXPECT_NEAR(weighted_ce_loss(pred, gt, alpha, false), -1000.0 * std::log(1e-12), 1e-6);

  const ClassMap bad_label = ClassMap::filled(4, 4, 9);
  EXPECT_THROW(weighted_ce_loss(pred, bad_label, alpha, false), std::invalid_argument);
}

TEST(OneHot, ExpandsAndValidatesLabels) {
  ClassMap map = ClassMap::filled(3, 3, 1);
  map.at(1, 1) = 0;
  const HeatmapTensor t = one_hot_tensor(map, 2, 4);
  EXPECT_TRUE(t.is_normalized());
  EXPECT_EQ(t.at(0, 1, 1), 1.0f);
  EXPECT_EQ(t.at(1, 1, 1), 0.0f);
  EXPECT_EQ(t.at(1, 0, 0), 1.0f);
  EXPECT_THROW(one_hot_tensor(map, 1, 4), std::invalid_argument);
}

}  // namespace
}  // namespace courtreg
