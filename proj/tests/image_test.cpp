#include "courtreg/image.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

namespace courtreg {
namespace {

using testing::TempDir;
using testing::sample_view;

Homography affine_place(double scale, double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = m(1, 1) = scale;
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography::from_matrix(m);
}

bool is_style_color(const ImageRgb8& img, int x, int y, const OverlayStyle& s = {}) {
  const std::uint8_t* p = img.px(x, y);
  return p[0] == s.r && p[1] == s.g && p[2] == s.b;
}

TEST(Png, RoundtripIsPixelExact) {
  TempDir dir;
  ImageRgb8 img = ImageRgb8::filled(31, 17, 0, 0, 0);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      std::uint8_t* p = img.px(x, y);
      p[0] = static_cast<std::uint8_t>((x * 7 + y) & 0xff);
      p[1] = static_cast<std::uint8_t>((x + y * 13) & 0xff);
      p[2] = static_cast<std::uint8_t>((x * y) & 0xff);
    }
  const auto path = dir / "img.png";
  write_png(path, img);
  const ImageRgb8 back = read_png(path);
  EXPECT_EQ(back.width, img.width);
  EXPECT_EQ(back.height, img.height);
  EXPECT_EQ(back.pixels, img.pixels);
}

TEST(Png, MissingAndMalformedInputsThrow) {
  TempDir dir;
  EXPECT_THROW(read_png(dir / "absent.png"), IoError);
  ImageRgb8 bad;
  bad.width = 4;
  bad.height = 4;
  bad.pixels.resize(5);
  EXPECT_THROW(write_png(dir / "bad.png", bad), std::invalid_argument);
}

// Under an affine map segments project to segments, so every painted pixel is
// predictable: center within stroke/2 of some projected marking.
TEST(Overlay, SegmentsMatchBruteForceRasterization) {
  const CourtTemplate court = CourtTemplate::rectangular(2800.0, 1500.0);
  const Homography h = affine_place(0.2, 20.0, 20.0);
  ImageRgb8 img = ImageRgb8::filled(600, 340, 10, 10, 10);
  draw_court_overlay(img, court, h);

  std::vector<std::pair<Vec2, Vec2>> segs;
  for (const Drawable& d : court.lines) {
    const auto& s = std::get<Segment>(d);
    segs.emplace_back(apply(h, s.a), apply(h, s.b));
  }
  const double r2 = 1.0;  // (stroke 2)/2 squared
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const Vec2 p(x, y);
      bool expect = false;
      for (const auto& [a, b] : segs) {
        const Vec2 d = b - a;
        const double t = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
        if ((p - (a + t * d)).squaredNorm() <= r2) {
          expect = true;
          break;
        }
      }
      ASSERT_EQ(is_style_color(img, x, y), expect) << "pixel " << x << "," << y;
    }
}

TEST(Overlay, FlattenedCircleStaysOnTheRing) {
  CourtTemplate court = CourtTemplate::rectangular(2800.0, 1500.0);
  court.lines = {Arc{Vec2(1400.0, 750.0), 180.0, 0.0, 360.0}};
  const Homography h = affine_place(0.2, 20.0, 20.0);
  ImageRgb8 img = ImageRgb8::filled(600, 340, 10, 10, 10);
  draw_court_overlay(img, court, h);

  const Vec2 center = apply(h, Vec2(1400.0, 750.0));
  const double ring = 180.0 * 0.2;
  int painted = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double d = (Vec2(x, y) - center).norm();
      if (is_style_color(img, x, y)) {
        ++painted;
        EXPECT_LE(std::abs(d - ring), 1.05) << "stray pixel " << x << "," << y;
      } else {
        // pixels solidly inside the stroke band must be painted
        EXPECT_GT(std::abs(d - ring), 0.90) << "gap pixel " << x << "," << y;
      }
    }
  EXPECT_GT(painted, 100);
}

TEST(Overlay, CourtOutsideTheFramePaintsNothing) {
  const CourtTemplate court = CourtTemplate::fiba();
  ImageRgb8 img = ImageRgb8::filled(64, 64, 5, 6, 7);
  const ImageRgb8 before = img;
  draw_court_overlay(img, court, affine_place(0.2, 5000.0, 5000.0));
  EXPECT_EQ(img.pixels, before.pixels);
}

TEST(Overlay, HorizonCrossingViewIsClippedNotCrashed) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(2, 1) = 1.0 / 750.0;
  m(2, 2) = -1.0;  // w changes sign across the court
  ImageRgb8 img = ImageRgb8::filled(200, 150, 0, 0, 0);
  draw_court_overlay(img, CourtTemplate::fiba(), Homography::from_matrix(m));
  SUCCEED();
}

TEST(Overlay, SampledViewIntegration) {
  ImageRgb8 img = ImageRgb8::filled(960, 540, 30, 80, 40);
  draw_court_overlay(img, CourtTemplate::fiba(), sample_view(5));
  int painted = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) painted += is_style_color(img, x, y);
  EXPECT_GT(painted, 300);

  TempDir dir;
  write_png(dir / "overlay.png", img);
  EXPECT_EQ(read_png(dir / "overlay.png").pixels, img.pixels);
}

TEST(Overlay, ValidatesStyle) {
  ImageRgb8 img = ImageRgb8::filled(8, 8, 0, 0, 0);
  OverlayStyle style;
  style.stroke_px = 0.0;
  EXPECT_THROW(draw_court_overlay(img, CourtTemplate::fiba(), Homography{}, style),
               std::invalid_argument);
}

}  // namespace
}  // namespace courtreg
