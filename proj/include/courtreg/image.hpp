#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <vector>

#include "courtreg/court.hpp"
#include "courtreg/homography.hpp"
#include "courtreg/io.hpp"

namespace courtreg {

struct ImageRgb8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // rgb interleaved, row-major

  static ImageRgb8 filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (w < 1 || h < 1) throw std::invalid_argument("image: dimensions must be positive");
    ImageRgb8 img;
    img.width = w;
    img.height = h;
    img.pixels.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
      img.pixels[i] = r;
      img.pixels[i + 1] = g;
      img.pixels[i + 2] = b;
    }
    return img;
  }

  std::uint8_t* px(int x, int y) {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* px(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
};

// Any readable PNG converts to 8-bit RGB on load.
inline ImageRgb8 read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str()))
    throw IoError("png read failed for " + path.string() + ": " + png.message);
  png.format = PNG_FORMAT_RGB;
  ImageRgb8 img;
  img.width = static_cast<int>(png.width);
  img.height = static_cast<int>(png.height);
  img.pixels.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string message = png.message;
    png_image_free(&png);
    throw IoError("png read failed for " + path.string() + ": " + message);
  }
  return img;
}

inline void write_png(const std::filesystem::path& path, const ImageRgb8& img) {
  if (img.width < 1 || img.height < 1 ||
      img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * 3)
    throw std::invalid_argument("png write: malformed image buffer");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, img.pixels.data(), 0, nullptr))
    throw IoError("png write failed for " + path.string() + ": " + png.message);
}

struct OverlayStyle {
  std::uint8_t r = 255, g = 221, b = 0;
  double stroke_px = 2.0;
  double arc_step_deg = 2.0;  // chord length for flattened arcs
};

namespace detail {

// Paints every pixel whose center lies within `radius` of segment ab.
inline void rasterize_segment(ImageRgb8& img, const Vec2& a, const Vec2& b, double radius,
                              std::uint8_t cr, std::uint8_t cg, std::uint8_t cb) {
  const double x0 = std::min(a.x(), b.x()) - radius, x1 = std::max(a.x(), b.x()) + radius;
  const double y0 = std::min(a.y(), b.y()) - radius, y1 = std::max(a.y(), b.y()) + radius;
  // reject in double space first: near-horizon segments project far beyond
  // int range, and float-to-int overflow is undefined
  if (x1 < 0.0 || y1 < 0.0 || x0 > img.width - 1.0 || y0 > img.height - 1.0) return;
  const int ix0 = static_cast<int>(std::floor(std::max(0.0, x0)));
  const int ix1 = static_cast<int>(std::ceil(std::min(x1, img.width - 1.0)));
  const int iy0 = static_cast<int>(std::floor(std::max(0.0, y0)));
  const int iy1 = static_cast<int>(std::ceil(std::min(y1, img.height - 1.0)));
  const Vec2 d = b - a;
  const double len2 = d.squaredNorm();
  const double r2 = radius * radius;
  for (int y = iy0; y <= iy1; ++y) {
    for (int x = ix0; x <= ix1; ++x) {
      const Vec2 p(x, y);
      double t = len2 > 0.0 ? (p - a).dot(d) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      if ((p - (a + t * d)).squaredNorm() > r2) continue;
      std::uint8_t* out = img.px(x, y);
      out[0] = cr;
      out[1] = cg;
      out[2] = cb;
    }
  }
}

// Projects one court-space segment and paints the part in front of the
// camera. w is linear along the segment, so the visible portion is a single
// parameter interval.
inline void draw_court_segment(ImageRgb8& img, const Eigen::Matrix3d& h, const Vec2& a,
                               const Vec2& b, const OverlayStyle& style) {
  const Eigen::Vector3d qa = h * Eigen::Vector3d(a.x(), a.y(), 1.0);
  const Eigen::Vector3d qb = h * Eigen::Vector3d(b.x(), b.y(), 1.0);
  const double eps = 1e-9;
  double t0 = 0.0, t1 = 1.0;
  const double wa = qa.z(), wb = qb.z();
  if (wa <= eps && wb <= eps) return;
  if (wa <= eps || wb <= eps) {
    // clip against w = eps, keep a margin so the projection stays finite
    const double tc = (eps * 2.0 - wa) / (wb - wa);
    if (wa <= eps)
      t0 = tc;
    else
      t1 = tc;
    if (!(t0 < t1)) return;
  }
  const Eigen::Vector3d p0 = qa + t0 * (qb - qa);
  const Eigen::Vector3d p1 = qa + t1 * (qb - qa);
  rasterize_segment(img, Vec2(p0.x() / p0.z(), p0.y() / p0.z()),
                    Vec2(p1.x() / p1.z(), p1.y() / p1.z()), style.stroke_px / 2.0, style.r,
                    style.g, style.b);
}

}  // namespace detail

// Projects the template markings through the homography and paints them with
// a fixed stroke. Arcs are flattened to chords in court space first. Lines
// outside the frame simply paint nothing.
inline void draw_court_overlay(ImageRgb8& img, const CourtTemplate& court, const Homography& h,
                               const OverlayStyle& style = {}) {
  court.validate();
  if (!(style.stroke_px > 0.0) || !(style.arc_step_deg > 0.0))
    throw std::invalid_argument("overlay: stroke and arc step must be positive");
  const Eigen::Matrix3d& m = h.matrix();
  for (const Drawable& d : court.lines) {
    if (const auto* s = std::get_if<Segment>(&d)) {
      detail::draw_court_segment(img, m, s->a, s->b, style);
    } else {
      const auto& a = std::get<Arc>(d);
      const double sweep = a.end_deg - a.start_deg;
      const int pieces =
          std::max(1, static_cast<int>(std::ceil(std::abs(sweep) / style.arc_step_deg)));
      for (int i = 0; i < pieces; ++i) {
        const double d0 = (a.start_deg + sweep * i / pieces) * std::numbers::pi / 180.0;
        const double d1 = (a.start_deg + sweep * (i + 1) / pieces) * std::numbers::pi / 180.0;
        detail::draw_court_segment(
            img, m, a.center + a.radius_cm * Vec2(std::cos(d0), std::sin(d0)),
            a.center + a.radius_cm * Vec2(std::cos(d1), std::sin(d1)), style);
      }
    }
  }
}

}  // namespace courtreg
