#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "courtreg/court.hpp"
#include "courtreg/heatmap.hpp"
#include "courtreg/homography.hpp"

namespace courtreg {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Tensor container, little-endian throughout:
//   offset 0   magic "KCHM"
//   offset 4   version u32, currently 1
//   offset 8   dtype u8 (0 = f32 scores, 1 = u16 labels), 3 reserved zero bytes
//   offset 12  dims C, H, W as u32
//   offset 24  C*H*W values, channel-major then row-major
// Label maps always carry C = 1. The payload must match the header exactly;
// float payloads must be finite.
struct TensorFormatError : std::runtime_error {
  enum class Code { bad_magic, bad_version, bad_dtype, bad_header, size_mismatch, non_finite };
  Code code;
  TensorFormatError(Code c, const std::string& what) : std::runtime_error(what), code(c) {}
};

inline constexpr std::array<std::uint8_t, 4> kTensorMagic{'K', 'C', 'H', 'M'};
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::size_t kTensorHeaderSize = 24;

namespace detail {

inline void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_header(std::vector<std::uint8_t>& out, std::uint8_t dtype, std::uint32_t c,
                       std::uint32_t h, std::uint32_t w) {
  for (std::uint8_t b : kTensorMagic) out.push_back(b);
  put_u32le(out, kTensorVersion);
  out.push_back(dtype);
  out.push_back(0);
  out.push_back(0);
  out.push_back(0);
  put_u32le(out, c);
  put_u32le(out, h);
  put_u32le(out, w);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_tensor_file(const HeatmapTensor& t) {
  if (t.channels < 1 || t.height < 1 || t.width < 1)
    throw TensorFormatError(TensorFormatError::Code::bad_header, "tensor file: empty dimensions");
  for (float v : t.scores)
    if (!std::isfinite(v))
      throw TensorFormatError(TensorFormatError::Code::non_finite,
                              "tensor file: non-finite score");
  std::vector<std::uint8_t> out;
  out.reserve(kTensorHeaderSize + t.scores.size() * 4);
  detail::put_header(out, 0, static_cast<std::uint32_t>(t.channels),
                     static_cast<std::uint32_t>(t.height), static_cast<std::uint32_t>(t.width));
  for (float v : t.scores) detail::put_u32le(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline std::vector<std::uint8_t> encode_tensor_file(const ClassMap& m) {
  if (m.height < 1 || m.width < 1)
    throw TensorFormatError(TensorFormatError::Code::bad_header, "tensor file: empty dimensions");
  std::vector<std::uint8_t> out;
  out.reserve(kTensorHeaderSize + m.labels.size() * 2);
  detail::put_header(out, 1, 1, static_cast<std::uint32_t>(m.height),
                     static_cast<std::uint32_t>(m.width));
  for (std::uint16_t v : m.labels) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  return out;
}

using TensorFilePayload = std::variant<HeatmapTensor, ClassMap>;

// Strict decode: unknown magic, version, dtype, nonzero reserved bytes, zero
// dims, payload size mismatch and non-finite floats are all rejected.
inline TensorFilePayload decode_tensor_file(std::span<const std::uint8_t> bytes) {
  using Code = TensorFormatError::Code;
  if (bytes.size() < kTensorHeaderSize ||
      !std::equal(kTensorMagic.begin(), kTensorMagic.end(), bytes.begin()))
    throw TensorFormatError(Code::bad_magic, "tensor file: bad magic");
  const std::uint32_t version = detail::get_u32le(bytes.data() + 4);
  if (version != kTensorVersion)
    throw TensorFormatError(Code::bad_version,
                            "tensor file: unsupported version " + std::to_string(version));
  const std::uint8_t dtype = bytes[8];
  if (dtype != 0 && dtype != 1)
    throw TensorFormatError(Code::bad_dtype,
                            "tensor file: unknown dtype " + std::to_string(dtype));
  if (bytes[9] != 0 || bytes[10] != 0 || bytes[11] != 0)
    throw TensorFormatError(Code::bad_header, "tensor file: reserved bytes must be zero");
  const std::uint64_t c = detail::get_u32le(bytes.data() + 12);
  const std::uint64_t h = detail::get_u32le(bytes.data() + 16);
  const std::uint64_t w = detail::get_u32le(bytes.data() + 20);
  if (c < 1 || h < 1 || w < 1)
    throw TensorFormatError(Code::bad_header, "tensor file: zero dimension");
  if (dtype == 1 && c != 1)
    throw TensorFormatError(Code::bad_header, "tensor file: label maps must have one channel");
  if (c > (1u << 20) || h > (1u << 20) || w > (1u << 20))
    throw TensorFormatError(Code::bad_header, "tensor file: implausible dimensions");
  const std::uint64_t count = c * h * w;
  const std::uint64_t value_size = dtype == 0 ? 4 : 2;
  if (bytes.size() != kTensorHeaderSize + count * value_size)
    throw TensorFormatError(Code::size_mismatch, "tensor file: payload size mismatch");

  const std::uint8_t* p = bytes.data() + kTensorHeaderSize;
  if (dtype == 0) {
    HeatmapTensor t = HeatmapTensor::zeros(static_cast<int>(c), static_cast<int>(h),
                                           static_cast<int>(w));
    for (std::uint64_t i = 0; i < count; ++i, p += 4) {
      const float v = std::bit_cast<float>(detail::get_u32le(p));
      if (!std::isfinite(v))
        throw TensorFormatError(Code::non_finite, "tensor file: non-finite score");
      t.scores[i] = v;
    }
    return t;
  }
  ClassMap m = ClassMap::filled(static_cast<int>(h), static_cast<int>(w), 0);
  for (std::uint64_t i = 0; i < count; ++i, p += 2)
    m.labels[i] = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  return m;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path,
                             std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline TensorFilePayload read_tensor_file(const std::filesystem::path& path) {
  return decode_tensor_file(read_file_bytes(path));
}

template <typename T>
void write_tensor_file(const std::filesystem::path& path, const T& tensor) {
  const auto bytes = encode_tensor_file(tensor);
  write_file_bytes(path, bytes);
}

// ---- JSON documents ----------------------------------------------------
//
// Doubles round-trip value-exactly (shortest-representation printing).

inline nlohmann::json template_to_json(const CourtTemplate& t) {
  nlohmann::json lines = nlohmann::json::array();
  for (const Drawable& d : t.lines) {
    if (const auto* s = std::get_if<Segment>(&d)) {
      lines.push_back({{"type", "segment"},
                       {"a", {s->a.x(), s->a.y()}},
                       {"b", {s->b.x(), s->b.y()}}});
    } else {
      const auto& a = std::get<Arc>(d);
      lines.push_back({{"type", "arc"},
                       {"center", {a.center.x(), a.center.y()}},
                       {"radius_cm", a.radius_cm},
                       {"start_deg", a.start_deg},
                       {"end_deg", a.end_deg}});
    }
  }
  return {{"length_cm", t.length_cm}, {"width_cm", t.width_cm}, {"lines", lines}};
}

namespace detail {

inline Vec2 vec2_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw IoError("json: expected a two-element numeric array");
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

}  // namespace detail

inline CourtTemplate template_from_json(const nlohmann::json& j) {
  CourtTemplate t;
  try {
    t.length_cm = j.at("length_cm").get<double>();
    t.width_cm = j.at("width_cm").get<double>();
    t.lines.clear();
    for (const auto& l : j.at("lines")) {
      const std::string type = l.at("type").get<std::string>();
      if (type == "segment") {
        t.lines.push_back(Segment{detail::vec2_from_json(l.at("a")),
                                  detail::vec2_from_json(l.at("b"))});
      } else if (type == "arc") {
        t.lines.push_back(Arc{detail::vec2_from_json(l.at("center")),
                              l.at("radius_cm").get<double>(),
                              l.at("start_deg").get<double>(),
                              l.at("end_deg").get<double>()});
      } else {
        throw IoError("court template json: unknown drawable type '" + type + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("court template json: ") + e.what());
  }
  t.validate();
  return t;
}

inline const char* to_string(ClassRole role) {
  switch (role) {
    case ClassRole::court: return "court";
    case ClassRole::basket: return "basket";
    case ClassRole::background: return "background";
  }
  return "court";
}

inline const char* to_string(CameraSide side) {
  return side == CameraSide::y_zero ? "y_zero" : "y_max";
}

inline nlohmann::json layout_to_json(const KeypointLayout& layout) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : layout.entries) {
    nlohmann::json je{{"id", e.id}, {"role", to_string(e.role)}, {"usable", e.usable_for_homography}};
    je["xy_cm"] = e.court_xy_cm ? nlohmann::json{e.court_xy_cm->x(), e.court_xy_cm->y()}
                                : nlohmann::json(nullptr);
    entries.push_back(je);
  }
  return {{"template", template_to_json(layout.court)},
          {"spec",
           {{"rows", layout.spec.rows},
            {"cols", layout.spec.cols},
            {"w0_cm", layout.spec.w0_cm},
            {"camera_side", to_string(layout.spec.camera_side)}}},
          {"entries", entries}};
}

inline KeypointLayout layout_from_json(const nlohmann::json& j) {
  KeypointLayout layout;
  try {
    layout.court = template_from_json(j.at("template"));
    const auto& s = j.at("spec");
    layout.spec.rows = s.at("rows").get<int>();
    layout.spec.cols = s.at("cols").get<int>();
    layout.spec.w0_cm = s.at("w0_cm").get<double>();
    const std::string side = s.at("camera_side").get<std::string>();
    if (side == "y_zero") {
      layout.spec.camera_side = CameraSide::y_zero;
    } else if (side == "y_max") {
      layout.spec.camera_side = CameraSide::y_max;
    } else {
      throw IoError("layout json: unknown camera_side '" + side + "'");
    }
    for (const auto& je : j.at("entries")) {
      KeypointEntry e;
      e.id = je.at("id").get<int>();
      const std::string role = je.at("role").get<std::string>();
      if (role == "court") {
        e.role = ClassRole::court;
      } else if (role == "basket") {
        e.role = ClassRole::basket;
      } else if (role == "background") {
        e.role = ClassRole::background;
      } else {
        throw IoError("layout json: unknown role '" + role + "'");
      }
      if (!je.at("xy_cm").is_null()) e.court_xy_cm = detail::vec2_from_json(je.at("xy_cm"));
      e.usable_for_homography = je.at("usable").get<bool>();
      layout.entries.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("layout json: ") + e.what());
  }
  layout.num_classes = static_cast<int>(layout.entries.size());
  layout.validate();
  return layout;
}

inline nlohmann::json homography_to_json(const Homography& h) {
  const Eigen::Matrix3d& m = h.matrix();
  return {{"direction", "court_to_image"},
          {"units", "cm_to_px"},
          {"h",
           {{m(0, 0), m(0, 1), m(0, 2)},
            {m(1, 0), m(1, 1), m(1, 2)},
            {m(2, 0), m(2, 1), m(2, 2)}}}};
}

inline Homography homography_from_json(const nlohmann::json& j) {
  try {
    if (j.at("direction").get<std::string>() != "court_to_image")
      throw IoError("homography json: unsupported direction");
    if (j.at("units").get<std::string>() != "cm_to_px")
      throw IoError("homography json: unsupported units");
    const auto& rows = j.at("h");
    if (!rows.is_array() || rows.size() != 3)
      throw IoError("homography json: h must be a 3x3 array");
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      if (!row.is_array() || row.size() != 3)
        throw IoError("homography json: h must be a 3x3 array");
      for (int c = 0; c < 3; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return Homography::from_matrix(m);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("homography json: ") + e.what());
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid json in " + path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

inline KeypointLayout read_layout_file(const std::filesystem::path& path) {
  return layout_from_json(read_json_file(path));
}

inline Homography read_homography_file(const std::filesystem::path& path) {
  return homography_from_json(read_json_file(path));
}

}  // namespace courtreg
