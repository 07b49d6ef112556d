#pragma once

// Camera footprint geometry, ground sampling distance, recall calibration and
// the instantaneous detection rate psi.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sarsim/error.hpp"
#include "sarsim/geometry.hpp"
#include "sarsim/terrain.hpp"

namespace sarsim {

/// Nadir camera. `h_fov_deg` spans the image width (`x_image` px) and is
/// aligned with the UAV heading; `v_fov_deg` spans the height (`y_image` px).
struct CameraModel {
  std::string name;
  double h_fov_deg = 0.0;
  double v_fov_deg = 0.0;
  int x_image = 1;
  int y_image = 1;

  /// Table-style construction: c1 is the short-side (vertical) angle, c2 the
  /// long-side (horizontal) one, resolution given as width x height.
  static CameraModel from_table(std::string name, double fov_c1, double fov_c2, int width,
                                int height) {
    CameraModel cam{std::move(name), fov_c2, fov_c1, width, height};
    cam.validate();
    return cam;
  }

  void validate() const {
    if (!(h_fov_deg > 0.0 && h_fov_deg < 180.0 && v_fov_deg > 0.0 && v_fov_deg < 180.0))
      throw ConfigError("camera " + name + ": FOV angles must lie in (0, 180) degrees");
    if (x_image < 1 || y_image < 1) throw ConfigError("camera " + name + ": resolution must be >= 1");
  }

  double tan_half_h() const { return std::tan(deg2rad(h_fov_deg) / 2.0); }
  double tan_half_v() const { return std::tan(deg2rad(v_fov_deg) / 2.0); }
};

namespace cameras {
inline CameraModel x5s() { return CameraModel::from_table("X5S", 39.2, 64.7, 5280, 2970); }
inline CameraModel z30() { return CameraModel::from_table("Z30", 33.9, 56.9, 1920, 1080); }
inline CameraModel mavic2ed() { return CameraModel::from_table("Mavic2ED", 57.58, 72.5, 4056, 3040); }

inline std::optional<CameraModel> by_name(std::string_view name) {
  if (name == "X5S") return x5s();
  if (name == "Z30") return z30();
  if (name == "Mavic2ED") return mavic2ed();
  return std::nullopt;
}
}  // namespace cameras

struct Gsd {
  double horizontal = 0.0;  // cm/px
  double vertical = 0.0;    // cm/px
};

/// Ground sampling distance in cm/px at relative height h metres.
inline Gsd gsd(const CameraModel& cam, double h) {
  if (!(h > 0.0)) throw DomainError("gsd: height must be positive");
  return {100.0 * (2.0 * h * cam.tan_half_h()) / cam.x_image,
          100.0 * (2.0 * h * cam.tan_half_v()) / cam.y_image};
}

struct RecallBin {
  double gsd_low = 0.0;
  double gsd_high = 0.0;
  double recall = 0.0;
};

/// Detector recall per half-open GSD bin [low, high).
class RecallTable {
 public:
  RecallTable() = default;
  explicit RecallTable(std::vector<RecallBin> bins) : bins_(std::move(bins)) { validate(); }

  /// Initial-experiment calibration, 0.5 cm/px bins from 0.5 to 6.5.
  static RecallTable initial_experiment() {
    return RecallTable({{0.5, 1.0, 0.95},   {1.0, 1.5, 0.977}, {1.5, 2.0, 0.956},
                        {2.0, 2.5, 0.953},  {2.5, 3.0, 0.897}, {3.0, 3.5, 0.881},
                        {3.5, 4.0, 0.781},  {4.0, 4.5, 0.796}, {4.5, 5.0, 0.719},
                        {5.0, 5.5, 0.699},  {5.5, 6.0, 0.621}, {6.0, 6.5, 0.142}});
  }

  const std::vector<RecallBin>& bins() const { return bins_; }

  /// Recall of the bin containing `g`; clamps to the first bin below the
  /// table and returns 0 at or above its upper end.
  double lookup(double g) const {
    if (!(g > 0.0)) throw DomainError("recall_lookup: gsd must be positive");
    if (bins_.empty()) return 0.0;
    if (g < bins_.front().gsd_low) return bins_.front().recall;
    auto it = std::upper_bound(bins_.begin(), bins_.end(), g,
                               [](double v, const RecallBin& b) { return v < b.gsd_high; });
    return it == bins_.end() ? 0.0 : it->recall;
  }

  /// One `low high recall` line per bin; numbers in shortest round-trip form
  /// with at least one decimal.
  std::string format() const {
    std::string out;
    for (const auto& b : bins_) {
      out += format_number(b.gsd_low) + ' ' + format_number(b.gsd_high) + ' ' +
             format_number(b.recall) + '\n';
    }
    return out;
  }

  static RecallTable parse(std::istream& in) {
    std::vector<RecallBin> bins;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto toks = detail::split_ws(line);
      if (toks.empty() || toks[0].front() == '#') continue;
      RecallBin b;
      if (toks.size() != 3 || !detail::parse_double(toks[0], b.gsd_low) ||
          !detail::parse_double(toks[1], b.gsd_high) || !detail::parse_double(toks[2], b.recall))
        throw ParseError("recall table: expected 'gsd_low gsd_high recall'", lineno);
      bins.push_back(b);
    }
    return RecallTable(std::move(bins));
  }

  static RecallTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("recall table: cannot open '" + path + "'");
    return parse(in);
  }

  static std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
  }

 private:
  void validate() const {
    for (std::size_t i = 0; i < bins_.size(); ++i) {
      const auto& b = bins_[i];
      if (!(b.gsd_low >= 0.0 && b.gsd_high > b.gsd_low))
        throw ConfigError("recall table: bin " + std::to_string(i + 1) + " has an invalid range");
      if (!(b.recall >= 0.0 && b.recall <= 1.0))
        throw ConfigError("recall table: recall outside [0, 1] in bin " + std::to_string(i + 1));
      if (i > 0 && std::abs(bins_[i - 1].gsd_high - b.gsd_low) > 1e-9)
        throw ConfigError("recall table: bins must be contiguous and ascending");
    }
  }

  std::vector<RecallBin> bins_;
};

/// psi = rate_scale * recall(gsd) * cos^falloff(off-nadir angle) inside the
/// visible footprint.
struct SensingParams {
  double rate_scale = 0.05;       // 1/s
  double falloff_exponent = 2.0;  // dimensionless

  void validate() const {
    if (!(rate_scale >= 0.0)) throw ConfigError("sensing: rate_scale must be >= 0");
    if (!(falloff_exponent >= 0.0)) throw ConfigError("sensing: falloff_exponent must be >= 0");
  }
};

struct CameraPose {
  Vec3 position;
  double yaw = 0.0;  // radians, counter-clockwise from +x
};

/// Ground point in camera coordinates: x along the heading, y to its left,
/// z = ground - camera altitude (negative below the camera).
inline Vec3 to_camera_frame(const CameraPose& pose, Vec2 p, double ground_z) {
  const double dx = p.x - pose.position.x, dy = p.y - pose.position.y;
  const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
  return {c * dx + s * dy, -s * dx + c * dy, ground_z - pose.position.z};
}

inline Vec3 to_camera_frame(const CameraPose& pose, Vec2 p, const TerrainGrid& terrain) {
  return to_camera_frame(pose, p, terrain.elevation_at(p));
}

/// Rectangular nadir frustum test.
inline bool in_fov(const CameraModel& cam, Vec3 r) {
  if (!(r.z < 0.0)) return false;
  const double depth = -r.z;
  return std::abs(r.x) <= depth * cam.tan_half_h() && std::abs(r.y) <= depth * cam.tan_half_v();
}

/// Detection rate psi at ground point p whose elevation is `ground_z`.
inline double detection_rate(const CameraPose& pose, Vec2 p, double ground_z,
                             const CameraModel& cam, const TerrainGrid& terrain,
                             const RecallTable& table, const SensingParams& params) {
  if (params.rate_scale == 0.0) return 0.0;
  const Vec3 r = to_camera_frame(pose, p, ground_z);
  if (!in_fov(cam, r)) return 0.0;
  if (!terrain.line_of_sight(pose.position, Vec3{p.x, p.y, ground_z})) return 0.0;
  const double recall = table.lookup(gsd(cam, -r.z).horizontal);
  if (recall == 0.0) return 0.0;
  const double cos_theta = -r.z / norm(r);
  return params.rate_scale * recall * std::pow(cos_theta, params.falloff_exponent);
}

inline double detection_rate(const CameraPose& pose, Vec2 p, const CameraModel& cam,
                             const TerrainGrid& terrain, const RecallTable& table,
                             const SensingParams& params) {
  return detection_rate(pose, p, terrain.elevation_at(p), cam, terrain, table, params);
}

}  // namespace sarsim
