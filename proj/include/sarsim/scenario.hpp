#pragma once

// Scenario files: JSON documents describing a mission. Unknown keys and
// ill-typed values are rejected with the JSON path of the offending entry,
// e.g. `$.flights[1].duration`.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "sarsim/error.hpp"
#include "sarsim/mission.hpp"

namespace sarsim {

using Json = nlohmann::ordered_json;

struct MonteCarloSettings {
  std::size_t targets = 2000;
  std::vector<std::uint64_t> seeds;  // empty: the mission seed alone
};

struct Scenario {
  MissionConfig mission;
  MonteCarloSettings monte_carlo;
  std::filesystem::path source;
  std::filesystem::path terrain_path;
};

namespace detail {

/// Strict view of one JSON object: typed getters record the keys they touch
/// and `finish()` rejects anything left over.
class JsonObject {
 public:
  JsonObject(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  const std::string& path() const { return path_; }
  std::string child(const std::string& key) const { return path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const Json& require(const std::string& key) {
    const Json* v = find(key);
    if (!v) throw ConfigError(child(key) + ": missing required key");
    return *v;
  }

  double number(const std::string& key, double fallback) {
    const Json* v = find(key);
    return v ? as_number(*v, child(key)) : fallback;
  }
  double number(const std::string& key) { return as_number(require(key), child(key)); }

  long long integer(const std::string& key, long long fallback) {
    const Json* v = find(key);
    return v ? as_integer(*v, child(key)) : fallback;
  }
  long long integer(const std::string& key) { return as_integer(require(key), child(key)); }

  std::string string(const std::string& key, const std::string& fallback) {
    const Json* v = find(key);
    return v ? as_string(*v, child(key)) : fallback;
  }
  std::string string(const std::string& key) { return as_string(require(key), child(key)); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(child(it.key()) + ": unknown key");
  }

  static double as_number(const Json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
    return v.get<double>();
  }
  static long long as_integer(const Json& v, const std::string& path) {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<long long>(d);
    }
    throw ConfigError(path + ": expected an integer");
  }
  static std::string as_string(const Json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path + ": expected a string");
    return v.get<std::string>();
  }
  static const Json& as_array(const Json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError(path + ": expected an array");
    return v;
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::string index_path(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

inline Vec2 read_point(const Json& v, const std::string& path) {
  JsonObject::as_array(v, path);
  if (v.size() != 2) throw ConfigError(path + ": expected [x, y]");
  return {JsonObject::as_number(v[0], index_path(path, 0)), JsonObject::as_number(v[1], index_path(path, 1))};
}

inline Zone read_zone(const Json& v, const std::string& path) {
  JsonObject o(v, path);
  Zone z;
  z.id = o.string("id");
  const long long people = o.integer("person_count");
  if (people < 0) throw ConfigError(o.child("person_count") + ": must be >= 0");
  z.person_count = static_cast<int>(people);
  const std::string pp = o.child("polygon");
  const Json& poly = JsonObject::as_array(o.require("polygon"), pp);
  for (std::size_t i = 0; i < poly.size(); ++i) z.polygon.push_back(read_point(poly[i], index_path(pp, i)));
  o.finish();
  try {
    z.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return z;
}

inline void read_uav(const Json& v, const std::string& path, UavLimits& lim) {
  JsonObject o(v, path);
  lim.phi_min_deg = o.number("phi_min_deg", lim.phi_min_deg);
  lim.phi_max_deg = o.number("phi_max_deg", lim.phi_max_deg);
  lim.vh_min = o.number("vh_min", lim.vh_min);
  lim.vh_max = o.number("vh_max", lim.vh_max);
  lim.vz_min = o.number("vz_min", lim.vz_min);
  lim.vz_max = o.number("vz_max", lim.vz_max);
  lim.ah_min = o.number("ah_min", lim.ah_min);
  lim.ah_max = o.number("ah_max", lim.ah_max);
  lim.av_min = o.number("av_min", lim.av_min);
  lim.av_max = o.number("av_max", lim.av_max);
  lim.omega_max_deg = o.number("omega_max_deg", lim.omega_max_deg);
  o.finish();
  try {
    lim.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void read_camera(const Json& v, const std::string& path, CameraModel& cam) {
  JsonObject o(v, path);
  cam.v_fov_deg = o.number("fov_c1_deg", cam.v_fov_deg);
  cam.h_fov_deg = o.number("fov_c2_deg", cam.h_fov_deg);
  cam.x_image = static_cast<int>(o.integer("width", cam.x_image));
  cam.y_image = static_cast<int>(o.integer("height", cam.y_image));
  o.finish();
  try {
    cam.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Parses a `--set` value: JSON when it parses, otherwise a bare string.
inline Json override_value(const std::string& text) {
  Json v = Json::parse(text, nullptr, false);
  if (v.is_discarded()) return Json(text);
  return v;
}

}  // namespace detail

/// Applies `key=value` with a dotted key; numeric segments index arrays.
/// Missing object keys are created so a misspelt key fails schema checking.
inline void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  Json* node = &doc;
  std::string path = "$";
  std::size_t pos = 0;
  while (true) {
    const auto dot = key.find('.', pos);
    const std::string seg = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (seg.empty()) throw ConfigError("--set: empty path segment in '" + key + "'");
    if (node->is_array()) {
      std::size_t i = 0;
      const auto res = std::from_chars(seg.data(), seg.data() + seg.size(), i);
      if (res.ec != std::errc() || res.ptr != seg.data() + seg.size() || i >= node->size())
        throw ConfigError("--set: " + path + " has no element '" + seg + "'");
      path = detail::index_path(path, i);
      node = &(*node)[i];
    } else {
      if (node->is_null()) *node = Json::object();
      if (!node->is_object()) throw ConfigError("--set: " + path + " is not an object");
      path += "." + seg;
      node = &(*node)[seg];
    }
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  *node = detail::override_value(assignment.substr(eq + 1));
}

/// Builds a scenario from a parsed document. Relative paths resolve against
/// `base_dir`.
inline Scenario parse_scenario(const Json& doc, const std::filesystem::path& base_dir) {
  using detail::JsonObject;
  Scenario sc;
  MissionConfig& m = sc.mission;
  JsonObject root(doc, "$");

  m.id = root.string("id", "mission");
  const std::string terrain_rel = root.string("terrain");
  sc.terrain_path = base_dir / terrain_rel;

  {
    const Json& zs = JsonObject::as_array(root.require("zones"), "$.zones");
    if (zs.empty()) throw ConfigError("$.zones: at least one zone is required");
    for (std::size_t i = 0; i < zs.size(); ++i) m.zones.push_back(detail::read_zone(zs[i], detail::index_path("$.zones", i)));
    for (std::size_t i = 0; i < m.zones.size(); ++i)
      for (std::size_t k = 0; k < i; ++k)
        if (m.zones[i].id == m.zones[k].id)
          throw ConfigError(detail::index_path("$.zones", i) + ".id: duplicate zone id '" + m.zones[i].id + "'");
  }

  m.offset = root.number("offset", m.offset);
  if (!(m.offset >= 0.0)) throw ConfigError("$.offset: must be >= 0");

  if (const Json* g = root.find("grid")) {
    JsonObject o(*g, "$.grid");
    m.cell_size = o.number("cell_size", m.cell_size);
    if (!(m.cell_size > 0.0)) throw ConfigError("$.grid.cell_size: must be > 0");
    o.finish();
  }

  if (const Json* h = root.find("hedac")) {
    JsonObject o(*h, "$.hedac");
    m.hedac.alpha = o.number("alpha", m.hedac.alpha);
    m.hedac.beta = o.number("beta", m.hedac.beta);
    m.hedac.solver_tolerance = o.number("solver_tolerance", m.hedac.solver_tolerance);
    m.hedac.max_iterations = static_cast<int>(o.integer("max_iterations", m.hedac.max_iterations));
    o.finish();
    try {
      m.hedac.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("$.hedac: ") + e.what());
    }
  }

  if (const Json* s = root.find("sensing")) {
    JsonObject o(*s, "$.sensing");
    m.sensing.rate_scale = o.number("rate_scale", m.sensing.rate_scale);
    m.sensing.falloff_exponent = o.number("falloff_exponent", m.sensing.falloff_exponent);
    const std::string table = o.string("recall_table", "");
    o.finish();
    try {
      m.sensing.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("$.sensing: ") + e.what());
    }
    if (!table.empty()) m.recall = RecallTable::load((base_dir / table).string());
  }

  if (const Json* p = root.find("mpc")) {
    JsonObject o(*p, "$.mpc");
    m.mpc.horizon_steps = static_cast<int>(o.integer("horizon_steps", m.mpc.horizon_steps));
    m.mpc.horizon_duration = o.number("horizon_duration", m.mpc.horizon_duration);
    m.mpc.w_v = o.number("w_v", m.mpc.w_v);
    m.mpc.w_h = o.number("w_h", m.mpc.w_h);
    m.mpc.lattice_levels = static_cast<int>(o.integer("lattice_levels", m.mpc.lattice_levels));
    o.finish();
  }

  if (const Json* t = root.find("timing")) {
    JsonObject o(*t, "$.timing");
    m.timing.kinematic_dt = o.number("kinematic_dt", m.timing.kinematic_dt);
    m.timing.control_dt = o.number("control_dt", m.timing.control_dt);
    o.finish();
    if (!(m.timing.kinematic_dt > 0.0 && m.timing.control_dt > 0.0))
      throw ConfigError("$.timing: steps must be > 0");
  }

  // Presets, optionally overridden or extended by name.
  std::map<std::string, UavLimits> uav_presets{{"M210", uavs::m210()}, {"Mavic2ED", uavs::mavic2ed()}};
  std::map<std::string, CameraModel> cam_presets{
      {"X5S", cameras::x5s()}, {"Z30", cameras::z30()}, {"Mavic2ED", cameras::mavic2ed()}};
  if (const Json* u = root.find("uavs")) {
    if (!u->is_object()) throw ConfigError("$.uavs: expected an object");
    for (auto it = u->begin(); it != u->end(); ++it) {
      UavLimits lim = uav_presets.count(it.key()) ? uav_presets[it.key()] : UavLimits{};
      lim.name = it.key();
      detail::read_uav(it.value(), "$.uavs." + it.key(), lim);
      uav_presets[it.key()] = lim;
    }
  }
  if (const Json* c = root.find("cameras")) {
    if (!c->is_object()) throw ConfigError("$.cameras: expected an object");
    for (auto it = c->begin(); it != c->end(); ++it) {
      CameraModel cam = cam_presets.count(it.key()) ? cam_presets[it.key()] : CameraModel{};
      cam.name = it.key();
      detail::read_camera(it.value(), "$.cameras." + it.key(), cam);
      cam_presets[it.key()] = cam;
    }
  }

  m.home = detail::read_point(root.require("home"), "$.home");

  {
    const Json& fs = JsonObject::as_array(root.require("flights"), "$.flights");
    if (fs.empty()) throw ConfigError("$.flights: at least one flight is required");
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const std::string fp = detail::index_path("$.flights", i);
      JsonObject o(fs[i], fp);
      FlightConfig f;
      f.uav = o.string("uav");
      if (!uav_presets.count(f.uav)) throw ConfigError(o.child("uav") + ": unknown UAV preset '" + f.uav + "'");
      f.limits = uav_presets[f.uav];
      f.camera = o.string("camera");
      if (!cam_presets.count(f.camera))
        throw ConfigError(o.child("camera") + ": unknown camera preset '" + f.camera + "'");
      f.camera_model = cam_presets[f.camera];
      f.min_altitude = o.number("min_altitude");
      f.goal_altitude = o.number("goal_altitude");
      f.duration = o.number("duration");
      const std::string start = o.string("start", "home");
      if (start != "home" && start != "continue")
        throw ConfigError(o.child("start") + ": expected \"home\" or \"continue\"");
      f.continue_previous = start == "continue";
      if (const Json* zs = o.find("zones")) {
        JsonObject::as_array(*zs, o.child("zones"));
        for (std::size_t k = 0; k < zs->size(); ++k) {
          const std::string zp = detail::index_path(o.child("zones"), k);
          const std::string zid = JsonObject::as_string((*zs)[k], zp);
          const bool known = std::any_of(m.zones.begin(), m.zones.end(), [&](const Zone& z) { return z.id == zid; });
          if (!known) throw ConfigError(zp + ": unknown zone '" + zid + "'");
          f.zones.push_back(zid);
        }
      } else {
        for (const auto& z : m.zones) f.zones.push_back(z.id);
      }
      o.finish();
      try {
        f.validate(m.global_floor);
      } catch (const ConfigError& e) {
        throw ConfigError(fp + ": " + e.what());
      }
      m.flights.push_back(f);
    }
  }

  const long long seed = root.integer("seed", 0);
  if (seed < 0) throw ConfigError("$.seed: must be >= 0");
  m.seed = static_cast<std::uint64_t>(seed);

  if (const Json* mc = root.find("monte_carlo")) {
    JsonObject o(*mc, "$.monte_carlo");
    const long long targets = o.integer("targets", static_cast<long long>(sc.monte_carlo.targets));
    if (targets < 1) throw ConfigError("$.monte_carlo.targets: must be >= 1");
    sc.monte_carlo.targets = static_cast<std::size_t>(targets);
    if (const Json* seeds = o.find("seeds")) {
      JsonObject::as_array(*seeds, "$.monte_carlo.seeds");
      for (std::size_t i = 0; i < seeds->size(); ++i) {
        const long long s = JsonObject::as_integer((*seeds)[i], detail::index_path("$.monte_carlo.seeds", i));
        if (s < 0) throw ConfigError(detail::index_path("$.monte_carlo.seeds", i) + ": must be >= 0");
        sc.monte_carlo.seeds.push_back(static_cast<std::uint64_t>(s));
      }
    }
    o.finish();
  }

  root.finish();
  return sc;
}

/// Reads the JSON document at `path`, applying `--set` overrides first.
inline Json read_scenario_document(const std::filesystem::path& path,
                                   const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scenario: cannot open '" + path.string() + "'");
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("scenario: '" + path.string() + "' is not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  return doc;
}

/// Loads the scenario and its terrain.
inline Scenario load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  const Json doc = read_scenario_document(path, overrides);
  Scenario sc = parse_scenario(doc, path.parent_path());
  sc.source = path;
  sc.mission.terrain = std::make_shared<const TerrainGrid>(load_terrain(sc.terrain_path.string()));
  return sc;
}

}  // namespace sarsim
