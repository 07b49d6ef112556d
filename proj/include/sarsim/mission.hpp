#pragma once

// Flight and mission orchestration, connected-flight state carry-over and
// Monte Carlo validation of the predicted search accomplishment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sarsim/error.hpp"
#include "sarsim/geometry.hpp"
#include "sarsim/hedac.hpp"
#include "sarsim/rng.hpp"
#include "sarsim/search_domain.hpp"
#include "sarsim/sensing.hpp"
#include "sarsim/terrain.hpp"
#include "sarsim/uav_control.hpp"

namespace sarsim {

struct FlightConfig {
  std::string uav = "M210";
  std::string camera = "X5S";
  UavLimits limits = uavs::m210();
  CameraModel camera_model = cameras::x5s();
  double min_altitude = 35.0;
  double goal_altitude = 55.0;
  std::vector<std::string> zones;
  double duration = 0.0;          // seconds
  bool continue_previous = false;  // resume the previous flight's UAV state

  void validate(double global_floor) const {
    limits.validate();
    camera_model.validate();
    if (!(min_altitude >= global_floor))
      throw ConfigError("flight: min_altitude must be >= " + std::to_string(global_floor));
    if (!(goal_altitude >= min_altitude)) throw ConfigError("flight: goal_altitude must be >= min_altitude");
    if (!(duration >= 0.0)) throw ConfigError("flight: duration must be >= 0");
  }
};

struct SimTiming {
  double kinematic_dt = 0.5;  // integration and logging step
  double control_dt = 1.0;    // coverage, potential and heading update
};

struct MissionConfig {
  std::string id = "mission";
  std::shared_ptr<const TerrainGrid> terrain;
  std::vector<Zone> zones;
  double offset = 75.0;
  double cell_size = 10.0;
  HedacParams hedac;
  SensingParams sensing;
  RecallTable recall = RecallTable::initial_experiment();
  MpcConfig mpc;  // h_min / h_goal are set per flight
  Vec2 home;
  std::vector<FlightConfig> flights;
  std::uint64_t seed = 0;
  SimTiming timing;
  double global_floor = 35.0;
};

/// Everything derived once per mission: flight domain, m0, zone ownership.
struct MissionContext {
  const MissionConfig* config = nullptr;
  SearchDomain domain;
  DensityGrid m0;
  std::vector<int> owner;
  double home_ground = 0.0;

  const TerrainGrid& terrain() const { return *config->terrain; }
};

inline MissionContext prepare_mission(const MissionConfig& cfg) {
  if (!cfg.terrain) throw ConfigError("mission: no terrain");
  if (cfg.flights.empty()) throw ConfigError("mission: needs at least one flight");
  cfg.hedac.validate();
  cfg.sensing.validate();
  MissionContext ctx;
  ctx.config = &cfg;
  ctx.domain = build_flight_domain(cfg.zones, cfg.offset, cfg.cell_size);
  const auto& t = *cfg.terrain;
  if (!(t.contains(ctx.domain.x_min, ctx.domain.y_min) && t.contains(ctx.domain.x_max, ctx.domain.y_max)))
    throw ConfigError("mission: terrain extent does not contain the flight domain");
  if (!t.contains(cfg.home.x, cfg.home.y)) throw ConfigError("mission: home point outside terrain");
  ctx.home_ground = t.elevation_at(cfg.home);
  int people = 0;
  for (const auto& z : cfg.zones) people += z.person_count;
  ctx.m0 = build_initial_density(cfg.zones, ctx.domain.grid, people);
  ctx.owner = zone_membership(cfg.zones, ctx.domain.grid);
  for (const auto& f : cfg.flights) {
    f.validate(cfg.global_floor);
    for (const auto& zid : f.zones) {
      const bool known = std::any_of(cfg.zones.begin(), cfg.zones.end(),
                                     [&](const Zone& z) { return z.id == zid; });
      if (!known) throw ConfigError("flight references unknown zone '" + zid + "'");
    }
  }
  return ctx;
}

struct LogSample {
  double t = 0.0;          // flight time
  double mission_t = 0.0;  // time since mission start
  double x = 0.0, y = 0.0, z = 0.0, heading = 0.0;
  double v_h = 0.0, v_z = 0.0;
  double rho = 0.0, phi = 0.0, omega = 0.0;
  double eta = 0.0;
  double ground = 0.0;
  bool floor_ok = true;
  bool velocity_ok = true;
  bool acceleration_ok = true;

  bool ok() const { return floor_ok && velocity_ok && acceleration_ok; }
};

struct FlightLog {
  std::vector<LogSample> samples;

  std::size_t violations() const {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [](const LogSample& s) { return !s.ok(); }));
  }
};

/// UAV state handed from one flight to the next. `cmd_v_h` / `cmd_v_z` is the
/// velocity reached at the end of the last planner segment.
struct FlightCarry {
  UavState uav;
  double cmd_v_h = 0.0;
  double cmd_v_z = 0.0;
  bool valid = false;
};

/// Called after every coverage update with the start and length of the
/// covered interval in mission time.
using CoverageObserver = std::function<void(const FieldState&, double t_start, double dt)>;

inline Vec2 desired_direction(const FieldState& field, const SearchDomain& domain,
                              const UavState& uav) {
  const Vec2 p = uav.xy();
  if (!domain.contains(p)) {
    const Vec2 inside = domain.clamp(p) - p;
    const double len = norm(inside);
    if (len > 0.0) return {inside.x / len, inside.y / len};
  }
  if (auto dir = steering_gradient(field, domain.clamp(p))) return *dir;
  return {std::cos(uav.heading), std::sin(uav.heading)};
}

/// Simulates one flight: kinematics every kinematic_dt, coverage / potential /
/// heading every control_dt, planner every T/N. Field state and carry are
/// updated in place.
inline FlightLog run_flight(FieldState& field, FlightCarry& carry, const MissionContext& ctx,
                            const FlightConfig& flight, double mission_t0,
                            const CoverageObserver& observer = {}) {
  const MissionConfig& cfg = *ctx.config;
  const TerrainGrid& terrain = ctx.terrain();
  if (!(field.grid == ctx.domain.grid)) throw ConfigError("run_flight: field grid does not match mission grid");
  FlightLog log;
  if (flight.duration <= 0.0) return log;

  const double kdt = cfg.timing.kinematic_dt;
  const auto per_control = std::llround(cfg.timing.control_dt / kdt);
  MpcConfig mpc = cfg.mpc;
  mpc.h_min = std::max(cfg.global_floor, flight.min_altitude);
  mpc.h_goal = flight.goal_altitude;
  const auto per_plan = std::llround(mpc.step() / kdt);
  if (per_control < 1 || per_plan < 1 ||
      std::abs(static_cast<double>(per_control) * kdt - cfg.timing.control_dt) > 1e-9 ||
      std::abs(static_cast<double>(per_plan) * kdt - mpc.step()) > 1e-9)
    throw ConfigError("run_flight: control and planner steps must be multiples of the kinematic step");
  const auto steps = std::llround(std::ceil(flight.duration / kdt - 1e-9));
  const UavLimits& lim = flight.limits;

  if (!flight.continue_previous || !carry.valid) {
    carry.uav = UavState{cfg.home.x, cfg.home.y, ctx.home_ground + flight.goal_altitude, 0.0, 0.0, 0.0, 0.0};
    carry.cmd_v_h = carry.cmd_v_z = 0.0;
  }
  carry.valid = true;
  UavState uav = carry.uav;
  uav.t = 0.0;

  double omega = 0.0;
  double seg_vh0 = carry.cmd_v_h, seg_vz0 = carry.cmd_v_z;
  double seg_vh1 = seg_vh0, seg_vz1 = seg_vz0;
  long long seg_start = 0;
  double prev_vh = carry.cmd_v_h, prev_vz = carry.cmd_v_z;
  double last_cover = 0.0;
  double eta = accomplishment(field);
  log.samples.reserve(static_cast<std::size_t>(steps));

  for (long long n = 0; n < steps; ++n) {
    if (n % per_control == 0) {
      solve_potential(field, cfg.hedac);
      const Vec2 dir = desired_direction(field, ctx.domain, uav);
      const double next = steer_heading(uav.heading, dir, lim.omega_max(), cfg.timing.control_dt);
      omega = wrap_angle(next - uav.heading) / cfg.timing.control_dt;
    }
    if (n % per_plan == 0) {
      UavState planning = uav;
      planning.v_h = seg_vh1;
      planning.v_z = seg_vz1;
      const double reach = lim.vh_max * mpc.horizon_duration + 1.0;
      const auto ht = horizon_terrain(terrain, uav.xy(), uav.heading, reach);
      const MpcPlan plan = mpc_plan(planning, ht, lim, mpc);
      seg_vh0 = seg_vh1;
      seg_vz0 = seg_vz1;
      seg_vh1 = plan.v_h.front();
      seg_vz1 = plan.v_z.front();
      seg_start = n;
    }
    // Linear velocity ramp across the planner segment, sampled at the midpoint
    // of this kinematic step.
    const double frac = (static_cast<double>(n - seg_start) + 0.5) / static_cast<double>(per_plan);
    const double vh = seg_vh0 + (seg_vh1 - seg_vh0) * frac;
    const double vz = seg_vz0 + (seg_vz1 - seg_vz0) * frac;
    const ControlInput u = ControlInput::from_velocities(vh, vz, omega);
    uav = kinematic_step(uav, u, lim, kdt);

    const double t_next = static_cast<double>(n + 1) * kdt;
    if ((n + 1) % per_control == 0 || n + 1 == steps) {
      const double dt = t_next - last_cover;
      accumulate_coverage(field, CameraPose{uav.position(), uav.heading}, flight.camera_model, terrain,
                          cfg.recall, cfg.sensing, dt);
      eta = accomplishment(field);
      if (observer) observer(field, mission_t0 + last_cover, dt);
      last_cover = t_next;
    }

    LogSample s;
    s.t = t_next;
    s.mission_t = mission_t0 + t_next;
    s.x = uav.x, s.y = uav.y, s.z = uav.z, s.heading = uav.heading;
    s.v_h = uav.v_h, s.v_z = uav.v_z;
    s.rho = u.rho, s.phi = u.phi, s.omega = u.omega;
    s.eta = eta;
    s.ground = terrain.elevation_at(uav.x, uav.y);
    constexpr double tol = 1e-9;
    s.floor_ok = uav.z - s.ground >= mpc.h_min - tol;
    s.velocity_ok = uav.v_h >= lim.vh_min - tol && uav.v_h <= lim.vh_max + tol &&
                    uav.v_z >= lim.vz_min - tol && uav.v_z <= lim.vz_max + tol &&
                    std::abs(omega) <= lim.omega_max() + tol;
    const double adt = n == 0 ? 0.5 * kdt : kdt;
    const double ah = (uav.v_h - prev_vh) / adt, av = (uav.v_z - prev_vz) / adt;
    s.acceleration_ok = ah >= lim.ah_min - tol && ah <= lim.ah_max + tol && av >= lim.av_min - tol &&
                        av <= lim.av_max + tol;
    prev_vh = uav.v_h;
    prev_vz = uav.v_z;
    log.samples.push_back(s);
  }
  carry.uav = uav;
  // The flight ends inside a segment only when its duration is not a planner
  // multiple; the carried command is then the velocity actually reached.
  const double frac_end = static_cast<double>(steps - seg_start) / static_cast<double>(per_plan);
  carry.cmd_v_h = seg_vh0 + (seg_vh1 - seg_vh0) * std::min(1.0, frac_end);
  carry.cmd_v_z = seg_vz0 + (seg_vz1 - seg_vz0) * std::min(1.0, frac_end);
  return log;
}

struct MissionReport {
  std::string id;
  std::uint64_t seed = 0;
  SearchDomain domain;
  std::vector<FlightLog> flights;
  std::vector<double> curve_t;    // mission time, 1 s samples starting at 0
  std::vector<double> curve_eta;  // eta at curve_t
  FieldState field;               // final fields
  std::size_t violations = 0;
  double final_eta = 0.0;
};

inline MissionReport run_mission(const MissionConfig& cfg, const CoverageObserver& observer = {}) {
  const MissionContext ctx = prepare_mission(cfg);
  MissionReport rep;
  rep.id = cfg.id;
  rep.seed = cfg.seed;
  rep.domain = ctx.domain;
  rep.field = FieldState(ctx.m0);
  rep.curve_t.push_back(0.0);
  rep.curve_eta.push_back(accomplishment(rep.field));
  const auto record = [&](const FieldState& f, double t0, double dt) {
    rep.curve_t.push_back(t0 + dt);
    rep.curve_eta.push_back(accomplishment(f));
    if (observer) observer(f, t0, dt);
  };
  FlightCarry carry;
  double t0 = 0.0;
  for (const auto& flight : cfg.flights) {
    rep.flights.push_back(run_flight(rep.field, carry, ctx, flight, t0, record));
    rep.violations += rep.flights.back().violations();
    t0 += flight.duration;
  }
  rep.final_eta = accomplishment(rep.field);
  return rep;
}

// ---------------------------------------------------------------------------
// Monte Carlo validation

struct SyntheticTarget {
  Vec2 position;
  std::size_t cell = 0;
  double threshold = 0.0;  // E ~ Exp(1)
  double detection_time = std::numeric_limits<double>::quiet_NaN();

  bool detected() const { return !std::isnan(detection_time); }
};

/// Draws M targets from m0: zone chosen with probability proportional to its
/// person count, then a uniform point accepted iff its cell belongs to that
/// zone. Target j uses RNG stream j.
inline std::vector<SyntheticTarget> sample_targets(const MissionContext& ctx, std::size_t count,
                                                   std::uint64_t seed) {
  const auto& zones = ctx.config->zones;
  const GridSpec& g = ctx.domain.grid;
  int total = 0;
  for (const auto& z : zones) total += z.person_count;
  std::vector<SyntheticTarget> out(count);
  for (std::size_t j = 0; j < count; ++j) {
    CounterRng rng(seed, j);
    double pick = rng.uniform() * total;
    std::size_t zi = 0;
    while (zi + 1 < zones.size() && pick >= zones[zi].person_count) {
      pick -= zones[zi].person_count;
      ++zi;
    }
    const auto& poly = zones[zi].polygon;
    double lo_x = poly[0].x, hi_x = lo_x, lo_y = poly[0].y, hi_y = lo_y;
    for (Vec2 v : poly) {
      lo_x = std::min(lo_x, v.x), hi_x = std::max(hi_x, v.x);
      lo_y = std::min(lo_y, v.y), hi_y = std::max(hi_y, v.y);
    }
    // Widen by a cell so every owned cell square lies fully inside the box.
    lo_x -= g.cell_size, lo_y -= g.cell_size, hi_x += g.cell_size, hi_y += g.cell_size;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000000) throw Error("sample_targets: rejection sampling failed");
      const Vec2 p{lo_x + (hi_x - lo_x) * rng.uniform(), lo_y + (hi_y - lo_y) * rng.uniform()};
      if (!g.contains(p)) continue;
      const std::size_t cell = g.cell_of(p);
      if (ctx.owner[cell] != static_cast<int>(zi)) continue;
      out[j].position = p;
      out[j].cell = cell;
      break;
    }
    out[j].threshold = rng.exponential();
  }
  return out;
}

/// Marks targets detected at the exact time their coverage crosses the
/// threshold; coverage grows linearly within each update interval.
class TargetTracker {
 public:
  explicit TargetTracker(std::vector<SyntheticTarget> targets)
      : targets_(std::move(targets)), c_prev_(targets_.size(), 0.0) {}

  void on_coverage(const FieldState& field, double t_start, double dt) {
    for (std::size_t j = 0; j < targets_.size(); ++j) {
      auto& tg = targets_[j];
      if (tg.detected()) continue;
      const double c = field.c[tg.cell];
      if (c >= tg.threshold) {
        const double dc = c - c_prev_[j];
        const double frac = dc > 0.0 ? std::clamp((tg.threshold - c_prev_[j]) / dc, 0.0, 1.0) : 1.0;
        tg.detection_time = t_start + dt * frac;
      }
      c_prev_[j] = c;
    }
  }

  const std::vector<SyntheticTarget>& targets() const { return targets_; }

 private:
  std::vector<SyntheticTarget> targets_;
  std::vector<double> c_prev_;
};

struct ValidationRow {
  double t = 0.0;
  double eta = 0.0;
  double empirical = 0.0;
  double band_lo = 0.0;
  double band_hi = 0.0;
  bool within = true;
};

struct ValidationReport {
  std::uint64_t seed = 0;
  std::size_t target_count = 0;
  std::vector<SyntheticTarget> targets;
  std::vector<ValidationRow> rows;
  std::size_t outside = 0;
  std::size_t detected = 0;

  bool within_band() const { return outside == 0; }
};

/// One-sided tail mass of a normal beyond 3 sigma.
inline constexpr double kThreeSigmaTail = 0.0013498980316301;

/// Acceptance region [lo, hi] of detection counts under Binomial(M, p): the
/// smallest lo and hi with P(X < lo) <= tail and P(X > hi) <= tail. Tends to
/// Mp +- 3 sqrt(Mp(1-p)) for large Mp and stays honest when Mp is small,
/// where the normal band would reject a single early detection.
inline std::pair<std::size_t, std::size_t> binomial_band(std::size_t M, double p,
                                                         double tail = kThreeSigmaTail) {
  if (!(p > 0.0)) return {0, 0};
  if (!(p < 1.0)) return {M, M};
  // Weights relative to the mode, so nothing underflows near the bulk.
  const auto mode = std::min(M, static_cast<std::size_t>(std::floor((static_cast<double>(M) + 1) * p)));
  std::vector<double> w(M + 1, 0.0);
  w[mode] = 1.0;
  const double odds = p / (1.0 - p);
  for (std::size_t k = mode; k > 0; --k)
    w[k - 1] = w[k] * static_cast<double>(k) / (static_cast<double>(M - k + 1) * odds);
  for (std::size_t k = mode; k < M; ++k) w[k + 1] = w[k] * static_cast<double>(M - k) / static_cast<double>(k + 1) * odds;
  double total = 0.0;
  for (double x : w) total += x;
  std::size_t lo = 0;
  for (double below = 0.0; lo < M && (below + w[lo]) / total <= tail; ++lo) below += w[lo];
  std::size_t hi = M;
  for (double above = 0.0; hi > 0 && (above + w[hi]) / total <= tail; --hi) above += w[hi];
  return {lo, hi};
}

/// Detected fraction vs eta(t) with the 3-sigma binomial band, i.e. the exact
/// Binomial(M, eta) acceptance region at the normal 3-sigma tail mass.
inline ValidationReport compare_with_prediction(std::vector<SyntheticTarget> targets,
                                                const std::vector<double>& curve_t,
                                                const std::vector<double>& curve_eta,
                                                std::uint64_t seed) {
  ValidationReport v;
  v.seed = seed;
  v.target_count = targets.size();
  std::vector<double> times;
  for (const auto& tg : targets)
    if (tg.detected()) times.push_back(tg.detection_time);
  std::sort(times.begin(), times.end());
  v.detected = times.size();
  const double M = static_cast<double>(targets.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < curve_t.size(); ++i) {
    while (k < times.size() && times[k] <= curve_t[i]) ++k;
    ValidationRow row;
    row.t = curve_t[i];
    row.eta = curve_eta[i];
    row.empirical = static_cast<double>(k) / M;
    const auto [lo, hi] = binomial_band(targets.size(), row.eta);
    row.band_lo = static_cast<double>(lo) / M;
    row.band_hi = static_cast<double>(hi) / M;
    row.within = k >= lo && k <= hi;
    if (!row.within) ++v.outside;
    v.rows.push_back(row);
  }
  v.targets = std::move(targets);
  return v;
}

struct MonteCarloResult {
  MissionReport mission;
  std::vector<ValidationReport> validations;  // one per seed
};

/// One simulation, independent target populations for each seed.
inline MonteCarloResult monte_carlo_validate(const MissionConfig& cfg, std::size_t target_count,
                                             std::span<const std::uint64_t> seeds) {
  if (target_count == 0) throw ConfigError("monte_carlo_validate: target count must be >= 1");
  const MissionContext ctx = prepare_mission(cfg);
  std::vector<TargetTracker> trackers;
  trackers.reserve(seeds.size());
  for (std::uint64_t s : seeds) trackers.emplace_back(sample_targets(ctx, target_count, s));
  MonteCarloResult res;
  res.mission = run_mission(cfg, [&](const FieldState& f, double t0, double dt) {
    for (auto& tr : trackers) tr.on_coverage(f, t0, dt);
  });
  for (std::size_t i = 0; i < seeds.size(); ++i)
    res.validations.push_back(compare_with_prediction(trackers[i].targets(), res.mission.curve_t,
                                                      res.mission.curve_eta, seeds[i]));
  return res;
}

inline MonteCarloResult monte_carlo_validate(const MissionConfig& cfg, std::size_t target_count,
                                             std::uint64_t seed) {
  const std::uint64_t seeds[] = {seed};
  return monte_carlo_validate(cfg, target_count, std::span<const std::uint64_t>(seeds));
}

}  // namespace sarsim
