#pragma once

// UAV kinematics, heading steering and the receding-horizon altitude/velocity
// planner.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sarsim/error.hpp"
#include "sarsim/geometry.hpp"
#include "sarsim/terrain.hpp"

namespace sarsim {

struct UavState {
  double x = 0.0, y = 0.0, z = 0.0;  // metres, z absolute
  double heading = 0.0;              // radians, counter-clockwise from +x
  double v_h = 0.0;                  // m/s
  double v_z = 0.0;                  // m/s
  double t = 0.0;                    // s

  Vec2 xy() const { return {x, y}; }
  Vec3 position() const { return {x, y, z}; }
};

/// rho: velocity intensity (m/s), phi: incline (rad), omega: yaw rate (rad/s).
struct ControlInput {
  double rho = 0.0;
  double phi = 0.0;
  double omega = 0.0;

  static ControlInput from_velocities(double v_h, double v_z, double omega = 0.0) {
    return {std::hypot(v_h, v_z), std::atan2(v_z, v_h), omega};
  }
};

/// Kinematic envelope. Angles in degrees as tabulated; the accessors convert.
struct UavLimits {
  std::string name;
  double phi_min_deg = -90.0, phi_max_deg = 90.0;
  double vh_min = 0.0, vh_max = 0.0;
  double vz_min = 0.0, vz_max = 0.0;
  double ah_min = 0.0, ah_max = 0.0;
  double av_min = 0.0, av_max = 0.0;
  double omega_max_deg = 0.0;

  double omega_max() const { return deg2rad(omega_max_deg); }

  void validate() const {
    const auto pair = [&](double lo, double hi, const char* what) {
      if (!(lo <= hi)) throw ConfigError("uav " + name + ": " + what + " min exceeds max");
    };
    pair(phi_min_deg, phi_max_deg, "phi");
    pair(vh_min, vh_max, "v_h");
    pair(vz_min, vz_max, "v_z");
    pair(ah_min, ah_max, "a_h");
    pair(av_min, av_max, "a_v");
    if (!(omega_max_deg > 0.0)) throw ConfigError("uav " + name + ": omega_max must be > 0");
  }
};

namespace uavs {
inline UavLimits m210() { return {"M210", -90, 90, 0, 10, -3, 5, -3.6, 2, -2, 2.8, 120}; }
inline UavLimits mavic2ed() { return {"Mavic2ED", -90, 90, 0, 8, -2, 3, -3.6, 2, -2, 2.8, 30}; }

inline std::optional<UavLimits> by_name(std::string_view name) {
  if (name == "M210") return m210();
  if (name == "Mavic2ED") return mavic2ed();
  return std::nullopt;
}
}  // namespace uavs

struct MpcConfig {
  int horizon_steps = 5;            // N
  double horizon_duration = 15.0;   // T, seconds
  double w_v = 1.0;                 // per m/s
  double w_h = 0.05;                // per m^2
  double h_min = 35.0;              // no-fly clearance
  double h_goal = 55.0;             // goal relative altitude
  int lattice_levels = 11;          // per velocity axis

  double step() const { return horizon_duration / horizon_steps; }

  void validate() const {
    if (horizon_steps < 1) throw ConfigError("mpc: horizon_steps must be >= 1");
    if (!(horizon_duration > 0.0)) throw ConfigError("mpc: horizon_duration must be > 0");
    if (!(w_v >= 0.0 && w_h >= 0.0)) throw ConfigError("mpc: weights must be >= 0");
    if (!(h_goal >= h_min)) throw ConfigError("mpc: h_goal must be >= h_min");
    if (lattice_levels < 2) throw ConfigError("mpc: lattice_levels must be >= 2");
  }
};

/// Rotates `heading` toward `desired_dir` by at most omega_max * dt along the
/// shorter arc. An exactly opposite target turns counter-clockwise.
inline double steer_heading(double heading, Vec2 desired_dir, double omega_max, double dt) {
  if (!(dt > 0.0)) throw ConfigError("steer_heading: dt must be > 0");
  const double target = std::atan2(desired_dir.y, desired_dir.x);
  const double diff = wrap_angle(target - heading);
  const double cap = omega_max * dt;
  if (std::abs(diff) <= cap) return wrap_angle(target);
  return wrap_angle(heading + (diff > 0.0 ? cap : -cap));
}

/// Checks a control against the envelope; returns the name of the first
/// violated bound.
inline std::optional<std::string> violated_bound(const ControlInput& u, const UavLimits& lim,
                                                 double tol = 1e-9) {
  const double phi_deg = rad2deg(u.phi);
  const double vh = u.rho * std::cos(u.phi), vz = u.rho * std::sin(u.phi);
  if (u.rho < -tol) return "rho_min";
  if (phi_deg < lim.phi_min_deg - tol) return "phi_min";
  if (phi_deg > lim.phi_max_deg + tol) return "phi_max";
  if (vh < lim.vh_min - tol) return "v_h_min";
  if (vh > lim.vh_max + tol) return "v_h_max";
  if (vz < lim.vz_min - tol) return "v_z_min";
  if (vz > lim.vz_max + tol) return "v_z_max";
  if (std::abs(u.omega) > lim.omega_max() + tol) return "omega_max";
  return std::nullopt;
}

/// Advances the state by dt: v_h = rho cos(phi), v_z = rho sin(phi); the
/// heading is updated first and the new heading carries the horizontal motion.
inline UavState kinematic_step(const UavState& s, const ControlInput& u, const UavLimits& lim,
                               double dt) {
  if (auto bound = violated_bound(u, lim))
    throw ConfigError("kinematic_step: control violates " + *bound);
  UavState n = s;
  n.v_h = u.rho * std::cos(u.phi);
  n.v_z = u.rho * std::sin(u.phi);
  n.heading = wrap_angle(s.heading + u.omega * dt);
  n.x = s.x + n.v_h * std::cos(n.heading) * dt;
  n.y = s.y + n.v_h * std::sin(n.heading) * dt;
  n.z = s.z + n.v_z * dt;
  n.t = s.t + dt;
  return n;
}

/// Terrain seen by the planner: ground elevation at distance s along the
/// frozen heading, and an upper bound of the ground within radius r of the
/// current position.
struct HorizonTerrain {
  std::function<double(double)> ground_ahead;
  std::function<double(double)> ground_within;
};

inline HorizonTerrain horizon_terrain(const TerrainGrid& terrain, Vec2 pos, double heading,
                                      double max_distance) {
  constexpr double dr = 1.0;
  auto profile = std::make_shared<std::vector<double>>(
      terrain.max_within_profile(pos, max_distance + dr, dr));
  const double c = std::cos(heading), s = std::sin(heading);
  HorizonTerrain ht;
  ht.ground_ahead = [&terrain, pos, c, s](double d) {
    const double x = std::clamp(pos.x + c * d, terrain.x_origin(), terrain.x_max());
    const double y = std::clamp(pos.y + s * d, terrain.y_origin(), terrain.y_max());
    return terrain.elevation_at(x, y);
  };
  ht.ground_within = [profile](double r) {
    const auto k = static_cast<std::size_t>(std::ceil(std::max(0.0, r) / dr - 1e-12));
    return (*profile)[std::min(k, profile->size() - 1)];
  };
  return ht;
}

/// Velocity levels k * spacing covering [lo, hi], spacing = (hi - lo) / (levels - 1).
/// The lattice always contains 0 when lo <= 0 <= hi.
struct VelocityLattice {
  double spacing = 1.0;
  int k_lo = 0;
  int k_hi = 0;

  VelocityLattice() = default;
  VelocityLattice(double lo, double hi, int levels) {
    if (hi <= lo) {
      spacing = 1.0;
      k_lo = k_hi = 0;
      if (lo != 0.0) spacing = lo;
      if (lo != 0.0) k_lo = k_hi = 1;
      return;
    }
    spacing = (hi - lo) / (levels - 1);
    k_lo = static_cast<int>(std::ceil(lo / spacing - 1e-9));
    k_hi = static_cast<int>(std::floor(hi / spacing + 1e-9));
  }
  int count() const { return k_hi - k_lo + 1; }
  double value(int k) const { return spacing * k; }
};

struct MpcPlan {
  std::vector<ControlInput> controls;  // node commands, controls[0] executed first
  std::vector<double> v_h;             // node horizontal speeds
  std::vector<double> v_z;             // node vertical speeds
  std::vector<double> z;               // predicted altitude at each node
  std::vector<double> distance;        // predicted distance travelled at each node
  std::vector<double> stage_cost;      // -w_v v_h + w_h (z - goal)^2 per node
  double cost = 0.0;
};

namespace detail {

/// Lowest altitude reached, relative to the interval start, while the
/// vertical speed ramps linearly from v0 to v1 over dt.
inline double ramp_dip(double v0, double v1, double dt) {
  double dip = std::min(0.0, 0.5 * dt * (v0 + v1));
  if (v0 < 0.0 && v1 > 0.0) {
    const double tau = -v0 * dt / (v1 - v0);
    dip = std::min(dip, 0.5 * v0 * tau);
  }
  return dip;
}

}  // namespace detail

/// Plans N node velocities minimising
///   sum_i [ -w_v v_h,i + w_h (z_i - (ground_ahead(s_i) + h_goal))^2 ]
/// subject to velocity bounds, per-step velocity changes within the
/// acceleration bounds times T/N, and z >= ground_within(s_i) + h_min over
/// the whole interval ending at node i. Velocities ramp linearly between
/// nodes, so node altitude and distance follow the trapezoid rule.
///
/// Exact dynamic programme over the velocity lattice: the state after node i
/// is (sum of horizontal indices, last horizontal index, sum of vertical
/// indices, last vertical index), which determines s_i and z_i exactly.
inline MpcPlan mpc_plan(const UavState& state, const HorizonTerrain& ht, const UavLimits& lim,
                        const MpcConfig& cfg) {
  cfg.validate();
  lim.validate();
  const int N = cfg.horizon_steps;
  const double dt = cfg.step();
  const VelocityLattice hl(lim.vh_min, lim.vh_max, cfg.lattice_levels);
  const VelocityLattice vl(lim.vz_min, lim.vz_max, cfg.lattice_levels);
  const int nj = hl.count(), nk = vl.count();
  const double tol = 1e-9;
  const auto h_ok = [&](double from, double to) {
    const double dv = to - from;
    return dv >= lim.ah_min * dt - tol && dv <= lim.ah_max * dt + tol;
  };
  const auto v_ok = [&](double from, double to) {
    const double dv = to - from;
    return dv >= lim.av_min * dt - tol && dv <= lim.av_max * dt + tol;
  };

  const double vh0 = state.v_h, vz0 = state.v_z, z0 = state.z;
  // Node quantities as functions of index sums (offset so they start at 0).
  const auto dist = [&](int i, int a, int j) {  // a = A_i - i*k_lo, j index offset
    const double A = a + static_cast<double>(i) * hl.k_lo;
    return dt * (0.5 * vh0 + hl.spacing * (A - 0.5 * (j + hl.k_lo)));
  };
  const auto alt = [&](int i, int b, int k) {
    const double B = b + static_cast<double>(i) * vl.k_lo;
    return z0 + dt * (0.5 * vz0 + vl.spacing * (B - 0.5 * (k + vl.k_lo)));
  };

  // Transition tables between lattice indices.
  std::vector<std::vector<int>> h_next(nj), v_next(nk);
  std::vector<double> dip(static_cast<std::size_t>(nk * nk));
  for (int a = 0; a < nj; ++a)
    for (int b = 0; b < nj; ++b)
      if (h_ok(hl.value(a + hl.k_lo), hl.value(b + hl.k_lo))) h_next[a].push_back(b);
  for (int a = 0; a < nk; ++a) {
    for (int b = 0; b < nk; ++b) {
      if (v_ok(vl.value(a + vl.k_lo), vl.value(b + vl.k_lo))) v_next[a].push_back(b);
      dip[static_cast<std::size_t>(a * nk + b)] =
          detail::ramp_dip(vl.value(a + vl.k_lo), vl.value(b + vl.k_lo), dt);
    }
  }

  struct Stage {
    int na = 0, nb = 0;
    std::vector<double> value;
    std::vector<std::int32_t> parent;  // index into the previous stage's relaxed table
    std::vector<std::int8_t> via;      // relaxed table: previous horizontal index
    std::size_t idx(int a, int j, int b, int k, int nj_, int nk_) const {
      return ((static_cast<std::size_t>(a) * nj_ + j) * nb + b) * nk_ + k;
    }
  };
  const double inf = std::numeric_limits<double>::infinity();
  // Scratch reused across calls on the same thread; replanning runs often.
  thread_local std::vector<Stage> stages;
  stages.resize(static_cast<std::size_t>(N + 1));

  // Per-stage floor and tracking target indexed by (a, j).
  const auto tables = [&](int i, std::vector<double>& floor, std::vector<double>& target) {
    const int na = i * (nj - 1) + 1;
    floor.assign(static_cast<std::size_t>(na * nj), inf);
    target.assign(static_cast<std::size_t>(na * nj), 0.0);
    for (int a = 0; a < na; ++a) {
      for (int j = 0; j < nj; ++j) {
        // a must be reachable with last index j: a >= j and a - j <= (i-1)(nj-1).
        if (a < j || a - j > (i - 1) * (nj - 1)) continue;
        const double s = dist(i, a, j);
        floor[static_cast<std::size_t>(a * nj + j)] = ht.ground_within(s) + cfg.h_min;
        target[static_cast<std::size_t>(a * nj + j)] = ht.ground_ahead(s) + cfg.h_goal;
      }
    }
  };

  bool any_accel_feasible = false;
  thread_local std::vector<double> floor_t, target_t;

  // Stage 1 from the actual state.
  {
    Stage& st = stages[1];
    st.na = nj;
    st.nb = nk;
    st.value.assign(static_cast<std::size_t>(nj * nj * nk * nk), inf);
    st.parent.assign(st.value.size(), -1);
    tables(1, floor_t, target_t);
    for (int j = 0; j < nj; ++j) {
      const double vh = hl.value(j + hl.k_lo);
      if (!h_ok(vh0, vh)) continue;
      for (int k = 0; k < nk; ++k) {
        const double vz = vl.value(k + vl.k_lo);
        if (!v_ok(vz0, vz)) continue;
        any_accel_feasible = true;
        const double fl = floor_t[static_cast<std::size_t>(j * nj + j)];
        if (z0 + detail::ramp_dip(vz0, vz, dt) < fl) continue;
        const double z = alt(1, k, k);
        const double e = z - target_t[static_cast<std::size_t>(j * nj + j)];
        st.value[st.idx(j, j, k, k, nj, nk)] = -cfg.w_v * vh + cfg.w_h * e * e;
      }
    }
  }
  if (!any_accel_feasible)
    throw InfeasibleError("mpc: no first control satisfies the acceleration bounds",
                          "acceleration bounds");

  // A transition (a', j', b', k') -> (a' + j, j, b' + k, k) depends on j' only
  // through the previous value and the allowed j. Relaxing over j' first and
  // then expanding k keeps the programme exact at a fraction of the work.
  thread_local std::vector<double> relaxed;
  thread_local std::vector<double> zprev;
  for (int i = 2; i <= N; ++i) {
    Stage& prev = stages[static_cast<std::size_t>(i - 1)];
    Stage& st = stages[static_cast<std::size_t>(i)];
    const std::size_t block = static_cast<std::size_t>(prev.nb) * nk;
    relaxed.assign(prev.value.size(), inf);
    prev.via.assign(prev.value.size(), -1);
    for (int ap = 0; ap < prev.na; ++ap) {
      for (int jp = 0; jp < nj; ++jp) {
        const double* src = &prev.value[static_cast<std::size_t>(ap * nj + jp) * block];
        for (int j : h_next[static_cast<std::size_t>(jp)]) {
          const std::size_t base = static_cast<std::size_t>(ap * nj + j) * block;
          double* dst = &relaxed[base];
          std::int8_t* arg = &prev.via[base];
          for (std::size_t q = 0; q < block; ++q) {
            if (src[q] < dst[q]) {
              dst[q] = src[q];
              arg[q] = static_cast<std::int8_t>(jp);
            }
          }
        }
      }
    }

    st.na = i * (nj - 1) + 1;
    st.nb = i * (nk - 1) + 1;
    st.value.assign(static_cast<std::size_t>(st.na) * nj * st.nb * nk, inf);
    st.parent.assign(st.value.size(), -1);
    tables(i, floor_t, target_t);
    zprev.resize(block);
    for (int bp = 0; bp < prev.nb; ++bp)
      for (int kp = 0; kp < nk; ++kp) zprev[static_cast<std::size_t>(bp * nk + kp)] = alt(i - 1, bp, kp);
    for (int ap = 0; ap < prev.na; ++ap) {
      for (int j = 0; j < nj; ++j) {
        const std::size_t wbase = static_cast<std::size_t>(ap * nj + j) * block;
        const int a = ap + j;
        const std::size_t tj = static_cast<std::size_t>(a * nj + j);
        const double fl = floor_t[tj];
        const double tg = target_t[tj];
        const double reward = -cfg.w_v * hl.value(j + hl.k_lo);
        for (int bp = 0; bp < prev.nb; ++bp) {
          for (int kp = 0; kp < nk; ++kp) {
            const std::size_t q = static_cast<std::size_t>(bp * nk + kp);
            const double w = relaxed[wbase + q];
            if (w == inf) continue;
            const double zp = zprev[q];
            for (int k : v_next[static_cast<std::size_t>(kp)]) {
              if (zp + dip[static_cast<std::size_t>(kp * nk + k)] < fl) continue;
              const int b = bp + k;
              const double e = alt(i, b, k) - tg;
              const double v = w + reward + cfg.w_h * e * e;
              const std::size_t idx = st.idx(a, j, b, k, nj, nk);
              if (v < st.value[idx]) {
                st.value[idx] = v;
                st.parent[idx] = static_cast<std::int32_t>(wbase + q);
              }
            }
          }
        }
      }
    }
  }

  const Stage& last = stages[static_cast<std::size_t>(N)];
  std::size_t best = 0;
  double best_v = inf;
  for (std::size_t idx = 0; idx < last.value.size(); ++idx) {
    if (last.value[idx] < best_v) {
      best_v = last.value[idx];
      best = idx;
    }
  }
  if (best_v == inf)
    throw InfeasibleError("mpc: no control sequence keeps the UAV above terrain + h_min",
                          "altitude floor");

  MpcPlan plan;
  plan.cost = best_v;
  plan.controls.resize(static_cast<std::size_t>(N));
  plan.v_h.resize(static_cast<std::size_t>(N));
  plan.v_z.resize(static_cast<std::size_t>(N));
  plan.z.resize(static_cast<std::size_t>(N));
  plan.distance.resize(static_cast<std::size_t>(N));
  plan.stage_cost.resize(static_cast<std::size_t>(N));
  std::size_t idx = best;
  for (int i = N; i >= 1; --i) {
    const Stage& st = stages[static_cast<std::size_t>(i)];
    const int k = static_cast<int>(idx % static_cast<std::size_t>(nk));
    std::size_t rest = idx / static_cast<std::size_t>(nk);
    const int b = static_cast<int>(rest % static_cast<std::size_t>(st.nb));
    rest /= static_cast<std::size_t>(st.nb);
    const int j = static_cast<int>(rest % static_cast<std::size_t>(nj));
    const int a = static_cast<int>(rest / static_cast<std::size_t>(nj));
    const auto u = static_cast<std::size_t>(i - 1);
    plan.v_h[u] = hl.value(j + hl.k_lo);
    plan.v_z[u] = vl.value(k + vl.k_lo);
    plan.z[u] = alt(i, b, k);
    plan.distance[u] = dist(i, a, j);
    plan.controls[u] = ControlInput::from_velocities(plan.v_h[u], plan.v_z[u]);
    const double e = plan.z[u] - (ht.ground_ahead(plan.distance[u]) + cfg.h_goal);
    plan.stage_cost[u] = -cfg.w_v * plan.v_h[u] + cfg.w_h * e * e;
    if (i > 1) {
      // Recover the previous horizontal index from the relaxed table.
      const Stage& prev = stages[static_cast<std::size_t>(i - 1)];
      const auto w = static_cast<std::size_t>(st.parent[idx]);
      const std::size_t block = static_cast<std::size_t>(prev.nb) * static_cast<std::size_t>(nk);
      const std::size_t ap_j = w / block, q = w % block;
      const std::size_t ap = ap_j / static_cast<std::size_t>(nj);
      const auto jp = static_cast<std::size_t>(prev.via[w]);
      idx = (ap * static_cast<std::size_t>(nj) + jp) * block + q;
    }
  }
  return plan;
}

}  // namespace sarsim
