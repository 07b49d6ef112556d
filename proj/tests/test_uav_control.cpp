#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "sarsim/uav_control.hpp"

using namespace sarsim;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// 1-D terrain profile along the heading: flat at 0, rising to `rise` from `at` metres on.
HorizonTerrain step_terrain(double at, double rise, double offset = 0.0) {
  HorizonTerrain ht;
  ht.ground_ahead = [=](double d) { return d + offset >= at ? rise : 0.0; };
  ht.ground_within = [=](double r) { return r + offset >= at ? rise : 0.0; };
  return ht;
}

struct OracleResult {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<double> v_h, v_z;
};

// Exhaustive search over every lattice sequence. Altitude and distance are
// integrated with the trapezoid rule. The interval minimum of the altitude is
// taken from the endpoints and the zero crossing of the vertical speed.
OracleResult enumerate(const UavState& s, const HorizonTerrain& ht, const UavLimits& lim, const MpcConfig& cfg) {
  const double dt = cfg.horizon_duration / cfg.horizon_steps;
  std::vector<double> hv, vv;
  const auto levels = [&](double lo, double hi, std::vector<double>& out) {
    const double sp = (hi - lo) / (cfg.lattice_levels - 1);
    for (long k = static_cast<long>(std::ceil(lo / sp - 1e-9)); k <= static_cast<long>(std::floor(hi / sp + 1e-9)); ++k)
      out.push_back(sp * static_cast<double>(k));
  };
  levels(lim.vh_min, lim.vh_max, hv);
  levels(lim.vz_min, lim.vz_max, vv);
  OracleResult best;
  std::vector<double> ch, cv;
  const auto rec = [&](auto&& self, int i, double vh0, double vz0, double d, double z, double cost) -> void {
    if (i == cfg.horizon_steps) {
      if (cost < best.cost - 1e-12) best = {cost, ch, cv};
      return;
    }
    for (double vh : hv) {
      const double ah = (vh - vh0) / dt;
      if (ah < lim.ah_min - 1e-9 || ah > lim.ah_max + 1e-9) continue;
      for (double vz : vv) {
        const double av = (vz - vz0) / dt;
        if (av < lim.av_min - 1e-9 || av > lim.av_max + 1e-9) continue;
        const double d1 = d + 0.5 * dt * (vh0 + vh), z1 = z + 0.5 * dt * (vz0 + vz);
        double zmin = std::min(z, z1);
        if (vz0 < 0 && vz > 0) {
          const double tau = -vz0 / (vz - vz0) * dt;
          zmin = std::min(zmin, z + vz0 * tau + 0.5 * (vz - vz0) / dt * tau * tau);
        }
        if (zmin < ht.ground_within(d1) + cfg.h_min - 1e-9) continue;
        const double e = z1 - ht.ground_ahead(d1) - cfg.h_goal;
        ch.push_back(vh);
        cv.push_back(vz);
        self(self, i + 1, vh, vz, d1, z1, cost - cfg.w_v * vh + cfg.w_h * e * e);
        ch.pop_back();
        cv.pop_back();
      }
    }
  };
  rec(rec, 0, s.v_h, s.v_z, 0.0, s.z, 0.0);
  return best;
}

// Extra cost of holding the last velocities for one more step, or +inf when
// that would breach the floor.
double hold_step_cost(const MpcPlan& p, const HorizonTerrain& ht, const MpcConfig& cfg) {
  const double dt = cfg.step();
  const double d = p.distance.back() + dt * p.v_h.back(), z = p.z.back() + dt * p.v_z.back();
  if (std::min(z, p.z.back()) < ht.ground_within(d) + cfg.h_min - 1e-9) return std::numeric_limits<double>::infinity();
  const double e = z - ht.ground_ahead(d) - cfg.h_goal;
  return -cfg.w_v * p.v_h.back() + cfg.w_h * e * e;
}

}  // namespace

TEST(Steering, WithinCapAligns) {
  const double h = steer_heading(0.0, {std::cos(10 * kDeg), std::sin(10 * kDeg)}, 120 * kDeg, 1.0);
  EXPECT_NEAR(h, 10 * kDeg, 1e-12);
}

TEST(Steering, OppositeTurnsCounterClockwiseByCap) {
  EXPECT_NEAR(steer_heading(0.0, {-1, 0}, 30 * kDeg, 1.0), 30 * kDeg, 1e-12);
  EXPECT_NEAR(steer_heading(std::numbers::pi / 2, {0, -1}, 30 * kDeg, 1.0), 120 * kDeg, 1e-12);
  // Shorter arc across the branch cut.
  EXPECT_NEAR(steer_heading(170 * kDeg, {std::cos(-170 * kDeg), std::sin(-170 * kDeg)}, 5 * kDeg, 1.0),
              175 * kDeg, 1e-12);
  EXPECT_THROW(steer_heading(0, {1, 0}, 1, 0), ConfigError);
}

TEST(Steering, RandomSweepRespectsTurnRate) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi), rate(1, 120), dt(0.1, 2);
  for (int i = 0; i < 5000; ++i) {
    const double h = ang(rng), t = ang(rng), w = rate(rng) * kDeg, d = dt(rng);
    const double n = steer_heading(h, {std::cos(t), std::sin(t)}, w, d);
    const double turned = std::abs(wrap_angle(n - h));
    EXPECT_LE(turned, w * d + 1e-12);
    const double remaining = std::abs(wrap_angle(t - n)), before = std::abs(wrap_angle(t - h));
    EXPECT_NEAR(remaining, std::max(0.0, before - w * d), 1e-9);
  }
}

TEST(Kinematics, Examples) {
  const auto lim = uavs::m210();
  UavState s{100, 200, 300, 0.0, 0, 0, 0};
  auto n = kinematic_step(s, {10, 0, 0}, lim, 1.0);
  EXPECT_DOUBLE_EQ(n.x, 110);
  EXPECT_DOUBLE_EQ(n.z, 300);
  EXPECT_DOUBLE_EQ(n.v_h, 10);

  n = kinematic_step(s, {5, std::numbers::pi / 2, 0}, lim, 1.0);
  EXPECT_NEAR(n.x, 100, 1e-12);
  EXPECT_DOUBLE_EQ(n.z, 305);
  EXPECT_DOUBLE_EQ(n.v_z, 5);

  n = kinematic_step(s, {5, 30 * kDeg, 0}, lim, 2.0);
  EXPECT_NEAR(n.z - s.z, 5.0, 1e-12);
  EXPECT_NEAR(std::hypot(n.x - s.x, n.y - s.y), 5 * std::sqrt(3.0) / 2 * 2, 1e-12);
  EXPECT_NEAR(n.v_h, 5 * std::cos(30 * kDeg), 1e-15);
  EXPECT_DOUBLE_EQ(n.t, 2.0);

  // Post-update heading carries the motion.
  n = kinematic_step(s, {10, 0, 90 * kDeg}, lim, 1.0);
  EXPECT_NEAR(n.heading, 90 * kDeg, 1e-12);
  EXPECT_NEAR(n.x, 100, 1e-12);
  EXPECT_NEAR(n.y, 210, 1e-12);
}

TEST(Kinematics, LimitViolationNamesBound) {
  const auto lim = uavs::m210();
  const UavState s;
  const auto expect_bound = [&](ControlInput u, const std::string& bound) {
    try {
      kinematic_step(s, u, lim, 1.0);
      FAIL() << bound;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(bound), std::string::npos) << e.what();
    }
  };
  expect_bound({12, 0, 0}, "v_h_max");
  expect_bound({6, std::numbers::pi / 2, 0}, "v_z_max");
  expect_bound({4, -std::numbers::pi / 2, 0}, "v_z_min");
  expect_bound({5, 0, 130 * kDeg}, "omega_max");
  expect_bound({5, 100 * kDeg, 0}, "phi_max");
}

TEST(Mpc, FlatTerrainHoldsCruise) {
  const auto lim = uavs::m210();
  MpcConfig cfg;
  cfg.h_goal = 55;
  const UavState s{0, 0, 55, 0, 10, 0, 0};
  const auto plan = mpc_plan(s, step_terrain(1e9, 0), lim, cfg);
  ASSERT_EQ(plan.controls.size(), 5u);
  for (const auto& u : plan.controls) {
    EXPECT_DOUBLE_EQ(u.rho, 10);
    EXPECT_DOUBLE_EQ(u.phi, 0);
  }
  for (double z : plan.z) EXPECT_DOUBLE_EQ(z, 55);
  EXPECT_DOUBLE_EQ(plan.cost, -50);
}

TEST(Mpc, MatchesEnumerationOracle) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> at(5, 80), rise(0, 40), z0(36, 90), vz(-2, 3);
  for (const auto& lim : {uavs::m210(), uavs::mavic2ed()}) {
    for (int trial = 0; trial < 25; ++trial) {
      MpcConfig cfg;
      cfg.horizon_steps = 3 + trial % 2;
      cfg.horizon_duration = 3.0 * cfg.horizon_steps;
      cfg.lattice_levels = 4 + trial % 3;
      cfg.h_goal = 55;
      const auto ht = step_terrain(at(rng), rise(rng));
      const UavState s{0, 0, z0(rng), 0, lim.vh_max * (trial % 4) / 3.0, std::clamp(vz(rng), lim.vz_min, lim.vz_max), 0};
      const auto want = enumerate(s, ht, lim, cfg);
      if (!std::isfinite(want.cost)) {
        EXPECT_THROW(mpc_plan(s, ht, lim, cfg), InfeasibleError);
        continue;
      }
      const auto plan = mpc_plan(s, ht, lim, cfg);
      EXPECT_NEAR(plan.cost, want.cost, 1e-9 * std::max(1.0, std::abs(want.cost)));
      double sum = 0;
      for (double c : plan.stage_cost) sum += c;
      EXPECT_NEAR(sum, plan.cost, 1e-9 * std::max(1.0, std::abs(sum)));
    }
  }
}

TEST(Mpc, ClimbsAheadOfTerrainStep) {
  const auto lim = uavs::m210();
  MpcConfig cfg;
  cfg.h_goal = 55;
  const auto ht = step_terrain(100, 30);
  const UavState s{0, 0, 55, 0, 10, 0, 0};
  const auto plan = mpc_plan(s, ht, lim, cfg);
  bool climbed = false;
  for (std::size_t i = 0; i < plan.z.size(); ++i) {
    EXPECT_GE(plan.z[i], ht.ground_within(plan.distance[i]) + cfg.h_min - 1e-9);
    climbed |= plan.v_z[i] > 0;
    EXPECT_NEAR(plan.controls[i].rho * std::cos(plan.controls[i].phi), plan.v_h[i], 1e-12);
    if (plan.controls[i].phi > 0) {
      EXPECT_LT(plan.v_h[i], plan.controls[i].rho);
    }
  }
  EXPECT_TRUE(climbed);
  EXPECT_GT(plan.distance.back(), 100);

  cfg.horizon_steps = 4;
  cfg.horizon_duration = 12;
  cfg.lattice_levels = 5;
  EXPECT_NEAR(mpc_plan(s, ht, lim, cfg).cost, enumerate(s, ht, lim, cfg).cost, 1e-9);
}

TEST(Mpc, FloorEqualsGoalSettles) {
  const auto lim = uavs::m210();
  MpcConfig cfg;
  cfg.h_goal = cfg.h_min = 35;
  const VelocityLattice vl(lim.vz_min, lim.vz_max, cfg.lattice_levels);
  const double quantum = vl.spacing * cfg.step();
  for (double start : {35.0, 47.0, 80.0}) {
    UavState s{0, 0, start, 0, 0, 0, 0};
    std::vector<double> zs;
    for (int k = 0; k < 40; ++k) {
      const auto plan = mpc_plan(s, step_terrain(1e9, 0), lim, cfg);
      s.v_h = plan.v_h[0];
      s.v_z = plan.v_z[0];
      s.z = plan.z[0];
      zs.push_back(s.z);
    }
    for (std::size_t k = 20; k < zs.size(); ++k) {
      EXPECT_GE(zs[k], 35 - 1e-9);
      EXPECT_LE(zs[k], 35 + quantum);
    }
    if (start == 35.0) {
      for (double z : zs) EXPECT_DOUBLE_EQ(z, 35.0);
    }
  }
}

TEST(Mpc, InfeasibleStartThrowsNamingConstraint) {
  const auto lim = uavs::m210();
  MpcConfig cfg;
  try {
    mpc_plan(UavState{0, 0, 20, 0, 5, 0, 0}, step_terrain(1e9, 0), lim, cfg);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.constraint(), "altitude floor");
  }
  // A wall just ahead that no climb can clear.
  EXPECT_THROW(mpc_plan(UavState{0, 0, 40, 0, 10, 0, 0}, step_terrain(5, 300), lim, cfg), InfeasibleError);
}

// Optimality of the horizon implies the replanned cost never exceeds the
// previous plan's tail plus one held step.
TEST(Mpc, RecedingHorizonConsistency) {
  const auto lim = uavs::m210();
  MpcConfig cfg;
  cfg.h_goal = 60;
  for (double rise : {0.0, 20.0, 45.0}) {
    UavState s{0, 0, 60, 0, 6, 0, 0};
    double offset = 0.0;
    for (int k = 0; k < 12; ++k) {
      const auto ht = step_terrain(120, rise, offset);
      const auto plan = mpc_plan(s, ht, lim, cfg);
      double tail = 0;
      for (std::size_t i = 1; i < plan.stage_cost.size(); ++i) tail += plan.stage_cost[i];
      offset += plan.distance[0];
      s.v_h = plan.v_h[0];
      s.v_z = plan.v_z[0];
      s.z = plan.z[0];
      const auto next_ht = step_terrain(120, rise, offset);
      const auto next = mpc_plan(s, next_ht, lim, cfg);
      // Shift the old plan to the new origin before extending it.
      MpcPlan shifted = plan;
      for (double& d : shifted.distance) d -= plan.distance[0];
      const double extend = hold_step_cost(shifted, next_ht, cfg);
      if (std::isfinite(extend)) {
        EXPECT_LE(next.cost, tail + extend + 1e-9);
      }
    }
  }
}
