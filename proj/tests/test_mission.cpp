#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "sarsim/mission.hpp"
#include "sarsim/scenario.hpp"

using namespace sarsim;

namespace {

Polygon rect(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

// Flat 2 km square at 100 m, one zone near home and one far corner.
MissionConfig flat_mission(int near_people, int far_people, double duration) {
  MissionConfig cfg;
  cfg.id = "flat";
  cfg.terrain = std::make_shared<TerrainGrid>(200, 200, 0, 0, 10, std::vector<double>(200 * 200, 100.0));
  cfg.zones = {{"near", rect(200, 200, 400, 400), near_people}, {"far", rect(1500, 1500, 1700, 1700), far_people}};
  cfg.home = {300, 300};
  FlightConfig f;
  f.duration = duration;
  cfg.flights = {f};
  return cfg;
}

Scenario smoke() { return load_scenario(std::string(SARSIM_SCENARIO_DIR) + "/smoke.json"); }

}  // namespace

TEST(Mission, ZeroDurationFlightIsNoOp) {
  auto cfg = flat_mission(3, 2, 0.0);
  const auto ctx = prepare_mission(cfg);
  FieldState field(ctx.m0);
  const FieldState before = field;
  FlightCarry carry;
  const auto log = run_flight(field, carry, ctx, cfg.flights[0], 0.0);
  EXPECT_TRUE(log.samples.empty());
  EXPECT_EQ(field.c, before.c);
  EXPECT_EQ(field.m, before.m);
}

TEST(Mission, MasslessZoneLeavesEtaAtZero) {
  auto cfg = flat_mission(0, 4, 30.0);
  const auto rep = run_mission(cfg);
  ASSERT_EQ(rep.flights.size(), 1u);
  EXPECT_EQ(rep.flights[0].samples.size(), 60u);
  for (double e : rep.curve_eta) EXPECT_EQ(e, 0.0);
  const auto ctx = prepare_mission(cfg);
  for (std::size_t i = 0; i < rep.field.m.size(); ++i)
    if (ctx.owner[i] == 1) {
      EXPECT_EQ(rep.field.m[i], rep.field.m0[i]);
    }
  EXPECT_EQ(rep.violations, 0u);
}

TEST(Mission, SingleFlightReport) {
  auto cfg = flat_mission(3, 1, 60.0);
  const auto rep = run_mission(cfg);
  ASSERT_EQ(rep.flights.size(), 1u);
  EXPECT_EQ(rep.curve_t.size(), 61u);
  EXPECT_DOUBLE_EQ(rep.curve_t.back(), 60.0);
  EXPECT_GT(rep.final_eta, 0.0);
  EXPECT_EQ(rep.final_eta, rep.curve_eta.back());
  EXPECT_EQ(rep.violations, 0u);
  for (const auto& s : rep.flights[0].samples) {
    EXPECT_GE(s.z - s.ground, 35.0 - 1e-9);
    EXPECT_NEAR(s.rho * std::cos(s.phi), s.v_h, 1e-12);
    EXPECT_NEAR(s.rho * std::sin(s.phi), s.v_z, 1e-12);
  }
}

TEST(Mission, ConnectedFlightsCarryStateAndCoverage) {
  const auto sc = smoke();
  const auto& cfg = sc.mission;
  ASSERT_EQ(cfg.flights.size(), 2u);
  ASSERT_TRUE(cfg.flights[1].continue_previous);
  const auto ctx = prepare_mission(cfg);
  FieldState field(ctx.m0);
  FlightCarry carry;
  const auto log1 = run_flight(field, carry, ctx, cfg.flights[0], 0.0);
  const double eta1 = accomplishment(field);
  const std::vector<double> c1 = field.c;
  const auto log2 = run_flight(field, carry, ctx, cfg.flights[1], cfg.flights[0].duration);
  const double eta2 = accomplishment(field);
  EXPECT_GE(eta2, eta1);
  EXPECT_GT(eta1, 0.0);
  std::size_t covered = 0;
  for (std::size_t i = 0; i < c1.size(); ++i) {
    EXPECT_GE(field.c[i], c1[i]);
    covered += c1[i] > 0;
  }
  EXPECT_GT(covered, 0u);
  // Second flight resumes where the first one stopped.
  const auto& a = log1.samples.back();
  const auto& b = log2.samples.front();
  EXPECT_LE(std::hypot(b.x - a.x, b.y - a.y), 10.0 * 0.5 + 1e-9);
  EXPECT_LE(std::abs(b.z - a.z), 5.0 * 0.5 + 1e-9);
  EXPECT_DOUBLE_EQ(b.mission_t, 90.5);
  EXPECT_EQ(log1.violations() + log2.violations(), 0u);
}

TEST(Mission, RunsAreBitIdentical) {
  const auto sc = smoke();
  const auto a = run_mission(sc.mission), b = run_mission(sc.mission);
  ASSERT_EQ(a.flights.size(), b.flights.size());
  for (std::size_t f = 0; f < a.flights.size(); ++f) {
    ASSERT_EQ(a.flights[f].samples.size(), b.flights[f].samples.size());
    for (std::size_t i = 0; i < a.flights[f].samples.size(); ++i) {
      const auto &s = a.flights[f].samples[i], &t = b.flights[f].samples[i];
      EXPECT_EQ(s.x, t.x);
      EXPECT_EQ(s.y, t.y);
      EXPECT_EQ(s.z, t.z);
      EXPECT_EQ(s.heading, t.heading);
      EXPECT_EQ(s.eta, t.eta);
    }
  }
  EXPECT_EQ(a.curve_eta, b.curve_eta);
  EXPECT_EQ(a.field.u, b.field.u);
}

TEST(Mission, EtaCurveMonotoneAndMatchesOfflineRecompute) {
  const auto rep = run_mission(smoke().mission);
  for (std::size_t i = 1; i < rep.curve_eta.size(); ++i) EXPECT_GE(rep.curve_eta[i], rep.curve_eta[i - 1]);
  double s = 0;
  for (std::size_t i = 0; i < rep.field.c.size(); ++i) {
    EXPECT_NEAR(rep.field.m[i], rep.field.m0[i] * std::exp(-rep.field.c[i]), 1e-12 * rep.field.m0[i]);
    s += rep.field.m0[i] * std::exp(-rep.field.c[i]);
  }
  EXPECT_NEAR(rep.final_eta, 1.0 - s * rep.field.grid.cell_area(), 1e-12);
}

TEST(MonteCarlo, TargetsFollowInitialDensity) {
  const auto sc = smoke();
  const auto ctx = prepare_mission(sc.mission);
  const auto targets = sample_targets(ctx, 5000, 99);
  std::vector<double> count(2, 0.0);
  for (const auto& t : targets) {
    ASSERT_GE(ctx.owner[t.cell], 0);
    EXPECT_EQ(t.cell, ctx.domain.grid.cell_of(t.position));
    EXPECT_GT(t.threshold, 0.0);
    count[static_cast<std::size_t>(ctx.owner[t.cell])] += 1;
  }
  // Zone shares 3/5 and 2/5 within 4 sigma.
  const double sd = std::sqrt(5000 * 0.6 * 0.4);
  EXPECT_NEAR(count[0], 3000, 4 * sd);
  // Same seed, same population; different seed, different population.
  const auto again = sample_targets(ctx, 5000, 99);
  const auto other = sample_targets(ctx, 5000, 100);
  EXPECT_EQ(again[17].position.x, targets[17].position.x);
  EXPECT_NE(other[17].position.x, targets[17].position.x);
  // Mean threshold of Exp(1).
  double mean = 0;
  for (const auto& t : targets) mean += t.threshold / 5000.0;
  EXPECT_NEAR(mean, 1.0, 4.0 / std::sqrt(5000.0));
}

TEST(MonteCarlo, SensingDisabledDetectsNothing) {
  auto sc = smoke();
  sc.mission.sensing.rate_scale = 0.0;
  const auto res = monte_carlo_validate(sc.mission, 300, 5);
  ASSERT_EQ(res.validations.size(), 1u);
  EXPECT_EQ(res.validations[0].detected, 0u);
  for (double e : res.mission.curve_eta) EXPECT_EQ(e, 0.0);
  EXPECT_TRUE(res.validations[0].within_band());
}

TEST(MonteCarlo, ZeroTargetsRejected) {
  EXPECT_THROW(monte_carlo_validate(smoke().mission, 0, 1), ConfigError);
}

// All targets share one hovered cell, so detection times must be Exp(psi0).
TEST(MonteCarlo, HoverDetectionTimesAreExponential) {
  const TerrainGrid terrain(40, 40, 0, 0, 10, std::vector<double>(1600, 100.0));
  const GridSpec g{100, 100, 10, 20, 20};
  DensityGrid d{g, std::vector<double>(g.size(), 1.0 / (g.size() * g.cell_area()))};
  FieldState field(d);
  const std::size_t cell = g.index(10, 10);
  const Vec2 p = g.center(cell);
  const CameraPose pose{{p.x, p.y, 155}, 0.0};
  const auto cam = cameras::x5s();
  const auto table = RecallTable::initial_experiment();
  const SensingParams sp{0.05, 2.0};
  const double psi0 = detection_rate(pose, p, cam, terrain, table, sp);
  ASSERT_NEAR(psi0, 0.04885, 1e-12);

  const std::size_t M = 2000;
  std::vector<SyntheticTarget> targets(M);
  for (std::size_t j = 0; j < M; ++j) {
    CounterRng rng(4242, j);
    targets[j].position = p;
    targets[j].cell = cell;
    targets[j].threshold = rng.exponential();
  }
  TargetTracker tracker(targets);
  for (int k = 0; k < 600; ++k) {
    accumulate_coverage(field, pose, cam, terrain, table, sp, 1.0);
    tracker.on_coverage(field, k, 1.0);
  }
  std::vector<double> times;
  for (const auto& t : tracker.targets()) {
    ASSERT_TRUE(t.detected());
    times.push_back(t.detection_time);
  }
  std::sort(times.begin(), times.end());
  double ks = 0;
  for (std::size_t i = 0; i < M; ++i) {
    const double F = 1 - std::exp(-psi0 * times[i]);
    ks = std::max({ks, std::abs(F - static_cast<double>(i) / M), std::abs(F - static_cast<double>(i + 1) / M)});
  }
  EXPECT_LT(ks, 1.628 / std::sqrt(static_cast<double>(M)));
  // Exact crossing: each time equals threshold / psi0.
  for (std::size_t j = 0; j < M; ++j)
    EXPECT_NEAR(tracker.targets()[j].detection_time, targets[j].threshold / psi0, 1e-9 * (1 + targets[j].threshold / psi0));
}

TEST(MonteCarlo, BandComparison) {
  std::vector<SyntheticTarget> targets(100);
  for (std::size_t j = 0; j < 100; ++j) targets[j].detection_time = j < 50 ? 1.0 : std::nan("");
  const auto v = compare_with_prediction(targets, {0.0, 2.0, 3.0}, {0.0, 0.5, 0.9}, 3);
  ASSERT_EQ(v.rows.size(), 3u);
  EXPECT_EQ(v.rows[0].empirical, 0.0);
  EXPECT_TRUE(v.rows[0].within);
  EXPECT_EQ(v.rows[1].empirical, 0.5);
  EXPECT_NEAR(v.rows[1].band_hi, 0.5 + 3 * 0.05, 1e-12);
  EXPECT_TRUE(v.rows[1].within);
  EXPECT_FALSE(v.rows[2].within);
  EXPECT_EQ(v.outside, 1u);
  EXPECT_FALSE(v.within_band());
  EXPECT_EQ(v.detected, 50u);
}

// Tail sums straight from lgamma, no shared code with the library.
TEST(MonteCarlo, BinomialBandMatchesDirectTails) {
  const auto pmf = [](std::size_t M, double p, std::size_t k) {
    const double n = static_cast<double>(M), x = static_cast<double>(k);
    return std::exp(std::lgamma(n + 1) - std::lgamma(x + 1) - std::lgamma(n - x + 1) + x * std::log(p) +
                    (n - x) * std::log1p(-p));
  };
  for (std::size_t M : {10u, 100u, 2000u})
    for (double p : {1e-5, 3e-4, 0.002, 0.05, 0.3, 0.5, 0.97}) {
      const auto [lo, hi] = binomial_band(M, p);
      double below = 0, above = 0;
      for (std::size_t k = 0; k < lo; ++k) below += pmf(M, p, k);
      for (std::size_t k = hi + 1; k <= M; ++k) above += pmf(M, p, k);
      EXPECT_LE(below, kThreeSigmaTail * (1 + 1e-9)) << M << " " << p;
      EXPECT_LE(above, kThreeSigmaTail * (1 + 1e-9)) << M << " " << p;
      // One step tighter would exceed the tail on that side.
      if (lo < M) {
        EXPECT_GT(below + pmf(M, p, lo), kThreeSigmaTail) << M << " " << p;
      }
      if (hi > 0) {
        EXPECT_GT(above + pmf(M, p, hi), kThreeSigmaTail) << M << " " << p;
      }
    }
  // A single early detection is plausible when M eta is small.
  EXPECT_GE(binomial_band(2000, 2e-4).second, 1u);
  // Close to the normal band in the bulk.
  const double sd = std::sqrt(2000 * 0.3 * 0.7);
  EXPECT_NEAR(static_cast<double>(binomial_band(2000, 0.3).second), 600 + 3 * sd, 2.0);
  EXPECT_NEAR(static_cast<double>(binomial_band(2000, 0.3).first), 600 - 3 * sd, 2.0);
  EXPECT_EQ(binomial_band(50, 0.0), (std::pair<std::size_t, std::size_t>{0, 0}));
  EXPECT_EQ(binomial_band(50, 1.0), (std::pair<std::size_t, std::size_t>{50, 50}));
}
