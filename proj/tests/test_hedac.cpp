#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <queue>

#include "sarsim/hedac.hpp"

using namespace sarsim;

namespace {

GridSpec square_grid(std::size_t n, double cell) { return {0.0, 0.0, cell, n, n}; }

DensityGrid uniform_density(const GridSpec& g) {
  return {g, std::vector<double>(g.size(), 1.0 / (static_cast<double>(g.size()) * g.cell_area()))};
}

TerrainGrid flat_terrain() { return TerrainGrid(60, 60, 0, 0, 10, std::vector<double>(3600, 100.0)); }

struct SensorSetup {
  CameraModel cam = cameras::x5s();
  RecallTable table = RecallTable::initial_experiment();
  SensingParams sp{0.05, 2.0};
  TerrainGrid terrain = flat_terrain();
};

// Dense assembly of beta I - alpha L with mirrored ghost cells.
Eigen::MatrixXd dense_operator(const GridSpec& g, double alpha, double beta) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  const double k = alpha / (g.cell_size * g.cell_size);
  for (std::size_t r = 0; r < g.nrows; ++r)
    for (std::size_t c = 0; c < g.ncols; ++c) {
      const auto i = static_cast<Eigen::Index>(g.index(c, r));
      A(i, i) += beta;
      const auto link = [&](std::size_t c2, std::size_t r2) {
        const auto j = static_cast<Eigen::Index>(g.index(c2, r2));
        A(i, i) += k;
        A(i, j) -= k;
      };
      if (c > 0) link(c - 1, r);
      if (c + 1 < g.ncols) link(c + 1, r);
      if (r > 0) link(c, r - 1);
      if (r + 1 < g.nrows) link(c, r + 1);
    }
  return A;
}

// Relative L2 error of the manufactured solution on an n x n grid.
double mms_error(std::size_t n) {
  const double L = 1000.0;
  const GridSpec g = square_grid(n, L / static_cast<double>(n));
  const HedacParams hp{1000.0, 1.0, 1e-12, 100000};
  const double k2 = 2 * std::pow(std::numbers::pi / L, 2);
  std::vector<double> exact(g.size()), m(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec2 p = g.center(i);
    exact[i] = std::cos(std::numbers::pi * p.x / L) * std::cos(std::numbers::pi * p.y / L);
    m[i] = (hp.beta + hp.alpha * k2) * exact[i];
  }
  std::vector<double> u;
  solve_screened_poisson(g, hp, m, u);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    num += (u[i] - exact[i]) * (u[i] - exact[i]);
    den += exact[i] * exact[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST(Coverage, EmptyFootprintLeavesStateUnchanged) {
  SensorSetup s;
  FieldState f(uniform_density(square_grid(30, 10)));
  const FieldState before = f;
  EXPECT_EQ(accumulate_coverage(f, {{500, 500, 155}, 0.0}, s.cam, s.terrain, s.table, s.sp, 1.0), 0u);
  EXPECT_EQ(f.c, before.c);
  EXPECT_EQ(f.m, before.m);
  EXPECT_THROW(accumulate_coverage(f, {{150, 150, 155}, 0.0}, s.cam, s.terrain, s.table, s.sp, 0.0),
               ConfigError);
}

TEST(Coverage, HoverGivesPsiTimesDuration) {
  SensorSetup s;
  FieldState f(uniform_density(square_grid(30, 10)));
  const CameraPose pose{{152, 147, 155}, 0.4};
  for (int i = 0; i < 8; ++i) accumulate_coverage(f, pose, s.cam, s.terrain, s.table, s.sp, 0.5);
  std::size_t visible = 0;
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    const double psi = detection_rate(pose, f.grid.center(i), s.cam, s.terrain, s.table, s.sp);
    visible += psi > 0;
    EXPECT_NEAR(f.c[i], psi * 4.0, 1e-15);
    EXPECT_NEAR(f.m[i], f.m0[i] * std::exp(-psi * 4.0), 1e-12 * f.m0[i]);
  }
  EXPECT_GT(visible, 10u);
}

TEST(Coverage, AdditiveInTime) {
  SensorSetup s;
  FieldState one(uniform_density(square_grid(30, 10))), two = one;
  const CameraPose pose{{140, 160, 175}, -1.1};
  accumulate_coverage(one, pose, s.cam, s.terrain, s.table, s.sp, 2.0);
  accumulate_coverage(two, pose, s.cam, s.terrain, s.table, s.sp, 1.0);
  accumulate_coverage(two, pose, s.cam, s.terrain, s.table, s.sp, 1.0);
  for (std::size_t i = 0; i < one.c.size(); ++i) EXPECT_NEAR(one.c[i], two.c[i], 1e-15);
}

TEST(Coverage, ConstantRateDecayLaw) {
  SensorSetup s;
  FieldState f(uniform_density(square_grid(30, 10)));
  const CameraPose pose{{150, 150, 155}, 0.0};
  const std::size_t centre = f.grid.cell_of({150.1, 150.1});
  const double psi = detection_rate(pose, f.grid.center(centre), s.cam, s.terrain, s.table, s.sp);
  ASSERT_GT(psi, 0.0);
  for (int i = 0; i < 30; ++i) accumulate_coverage(f, pose, s.cam, s.terrain, s.table, s.sp, 1.0);
  for (std::size_t i = 0; i < f.grid.size(); ++i) {
    EXPECT_NEAR(f.m[i], f.m0[i] * std::exp(-f.c[i]), 1e-12 * f.m0[i]);
    EXPECT_GE(f.c[i], 0.0);
  }
  EXPECT_NEAR(f.m[centre] / f.m0[centre], std::exp(-psi * 30.0), 1e-9);
}

TEST(Accomplishment, Examples) {
  FieldState f(uniform_density(square_grid(20, 10)));
  EXPECT_NEAR(accomplishment(f), 0.0, 1e-12);
  for (std::size_t i = 0; i < f.c.size(); ++i) {
    f.c[i] = std::log(2.0);
    f.m[i] = f.m0[i] * std::exp(-f.c[i]);
  }
  EXPECT_NEAR(accomplishment(f), 0.5, 1e-12);
  for (std::size_t i = 0; i < f.c.size(); ++i) {
    f.c[i] = 40.0;
    f.m[i] = f.m0[i] * std::exp(-f.c[i]);
  }
  EXPECT_NEAR(accomplishment(f), 1.0, 1e-9);
}

TEST(Accomplishment, MonotoneUnderSweep) {
  SensorSetup s;
  FieldState f(uniform_density(square_grid(30, 10)));
  double prev = accomplishment(f);
  for (int k = 0; k < 120; ++k) {
    const double t = 0.05 * k;
    accumulate_coverage(f, {{150 + 100 * std::cos(t), 150 + 100 * std::sin(t), 160}, t}, s.cam, s.terrain,
                        s.table, s.sp, 1.0);
    const double eta = accomplishment(f);
    EXPECT_GE(eta, prev);
    EXPECT_LE(eta, 1.0);
    prev = eta;
  }
  EXPECT_GT(prev, 0.05);
}

TEST(Potential, ConstantSourceGivesConstantField) {
  const GridSpec g = square_grid(16, 10);
  for (double beta : {0.5, 1.0, 4.0}) {
    const HedacParams hp{1000.0, beta, 1e-12, 1000};
    std::vector<double> u, m(g.size(), 3e-6);
    solve_screened_poisson(g, hp, m, u);
    for (double v : u) EXPECT_NEAR(v, 3e-6 / beta, 1e-15);
  }
  // Zero source short-circuits to zero.
  std::vector<double> u(g.size(), 5.0);
  const auto rep = solve_screened_poisson(g, HedacParams{}, std::vector<double>(g.size(), 0.0), u);
  EXPECT_EQ(rep.iterations, 0);
  for (double v : u) EXPECT_EQ(v, 0.0);
}

TEST(Potential, ManufacturedSolutionConvergesSecondOrder) {
  const double e32 = mms_error(32), e64 = mms_error(64), e128 = mms_error(128);
  EXPECT_GT(e32 / e64, 3.0);
  EXPECT_LT(e32 / e64, 5.0);
  EXPECT_GT(e64 / e128, 3.0);
  EXPECT_LT(e64 / e128, 5.0);
  EXPECT_LT(e128, 1e-3);
}

TEST(Potential, PointMassMatchesDenseSolve) {
  const GridSpec g = square_grid(20, 10);
  const HedacParams hp{1000.0, 1.0, 1e-13, 10000};
  const std::size_t src = g.index(7, 12);
  std::vector<double> m(g.size(), 0.0), u;
  m[src] = 1e-4;
  const auto rep = solve_screened_poisson(g, hp, m, u, true);
  EXPECT_LE(rep.relative_residual, hp.solver_tolerance);

  const Eigen::MatrixXd A = dense_operator(g, hp.alpha, hp.beta);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
  b(static_cast<Eigen::Index>(src)) = 1e-4;
  const Eigen::VectorXd x = A.ldlt().solve(b);
  double scale = x.cwiseAbs().maxCoeff();
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(u[i], x(static_cast<Eigen::Index>(i)), 1e-9 * scale);

  // Strictly positive, and decreasing away from the source.
  std::vector<int> dist(g.size(), -1);
  std::queue<std::size_t> q;
  dist[src] = 0;
  q.push(src);
  while (!q.empty()) {
    const std::size_t i = q.front();
    q.pop();
    const std::size_t c = i % g.ncols, r = i / g.ncols;
    const std::size_t nb[4] = {c > 0 ? i - 1 : i, c + 1 < g.ncols ? i + 1 : i, r > 0 ? i - g.ncols : i,
                               r + 1 < g.nrows ? i + g.ncols : i};
    for (std::size_t j : nb) {
      if (j == i) continue;
      if (dist[j] < 0) {
        dist[j] = dist[i] + 1;
        q.push(j);
      }
      if (dist[j] != dist[i] + 1) continue;
      // Steps along the dominant axis must descend. A sideways step near a
      // wall can gain from the mirror image; the dense solve shows the same.
      const long dx = std::labs(static_cast<long>(j % g.ncols) - 7), dy = std::labs(static_cast<long>(j / g.ncols) - 12);
      const bool dominant = (j % g.ncols != c) ? dx >= dy : dy >= dx;
      if (dominant) {
        EXPECT_GT(u[i], u[j]) << i << " -> " << j;
      } else {
        EXPECT_EQ(u[i] > u[j], x(static_cast<Eigen::Index>(i)) > x(static_cast<Eigen::Index>(j)));
      }
    }
  }
  for (double v : u) EXPECT_GT(v, 0.0);

  // Steering from every probe points at the source.
  FieldState f;
  f.grid = g;
  f.u = u;
  const Vec2 s = g.center(src);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (i == src) continue;
    const Vec2 p = g.center(i);
    const auto dir = steering_gradient(f, p);
    ASSERT_TRUE(dir.has_value());
    const Vec2 to = s - p;
    EXPECT_GT(dir->x * to.x + dir->y * to.y, 0.0) << p.x << ',' << p.y;
    EXPECT_NEAR(norm(*dir), 1.0, 1e-12);
  }
}

TEST(Potential, ResidualHistoryMonotone) {
  const GridSpec g = square_grid(40, 10);
  std::vector<double> m(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) m[i] = (i % 7 == 0 ? 2e-6 : 0.0) + ((i / 40) % 5 == 0 ? 1e-6 : 0.0);
  std::vector<double> u;
  const auto rep = solve_screened_poisson(g, HedacParams{}, m, u, true);
  ASSERT_GT(rep.residual_history.size(), 2u);
  for (std::size_t k = 1; k < rep.residual_history.size(); ++k)
    EXPECT_LE(rep.residual_history[k], rep.residual_history[k - 1] * (1 + 1e-12));
  EXPECT_LE(rep.relative_residual, 1e-8);
}

TEST(Potential, NonConvergenceReportsResidual) {
  const GridSpec g = square_grid(40, 10);
  std::vector<double> m(g.size(), 0.0), u;
  m[5] = 1.0;
  try {
    solve_screened_poisson(g, HedacParams{1000.0, 1.0, 1e-12, 2}, m, u);
    FAIL();
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.residual(), 1e-12);
  }
  EXPECT_THROW(HedacParams({0.0, 1.0, 1e-8, 10}).validate(), ConfigError);
  EXPECT_THROW(HedacParams({1.0, 1.0, 1.5, 10}).validate(), ConfigError);
}

TEST(Steering, GradientExamples) {
  FieldState f;
  f.grid = square_grid(12, 10);
  f.u.resize(f.grid.size());
  for (std::size_t i = 0; i < f.u.size(); ++i) f.u[i] = f.grid.center(i).x;
  for (double x : {25.0, 47.0, 61.5, 93.0})
    for (double y : {22.0, 58.0, 97.0}) {
      const auto d = steering_gradient(f, {x, y});
      ASSERT_TRUE(d);
      EXPECT_NEAR(d->x, 1.0, 1e-12);
      EXPECT_NEAR(d->y, 0.0, 1e-12);
    }
  std::fill(f.u.begin(), f.u.end(), 2.0);
  EXPECT_FALSE(steering_gradient(f, {50, 50}).has_value());
  EXPECT_THROW(steering_gradient(f, {-1, 50}), DomainError);
  EXPECT_THROW(steering_gradient(f, {50, 121}), DomainError);
}
