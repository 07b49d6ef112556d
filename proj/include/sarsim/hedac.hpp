#pragma once

// Coverage accumulation, undetected-target density, search accomplishment
// and the HEDAC potential field with its steering gradient.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sarsim/error.hpp"
#include "sarsim/geometry.hpp"
#include "sarsim/search_domain.hpp"
#include "sarsim/sensing.hpp"
#include "sarsim/terrain.hpp"

namespace sarsim {

struct HedacParams {
  double alpha = 1000.0;  // m^2
  double beta = 1.0;
  double solver_tolerance = 1e-8;  // relative residual
  int max_iterations = 20000;

  void validate() const {
    if (!(alpha > 0.0)) throw ConfigError("hedac: alpha must be > 0");
    if (!(beta > 0.0)) throw ConfigError("hedac: beta must be > 0");
    if (!(solver_tolerance > 0.0 && solver_tolerance < 1.0))
      throw ConfigError("hedac: solver_tolerance must lie in (0, 1)");
    if (max_iterations < 1) throw ConfigError("hedac: max_iterations must be >= 1");
  }
};

/// Coverage c, undetected density m = m0 * exp(-c) and potential u on one grid.
struct FieldState {
  GridSpec grid;
  std::vector<double> m0;
  std::vector<double> c;
  std::vector<double> m;
  std::vector<double> u;

  FieldState() = default;
  explicit FieldState(const DensityGrid& initial)
      : grid(initial.grid),
        m0(initial.values),
        c(initial.values.size(), 0.0),
        m(initial.values),
        u(initial.values.size(), 0.0) {}
};

/// Adds psi * dt to c at every cell centre and refreshes m. Returns the
/// number of cells that received coverage.
inline std::size_t accumulate_coverage(FieldState& state, const CameraPose& pose,
                                       const CameraModel& cam, const TerrainGrid& terrain,
                                       const RecallTable& table, const SensingParams& params,
                                       double dt) {
  if (!(dt > 0.0)) throw ConfigError("accumulate_coverage: dt must be > 0");
  if (params.rate_scale == 0.0) return 0;
  const double depth = pose.position.z - terrain.min_elevation();
  if (!(depth > 0.0)) return 0;
  // Bounding circle of the footprint over the lowest possible ground.
  const double reach = depth * std::hypot(cam.tan_half_h(), cam.tan_half_v());
  const GridSpec& g = state.grid;
  const auto lo = [&](double v, double origin) {
    return static_cast<long>(std::floor((v - origin) / g.cell_size - 0.5));
  };
  const long c_lo = std::max(0L, lo(pose.position.x - reach, g.x_origin));
  const long c_hi = std::min(static_cast<long>(g.ncols) - 1, lo(pose.position.x + reach, g.x_origin) + 1);
  const long r_lo = std::max(0L, lo(pose.position.y - reach, g.y_origin));
  const long r_hi = std::min(static_cast<long>(g.nrows) - 1, lo(pose.position.y + reach, g.y_origin) + 1);
  std::size_t touched = 0;
  for (long r = r_lo; r <= r_hi; ++r) {
    for (long col = c_lo; col <= c_hi; ++col) {
      const std::size_t i = g.index(static_cast<std::size_t>(col), static_cast<std::size_t>(r));
      const Vec2 p = g.center(static_cast<std::size_t>(col), static_cast<std::size_t>(r));
      const double dx = p.x - pose.position.x, dy = p.y - pose.position.y;
      if (dx * dx + dy * dy > reach * reach) continue;
      const double psi = detection_rate(pose, p, terrain.elevation_at(p), cam, terrain, table, params);
      if (psi <= 0.0) continue;
      state.c[i] += psi * dt;
      state.m[i] = state.m0[i] * std::exp(-state.c[i]);
      ++touched;
    }
  }
  return touched;
}

/// eta = 1 - sum(m) * cell_area. Summed as sum(m0 - m) * cell_area, which is
/// the same since m0 integrates to one, but exactly 0 before any coverage and
/// non-decreasing under rounding because every term only grows.
inline double accomplishment(const FieldState& state) {
  double s = 0.0;
  for (std::size_t i = 0; i < state.m.size(); ++i) s += state.m0[i] - state.m[i];
  return std::clamp(s * state.grid.cell_area(), 0.0, 1.0);
}

namespace detail {

/// y = (beta I - alpha L) x, L the 5-point Laplacian with mirrored ghost
/// cells (zero normal flux on the rectangle boundary). Returns dot(x, y)
/// from the same sweep.
inline double apply_screened_laplacian_dot(const GridSpec& g, double alpha, double beta,
                                           const std::vector<double>& x, std::vector<double>& y) {
  const double k = alpha / (g.cell_size * g.cell_size);
  const std::size_t nc = g.ncols, nr = g.nrows;
  double s = 0.0;
  for (std::size_t r = 0; r < nr; ++r) {
    const double* xr = x.data() + r * nc;
    const double* xd = r > 0 ? xr - nc : nullptr;
    const double* xu = r + 1 < nr ? xr + nc : nullptr;
    double* yr = y.data() + r * nc;
    for (std::size_t c = 0; c < nc; ++c) {
      const double xi = xr[c];
      double lap = 0.0;
      if (c > 0) lap += xr[c - 1] - xi;
      if (c + 1 < nc) lap += xr[c + 1] - xi;
      if (xd) lap += xd[c] - xi;
      if (xu) lap += xu[c] - xi;
      const double v = beta * xi - k * lap;
      yr[c] = v;
      s += xi * v;
    }
  }
  return s;
}

inline void apply_screened_laplacian(const GridSpec& g, double alpha, double beta,
                                     const std::vector<double>& x, std::vector<double>& y) {
  apply_screened_laplacian_dot(g, alpha, beta, x, y);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  std::vector<double> residual_history;  // relative residual after each iteration
};

/// Solves (beta I - alpha L) u = rhs by the conjugate residual method, warm
/// started from `u`. The residual 2-norm is non-increasing across iterations.
inline SolveReport solve_screened_poisson(const GridSpec& g, const HedacParams& hp,
                                          const std::vector<double>& rhs, std::vector<double>& u,
                                          bool keep_history = false) {
  hp.validate();
  const std::size_t n = g.size();
  if (u.size() != n) u.assign(n, 0.0);
  SolveReport rep;
  const double bnorm = std::sqrt(detail::dot(rhs, rhs));
  if (bnorm == 0.0) {
    std::fill(u.begin(), u.end(), 0.0);
    return rep;
  }
  std::vector<double> r(n), p(n), ar(n), ap(n);
  detail::apply_screened_laplacian(g, hp.alpha, hp.beta, u, ar);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ar[i];
  rep.relative_residual = std::sqrt(detail::dot(r, r)) / bnorm;
  if (keep_history) rep.residual_history.push_back(rep.relative_residual);
  if (rep.relative_residual <= hp.solver_tolerance) return rep;
  p = r;
  double rar = detail::apply_screened_laplacian_dot(g, hp.alpha, hp.beta, r, ar);
  ap = ar;
  double apap = detail::dot(ap, ap);
  const double stop = hp.solver_tolerance * bnorm;
  while (rep.iterations < hp.max_iterations) {
    const double step = rar / apap;
    double rr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      u[i] += step * p[i];
      r[i] -= step * ap[i];
      rr += r[i] * r[i];
    }
    ++rep.iterations;
    rep.relative_residual = std::sqrt(rr) / bnorm;
    if (keep_history) rep.residual_history.push_back(rep.relative_residual);
    if (std::sqrt(rr) <= stop) return rep;
    const double rar_next = detail::apply_screened_laplacian_dot(g, hp.alpha, hp.beta, r, ar);
    const double beta = rar_next / rar;
    rar = rar_next;
    apap = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = r[i] + beta * p[i];
      ap[i] = ar[i] + beta * ap[i];
      apap += ap[i] * ap[i];
    }
  }
  throw ConvergenceError("hedac: potential solve did not converge in " +
                             std::to_string(hp.max_iterations) + " iterations (relative residual " +
                             std::to_string(rep.relative_residual) + ")",
                         rep.relative_residual);
}

/// Re-solves alpha * Lap(u) = beta * u - m with zero-flux boundary from the current m.
inline SolveReport solve_potential(FieldState& state, const HedacParams& hp) {
  return solve_screened_poisson(state.grid, hp, state.m, state.u);
}

/// Central-difference gradient of u at cell centre (col, row); mirrored ghost
/// cells at the boundary.
inline Vec2 potential_gradient_at_cell(const FieldState& s, std::size_t col, std::size_t row) {
  const GridSpec& g = s.grid;
  const auto at = [&](std::size_t c, std::size_t r) { return s.u[g.index(c, r)]; };
  const std::size_t cl = col > 0 ? col - 1 : col, cr = col + 1 < g.ncols ? col + 1 : col;
  const std::size_t rd = row > 0 ? row - 1 : row, ru = row + 1 < g.nrows ? row + 1 : row;
  const double h2 = 2.0 * g.cell_size;
  return {(at(cr, row) - at(cl, row)) / h2, (at(col, ru) - at(col, rd)) / h2};
}

/// Unit ascent direction of u at `position`, bilinearly interpolated from the
/// four surrounding cell-centre gradients; nullopt when the gradient vanishes.
inline std::optional<Vec2> steering_gradient(const FieldState& s, Vec2 position) {
  const GridSpec& g = s.grid;
  if (!g.contains(position))
    throw DomainError("steering_gradient: position outside the flight domain");
  const auto frac = [&](double v, double origin, std::size_t n) {
    return std::clamp((v - origin) / g.cell_size - 0.5, 0.0, static_cast<double>(n - 1));
  };
  const double fx = frac(position.x, g.x_origin, g.ncols);
  const double fy = frac(position.y, g.y_origin, g.nrows);
  const std::size_t c0 = std::min(static_cast<std::size_t>(fx), g.ncols > 1 ? g.ncols - 2 : 0);
  const std::size_t r0 = std::min(static_cast<std::size_t>(fy), g.nrows > 1 ? g.nrows - 2 : 0);
  const std::size_t c1 = std::min(c0 + 1, g.ncols - 1), r1 = std::min(r0 + 1, g.nrows - 1);
  const double tx = std::clamp(fx - static_cast<double>(c0), 0.0, 1.0);
  const double ty = std::clamp(fy - static_cast<double>(r0), 0.0, 1.0);
  const Vec2 g00 = potential_gradient_at_cell(s, c0, r0), g10 = potential_gradient_at_cell(s, c1, r0);
  const Vec2 g01 = potential_gradient_at_cell(s, c0, r1), g11 = potential_gradient_at_cell(s, c1, r1);
  const Vec2 grad = (1.0 - ty) * ((1.0 - tx) * g00 + tx * g10) + ty * ((1.0 - tx) * g01 + tx * g11);
  const double len = norm(grad);
  if (len < 1e-12) return std::nullopt;
  return Vec2{grad.x / len, grad.y / len};
}

}  // namespace sarsim
