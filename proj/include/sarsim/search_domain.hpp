#pragma once

// Search zones, the rectangular flight domain and the initial target density.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "sarsim/error.hpp"
#include "sarsim/geometry.hpp"

namespace sarsim {

using Polygon = std::vector<Vec2>;

/// Signed shoelace area (positive for counter-clockwise vertex order).
inline double signed_area(const Polygon& poly) {
  double a = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Vec2 p = poly[i], q = poly[(i + 1) % n];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

inline double polygon_area(const Polygon& poly) { return std::abs(signed_area(poly)); }

/// Ray-casting inside test. Points on an edge or vertex count as inside.
inline bool point_in_polygon(const Polygon& poly, Vec2 p) {
  if (poly.size() < 3 || polygon_area(poly) == 0.0)
    throw ConfigError("point_in_polygon: degenerate polygon");
  bool inside = false;
  for (std::size_t i = 0, n = poly.size(), j = n - 1; i < n; j = i++) {
    const Vec2 a = poly[j], b = poly[i];
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    const double scale = std::max({std::abs(b.x - a.x), std::abs(b.y - a.y), 1.0}) *
                         std::max({std::abs(p.x - a.x), std::abs(p.y - a.y), 1.0});
    if (std::abs(cross) <= 1e-12 * scale && p.x >= std::min(a.x, b.x) &&
        p.x <= std::max(a.x, b.x) && p.y >= std::min(a.y, b.y) && p.y <= std::max(a.y, b.y))
      return true;
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

struct Zone {
  std::string id;
  Polygon polygon;
  int person_count = 0;

  double area() const { return polygon_area(polygon); }

  void validate() const {
    if (polygon.size() < 3) throw ConfigError("zone " + id + ": polygon needs >= 3 vertices");
    if (!(area() > 0.0)) throw ConfigError("zone " + id + ": polygon has zero area");
    if (person_count < 0) throw ConfigError("zone " + id + ": negative person_count");
  }
};

/// Regular cell-centred grid, cells indexed bottom row first:
/// index = row * ncols + col, centre = origin + ((col + .5), (row + .5)) * cell_size.
struct GridSpec {
  double x_origin = 0.0;
  double y_origin = 0.0;
  double cell_size = 1.0;
  std::size_t ncols = 0;
  std::size_t nrows = 0;

  std::size_t size() const { return ncols * nrows; }
  double cell_area() const { return cell_size * cell_size; }
  double x_max() const { return x_origin + static_cast<double>(ncols) * cell_size; }
  double y_max() const { return y_origin + static_cast<double>(nrows) * cell_size; }
  std::size_t index(std::size_t col, std::size_t row) const { return row * ncols + col; }
  Vec2 center(std::size_t col, std::size_t row) const {
    return {x_origin + (static_cast<double>(col) + 0.5) * cell_size,
            y_origin + (static_cast<double>(row) + 0.5) * cell_size};
  }
  Vec2 center(std::size_t idx) const { return center(idx % ncols, idx / ncols); }
  bool contains(Vec2 p) const {
    return p.x >= x_origin && p.x <= x_max() && p.y >= y_origin && p.y <= y_max();
  }
  /// Cell containing p (clamped to the grid).
  std::size_t cell_of(Vec2 p) const {
    const auto clampi = [](double f, std::size_t n) {
      return static_cast<std::size_t>(std::clamp(std::floor(f), 0.0, static_cast<double>(n - 1)));
    };
    return index(clampi((p.x - x_origin) / cell_size, ncols),
                 clampi((p.y - y_origin) / cell_size, nrows));
  }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Per-cell density in 1/m^2 on a GridSpec.
struct DensityGrid {
  GridSpec grid;
  std::vector<double> values;

  double cell_area() const { return grid.cell_area(); }
  double integral() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.cell_area();
  }
};

/// Flight domain: axis-aligned rectangle around the zones, widened by `offset`
/// and rounded up to whole cells.
struct SearchDomain {
  std::vector<Zone> zones;
  double offset = 0.0;
  double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;
  GridSpec grid;

  bool contains(Vec2 p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
  Vec2 clamp(Vec2 p) const { return {std::clamp(p.x, x_min, x_max), std::clamp(p.y, y_min, y_max)}; }
  Polygon boundary() const { return {{x_min, y_min}, {x_max, y_min}, {x_max, y_max}, {x_min, y_max}}; }
};

inline SearchDomain build_flight_domain(const std::vector<Zone>& zones, double offset,
                                        double cell_size = 10.0) {
  if (zones.empty()) throw ConfigError("flight domain: empty zone list");
  if (!(offset >= 0.0)) throw ConfigError("flight domain: offset must be >= 0");
  if (!(cell_size > 0.0)) throw ConfigError("flight domain: cell_size must be > 0");
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
  double hi_x = -lo_x, hi_y = -lo_x;
  for (const auto& z : zones) {
    z.validate();
    for (Vec2 v : z.polygon) {
      lo_x = std::min(lo_x, v.x), lo_y = std::min(lo_y, v.y);
      hi_x = std::max(hi_x, v.x), hi_y = std::max(hi_y, v.y);
    }
  }
  SearchDomain d;
  d.zones = zones;
  d.offset = offset;
  d.x_min = lo_x - offset;
  d.y_min = lo_y - offset;
  const auto cells = [&](double extent) {
    return static_cast<std::size_t>(std::max(1.0, std::ceil(extent / cell_size - 1e-9)));
  };
  d.grid = GridSpec{d.x_min, d.y_min, cell_size, cells(hi_x + offset - d.x_min),
                    cells(hi_y + offset - d.y_min)};
  d.x_max = d.grid.x_max();
  d.y_max = d.grid.y_max();
  return d;
}

/// Zone index of every cell whose centre lies in a zone, -1 elsewhere.
inline std::vector<int> zone_membership(const std::vector<Zone>& zones, const GridSpec& grid) {
  std::vector<int> owner(grid.size(), -1);
  for (std::size_t zi = 0; zi < zones.size(); ++zi) {
    const auto& poly = zones[zi].polygon;
    double lo_x = poly[0].x, hi_x = lo_x, lo_y = poly[0].y, hi_y = lo_y;
    for (Vec2 v : poly) {
      lo_x = std::min(lo_x, v.x), hi_x = std::max(hi_x, v.x);
      lo_y = std::min(lo_y, v.y), hi_y = std::max(hi_y, v.y);
    }
    for (std::size_t r = 0; r < grid.nrows; ++r) {
      for (std::size_t c = 0; c < grid.ncols; ++c) {
        const Vec2 p = grid.center(c, r);
        if (p.x < lo_x || p.x > hi_x || p.y < lo_y || p.y > hi_y) continue;
        if (!point_in_polygon(poly, p)) continue;
        int& o = owner[grid.index(c, r)];
        if (o >= 0)
          throw ConfigError("zones " + zones[static_cast<std::size_t>(o)].id + " and " +
                            zones[zi].id + " overlap");
        o = static_cast<int>(zi);
      }
    }
  }
  return owner;
}

/// m0: uniform inside each zone, (person_count / total_people) / discretised
/// zone area, zero elsewhere. Integrates to exactly 1 on the grid.
inline DensityGrid build_initial_density(const std::vector<Zone>& zones, const GridSpec& grid,
                                         int total_people) {
  int sum = 0;
  for (const auto& z : zones) {
    z.validate();
    sum += z.person_count;
  }
  if (total_people <= 0 || total_people != sum)
    throw ConfigError("initial density: total_people must equal the sum of zone person counts");
  const auto owner = zone_membership(zones, grid);
  std::vector<std::size_t> counts(zones.size(), 0);
  for (int o : owner)
    if (o >= 0) ++counts[static_cast<std::size_t>(o)];
  std::vector<double> level(zones.size(), 0.0);
  for (std::size_t zi = 0; zi < zones.size(); ++zi) {
    if (counts[zi] == 0)
      throw ConfigError("initial density: zone " + zones[zi].id + " covers no cell centre");
    const double discrete_area = static_cast<double>(counts[zi]) * grid.cell_area();
    level[zi] = (static_cast<double>(zones[zi].person_count) / total_people) / discrete_area;
  }
  DensityGrid m0{grid, std::vector<double>(grid.size(), 0.0)};
  for (std::size_t i = 0; i < owner.size(); ++i)
    if (owner[i] >= 0) m0.values[i] = level[static_cast<std::size_t>(owner[i])];
  return m0;
}

}  // namespace sarsim
