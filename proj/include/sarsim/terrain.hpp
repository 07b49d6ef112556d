#pragma once

// Terrain elevation raster: ESRI ASCII grid ingestion, bilinear ground
// height, relative height and line-of-sight queries.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sarsim/error.hpp"
#include "sarsim/geometry.hpp"

namespace sarsim {

/// Ground elevations Z_T(x, y) on a regular raster in a local metric frame.
///
/// Values are cell-centred: cell (row r, col c) with r counted from the top
/// row has its centre at (x_origin + (c + 0.5) * cell_size,
/// y_origin + (nrows - r - 0.5) * cell_size). The grid is immutable after
/// construction.
class TerrainGrid {
 public:
  TerrainGrid(std::size_t ncols, std::size_t nrows, double x_origin, double y_origin,
              double cell_size, std::vector<double> elevations,
              double nodata_marker = -9999.0)
      : ncols_(ncols),
        nrows_(nrows),
        x_origin_(x_origin),
        y_origin_(y_origin),
        cell_size_(cell_size),
        nodata_(nodata_marker),
        elevations_(std::move(elevations)) {
    if (!(cell_size_ > 0.0) || !std::isfinite(cell_size_))
      throw ConfigError("terrain: cellsize must be positive");
    if (ncols_ < 2 || nrows_ < 2) throw ConfigError("terrain: grid needs at least 2x2 cells");
    if (elevations_.size() != ncols_ * nrows_)
      throw ConfigError("terrain: elevation count does not match ncols*nrows");
    for (double v : elevations_)
      if (!std::isfinite(v) && v != nodata_) throw ConfigError("terrain: non-finite elevation");
    min_elevation_ = extreme(false);
    max_elevation_ = extreme(true);
  }

  std::size_t ncols() const { return ncols_; }
  std::size_t nrows() const { return nrows_; }
  double x_origin() const { return x_origin_; }
  double y_origin() const { return y_origin_; }
  double cell_size() const { return cell_size_; }
  double nodata_marker() const { return nodata_; }
  double x_max() const { return x_origin_ + static_cast<double>(ncols_) * cell_size_; }
  double y_max() const { return y_origin_ + static_cast<double>(nrows_) * cell_size_; }

  /// Row-major, top row first (file order).
  const std::vector<double>& elevations() const { return elevations_; }
  double value(std::size_t row, std::size_t col) const { return elevations_[row * ncols_ + col]; }
  bool is_nodata(std::size_t row, std::size_t col) const { return value(row, col) == nodata_; }

  Vec2 cell_center(std::size_t row, std::size_t col) const {
    return {x_origin_ + (static_cast<double>(col) + 0.5) * cell_size_,
            y_origin_ + (static_cast<double>(nrows_ - row) - 0.5) * cell_size_};
  }

  bool contains(double x, double y) const {
    return x >= x_origin_ && x <= x_max() && y >= y_origin_ && y <= y_max();
  }

  /// Bilinear interpolation of the four surrounding cell centres.
  double elevation_at(double x, double y) const {
    if (!contains(x, y))
      throw DomainError("terrain: query (" + std::to_string(x) + ", " + std::to_string(y) +
                        ") outside grid extent");
    const double fx = std::clamp((x - x_origin_) / cell_size_ - 0.5, 0.0,
                                 static_cast<double>(ncols_ - 1));
    // fy counts rows upward from the bottom row.
    const double fy = std::clamp((y - y_origin_) / cell_size_ - 0.5, 0.0,
                                 static_cast<double>(nrows_ - 1));
    const std::size_t c0 = std::min(static_cast<std::size_t>(fx), ncols_ - 2);
    const std::size_t b0 = std::min(static_cast<std::size_t>(fy), nrows_ - 2);
    const double tx = fx - static_cast<double>(c0);
    const double ty = fy - static_cast<double>(b0);
    const std::size_t r0 = nrows_ - 1 - b0;  // lower row in file order
    const std::size_t r1 = r0 - 1;
    const double z00 = value(r0, c0), z10 = value(r0, c0 + 1);
    const double z01 = value(r1, c0), z11 = value(r1, c0 + 1);
    if (z00 == nodata_ || z10 == nodata_ || z01 == nodata_ || z11 == nodata_)
      throw DomainError("terrain: nodata cell in neighbourhood of (" + std::to_string(x) + ", " +
                        std::to_string(y) + ")");
    return (1.0 - ty) * ((1.0 - tx) * z00 + tx * z10) + ty * ((1.0 - tx) * z01 + tx * z11);
  }

  double elevation_at(Vec2 p) const { return elevation_at(p.x, p.y); }

  double relative_height(Vec3 pos) const { return pos.z - elevation_at(pos.x, pos.y); }

  /// True iff every sample strictly between `from` and `to` lies on or above
  /// the ground. Samples sit at fractions k/n of the segment with
  /// n = ceil(horizontal length / step), so the verdict is symmetric in the
  /// endpoints. `step <= 0` selects cell_size / 2.
  bool line_of_sight(Vec3 from, Vec3 to, double step = 0.0) const {
    if (step <= 0.0) step = 0.5 * cell_size_;
    if (!contains(from.x, from.y) || !contains(to.x, to.y))
      throw DomainError("terrain: line-of-sight endpoint outside grid extent");
    const double horizontal = std::hypot(to.x - from.x, to.y - from.y);
    const auto n = static_cast<long>(std::ceil(horizontal / step));
    for (long k = 1; k < n; ++k) {
      const double a = static_cast<double>(k) / static_cast<double>(n);
      const double b = static_cast<double>(n - k) / static_cast<double>(n);
      const double x = from.x * b + to.x * a;
      const double y = from.y * b + to.y * a;
      const double z = from.z * b + to.z * a;
      if (z < elevation_at(x, y)) return false;
    }
    return true;
  }

  /// Upper bound of elevation_at over the disc of radius `radius` around
  /// `center`, clipped to the grid (nodata cells ignored).
  double max_within(Vec2 center, double radius) const {
    const auto profile = max_within_profile(center, radius, radius > 0.0 ? radius : 1.0);
    return profile.back();
  }

  /// profile[k] bounds the terrain over the disc of radius k * dr around
  /// `center`, for k = 0 .. ceil(max_radius / dr). Non-decreasing in k.
  std::vector<double> max_within_profile(Vec2 center, double max_radius, double dr) const {
    const std::size_t nbins = static_cast<std::size_t>(std::ceil(max_radius / dr)) + 1;
    std::vector<double> profile(nbins, -std::numeric_limits<double>::infinity());
    // A bilinear patch is bounded by its corner centres, and every corner of a
    // patch touching the disc lies within radius + diagonal of the centre.
    const double diag = cell_size_ * std::numbers::sqrt2;
    const double reach = max_radius + diag;
    const long c_lo = std::max(0L, static_cast<long>(std::floor((center.x - reach - x_origin_) / cell_size_)));
    const long c_hi = std::min(static_cast<long>(ncols_) - 1,
                               static_cast<long>(std::ceil((center.x + reach - x_origin_) / cell_size_)));
    const long b_lo = std::max(0L, static_cast<long>(std::floor((center.y - reach - y_origin_) / cell_size_)));
    const long b_hi = std::min(static_cast<long>(nrows_) - 1,
                               static_cast<long>(std::ceil((center.y + reach - y_origin_) / cell_size_)));
    for (long b = b_lo; b <= b_hi; ++b) {
      const std::size_t row = nrows_ - 1 - static_cast<std::size_t>(b);
      for (long c = c_lo; c <= c_hi; ++c) {
        const double z = value(row, static_cast<std::size_t>(c));
        if (z == nodata_) continue;
        const Vec2 p = cell_center(row, static_cast<std::size_t>(c));
        const double d = std::max(0.0, norm(p - center) - diag);
        if (d > max_radius) continue;
        const auto k = static_cast<std::size_t>(std::ceil(d / dr));
        profile[std::min(k, nbins - 1)] = std::max(profile[std::min(k, nbins - 1)], z);
      }
    }
    for (std::size_t k = 1; k < nbins; ++k) profile[k] = std::max(profile[k], profile[k - 1]);
    return profile;
  }

  double min_elevation() const { return min_elevation_; }
  double max_elevation() const { return max_elevation_; }

  /// Header echo used as the load report.
  std::string report() const {
    std::ostringstream os;
    os << "ncols " << ncols_ << "\nnrows " << nrows_ << "\nxllcorner " << x_origin_
       << "\nyllcorner " << y_origin_ << "\ncellsize " << cell_size_ << "\nNODATA_value "
       << nodata_ << "\n";
    return os.str();
  }

 private:
  double extreme(bool want_max) const {
    double best = want_max ? -std::numeric_limits<double>::infinity()
                           : std::numeric_limits<double>::infinity();
    for (double v : elevations_) {
      if (v == nodata_) continue;
      best = want_max ? std::max(best, v) : std::min(best, v);
    }
    return best;
  }

  std::size_t ncols_;
  std::size_t nrows_;
  double x_origin_;
  double y_origin_;
  double cell_size_;
  double nodata_;
  std::vector<double> elevations_;
  double min_elevation_ = 0.0;
  double max_elevation_ = 0.0;
};

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

inline bool parse_double(std::string_view tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> toks;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) toks.push_back(line.substr(i, j - i));
    i = j;
  }
  return toks;
}

}  // namespace detail

/// Parses an ESRI ASCII grid: header lines `ncols`, `nrows`,
/// `xllcorner`|`xllcenter`, `yllcorner`|`yllcenter`, `cellsize`, optional
/// `NODATA_value`, then nrows lines of ncols values, top row first.
inline TerrainGrid parse_terrain(std::istream& in) {
  double ncols = -1, nrows = -1, xll = NAN, yll = NAN, cellsize = NAN, nodata = -9999.0;
  bool x_center = false, y_center = false;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> values;
  std::size_t rows_read = 0;
  bool header_done = false;

  while (std::getline(in, line)) {
    ++lineno;
    const auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    double v = 0.0;
    if (!header_done && !detail::parse_double(toks[0], v)) {
      if (toks.size() != 2) throw ParseError("terrain: malformed header line", lineno);
      const std::string key = detail::lower(toks[0]);
      if (!detail::parse_double(toks[1], v))
        throw ParseError("terrain: non-numeric header value for '" + key + "'", lineno);
      if (key == "ncols") ncols = v;
      else if (key == "nrows") nrows = v;
      else if (key == "xllcorner") xll = v;
      else if (key == "xllcenter") { xll = v; x_center = true; }
      else if (key == "yllcorner") yll = v;
      else if (key == "yllcenter") { yll = v; y_center = true; }
      else if (key == "cellsize") cellsize = v;
      else if (key == "nodata_value") nodata = v;
      else throw ParseError("terrain: unknown header key '" + key + "'", lineno);
      continue;
    }
    if (!header_done) {
      if (ncols < 2 || nrows < 2 || ncols != std::floor(ncols) || nrows != std::floor(nrows))
        throw ParseError("terrain: header needs integer ncols >= 2 and nrows >= 2", lineno);
      if (std::isnan(xll) || std::isnan(yll) || std::isnan(cellsize))
        throw ParseError("terrain: header missing xllcorner, yllcorner or cellsize", lineno);
      if (!(cellsize > 0.0)) throw ParseError("terrain: cellsize must be positive", lineno);
      if (x_center) xll -= 0.5 * cellsize;
      if (y_center) yll -= 0.5 * cellsize;
      values.reserve(static_cast<std::size_t>(ncols * nrows));
      header_done = true;
    }
    if (rows_read == static_cast<std::size_t>(nrows))
      throw ParseError("terrain: more than nrows data rows", lineno);
    if (toks.size() != static_cast<std::size_t>(ncols))
      throw ParseError("terrain: row " + std::to_string(rows_read + 1) + " has " +
                           std::to_string(toks.size()) + " values, expected " +
                           std::to_string(static_cast<std::size_t>(ncols)),
                       lineno);
    for (auto tok : toks) {
      if (!detail::parse_double(tok, v))
        throw ParseError("terrain: non-numeric cell '" + std::string(tok) + "' in row " +
                             std::to_string(rows_read + 1),
                         lineno);
      if (!std::isfinite(v) && v != nodata)
        throw ParseError("terrain: non-finite cell in row " + std::to_string(rows_read + 1), lineno);
      values.push_back(v);
    }
    ++rows_read;
  }
  if (!header_done) throw ParseError("terrain: no data rows", lineno);
  if (rows_read != static_cast<std::size_t>(nrows))
    throw ParseError("terrain: expected " + std::to_string(static_cast<std::size_t>(nrows)) +
                         " rows, found " + std::to_string(rows_read),
                     lineno);
  return TerrainGrid(static_cast<std::size_t>(ncols), static_cast<std::size_t>(nrows), xll, yll,
                     cellsize, std::move(values), nodata);
}

inline TerrainGrid load_terrain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("terrain: cannot open '" + path + "'");
  return parse_terrain(in);
}

}  // namespace sarsim
