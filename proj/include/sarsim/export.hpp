#pragma once

// Writers for run outputs: CSV logs and curves, PGM field snapshots with a
// text sidecar, and a JSON run summary. Numbers are printed in shortest
// round-trip form so reruns are byte-identical.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sarsim/error.hpp"
#include "sarsim/hedac.hpp"
#include "sarsim/mission.hpp"
#include "sarsim/tiling.hpp"

namespace sarsim {

inline std::string fmt(double v) {
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace detail

inline void write_flight_log_csv(const std::filesystem::path& path, const FlightLog& log) {
  auto out = detail::open_out(path);
  out << "t,mission_t,x,y,z,heading,v_h,v_z,rho,phi,omega,eta,ground,clearance,floor_ok,velocity_ok,"
         "acceleration_ok\n";
  for (const auto& s : log.samples) {
    out << fmt(s.t) << ',' << fmt(s.mission_t) << ',' << fmt(s.x) << ',' << fmt(s.y) << ',' << fmt(s.z) << ','
        << fmt(s.heading) << ',' << fmt(s.v_h) << ',' << fmt(s.v_z) << ',' << fmt(s.rho) << ',' << fmt(s.phi)
        << ',' << fmt(s.omega) << ',' << fmt(s.eta) << ',' << fmt(s.ground) << ',' << fmt(s.z - s.ground) << ','
        << s.floor_ok << ',' << s.velocity_ok << ',' << s.acceleration_ok << '\n';
  }
}

inline void write_eta_csv(const std::filesystem::path& path, const std::vector<double>& t,
                          const std::vector<double>& eta) {
  auto out = detail::open_out(path);
  out << "t,eta\n";
  for (std::size_t i = 0; i < t.size(); ++i) out << fmt(t[i]) << ',' << fmt(eta[i]) << '\n';
}

/// 8-bit binary PGM, min-max scaled, top row first; the sidecar records the
/// grid geometry and the scaling so values can be recovered to 1/255.
inline void write_field_pgm(const std::filesystem::path& path, const GridSpec& g,
                            const std::vector<double>& values, const std::string& name) {
  double lo = values.empty() ? 0.0 : values.front(), hi = lo;
  for (double v : values) lo = std::min(lo, v), hi = std::max(hi, v);
  const double span = hi - lo;
  {
    auto out = detail::open_out(path, true);
    out << "P5\n" << g.ncols << ' ' << g.nrows << "\n255\n";
    std::vector<unsigned char> row(g.ncols);
    for (std::size_t r = g.nrows; r-- > 0;) {
      for (std::size_t c = 0; c < g.ncols; ++c) {
        const double v = values[g.index(c, r)];
        row[c] = static_cast<unsigned char>(span > 0.0 ? std::lround(255.0 * (v - lo) / span) : 0);
      }
      out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
  }
  auto side = detail::open_out(std::filesystem::path(path).replace_extension(".txt"));
  side << "field " << name << "\nncols " << g.ncols << "\nnrows " << g.nrows << "\nx_origin " << fmt(g.x_origin)
       << "\ny_origin " << fmt(g.y_origin) << "\ncell_size " << fmt(g.cell_size) << "\nmin " << fmt(lo)
       << "\nmax " << fmt(hi) << "\nrow_order top_first\n";
}

/// Full-precision field as CSV of cell centres.
inline void write_field_csv(const std::filesystem::path& path, const GridSpec& g,
                            const std::vector<double>& values) {
  auto out = detail::open_out(path);
  out << "x,y,value\n";
  for (std::size_t r = 0; r < g.nrows; ++r)
    for (std::size_t c = 0; c < g.ncols; ++c) {
      const Vec2 p = g.center(c, r);
      out << fmt(p.x) << ',' << fmt(p.y) << ',' << fmt(values[g.index(c, r)]) << '\n';
    }
}

inline void write_fields(const std::filesystem::path& dir, const FieldState& f) {
  const std::pair<const char*, const std::vector<double>*> fields[] = {{"c", &f.c}, {"m", &f.m}, {"u", &f.u}};
  for (const auto& [name, vals] : fields) {
    write_field_pgm(dir / (std::string("field_") + name + ".pgm"), f.grid, *vals, name);
    write_field_csv(dir / (std::string("field_") + name + ".csv"), f.grid, *vals);
  }
}

inline void write_validation_csv(const std::filesystem::path& path, const ValidationReport& v) {
  auto out = detail::open_out(path);
  out << "t,eta,empirical,band_lo,band_hi,within\n";
  for (const auto& r : v.rows)
    out << fmt(r.t) << ',' << fmt(r.eta) << ',' << fmt(r.empirical) << ',' << fmt(r.band_lo) << ','
        << fmt(r.band_hi) << ',' << r.within << '\n';
}

inline void write_targets_csv(const std::filesystem::path& path, const std::vector<SyntheticTarget>& targets) {
  auto out = detail::open_out(path);
  out << "index,x,y,threshold,detection_time\n";
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const auto& t = targets[j];
    out << j << ',' << fmt(t.position.x) << ',' << fmt(t.position.y) << ',' << fmt(t.threshold) << ','
        << (t.detected() ? fmt(t.detection_time) : std::string()) << '\n';
  }
}

inline void write_recall_csv(const std::filesystem::path& path, const std::vector<RecallRow>& rows) {
  auto out = detail::open_out(path);
  out << "gsd_low,gsd_high,recall,matched,support\n";
  for (const auto& r : rows)
    out << fmt(r.low) << ',' << fmt(r.high) << ',' << fmt(r.recall()) << ',' << r.matched << ',' << r.support
        << '\n';
}

}  // namespace sarsim
