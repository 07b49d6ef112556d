#pragma once

// Dataset preparation geometry: overlapping square tiles, label remapping,
// GSD binning and the recall-per-GSD evaluator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "sarsim/error.hpp"
#include "sarsim/sensing.hpp"
#include "sarsim/terrain.hpp"

namespace sarsim {

struct ImageMeta {
  std::string id;
  int width = 0;
  int height = 0;
  std::string camera;
  double relative_height = 0.0;
};

struct TileRect {
  int row = 0;
  int col = 0;
  int x0 = 0;
  int y0 = 0;
  int size = 512;

  std::string name(const std::string& image_id) const {
    return image_id + "_r" + std::to_string(row) + "_c" + std::to_string(col);
  }
};

struct TilePlan {
  int ncols = 0;
  int nrows = 0;
  std::vector<TileRect> tiles;  // row-major
};

/// Tile offsets along one axis: the fewest tiles whose pairwise overlap is at
/// least `min_overlap`, spread evenly from 0 to extent - tile.
inline std::vector<int> tile_offsets(int extent, int tile, int min_overlap) {
  if (tile <= 0 || min_overlap < 0 || min_overlap >= tile)
    throw ConfigError("tiling: need 0 <= min_overlap < tile_size");
  if (extent < tile)
    throw ConfigError("tiling: image extent " + std::to_string(extent) + " px is smaller than the tile size");
  const long long stride = tile - min_overlap;
  const long long n = 1 + (extent - tile + stride - 1) / stride;
  std::vector<int> offsets(static_cast<std::size_t>(n), 0);
  const long long span = extent - tile;
  for (long long k = 1; k < n; ++k)  // round(k * span / (n - 1)), half up
    offsets[static_cast<std::size_t>(k)] = static_cast<int>((2 * k * span + (n - 1)) / (2 * (n - 1)));
  return offsets;
}

inline TilePlan plan_tiles(int width, int height, int tile_size = 512, int min_overlap = 100) {
  const auto xs = tile_offsets(width, tile_size, min_overlap);
  const auto ys = tile_offsets(height, tile_size, min_overlap);
  TilePlan plan;
  plan.ncols = static_cast<int>(xs.size());
  plan.nrows = static_cast<int>(ys.size());
  for (int r = 0; r < plan.nrows; ++r)
    for (int c = 0; c < plan.ncols; ++c)
      plan.tiles.push_back({r, c, xs[static_cast<std::size_t>(c)], ys[static_cast<std::size_t>(r)], tile_size});
  return plan;
}

/// Normalised box: centre and size as fractions of the image (or tile).
struct BoxLabel {
  int cls = 0;
  double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;

  friend bool operator==(const BoxLabel&, const BoxLabel&) = default;
};

struct Detection {
  BoxLabel box;
  double confidence = 0.0;
};

/// Intersection over union of two normalised boxes; 0 if either has no area.
inline double iou(const BoxLabel& a, const BoxLabel& b) {
  if (a.w <= 0.0 || a.h <= 0.0 || b.w <= 0.0 || b.h <= 0.0) return 0.0;
  const double ix = std::min(a.cx + a.w / 2, b.cx + b.w / 2) - std::max(a.cx - a.w / 2, b.cx - b.w / 2);
  const double iy = std::min(a.cy + a.h / 2, b.cy + b.h / 2) - std::max(a.cy - a.h / 2, b.cy - b.h / 2);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.w * a.h + b.w * b.h - inter);
}

/// Clips image-level labels to a tile. A box survives when at least
/// `keep_fraction` of its area falls inside the tile; survivors are
/// re-normalised to tile coordinates.
inline std::vector<BoxLabel> remap_labels(const std::vector<BoxLabel>& labels, int image_width,
                                          int image_height, const TileRect& tile,
                                          double keep_fraction = 0.3) {
  std::vector<BoxLabel> out;
  const double W = image_width, H = image_height, S = tile.size;
  for (const auto& b : labels) {
    const double x0 = (b.cx - b.w / 2) * W, x1 = (b.cx + b.w / 2) * W;
    const double y0 = (b.cy - b.h / 2) * H, y1 = (b.cy + b.h / 2) * H;
    const double area = (x1 - x0) * (y1 - y0);
    if (area <= 0.0) continue;
    const double cx0 = std::max(x0, static_cast<double>(tile.x0));
    const double cx1 = std::min(x1, static_cast<double>(tile.x0) + S);
    const double cy0 = std::max(y0, static_cast<double>(tile.y0));
    const double cy1 = std::min(y1, static_cast<double>(tile.y0) + S);
    if (cx1 <= cx0 || cy1 <= cy0) continue;
    if ((cx1 - cx0) * (cy1 - cy0) / area < keep_fraction) continue;
    out.push_back({b.cls, ((cx0 + cx1) / 2 - tile.x0) / S, ((cy0 + cy1) / 2 - tile.y0) / S,
                   (cx1 - cx0) / S, (cy1 - cy0) / S});
  }
  return out;
}

struct GsdBin {
  int index = 0;  // bin covers [index * width, (index + 1) * width)
  double low = 0.0;
  double high = 0.0;
  double gsd = 0.0;
};

inline GsdBin gsd_bin_of(double g, double bin_width = 0.5) {
  GsdBin b;
  b.gsd = g;
  b.index = static_cast<int>(std::floor(g / bin_width));
  b.low = b.index * bin_width;
  b.high = (b.index + 1) * bin_width;
  return b;
}

inline GsdBin gsd_bin(const ImageMeta& meta, double bin_width = 0.5) {
  const auto cam = cameras::by_name(meta.camera);
  if (!cam) throw ConfigError("gsd_bin: unknown camera '" + meta.camera + "' for image " + meta.id);
  return gsd_bin_of(gsd(*cam, meta.relative_height).horizontal, bin_width);
}

struct RecallRow {
  int bin = 0;
  double low = 0.0;
  double high = 0.0;
  std::size_t matched = 0;
  std::size_t support = 0;  // ground-truth boxes in the bin

  double recall() const { return support ? static_cast<double>(matched) / support : 0.0; }
};

/// Greedy matching of one image: detections with confidence >= conf_min in
/// descending confidence (ties by class then coordinates), each claiming the
/// unmatched same-class ground-truth box of highest IoU >= iou_min.
inline std::size_t match_image(const std::vector<BoxLabel>& truth, std::vector<Detection> dets,
                               double conf_min, double iou_min) {
  dets.erase(std::remove_if(dets.begin(), dets.end(),
                            [&](const Detection& d) { return d.confidence < conf_min; }),
             dets.end());
  std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    return std::tie(b.confidence, a.box.cls, a.box.cx, a.box.cy, a.box.w, a.box.h) <
           std::tie(a.confidence, b.box.cls, b.box.cx, b.box.cy, b.box.w, b.box.h);
  });
  std::vector<bool> used(truth.size(), false);
  std::size_t matched = 0;
  for (const auto& d : dets) {
    double best = -1.0;
    std::size_t best_i = truth.size();
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (used[i] || truth[i].cls != d.box.cls) continue;
      const double v = iou(truth[i], d.box);
      if (v >= iou_min && v > best) {
        best = v;
        best_i = i;
      }
    }
    if (best_i < truth.size()) {
      used[best_i] = true;
      ++matched;
    }
  }
  return matched;
}

/// Recall per GSD bin over a corpus. Bins without ground truth are omitted.
inline std::vector<RecallRow> recall_per_bin(const std::vector<ImageMeta>& metas,
                                             const std::map<std::string, std::vector<BoxLabel>>& truth,
                                             const std::map<std::string, std::vector<Detection>>& dets,
                                             double conf_min = 0.5, double iou_min = 0.7) {
  std::map<std::string, const ImageMeta*> by_id;
  for (const auto& m : metas) by_id[m.id] = &m;
  for (const auto& [id, _] : dets)
    if (!by_id.count(id)) throw ConfigError("recall: detections reference unknown image '" + id + "'");
  for (const auto& [id, _] : truth)
    if (!by_id.count(id)) throw ConfigError("recall: labels reference unknown image '" + id + "'");
  std::map<int, RecallRow> rows;
  for (const auto& m : metas) {
    auto it = truth.find(m.id);
    if (it == truth.end() || it->second.empty()) continue;
    const GsdBin bin = gsd_bin(m);
    auto& row = rows[bin.index];
    row.bin = bin.index;
    row.low = bin.low;
    row.high = bin.high;
    row.support += it->second.size();
    auto dit = dets.find(m.id);
    if (dit != dets.end()) row.matched += match_image(it->second, dit->second, conf_min, iou_min);
  }
  std::vector<RecallRow> out;
  for (auto& [_, r] : rows) out.push_back(r);
  return out;
}

/// `class cx cy w h [confidence]` per line.
inline std::vector<Detection> parse_labels(std::istream& in, bool with_confidence) {
  std::vector<Detection> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    const std::size_t want = with_confidence ? 6 : 5;
    if (toks.size() != want && !(with_confidence && toks.size() == 5))
      throw ParseError("labels: expected 'class cx cy w h" + std::string(with_confidence ? " confidence'" : "'"),
                       lineno);
    double vals[6] = {0, 0, 0, 0, 0, 1.0};
    for (std::size_t i = 0; i < toks.size(); ++i)
      if (!detail::parse_double(toks[i], vals[i])) throw ParseError("labels: non-numeric field", lineno);
    if (vals[0] != std::floor(vals[0]) || vals[0] < 0) throw ParseError("labels: class must be a non-negative integer", lineno);
    Detection d{{static_cast<int>(vals[0]), vals[1], vals[2], vals[3], vals[4]}, vals[5]};
    for (int i = 1; i <= 4; ++i)
      if (vals[i] < 0.0 || vals[i] > 1.0) throw ParseError("labels: coordinates must be normalised to [0, 1]", lineno);
    if (d.confidence < 0.0 || d.confidence > 1.0) throw ParseError("labels: confidence outside [0, 1]", lineno);
    out.push_back(d);
  }
  return out;
}

inline std::string format_label(const BoxLabel& b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f", b.cls, b.cx, b.cy, b.w, b.h);
  return buf;
}

}  // namespace sarsim
