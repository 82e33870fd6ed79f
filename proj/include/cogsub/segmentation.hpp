#pragma once

// Raster segmentation of a 2-D embedding: bin samples into a square pixel
// grid, close small gaps, and grow one region per marker by binary
// morphological reconstruction.

#include "cogsub/common.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cogsub {

struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> px;  // row-major, 0 or 1

  BinaryImage() = default;
  BinaryImage(int w, int h) : width(w), height(h), px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col);
  }
  bool at(int row, int col) const noexcept { return px[index(row, col)] != 0; }
  bool inside(int row, int col) const noexcept { return row >= 0 && row < height && col >= 0 && col < width; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(px.begin(), px.end(), 1)); }
};

struct RasterConfig {
  std::optional<int> resolution;  // unset: auto_resolution(n)
  double margin_frac = 0.02;
  int closing_radius = 2;
};

struct RasterGrid {
  int width = 0, height = 0;
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  BinaryImage mask;
  std::vector<int> count;                 // samples per pixel
  std::vector<std::size_t> pixel_of;      // per sample
  std::map<std::size_t, std::vector<std::size_t>> pixel_samples;  // occupied pixels only

  /// Pixel containing embedding point (x, y); nullopt outside the bounds.
  std::optional<std::pair<int, int>> pixel_at(double x, double y) const {
    if (!(x >= x_min && x <= x_max && y >= y_min && y <= y_max)) return std::nullopt;
    const int col = std::clamp(static_cast<int>(std::floor((x - x_min) / (x_max - x_min) * width)), 0, width - 1);
    const int row = std::clamp(static_cast<int>(std::floor((y_max - y) / (y_max - y_min) * height)), 0, height - 1);
    return std::make_pair(row, col);
  }
};

/// Disc offsets (dr, dc) with dr^2 + dc^2 <= r^2.
inline std::vector<std::pair<int, int>> disc_offsets(int radius) {
  std::vector<std::pair<int, int>> out;
  for (int dr = -radius; dr <= radius; ++dr)
    for (int dc = -radius; dc <= radius; ++dc)
      if (dr * dr + dc * dc <= radius * radius) out.emplace_back(dr, dc);
  return out;
}

inline BinaryImage dilate(const BinaryImage& in, int radius) {
  BinaryImage out(in.width, in.height);
  const auto disc = disc_offsets(radius);
  for (int r = 0; r < in.height; ++r)
    for (int c = 0; c < in.width; ++c) {
      if (!in.at(r, c)) continue;
      for (auto [dr, dc] : disc)
        if (in.inside(r + dr, c + dc)) out.px[out.index(r + dr, c + dc)] = 1;
    }
  return out;
}

/// Pixels outside the image count as foreground, so erosion does not eat
/// into shapes touching the border.
inline BinaryImage erode(const BinaryImage& in, int radius) {
  BinaryImage out(in.width, in.height);
  const auto disc = disc_offsets(radius);
  for (int r = 0; r < in.height; ++r)
    for (int c = 0; c < in.width; ++c) {
      bool keep = true;
      for (auto [dr, dc] : disc)
        if (in.inside(r + dr, c + dc) && !in.at(r + dr, c + dc)) {
          keep = false;
          break;
        }
      out.px[out.index(r, c)] = keep;
    }
  return out;
}

inline BinaryImage close_image(const BinaryImage& in, int radius) {
  if (radius <= 0) return in;
  return erode(dilate(in, radius), radius);
}

/// Side length that keeps a t-SNE embedding of n points contiguous after a
/// radius-2 closing: about 1.5 pixels per sqrt(n), clamped to [16, 512].
/// Point spacing in a t-SNE map grows roughly like sqrt(n), so a fixed
/// resolution either merges everything (small n) or shatters it (large n).
inline int auto_resolution(std::size_t n) {
  const double side = 1.5 * std::sqrt(static_cast<double>(n));
  return std::clamp(static_cast<int>(std::lround(side)), 16, 512);
}

inline RasterGrid rasterize(const Matrix& coords, const RasterConfig& cfg) {
  if (coords.rows() < 1 || coords.cols() != 2) throw Error(ErrorCode::kShape, "rasterize needs an n x 2 embedding");
  const int resolution = cfg.resolution.value_or(auto_resolution(static_cast<std::size_t>(coords.rows())));
  if (resolution < 1) throw Error(ErrorCode::kConfig, "raster resolution must be positive");
  if (!(cfg.margin_frac >= 0) || cfg.closing_radius < 0)
    throw Error(ErrorCode::kConfig, "margin and closing radius must be non-negative");
  if (!coords.allFinite()) throw Error(ErrorCode::kShape, "embedding has non-finite coordinates");
  RasterGrid g;
  g.width = g.height = resolution;
  auto bounds = [&](Eigen::Index axis, double& lo, double& hi) {
    lo = coords.col(axis).minCoeff();
    hi = coords.col(axis).maxCoeff();
    const double span = hi - lo;
    if (span > 0) {
      lo -= cfg.margin_frac * span;
      hi += cfg.margin_frac * span;
    } else {
      lo -= 0.5;
      hi += 0.5;
    }
  };
  bounds(0, g.x_min, g.x_max);
  bounds(1, g.y_min, g.y_max);

  g.mask = BinaryImage(g.width, g.height);
  g.count.assign(g.mask.px.size(), 0);
  g.pixel_of.resize(static_cast<std::size_t>(coords.rows()));
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    const auto [row, col] = *g.pixel_at(coords(i, 0), coords(i, 1));
    const std::size_t p = g.mask.index(row, col);
    g.pixel_of[static_cast<std::size_t>(i)] = p;
    g.count[p] += 1;
    g.pixel_samples[p].push_back(static_cast<std::size_t>(i));
  }
  for (std::size_t p = 0; p < g.count.size(); ++p) g.mask.px[p] = g.count[p] > 0;
  if (cfg.closing_radius > 0) {
    BinaryImage closed = close_image(g.mask, cfg.closing_radius);
    for (std::size_t p = 0; p < closed.px.size(); ++p) g.mask.px[p] = closed.px[p] || g.mask.px[p];
  }
  return g;
}

enum class MarkerSource { kManual, kAuto };

struct Marker {
  int row = 0;
  int col = 0;
  MarkerSource source = MarkerSource::kManual;
};

/// Converts a marker given in embedding coordinates to its pixel.
inline Marker marker_from_embedding(const RasterGrid& grid, double x, double y) {
  auto px = grid.pixel_at(x, y);
  if (!px)
    throw Error(ErrorCode::kInvalidMarker, "marker (" + std::to_string(x) + ", " + std::to_string(y) +
                                               ") lies outside the embedding bounds");
  return {px->first, px->second, MarkerSource::kManual};
}

namespace detail {

// Neighbours of (r, c) that precede it in raster order (for connectivity 8:
// W, NW, N, NE; for 4: W, N). The anti-raster set is the mirror image.
inline std::vector<std::pair<int, int>> causal_neighbors(int connectivity) {
  if (connectivity == 4) return {{0, -1}, {-1, 0}};
  return {{0, -1}, {-1, -1}, {-1, 0}, {-1, 1}};
}

inline std::vector<std::pair<int, int>> all_neighbors(int connectivity) {
  if (connectivity == 4) return {{0, -1}, {-1, 0}, {0, 1}, {1, 0}};
  return {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}};
}

}  // namespace detail

/// Binary reconstruction by dilation of `seeds` under `mask`: a raster and an
/// anti-raster propagation sweep followed by FIFO propagation from the pixels
/// that can still grow. Seeds outside the mask are ignored.
inline BinaryImage reconstruct_image(const BinaryImage& seeds, const BinaryImage& mask, int connectivity = 8) {
  if (connectivity != 4 && connectivity != 8) throw Error(ErrorCode::kConfig, "connectivity must be 4 or 8");
  if (seeds.width != mask.width || seeds.height != mask.height)
    throw Error(ErrorCode::kShape, "seed and mask images differ in size");
  BinaryImage out(mask.width, mask.height);
  for (std::size_t p = 0; p < out.px.size(); ++p) out.px[p] = seeds.px[p] && mask.px[p];
  const auto fwd = detail::causal_neighbors(connectivity);
  const int w = mask.width, h = mask.height;

  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t p = out.index(r, c);
      if (out.px[p] || !mask.px[p]) continue;
      for (auto [dr, dc] : fwd)
        if (out.inside(r + dr, c + dc) && out.at(r + dr, c + dc)) {
          out.px[p] = 1;
          break;
        }
    }

  std::deque<std::pair<int, int>> fifo;
  for (int r = h - 1; r >= 0; --r)
    for (int c = w - 1; c >= 0; --c) {
      const std::size_t p = out.index(r, c);
      if (!out.px[p] && mask.px[p]) {
        for (auto [dr, dc] : fwd)
          if (out.inside(r - dr, c - dc) && out.at(r - dr, c - dc)) {
            out.px[p] = 1;
            break;
          }
      }
      if (!out.px[p]) continue;
      for (auto [dr, dc] : fwd) {
        const int rr = r - dr, cc = c - dc;
        if (out.inside(rr, cc) && !out.at(rr, cc) && mask.at(rr, cc)) {
          fifo.emplace_back(r, c);
          break;
        }
      }
    }

  const auto nbrs = detail::all_neighbors(connectivity);
  while (!fifo.empty()) {
    const auto [r, c] = fifo.front();
    fifo.pop_front();
    for (auto [dr, dc] : nbrs) {
      const int rr = r + dr, cc = c + dc;
      if (!out.inside(rr, cc)) continue;
      const std::size_t q = out.index(rr, cc);
      if (!out.px[q] && mask.px[q]) {
        out.px[q] = 1;
        fifo.emplace_back(rr, cc);
      }
    }
  }
  return out;
}

/// Region grown from one marker: the connected component of the mask that
/// contains it, as sorted pixel indices.
inline std::vector<std::size_t> reconstruct(const Marker& marker, const BinaryImage& mask, int connectivity = 8) {
  if (!mask.inside(marker.row, marker.col))
    throw Error(ErrorCode::kInvalidMarker, "marker pixel (" + std::to_string(marker.row) + ", " +
                                               std::to_string(marker.col) + ") is outside the grid");
  if (!mask.at(marker.row, marker.col))
    throw Error(ErrorCode::kInvalidMarker, "marker pixel (" + std::to_string(marker.row) + ", " +
                                               std::to_string(marker.col) + ") lies on background");
  BinaryImage seeds(mask.width, mask.height);
  seeds.px[seeds.index(marker.row, marker.col)] = 1;
  const BinaryImage grown = reconstruct_image(seeds, mask, connectivity);
  std::vector<std::size_t> region;
  for (std::size_t p = 0; p < grown.px.size(); ++p)
    if (grown.px[p]) region.push_back(p);
  return region;
}

inline std::vector<std::size_t> reconstruct(const Marker& marker, const RasterGrid& grid, int connectivity = 8) {
  return reconstruct(marker, grid.mask, connectivity);
}

/// Component labels (0-based, raster order of first pixel); -1 for background.
inline std::vector<int> label_components(const BinaryImage& mask, int connectivity = 8) {
  std::vector<int> label(mask.px.size(), -1);
  const auto nbrs = detail::all_neighbors(connectivity);
  int next = 0;
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c) {
      const std::size_t p = mask.index(r, c);
      if (!mask.px[p] || label[p] >= 0) continue;
      label[p] = next;
      stack.emplace_back(r, c);
      while (!stack.empty()) {
        const auto [rr, cc] = stack.back();
        stack.pop_back();
        for (auto [dr, dc] : nbrs) {
          if (!mask.inside(rr + dr, cc + dc)) continue;
          const std::size_t q = mask.index(rr + dr, cc + dc);
          if (mask.px[q] && label[q] < 0) {
            label[q] = next;
            stack.emplace_back(rr + dr, cc + dc);
          }
        }
      }
      ++next;
    }
  return label;
}

/// One marker per connected component, at its most populated pixel; ties go
/// to the smallest (row, col).
inline std::vector<Marker> auto_markers(const RasterGrid& grid, int connectivity = 8) {
  const auto label = label_components(grid.mask, connectivity);
  std::vector<std::size_t> best;
  for (std::size_t p = 0; p < label.size(); ++p) {
    if (label[p] < 0) continue;
    const auto k = static_cast<std::size_t>(label[p]);
    if (k >= best.size()) best.resize(k + 1, p);
    if (grid.count[p] > grid.count[best[k]]) best[k] = p;
  }
  std::vector<Marker> out;
  for (std::size_t p : best)
    out.push_back({static_cast<int>(p / static_cast<std::size_t>(grid.width)),
                   static_cast<int>(p % static_cast<std::size_t>(grid.width)), MarkerSource::kAuto});
  return out;
}

inline constexpr int kNoise = -1;

struct ClusterCensus {
  std::size_t cn = 0;
  std::size_t mci = 0;
  std::size_t total = 0;
};

struct ClusterAssignment {
  std::vector<int> cluster_of;  // kNoise for unassigned samples
  std::size_t n_clusters = 0;
  std::vector<ClusterCensus> census;

  std::size_t noise_count() const {
    return static_cast<std::size_t>(std::count(cluster_of.begin(), cluster_of.end(), kNoise));
  }
  std::vector<std::size_t> members(int cluster) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cluster_of.size(); ++i)
      if (cluster_of[i] == cluster) out.push_back(i);
    return out;
  }
};

inline std::size_t default_min_cluster_size(std::size_t n_samples) {
  return std::max<std::size_t>(10, static_cast<std::size_t>(std::ceil(0.005 * static_cast<double>(n_samples))));
}

/// Maps samples to the region containing their pixel. Regions with fewer than
/// min_cluster_size samples become noise; the rest are renumbered by
/// descending size (ties keep region order).
inline ClusterAssignment assign_clusters(const RasterGrid& grid, const std::vector<std::vector<std::size_t>>& regions,
                                         std::span<const Label> labels, std::size_t min_cluster_size) {
  if (labels.size() != grid.pixel_of.size()) throw Error(ErrorCode::kShape, "label count differs from sample count");
  std::vector<int> region_of(grid.mask.px.size(), -1);
  for (std::size_t r = 0; r < regions.size(); ++r)
    for (std::size_t p : regions[r]) {
      if (p >= region_of.size()) throw Error(ErrorCode::kShape, "region pixel outside the grid");
      if (region_of[p] >= 0 && region_of[p] != static_cast<int>(r))
        throw Error(ErrorCode::kInternalConsistency, "regions " + std::to_string(region_of[p]) + " and " +
                                                         std::to_string(r) + " overlap");
      region_of[p] = static_cast<int>(r);
    }
  const std::size_t n = labels.size();
  std::vector<int> raw(n, kNoise);
  std::vector<std::size_t> size(regions.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = region_of[grid.pixel_of[i]];
    if (raw[i] >= 0) ++size[static_cast<std::size_t>(raw[i])];
  }
  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < regions.size(); ++r)
    if (size[r] >= std::max<std::size_t>(min_cluster_size, 1)) kept.push_back(r);
  std::stable_sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) { return size[a] > size[b]; });
  std::vector<int> new_id(regions.size(), kNoise);
  for (std::size_t k = 0; k < kept.size(); ++k) new_id[kept[k]] = static_cast<int>(k);

  ClusterAssignment out;
  out.n_clusters = kept.size();
  out.census.resize(kept.size());
  out.cluster_of.assign(n, kNoise);
  for (std::size_t i = 0; i < n; ++i) {
    if (raw[i] < 0) continue;
    const int c = new_id[static_cast<std::size_t>(raw[i])];
    out.cluster_of[i] = c;
    if (c == kNoise) continue;
    auto& cen = out.census[static_cast<std::size_t>(c)];
    (labels[i] == Label::MCI ? cen.mci : cen.cn) += 1;
    cen.total += 1;
  }
  return out;
}

struct SegmentationConfig {
  RasterConfig raster;
  int connectivity = 8;
  std::size_t min_cluster_size = 0;  // 0 = max(10, 0.5% of n)
  std::vector<std::pair<double, double>> markers;  // embedding coordinates; empty = automatic
};

struct SegmentationResult {
  RasterGrid grid;
  std::vector<Marker> markers;
  std::vector<std::vector<std::size_t>> regions;
  ClusterAssignment assignment;
};

inline SegmentationResult segment(const Matrix& coords, std::span<const Label> labels, const SegmentationConfig& cfg) {
  SegmentationResult res;
  res.grid = rasterize(coords, cfg.raster);
  if (cfg.markers.empty()) {
    res.markers = auto_markers(res.grid, cfg.connectivity);
  } else {
    for (auto [x, y] : cfg.markers) res.markers.push_back(marker_from_embedding(res.grid, x, y));
  }
  res.regions.resize(res.markers.size());
  parallel_for(res.markers.size(), [&](std::size_t m) {
    res.regions[m] = reconstruct(res.markers[m], res.grid, cfg.connectivity);
  });
  // Two manual markers in one component grow the same region; keep the first.
  std::map<std::size_t, std::size_t> first_of;
  for (std::size_t m = 0; m < res.regions.size(); ++m) {
    auto [it, fresh] = first_of.emplace(res.regions[m].front(), m);
    if (!fresh) res.regions[m].clear();
  }
  const std::size_t min_size =
      cfg.min_cluster_size > 0 ? cfg.min_cluster_size : default_min_cluster_size(labels.size());
  res.assignment = assign_clusters(res.grid, res.regions, labels, min_size);
  return res;
}

/// Binary PGM (P5), foreground 255.
inline std::string to_pgm(const BinaryImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.px.size());
  for (auto v : img.px) out.push_back(static_cast<char>(v ? 255 : 0));
  return out;
}

/// Region label image: background 0, region k drawn at an evenly spaced grey level.
inline std::string regions_to_pgm(const RasterGrid& grid, const std::vector<std::vector<std::size_t>>& regions) {
  std::string out = "P5\n" + std::to_string(grid.width) + " " + std::to_string(grid.height) + "\n255\n";
  std::vector<std::uint8_t> px(grid.mask.px.size(), 0);
  const std::size_t k = std::max<std::size_t>(regions.size(), 1);
  for (std::size_t r = 0; r < regions.size(); ++r)
    for (std::size_t p : regions[r]) px[p] = static_cast<std::uint8_t>(255 - (r * 200) / k);
  for (auto v : px) out.push_back(static_cast<char>(v));
  return out;
}

}  // namespace cogsub
