#ifndef ECHONAV_NAV_TRAJECTORY_HPP_
#define ECHONAV_NAV_TRAJECTORY_HPP_

// Top-down trajectory maps: occupancy grid, start and goal markers, and the
// agent path fading from dark to light blue over time. Raster output goes
// through libpng, vector output is plain SVG.

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "echonav/scene.hpp"

namespace echonav::nav {

using Rgb8 = std::array<std::uint8_t, 3>;

struct MapStyle {
  int pixels_per_cell = 16;
  Rgb8 free{245, 245, 245};
  Rgb8 obstacle{90, 90, 90};
  Rgb8 path_start{8, 48, 107};     // dark blue
  Rgb8 path_end{158, 202, 225};    // light blue
  Rgb8 start_marker{30, 160, 60};
  Rgb8 goal_marker{220, 30, 30};
  double marker_radius_cells = 0.3;
  double path_width_px = 3.0;

  bool operator==(const MapStyle&) const = default;
};

struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Rgb8 at(int x, int y) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  void set(int x, int y, Rgb8 c) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    rgb[i] = c[0];
    rgb[i + 1] = c[1];
    rgb[i + 2] = c[2];
  }
};

/// One path segment per action: from the pose before to the pose after it.
/// Turns and collisions give zero-length segments.
struct PathSegment {
  Vec3 from;
  Vec3 to;
  Rgb8 color;
};

struct TrajectoryMap {
  int cols = 0;
  int rows = 0;
  std::vector<std::uint8_t> occupied;  // row-major cells
  Vec3 start;
  Vec3 goal;
  std::vector<PathSegment> segments;
  double cell_size = 0.5;
};

inline Rgb8 lerp_color(Rgb8 a, Rgb8 b, double t) {
  Rgb8 c;
  for (int k = 0; k < 3; ++k) c[k] = static_cast<std::uint8_t>(std::lround(a[k] + t * (b[k] - a[k])));
  return c;
}

/// `path` holds the poses after each action; the first segment starts at
/// `start`. An empty path leaves only the markers.
inline TrajectoryMap trajectory_map(const scene::Scene& s, const scene::Pose& start,
                                    const std::vector<scene::Pose>& path, const Vec3& goal,
                                    const MapStyle& style = {}) {
  scene::validate_pose(s, start);
  TrajectoryMap m;
  m.cols = s.grid_cols();
  m.rows = s.grid_rows();
  m.cell_size = s.cell_size;
  m.start = start.position;
  m.goal = goal;
  m.occupied.resize(static_cast<std::size_t>(m.cols) * m.rows);
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) m.occupied[static_cast<std::size_t>(r) * m.cols + c] = s.cell_free(c, r) ? 0 : 1;
  }
  Vec3 prev = start.position;
  const std::size_t n = path.size();
  for (std::size_t i = 0; i < n; ++i) {
    scene::validate_pose(s, path[i]);
    const double t = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    m.segments.push_back({prev, path[i].position, lerp_color(style.path_start, style.path_end, t)});
    prev = path[i].position;
  }
  return m;
}

/// Image coordinates: x along +x, y flipped so +y points up.
inline std::pair<double, double> map_pixel(const TrajectoryMap& m, const Vec3& p, int ppc) {
  const double scale = ppc / m.cell_size;
  return {p.x * scale, m.rows * ppc - p.y * scale};
}

inline Raster rasterize(const TrajectoryMap& m, const MapStyle& style = {}) {
  const int ppc = style.pixels_per_cell;
  if (ppc < 1) throw std::invalid_argument("pixels_per_cell must be positive");
  Raster img{m.cols * ppc, m.rows * ppc, {}};
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int y = 0; y < img.height; ++y) {
    const int row = m.rows - 1 - y / ppc;
    for (int x = 0; x < img.width; ++x) {
      img.set(x, y, m.occupied[static_cast<std::size_t>(row) * m.cols + x / ppc] ? style.obstacle : style.free);
    }
  }
  auto disc = [&](double cx, double cy, double radius, Rgb8 color) {
    for (int y = static_cast<int>(std::floor(cy - radius)); y <= static_cast<int>(std::ceil(cy + radius)); ++y) {
      for (int x = static_cast<int>(std::floor(cx - radius)); x <= static_cast<int>(std::ceil(cx + radius)); ++x) {
        if (std::hypot(x + 0.5 - cx, y + 0.5 - cy) <= radius) img.set(x, y, color);
      }
    }
  };
  const double half = style.path_width_px / 2.0;
  for (const auto& seg : m.segments) {
    const auto [x0, y0] = map_pixel(m, seg.from, ppc);
    const auto [x1, y1] = map_pixel(m, seg.to, ppc);
    const int steps = std::max(1, static_cast<int>(std::ceil(std::hypot(x1 - x0, y1 - y0))));
    for (int k = 0; k <= steps; ++k) {
      const double t = static_cast<double>(k) / steps;
      disc(x0 + t * (x1 - x0), y0 + t * (y1 - y0), half, seg.color);
    }
  }
  const double radius = style.marker_radius_cells * ppc;
  const auto [sx, sy] = map_pixel(m, m.start, ppc);
  disc(sx, sy, radius, style.start_marker);
  const auto [gx, gy] = map_pixel(m, m.goal, ppc);
  disc(gx, gy, radius, style.goal_marker);
  return img;
}

inline std::string hex_color(Rgb8 c) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

inline std::string trajectory_svg(const TrajectoryMap& m, const MapStyle& style = {}) {
  const int ppc = style.pixels_per_cell;
  const int w = m.cols * ppc, h = m.rows * ppc;
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" viewBox=\"0 0 %d %d\">\n", w, h,
                w, h);
  out += buf;
  std::snprintf(buf, sizeof(buf), "<rect width=\"%d\" height=\"%d\" fill=\"%s\"/>\n", w, h,
                hex_color(style.free).c_str());
  out += buf;
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      if (!m.occupied[static_cast<std::size_t>(r) * m.cols + c]) continue;
      std::snprintf(buf, sizeof(buf), "<rect class=\"obstacle\" x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"%s\"/>\n",
                    c * ppc, (m.rows - 1 - r) * ppc, ppc, ppc, hex_color(style.obstacle).c_str());
      out += buf;
    }
  }
  for (const auto& seg : m.segments) {
    const auto [x0, y0] = map_pixel(m, seg.from, ppc);
    const auto [x1, y1] = map_pixel(m, seg.to, ppc);
    std::snprintf(buf, sizeof(buf),
                  "<line class=\"path\" x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\" "
                  "stroke-width=\"%.1f\" stroke-linecap=\"round\"/>\n",
                  x0, y0, x1, y1, hex_color(seg.color).c_str(), style.path_width_px);
    out += buf;
  }
  const double radius = style.marker_radius_cells * ppc;
  const auto [sx, sy] = map_pixel(m, m.start, ppc);
  std::snprintf(buf, sizeof(buf), "<circle class=\"start\" cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"%s\"/>\n", sx, sy,
                radius, hex_color(style.start_marker).c_str());
  out += buf;
  const auto [gx, gy] = map_pixel(m, m.goal, ppc);
  std::snprintf(buf, sizeof(buf), "<circle class=\"goal\" cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"%s\"/>\n", gx, gy,
                radius, hex_color(style.goal_marker).c_str());
  out += buf;
  out += "</svg>\n";
  return out;
}

inline void write_png(const std::filesystem::path& path, const Raster& img) {
  if (img.width < 1 || img.height < 1) throw std::invalid_argument("empty raster");
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
    throw std::runtime_error("PNG encoding failed for " + path.string());
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, img.rgb.data() + 3 * static_cast<std::size_t>(y) * img.width);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(f) != 0) throw std::runtime_error("cannot write " + path.string());
}

/// Writes `<stem>.png` and `<stem>.svg`.
inline void render_trajectory_map(const std::filesystem::path& stem, const scene::Scene& s, const scene::Pose& start,
                                  const std::vector<scene::Pose>& path, const Vec3& goal, const MapStyle& style = {}) {
  const TrajectoryMap m = trajectory_map(s, start, path, goal, style);
  write_png(std::filesystem::path(stem).replace_extension(".png"), rasterize(m, style));
  std::FILE* f = std::fopen(std::filesystem::path(stem).replace_extension(".svg").string().c_str(), "wb");
  if (!f) throw std::runtime_error("cannot open SVG for " + stem.string());
  const std::string svg = trajectory_svg(m, style);
  const bool ok = std::fwrite(svg.data(), 1, svg.size(), f) == svg.size();
  if (std::fclose(f) != 0 || !ok) throw std::runtime_error("cannot write SVG for " + stem.string());
}

}  // namespace echonav::nav

#endif  // ECHONAV_NAV_TRAJECTORY_HPP_
