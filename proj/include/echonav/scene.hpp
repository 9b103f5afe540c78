#ifndef ECHONAV_SCENE_HPP_
#define ECHONAV_SCENE_HPP_

// Procedural shoebox scenes, exact raycasting, field-of-view geometry and
// the navigable grid.
//
// Coordinates: x in [0, width], y in [0, depth], z in [0, height] (up).
// Heading 0 faces +x, heading 90 faces +y; turning left adds 90 degrees.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "echonav/common.hpp"
#include "echonav/io/float_array.hpp"

namespace echonav::scene {

struct Box {
  Vec3 min;
  Vec3 max;
  bool operator==(const Box&) const = default;
};

/// Room boundary surfaces, in the order used for surface ids 0..5.
enum class Wall : int { kXMin = 0, kXMax = 1, kYMin = 2, kYMax = 3, kFloor = 4, kCeiling = 5 };
inline constexpr int kWallCount = 6;

using Color = std::array<float, 3>;

struct Scene {
  std::string id;
  Vec3 extent;                        // (width_m, depth_m, height_m)
  std::vector<Box> obstacles;
  std::array<double, kWallCount> wall_reflection{};
  std::vector<double> obstacle_reflection;  // one per obstacle
  std::vector<Color> albedo;          // per surface: 6 walls, then obstacles
  double cell_size = 0.5;
  double sensor_height = 1.25;        // camera / ear height above the floor
  std::uint64_t rng_seed = 0;

  bool operator==(const Scene&) const = default;

  std::size_t surface_count() const { return kWallCount + obstacles.size(); }

  double reflection(std::size_t surface) const {
    return surface < kWallCount ? wall_reflection[surface]
                                : obstacle_reflection.at(surface - kWallCount);
  }

  int grid_cols() const { return static_cast<int>(std::floor(extent.x / cell_size + 1e-9)); }
  int grid_rows() const { return static_cast<int>(std::floor(extent.y / cell_size + 1e-9)); }

  bool inside(const Vec3& p) const {
    return p.x >= 0.0 && p.x <= extent.x && p.y >= 0.0 && p.y <= extent.y && p.z >= 0.0 &&
           p.z <= extent.z;
  }

  /// A grid cell is free when no obstacle footprint overlaps it with positive area.
  bool cell_free(int col, int row) const {
    if (col < 0 || row < 0 || col >= grid_cols() || row >= grid_rows()) return false;
    constexpr double eps = 1e-9;
    const double x0 = col * cell_size, x1 = (col + 1) * cell_size;
    const double y0 = row * cell_size, y1 = (row + 1) * cell_size;
    for (const auto& b : obstacles) {
      if (b.min.x < x1 - eps && b.max.x > x0 + eps && b.min.y < y1 - eps && b.max.y > y0 + eps) {
        return false;
      }
    }
    return true;
  }

  Vec3 cell_center(int col, int row) const {
    return {(col + 0.5) * cell_size, (row + 0.5) * cell_size, sensor_height};
  }

  void validate() const;
};

struct Cell {
  int col = 0;
  int row = 0;
  bool operator==(const Cell&) const = default;
};

// ---------------------------------------------------------------------------
// Pose

struct Pose {
  Vec3 position;
  int heading = 0;  // degrees, one of {0, 90, 180, 270}

  bool operator==(const Pose&) const = default;

  static int normalize_heading(int deg) { return ((deg % 360) + 360) % 360; }

  /// Exact unit vectors; avoids cos(pi/2) round-off.
  static Vec3 heading_vector(int deg) {
    switch (normalize_heading(deg)) {
      case 0: return {1, 0, 0};
      case 90: return {0, 1, 0};
      case 180: return {-1, 0, 0};
      case 270: return {0, -1, 0};
      default: throw std::invalid_argument("heading must be a multiple of 90 degrees");
    }
  }

  Vec3 forward() const { return heading_vector(heading); }
  Vec3 right() const { return heading_vector(heading - 90); }
  Vec3 left() const { return heading_vector(heading + 90); }

  Pose rotated(int delta_deg) const { return {position, normalize_heading(heading + delta_deg)}; }
};

/// The four echo / depth orientations relative to a pose heading.
enum class Side : int { kFront = 0, kRight = 1, kBack = 2, kLeft = 3 };
inline constexpr std::array<Side, 4> kAllSides = {Side::kFront, Side::kRight, Side::kBack,
                                                  Side::kLeft};

inline int side_offset_deg(Side s) {
  switch (s) {
    case Side::kFront: return 0;
    case Side::kRight: return -90;
    case Side::kBack: return 180;
    case Side::kLeft: return 90;
  }
  return 0;
}

inline Pose facing(const Pose& p, Side s) { return p.rotated(side_offset_deg(s)); }

inline const char* side_name(Side s) {
  switch (s) {
    case Side::kFront: return "front";
    case Side::kRight: return "right";
    case Side::kBack: return "back";
    case Side::kLeft: return "left";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Field of view

struct FovSpec {
  double theta_full = 120.0;
  double theta_sub = 120.0;
  int width_px = 128;
  int height_px = 128;

  bool operator==(const FovSpec&) const = default;
};

/// Real-valued masked width before rounding.
inline double fov_width_exact(int width_px, double theta_full, double theta_sub) {
  if (width_px <= 0) throw std::invalid_argument("width_px must be positive");
  if (!(theta_full > 0.0) || !(theta_sub > 0.0)) {
    throw std::invalid_argument("field-of-view angles must be positive");
  }
  if (theta_full >= 180.0) throw std::invalid_argument("theta_full must be below 180 degrees");
  if (theta_sub > theta_full) throw std::invalid_argument("theta_sub exceeds theta_full");
  return width_px * std::tan(theta_sub * kPi / 360.0) / std::tan(theta_full * kPi / 360.0);
}

/// Pixel width of the centered band that a narrower horizontal FoV occupies.
inline int fov_width(int width_px, double theta_full, double theta_sub) {
  const double w = fov_width_exact(width_px, theta_full, theta_sub);
  return static_cast<int>(std::clamp<long>(std::lround(w), 1, width_px));
}

inline void validate(const FovSpec& f) {
  fov_width(f.width_px, f.theta_full, f.theta_sub);
  if (f.height_px <= 0) throw std::invalid_argument("height_px must be positive");
}

// ---------------------------------------------------------------------------
// Images

struct DepthMap {
  std::vector<float> values;  // height_px * width_px, row-major, in [0, 1]
  double max_depth_m = 10.0;
  FovSpec fov;
  Pose pose;

  float at(int row, int col) const { return values[static_cast<std::size_t>(row) * fov.width_px + col]; }
};

struct RgbImage {
  std::vector<float> values;  // 3 * height_px * width_px, channel-major, in [0, 1]
  FovSpec fov;
  Pose pose;

  float at(int ch, int row, int col) const {
    return values[(static_cast<std::size_t>(ch) * fov.height_px + row) * fov.width_px + col];
  }
};

/// Zeroes the columns outside the centered band of the narrower FoV.
inline RgbImage mask_rgb_to_fov(const RgbImage& image, double theta_sub) {
  const int w = image.fov.width_px;
  const int h = image.fov.height_px;
  const int band = fov_width(w, image.fov.theta_full, theta_sub);
  const int start = (w - band) / 2;
  RgbImage out = image;
  out.fov.theta_sub = theta_sub;
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < h; ++r) {
      for (int x = 0; x < w; ++x) {
        if (x < start || x >= start + band) {
          out.values[(static_cast<std::size_t>(c) * h + r) * w + x] = 0.0f;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Raycasting

struct Hit {
  double distance = std::numeric_limits<double>::infinity();
  int surface = -1;
  Vec3 normal;
};

/// Slab test; returns entry distance and entry axis when the ray enters the box.
inline std::optional<std::pair<double, int>> ray_box_entry(const Box& b, const Vec3& o,
                                                           const Vec3& d) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int axis_near = -1;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < b.min[a] || o[a] > b.max[a]) return std::nullopt;
      continue;
    }
    double t0 = (b.min[a] - o[a]) / d[a];
    double t1 = (b.max[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_near) {
      t_near = t0;
      axis_near = a;
    }
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_far < 0.0 || t_near < 0.0 || axis_near < 0) return std::nullopt;
  return std::make_pair(t_near, axis_near);
}

/// Nearest surface hit for a ray starting inside the room. `dir` must be unit length.
inline Hit cast_ray(const Scene& s, const Vec3& origin, const Vec3& dir) {
  Hit best;
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) continue;
    const bool positive = dir[a] > 0.0;
    const double t = ((positive ? s.extent[a] : 0.0) - origin[a]) / dir[a];
    if (t < best.distance) {
      best.distance = t;
      best.surface = 2 * a + (positive ? 1 : 0);
      best.normal = Vec3{};
      best.normal[a] = positive ? -1.0 : 1.0;
    }
  }
  for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
    auto entry = ray_box_entry(s.obstacles[i], origin, dir);
    if (entry && entry->first < best.distance) {
      best.distance = entry->first;
      best.surface = static_cast<int>(kWallCount + i);
      best.normal = Vec3{};
      best.normal[entry->second] = dir[entry->second] > 0.0 ? -1.0 : 1.0;
    }
  }
  return best;
}

/// Unit ray direction through the center of pixel (row, col) of a square-pixel pinhole camera.
inline Vec3 pixel_ray(const Pose& pose, const FovSpec& fov, int row, int col) {
  const double tan_h = std::tan(fov.theta_full * kPi / 360.0);
  const double tan_v = tan_h * fov.height_px / fov.width_px;
  const double u = (2.0 * (col + 0.5) / fov.width_px - 1.0) * tan_h;
  const double v = (1.0 - 2.0 * (row + 0.5) / fov.height_px) * tan_v;
  return (pose.forward() + pose.right() * u + Vec3{0, 0, 1} * v).normalized();
}

struct LightModel {
  double ambient = 0.35;
  double diffuse = 0.65;
  Vec3 direction = Vec3{0.3, 0.5, 0.81}.normalized();
};

/// Depth, color and surface id from one shared raycast pass.
struct RenderedView {
  DepthMap depth;
  RgbImage rgb;
  std::vector<int> surface_ids;
};

inline RenderedView render_view(const Scene& s, const Pose& pose, const FovSpec& fov,
                                double max_depth_m = 10.0, const LightModel& light = {}) {
  validate(fov);
  if (!(max_depth_m > 0.0)) throw std::invalid_argument("max_depth_m must be positive");
  RenderedView out;
  const std::size_t n = static_cast<std::size_t>(fov.width_px) * fov.height_px;
  out.depth.values.resize(n);
  out.depth.max_depth_m = max_depth_m;
  out.depth.fov = fov;
  out.depth.pose = pose;
  out.rgb.values.resize(3 * n);
  out.rgb.fov = fov;
  out.rgb.pose = pose;
  out.surface_ids.resize(n);
  for (int r = 0; r < fov.height_px; ++r) {
    for (int c = 0; c < fov.width_px; ++c) {
      const std::size_t idx = static_cast<std::size_t>(r) * fov.width_px + c;
      const Vec3 dir = pixel_ray(pose, fov, r, c);
      const Hit hit = cast_ray(s, pose.position, dir);
      out.depth.values[idx] = static_cast<float>(std::min(hit.distance, max_depth_m) / max_depth_m);
      out.surface_ids[idx] = hit.surface;
      const double shade =
          light.ambient + light.diffuse * std::max(0.0, hit.normal.dot(light.direction));
      const Color& albedo = s.albedo.at(static_cast<std::size_t>(hit.surface));
      for (int ch = 0; ch < 3; ++ch) {
        out.rgb.values[ch * n + idx] =
            static_cast<float>(std::clamp(albedo[ch] * shade, 0.0, 1.0));
      }
    }
  }
  return out;
}

inline DepthMap render_depth(const Scene& s, const Pose& pose, const FovSpec& fov,
                             double max_depth_m = 10.0) {
  return render_view(s, pose, fov, max_depth_m).depth;
}

inline RgbImage render_rgb(const Scene& s, const Pose& pose, const FovSpec& fov,
                           const LightModel& light = {}) {
  return render_view(s, pose, fov, 10.0, light).rgb;
}

// ---------------------------------------------------------------------------
// Navigable grid

inline std::vector<Cell> free_cells(const Scene& s) {
  std::vector<Cell> cells;
  for (int row = 0; row < s.grid_rows(); ++row) {
    for (int col = 0; col < s.grid_cols(); ++col) {
      if (s.cell_free(col, row)) cells.push_back({col, row});
    }
  }
  return cells;
}

/// Centers of all free grid cells, at sensor height.
inline std::vector<Vec3> navigable_points(const Scene& s) {
  std::vector<Vec3> pts;
  for (const Cell& c : free_cells(s)) pts.push_back(s.cell_center(c.col, c.row));
  return pts;
}

inline std::optional<Cell> cell_of(const Scene& s, const Vec3& p) {
  const int col = static_cast<int>(std::floor(p.x / s.cell_size));
  const int row = static_cast<int>(std::floor(p.y / s.cell_size));
  if (!s.cell_free(col, row)) return std::nullopt;
  const Vec3 c = s.cell_center(col, row);
  if (std::abs(c.x - p.x) > 1e-6 || std::abs(c.y - p.y) > 1e-6) return std::nullopt;
  return Cell{col, row};
}

inline void validate_pose(const Scene& s, const Pose& p) {
  Pose::heading_vector(p.heading);
  if (!cell_of(s, p.position)) throw std::invalid_argument("pose is not on a navigable point");
}

/// Number of free cells reachable from `start` over 4-connected moves.
inline std::size_t reachable_count(const Scene& s, Cell start) {
  const int cols = s.grid_cols(), rows = s.grid_rows();
  std::vector<char> seen(static_cast<std::size_t>(cols) * rows, 0);
  std::queue<Cell> q;
  q.push(start);
  seen[static_cast<std::size_t>(start.row) * cols + start.col] = 1;
  std::size_t count = 0;
  constexpr std::array<std::array<int, 2>, 4> kSteps = {{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop();
    ++count;
    for (const auto& st : kSteps) {
      const Cell n{c.col + st[0], c.row + st[1]};
      if (!s.cell_free(n.col, n.row)) continue;
      auto& flag = seen[static_cast<std::size_t>(n.row) * cols + n.col];
      if (!flag) {
        flag = 1;
        q.push(n);
      }
    }
  }
  return count;
}

inline void Scene::validate() const {
  if (!(extent.x > 0 && extent.y > 0 && extent.z > 0)) {
    throw std::invalid_argument("scene extent must be positive");
  }
  if (!(cell_size > 0.0)) throw std::invalid_argument("cell_size must be positive");
  if (!(sensor_height > 0.0 && sensor_height < extent.z)) {
    throw std::invalid_argument("sensor height must lie inside the room");
  }
  if (obstacle_reflection.size() != obstacles.size()) {
    throw std::invalid_argument("one reflection coefficient per obstacle required");
  }
  if (albedo.size() != surface_count()) throw std::invalid_argument("one albedo per surface required");
  for (std::size_t i = 0; i < surface_count(); ++i) {
    const double r = reflection(i);
    if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument("surface reflection must be in [0, 1)");
  }
  for (const auto& b : obstacles) {
    for (int a = 0; a < 3; ++a) {
      if (!(b.min[a] >= 0.0 && b.max[a] <= extent[a] && b.min[a] < b.max[a])) {
        throw std::invalid_argument("obstacle box must lie inside the room extent");
      }
    }
  }
  if (free_cells(*this).empty()) throw std::invalid_argument("scene has no navigable point");
}

// ---------------------------------------------------------------------------
// Generation

struct SceneGenConfig {
  double min_width_m = 3.0;
  double max_width_m = 6.0;
  double min_depth_m = 3.0;
  double max_depth_m = 6.0;
  double min_height_m = 2.4;
  double max_height_m = 3.0;
  int min_obstacles = 0;
  int max_obstacles = 4;
  int min_obstacle_cells = 1;  // footprint side length, in grid cells
  int max_obstacle_cells = 3;
  double min_obstacle_height_m = 0.6;
  double max_obstacle_height_m = 2.0;
  double min_reflection = 0.5;
  double max_reflection = 0.9;
  double cell_size = 0.5;
  double sensor_height = 1.25;
  int max_attempts = 500;

  bool operator==(const SceneGenConfig&) const = default;
};

inline void validate(const SceneGenConfig& c) {
  auto positive_range = [](double lo, double hi, const char* what) {
    if (!(lo > 0.0 && hi >= lo)) throw std::invalid_argument(std::string("invalid range: ") + what);
  };
  positive_range(c.min_width_m, c.max_width_m, "width");
  positive_range(c.min_depth_m, c.max_depth_m, "depth");
  positive_range(c.min_height_m, c.max_height_m, "height");
  positive_range(c.min_obstacle_height_m, c.max_obstacle_height_m, "obstacle height");
  if (!(c.cell_size > 0.0)) throw std::invalid_argument("cell_size must be positive");
  if (c.min_obstacles < 0 || c.max_obstacles < c.min_obstacles) {
    throw std::invalid_argument("invalid obstacle count range");
  }
  if (c.min_obstacle_cells < 1 || c.max_obstacle_cells < c.min_obstacle_cells) {
    throw std::invalid_argument("invalid obstacle size range");
  }
  if (!(c.min_reflection >= 0.0 && c.max_reflection < 1.0 && c.min_reflection <= c.max_reflection)) {
    throw std::invalid_argument("reflection range must lie in [0, 1)");
  }
  if (!(c.sensor_height > 0.0 && c.sensor_height < c.min_height_m)) {
    throw std::invalid_argument("sensor height must be below the lowest ceiling");
  }
  if (std::floor(c.max_width_m / c.cell_size + 1e-9) < 1 ||
      std::floor(c.max_depth_m / c.cell_size + 1e-9) < 1) {
    throw std::invalid_argument("room smaller than one cell");
  }
  // Even the largest room must keep a free start/goal pair after the minimum
  // number of smallest obstacles is placed.
  const double max_cells = std::floor(c.max_width_m / c.cell_size + 1e-9) *
                           std::floor(c.max_depth_m / c.cell_size + 1e-9);
  const double min_blocked =
      static_cast<double>(c.min_obstacles) * c.min_obstacle_cells * c.min_obstacle_cells;
  if (max_cells - min_blocked < 2.0) {
    throw std::invalid_argument("obstacles would fill all navigable cells");
  }
}

namespace detail {

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline bool free_cells_connected(const Scene& s) {
  const auto cells = free_cells(s);
  return cells.size() >= 2 && reachable_count(s, cells.front()) == cells.size();
}

}  // namespace detail

/// Deterministic shoebox room with grid-aligned box obstacles. The free cells
/// always form one 4-connected component with at least two cells.
inline Scene generate_scene(std::uint64_t seed, const SceneGenConfig& cfg) {
  validate(cfg);
  std::mt19937_64 rng(seed);
  Scene s;
  s.id = "scene-" + hex64(seed);
  s.rng_seed = seed;
  s.cell_size = cfg.cell_size;
  s.sensor_height = cfg.sensor_height;
  const int min_cols = std::max(1, static_cast<int>(std::ceil(cfg.min_width_m / cfg.cell_size - 1e-9)));
  const int max_cols = std::max(min_cols, static_cast<int>(std::floor(cfg.max_width_m / cfg.cell_size + 1e-9)));
  const int min_rows = std::max(1, static_cast<int>(std::ceil(cfg.min_depth_m / cfg.cell_size - 1e-9)));
  const int max_rows = std::max(min_rows, static_cast<int>(std::floor(cfg.max_depth_m / cfg.cell_size + 1e-9)));
  const int cols = detail::uniform_int(rng, min_cols, max_cols);
  const int rows = detail::uniform_int(rng, min_rows, max_rows);
  s.extent = {cols * cfg.cell_size, rows * cfg.cell_size,
              detail::uniform_real(rng, cfg.min_height_m, cfg.max_height_m)};
  for (auto& r : s.wall_reflection) r = detail::uniform_real(rng, cfg.min_reflection, cfg.max_reflection);

  auto random_color = [&rng]() {
    Color c;
    for (auto& v : c) v = static_cast<float>(detail::uniform_real(rng, 0.15, 1.0));
    return c;
  };
  for (int i = 0; i < kWallCount; ++i) s.albedo.push_back(random_color());

  const int target = detail::uniform_int(rng, cfg.min_obstacles, cfg.max_obstacles);
  int attempts = 0;
  while (static_cast<int>(s.obstacles.size()) < target) {
    if (++attempts > cfg.max_attempts) {
      if (static_cast<int>(s.obstacles.size()) >= cfg.min_obstacles) break;
      throw std::invalid_argument("obstacles would fill all navigable cells");
    }
    const int w = std::min(cols, detail::uniform_int(rng, cfg.min_obstacle_cells, cfg.max_obstacle_cells));
    const int d = std::min(rows, detail::uniform_int(rng, cfg.min_obstacle_cells, cfg.max_obstacle_cells));
    const int c0 = detail::uniform_int(rng, 0, cols - w);
    const int r0 = detail::uniform_int(rng, 0, rows - d);
    const double h = std::min(s.extent.z,
                              detail::uniform_real(rng, cfg.min_obstacle_height_m, cfg.max_obstacle_height_m));
    Box b{{c0 * cfg.cell_size, r0 * cfg.cell_size, 0.0},
          {(c0 + w) * cfg.cell_size, (r0 + d) * cfg.cell_size, h}};
    const double refl = detail::uniform_real(rng, cfg.min_reflection, cfg.max_reflection);
    const Color color = random_color();
    s.obstacles.push_back(b);
    s.obstacle_reflection.push_back(refl);
    s.albedo.push_back(color);
    if (!detail::free_cells_connected(s)) {
      s.obstacles.pop_back();
      s.obstacle_reflection.pop_back();
      s.albedo.pop_back();
    }
  }
  if (!detail::free_cells_connected(s)) {
    throw std::invalid_argument("obstacles would fill all navigable cells");
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const Scene& s) {
  using nlohmann::json;
  json obstacles = json::array();
  for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
    const auto& b = s.obstacles[i];
    obstacles.push_back({{"min_m", {b.min.x, b.min.y, b.min.z}},
                         {"max_m", {b.max.x, b.max.y, b.max.z}},
                         {"reflection", s.obstacle_reflection[i]}});
  }
  json albedo = json::array();
  for (const auto& c : s.albedo) albedo.push_back({c[0], c[1], c[2]});
  return {{"id", s.id},
          {"units", "meters"},
          {"extent_m", {s.extent.x, s.extent.y, s.extent.z}},
          {"wall_reflection", s.wall_reflection},
          {"obstacles", obstacles},
          {"albedo", albedo},
          {"cell_size_m", s.cell_size},
          {"sensor_height_m", s.sensor_height},
          {"rng_seed", s.rng_seed}};
}

inline Scene scene_from_json(const nlohmann::json& j) {
  if (j.value("units", std::string()) != "meters") throw std::invalid_argument("scene units must be meters");
  Scene s;
  s.id = j.at("id").get<std::string>();
  const auto e = j.at("extent_m");
  s.extent = {e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>()};
  s.wall_reflection = j.at("wall_reflection").get<std::array<double, kWallCount>>();
  for (const auto& o : j.at("obstacles")) {
    const auto mn = o.at("min_m");
    const auto mx = o.at("max_m");
    s.obstacles.push_back({{mn.at(0).get<double>(), mn.at(1).get<double>(), mn.at(2).get<double>()},
                           {mx.at(0).get<double>(), mx.at(1).get<double>(), mx.at(2).get<double>()}});
    s.obstacle_reflection.push_back(o.at("reflection").get<double>());
  }
  for (const auto& c : j.at("albedo")) s.albedo.push_back(c.get<Color>());
  s.cell_size = j.at("cell_size_m").get<double>();
  s.sensor_height = j.at("sensor_height_m").get<double>();
  s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  s.validate();
  return s;
}

inline io::FloatArray to_float_array(const DepthMap& d) {
  return {{static_cast<std::uint32_t>(d.fov.height_px), static_cast<std::uint32_t>(d.fov.width_px)},
          d.values,
          static_cast<float>(d.max_depth_m),
          io::ArrayKind::kDepth};
}

inline io::FloatArray to_float_array(const RgbImage& im) {
  return {{3u, static_cast<std::uint32_t>(im.fov.height_px), static_cast<std::uint32_t>(im.fov.width_px)},
          im.values,
          0.0f,
          io::ArrayKind::kRgb};
}

/// Restores the pixel payload; FoV angles and pose come from the caller (manifest).
inline DepthMap depth_from_float_array(const io::FloatArray& a, FovSpec fov, Pose pose) {
  if (a.kind != io::ArrayKind::kDepth || a.dims.size() != 2) throw std::invalid_argument("not a depth array");
  fov.height_px = static_cast<int>(a.dims[0]);
  fov.width_px = static_cast<int>(a.dims[1]);
  return {a.values, a.scalar, fov, pose};
}

inline RgbImage rgb_from_float_array(const io::FloatArray& a, FovSpec fov, Pose pose) {
  if (a.kind != io::ArrayKind::kRgb || a.dims.size() != 3 || a.dims[0] != 3) {
    throw std::invalid_argument("not an RGB array");
  }
  fov.height_px = static_cast<int>(a.dims[1]);
  fov.width_px = static_cast<int>(a.dims[2]);
  return {a.values, fov, pose};
}

}  // namespace echonav::scene

#endif  // ECHONAV_SCENE_HPP_
