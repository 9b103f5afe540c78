#ifndef ECHONAV_NAV_ENV_HPP_
#define ECHONAV_NAV_ENV_HPP_

// PointGoal environment on the scene grid: actions, egocentric GPS,
// breadth-first geodesic distances, episodes and rewards.

#include <cmath>
#include <limits>
#include <memory>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "echonav/common.hpp"
#include "echonav/scene.hpp"

namespace echonav::nav {

enum class Action : int { kMoveForward = 0, kTurnLeft = 1, kTurnRight = 2, kStop = 3 };
inline constexpr int kActionCount = 4;
inline constexpr int kMaxEpisodeSteps = 500;

inline const char* action_name(Action a) {
  switch (a) {
    case Action::kMoveForward: return "forward";
    case Action::kTurnLeft: return "left";
    case Action::kTurnRight: return "right";
    case Action::kStop: return "stop";
  }
  return "?";
}

/// Goal displacement in the agent frame: meters ahead and meters to the left.
struct Gps {
  double forward = 0.0;
  double left = 0.0;

  bool operator==(const Gps&) const = default;
};

inline Gps gps(const scene::Pose& agent, const Vec3& goal) {
  const Vec3 d = goal - agent.position;
  const Vec3 f = agent.forward(), l = agent.left();
  return {d.x * f.x + d.y * f.y, d.x * l.x + d.y * l.y};
}

struct PoseStep {
  scene::Pose pose;
  bool collided = false;
};

/// Pure transition. Stop leaves the pose unchanged; episode bookkeeping
/// lives in NavEnv.
inline PoseStep step_pose(const scene::Scene& s, const scene::Pose& p, Action a) {
  switch (a) {
    case Action::kTurnLeft: return {p.rotated(90), false};
    case Action::kTurnRight: return {p.rotated(-90), false};
    case Action::kStop: return {p, false};
    case Action::kMoveForward: {
      const auto c = scene::cell_of(s, p.position);
      if (!c) throw std::invalid_argument("agent is not on a navigable point");
      const Vec3 f = p.forward();
      const int col = c->col + static_cast<int>(std::lround(f.x));
      const int row = c->row + static_cast<int>(std::lround(f.y));
      if (!s.cell_free(col, row)) return {p, true};
      return {{s.cell_center(col, row), p.heading}, false};
    }
  }
  throw std::invalid_argument("unknown action");
}

// ---------------------------------------------------------------------------
// Geodesics

inline constexpr int kUnreachable = -1;

/// BFS step counts to `goal` over 4-connected free cells (kUnreachable where
/// disconnected or blocked).
struct DistanceField {
  int cols = 0;
  int rows = 0;
  std::vector<int> steps;

  int at(scene::Cell c) const {
    if (c.col < 0 || c.row < 0 || c.col >= cols || c.row >= rows) return kUnreachable;
    return steps[static_cast<std::size_t>(c.row) * cols + c.col];
  }
};

inline DistanceField distance_field(const scene::Scene& s, scene::Cell goal) {
  DistanceField f{s.grid_cols(), s.grid_rows(), {}};
  f.steps.assign(static_cast<std::size_t>(f.cols) * f.rows, kUnreachable);
  if (!s.cell_free(goal.col, goal.row)) throw std::invalid_argument("goal cell is not navigable");
  std::queue<scene::Cell> q;
  f.steps[static_cast<std::size_t>(goal.row) * f.cols + goal.col] = 0;
  q.push(goal);
  constexpr int kDc[4] = {1, -1, 0, 0};
  constexpr int kDr[4] = {0, 0, 1, -1};
  while (!q.empty()) {
    const scene::Cell c = q.front();
    q.pop();
    const int d = f.at(c);
    for (int k = 0; k < 4; ++k) {
      const scene::Cell n{c.col + kDc[k], c.row + kDr[k]};
      if (!s.cell_free(n.col, n.row) || f.at(n) != kUnreachable) continue;
      f.steps[static_cast<std::size_t>(n.row) * f.cols + n.col] = d + 1;
      q.push(n);
    }
  }
  return f;
}

inline scene::Cell require_cell(const scene::Scene& s, const Vec3& p) {
  const auto c = scene::cell_of(s, p);
  if (!c) throw std::invalid_argument("point is not navigable");
  return *c;
}

/// Shortest 4-connected path length in meters; infinity when disconnected.
inline double geodesic_distance(const scene::Scene& s, const Vec3& a, const Vec3& b) {
  const scene::Cell ca = require_cell(s, a);
  const int d = distance_field(s, require_cell(s, b)).at(ca);
  return d == kUnreachable ? std::numeric_limits<double>::infinity() : d * s.cell_size;
}

// ---------------------------------------------------------------------------
// Episodes

struct NavEpisode {
  std::string scene_id;
  scene::Pose start;
  Vec3 goal;
  double shortest_path_length = 0.0;
  int max_steps = kMaxEpisodeSteps;

  bool operator==(const NavEpisode&) const = default;
};

/// `count` episodes with distinct start and goal cells joined by a finite
/// path of at least `min_cells` moves.
inline std::vector<NavEpisode> generate_episodes(const scene::Scene& s, int count, std::mt19937_64& rng,
                                                 int min_cells = 1) {
  const auto cells = scene::free_cells(s);
  if (cells.size() < 2) throw std::invalid_argument("scene has fewer than two free cells");
  std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
  std::uniform_int_distribution<int> heading(0, 3);
  std::vector<NavEpisode> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > 1000 * std::max(count, 1)) throw std::runtime_error("cannot place episodes in " + s.id);
    const scene::Cell g = cells[pick(rng)];
    const scene::Cell a = cells[pick(rng)];
    const int h = 90 * heading(rng);
    const int d = distance_field(s, g).at(a);
    if (d == kUnreachable || d < std::max(min_cells, 1)) continue;
    out.push_back({s.id, {s.cell_center(a.col, a.row), h}, s.cell_center(g.col, g.row), d * s.cell_size,
                   kMaxEpisodeSteps});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Episode lifecycle

struct RewardConfig {
  double success_reward = 10.0;
  double slack_reward = -0.01;
  double shaping_scale = 1.0;      // times the geodesic decrease in meters
  double success_radius_cells = 0.5;

  bool operator==(const RewardConfig&) const = default;
};

enum class DoneReason { kNone, kStop, kTimeLimit };

struct StepResult {
  double reward = 0.0;
  bool collided = false;
  bool done = false;
  bool success = false;
  DoneReason reason = DoneReason::kNone;
};

class NavEnv {
 public:
  NavEnv(std::shared_ptr<const scene::Scene> s, NavEpisode ep, RewardConfig reward = {})
      : scene_(std::move(s)), episode_(std::move(ep)), reward_(reward) {
    scene::validate_pose(*scene_, episode_.start);
    field_ = distance_field(*scene_, require_cell(*scene_, episode_.goal));
    if (field_.at(require_cell(*scene_, episode_.start.position)) == kUnreachable) {
      throw std::invalid_argument("episode goal is unreachable");
    }
    pose_ = episode_.start;
  }

  const scene::Scene& scene() const { return *scene_; }
  std::shared_ptr<const scene::Scene> scene_ptr() const { return scene_; }
  const NavEpisode& episode() const { return episode_; }
  const scene::Pose& pose() const { return pose_; }
  int steps() const { return steps_; }
  bool done() const { return done_; }
  bool success() const { return success_; }
  double path_length() const { return path_length_; }
  Gps gps() const { return nav::gps(pose_, episode_.goal); }

  double distance_to_goal() const {
    return field_.at(require_cell(*scene_, pose_.position)) * scene_->cell_size;
  }

  bool within_success_radius() const {
    const Vec3 d = episode_.goal - pose_.position;
    return std::hypot(d.x, d.y) <= reward_.success_radius_cells * scene_->cell_size + 1e-9;
  }

  StepResult step(Action a) {
    if (done_) throw std::logic_error("step on a finished episode");
    StepResult r;
    const double before = distance_to_goal();
    const PoseStep ps = step_pose(*scene_, pose_, a);
    r.collided = ps.collided;
    if (a == Action::kMoveForward && !ps.collided) path_length_ += scene_->cell_size;
    pose_ = ps.pose;
    ++steps_;
    r.reward = reward_.slack_reward + reward_.shaping_scale * (before - distance_to_goal());
    if (a == Action::kStop) {
      r.done = true;
      r.reason = DoneReason::kStop;
      r.success = within_success_radius();
      if (r.success) r.reward += reward_.success_reward;
    } else if (steps_ >= episode_.max_steps) {
      r.done = true;
      r.reason = DoneReason::kTimeLimit;
    }
    done_ = r.done;
    success_ = r.success;
    return r;
  }

 private:
  std::shared_ptr<const scene::Scene> scene_;
  NavEpisode episode_;
  RewardConfig reward_;
  DistanceField field_;
  scene::Pose pose_;
  int steps_ = 0;
  double path_length_ = 0.0;
  bool done_ = false;
  bool success_ = false;
};

// ---------------------------------------------------------------------------
// SPL

struct EpisodeOutcome {
  bool success = false;
  double shortest_path_length = 0.0;
  double path_length = 0.0;
  int steps = 0;
};

inline double episode_spl(const EpisodeOutcome& o) {
  if (!o.success) return 0.0;
  return o.shortest_path_length / std::max(o.path_length, o.shortest_path_length);
}

struct SplResult {
  double spl = 0.0;
  double success_rate = 0.0;
  int episodes = 0;
};

inline SplResult summarize(const std::vector<EpisodeOutcome>& outcomes) {
  if (outcomes.empty()) throw std::invalid_argument("SPL over zero episodes");
  SplResult r;
  for (const auto& o : outcomes) {
    r.spl += episode_spl(o);
    r.success_rate += o.success ? 1.0 : 0.0;
  }
  r.episodes = static_cast<int>(outcomes.size());
  r.spl /= r.episodes;
  r.success_rate /= r.episodes;
  return r;
}

}  // namespace echonav::nav

#endif  // ECHONAV_NAV_ENV_HPP_
