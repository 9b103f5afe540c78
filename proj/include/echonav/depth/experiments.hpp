#ifndef ECHONAV_DEPTH_EXPERIMENTS_HPP_
#define ECHONAV_DEPTH_EXPERIMENTS_HPP_

// Multi-orientation, FoV sweep and unseen-orientation experiments. Each cell
// trains one model per seed and reports test metrics averaged over seeds.

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "echonav/depth/train.hpp"

namespace echonav::depth {

struct ExperimentSettings {
  DepthArchitecture arch;
  DepthTrainConfig train;
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  bool operator==(const ExperimentSettings&) const = default;
};

struct CellResult {
  std::string label;
  DepthTask task;
  std::vector<DepthMetrics> per_seed;
  std::vector<int> best_epochs;
  DepthMetrics mean;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Trains and tests one model; the seed drives both weight init and batch order.
inline DepthMetrics run_single(const DepthDataset& ds, const DepthTask& task, const ExperimentSettings& s,
                               std::uint64_t seed, int* best_epoch = nullptr) {
  DepthModelConfig mc;
  mc.task = task;
  mc.arch = s.arch;
  mc.geometry = ds.geometry;
  mc.echo_norm = fit_echo_normalization(ds.train);
  DepthModel<float> model(mc, derive_seed(seed, 0));
  const TrainReport rep = train_depth(model, ds.train, ds.val, s.train, derive_seed(seed, 1));
  if (best_epoch) *best_epoch = rep.best_epoch;
  return evaluate(model, pointers(ds.test), s.train.eval_batch, s.train.jobs).metrics;
}

inline CellResult run_cell(const DepthDataset& ds, const std::string& label, const DepthTask& task,
                           const ExperimentSettings& s, const ProgressFn& progress = {}) {
  if (ds.test.empty()) throw std::invalid_argument("experiment needs a test split");
  CellResult r;
  r.label = label;
  r.task = task;
  for (std::uint64_t seed : s.seeds) {
    int best = -1;
    r.per_seed.push_back(run_single(ds, task, s, seed, &best));
    r.best_epochs.push_back(best);
    if (progress) {
      progress(label + " seed " + std::to_string(seed) + " rmse " + std::to_string(r.per_seed.back().rmse));
    }
  }
  r.mean = mean_metrics(r.per_seed);
  return r;
}

/// Echo-only front-depth models with one (front) versus four orientations.
inline std::vector<CellResult> run_orientation_count(const DepthDataset& ds, const ExperimentSettings& s,
                                                     const ProgressFn& progress = {}) {
  std::vector<CellResult> out;
  for (int n : {1, 4}) {
    DepthTask t = task_for(InputMode::kEchoesOnly, Side::kFront, ds.geometry.theta_full, ds.geometry.theta_full);
    t.echo_orientations = n;
    out.push_back(run_cell(ds, n == 1 ? "echoes_1" : "echoes_4", t, s, progress));
  }
  return out;
}

inline const std::vector<double>& default_fovs() {
  static const std::vector<double> fovs = {15, 30, 45, 60, 75, 90, 105, 120};
  return fovs;
}

/// Front depth at the full camera FoV from RGB masked to each `fov`, with and
/// without four-orientation echoes. Rows alternate rgb, echoes+rgb per FoV.
inline std::vector<CellResult> run_fov_sweep(const DepthDataset& ds, const std::vector<double>& fovs,
                                             const ExperimentSettings& s, const ProgressFn& progress = {}) {
  std::vector<CellResult> out;
  for (double fov : fovs) {
    for (InputMode m : {InputMode::kRgbOnly, InputMode::kEchoesRgb}) {
      const DepthTask t = task_for(m, Side::kFront, fov, ds.geometry.theta_full);
      out.push_back(run_cell(ds, std::string(mode_name(m)) + "@" + std::to_string(static_cast<int>(fov)), t, s,
                             progress));
    }
  }
  return out;
}

/// Depth of a side the camera never sees, from a front RGB whose FoV (90
/// degrees) does not overlap the 90 degree target band.
inline constexpr double kUnseenFovDeg = 90.0;

inline DepthTask unseen_task(InputMode mode, Side target) {
  if (target == Side::kFront) throw std::invalid_argument("unseen orientation target must not be front");
  return task_for(mode, target, kUnseenFovDeg, kUnseenFovDeg);
}

inline CellResult run_unseen_orientation(const DepthDataset& ds, Side target, InputMode mode,
                                         const ExperimentSettings& s, const ProgressFn& progress = {}) {
  return run_cell(ds, std::string(mode_name(mode)) + "->" + scene::side_name(target), unseen_task(mode, target), s,
                  progress);
}

inline nlohmann::json to_json(const DepthTask& t) {
  return {{"echo_orientations", t.echo_orientations},
          {"rgb_views", t.rgb_views},
          {"rgb_fov_deg", t.rgb_fov_deg},
          {"target_fov_deg", t.target_fov_deg},
          {"target", scene::side_name(t.target)}};
}

inline nlohmann::json to_json(const CellResult& r) {
  nlohmann::json j;
  j["label"] = r.label;
  j["task"] = to_json(r.task);
  j["mean"] = to_json(r.mean);
  j["per_seed"] = nlohmann::json::array();
  for (const auto& m : r.per_seed) j["per_seed"].push_back(to_json(m));
  j["best_epochs"] = r.best_epochs;
  return j;
}

}  // namespace echonav::depth

#endif  // ECHONAV_DEPTH_EXPERIMENTS_HPP_
