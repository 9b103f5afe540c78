#ifndef ECHONAV_NAV_EST_DEPTH_HPP_
#define ECHONAV_NAV_EST_DEPTH_HPP_

// Estimated-depth observations: a frozen depth model (four-orientation
// echoes plus 90 degree RGB, predicting the full 120 degree front view)
// replaces the rendered depth table of a scene.

#include <stdexcept>
#include <vector>

#include "echonav/depth/train.hpp"
#include "echonav/nav/observation.hpp"

namespace echonav::nav {

inline constexpr double kEstDepthRgbFovDeg = 90.0;

inline depth::DepthTask est_depth_task(double theta_full = 120.0) {
  return depth::task_for(depth::InputMode::kEchoesRgb, scene::Side::kFront, kEstDepthRgbFovDeg, theta_full);
}

inline depth::SampleGeometry observation_geometry(const ObservationConfig& c) {
  return {c.freq_bins(), c.frames(), c.view.height_px, c.view.width_px, c.view.theta_full, c.max_depth_m};
}

/// The depth sample seen from one observation slot: echoes at the four
/// sides of that heading and the RGB view ahead. Depth is left blank.
inline depth::DepthSample slot_sample(const SceneObservations& obs, std::size_t slot) {
  const auto& cfg = obs.config();
  const scene::Pose pose = obs.slot_pose(slot);
  const std::size_t base = slot - slot % 4;
  depth::DepthSample s;
  s.scene_id = obs.scene().id;
  s.pose = pose;
  for (scene::Side side : scene::kAllSides) {
    const auto k = static_cast<std::size_t>(side);
    const std::size_t other = base + static_cast<std::size_t>(heading_index(pose.heading + scene::side_offset_deg(side)));
    const float* e = obs.echo(other);
    s.echoes[k].assign(e, e + cfg.echo_size());
    s.depth[k].assign(cfg.pixels(), 0.0f);
  }
  const float* rgb = obs.rgb(slot);
  s.rgb[0].resize(3 * cfg.pixels());
  for (std::size_t k = 0; k < s.rgb[0].size(); ++k) s.rgb[0][k] = depth::quantize_unit(rgb[k]);
  return s;
}

template <class T>
void check_est_depth_model(const depth::DepthModel<T>& model, const ObservationConfig& cfg) {
  const auto& mc = model.config();
  if (!(mc.geometry == observation_geometry(cfg))) {
    throw std::invalid_argument("depth model geometry does not match the navigation observations");
  }
  if (!(mc.task == est_depth_task(cfg.view.theta_full))) {
    throw std::invalid_argument("est-depth needs an echoes+rgb model with 90 degree RGB and a front target");
  }
}

/// Runs the frozen model on every slot and installs the predictions as the
/// depth table.
template <class T>
void install_estimated_depth(SceneObservations& obs, const depth::DepthModel<T>& model, int jobs = 1,
                             int eval_batch = 32) {
  check_est_depth_model(model, obs.config());
  std::vector<depth::DepthSample> samples;
  samples.reserve(obs.slot_count());
  for (std::size_t i = 0; i < obs.slot_count(); ++i) samples.push_back(slot_sample(obs, i));
  const auto pred = depth::predict(model, depth::pointers(samples), eval_batch, jobs);
  std::vector<float> table;
  table.reserve(obs.slot_count() * obs.config().pixels());
  for (const auto& p : pred) table.insert(table.end(), p.begin(), p.end());
  obs.set_depth(std::move(table));
}

}  // namespace echonav::nav

#endif  // ECHONAV_NAV_EST_DEPTH_HPP_
