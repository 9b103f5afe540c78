#ifndef ECHONAV_APP_MODEL_IO_HPP_
#define ECHONAV_APP_MODEL_IO_HPP_

// Depth model checkpoints: parameters plus the full model configuration, so
// a checkpoint directory alone is enough to rebuild the model.

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "echonav/app/config.hpp"
#include "echonav/depth.hpp"
#include "echonav/nn/checkpoint.hpp"

namespace echonav::app {

inline json task_json(const depth::DepthTask& t) { return depth::to_json(t); }

inline depth::DepthTask task_from_json(const json& j) {
  depth::DepthTask t;
  t.echo_orientations = j.at("echo_orientations").get<int>();
  t.rgb_views = j.at("rgb_views").get<int>();
  t.rgb_fov_deg = j.at("rgb_fov_deg").get<double>();
  t.target_fov_deg = j.at("target_fov_deg").get<double>();
  t.target = parse_side(j.at("target").get<std::string>());
  return t;
}

inline json geometry_json(const depth::SampleGeometry& g) {
  return {{"freq_bins", g.freq_bins}, {"frames", g.frames},           {"height", g.height},
          {"width", g.width},         {"theta_full", g.theta_full}, {"max_depth_m", g.max_depth_m}};
}

inline depth::SampleGeometry geometry_from_json(const json& j) {
  return {j.at("freq_bins").get<int>(), j.at("frames").get<int>(),          j.at("height").get<int>(),
          j.at("width").get<int>(),     j.at("theta_full").get<double>(), j.at("max_depth_m").get<double>()};
}

inline json model_config_json(const depth::DepthModelConfig& mc) {
  return {{"task", task_json(mc.task)},
          {"arch", depth_arch_json(mc.arch)},
          {"geometry", geometry_json(mc.geometry)},
          {"echo_norm", {{"mean", mc.echo_norm.mean}, {"std", mc.echo_norm.std}}}};
}

inline depth::DepthModelConfig model_config_from_json(const json& j) {
  depth::DepthModelConfig mc;
  mc.task = task_from_json(j.at("task"));
  read_depth_arch(j.at("arch"), "model.arch", mc.arch);
  mc.geometry = geometry_from_json(j.at("geometry"));
  mc.echo_norm.mean = j.at("echo_norm").at("mean").get<double>();
  mc.echo_norm.std = j.at("echo_norm").at("std").get<double>();
  return mc;
}

inline void save_depth_model(const std::filesystem::path& dir, depth::DepthModel<float>& model,
                             json extra = json::object()) {
  extra["model"] = model_config_json(model.config());
  nn::save_checkpoint(dir, model.params(), extra);
}

inline std::unique_ptr<depth::DepthModel<float>> load_depth_model(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw std::runtime_error("missing checkpoint manifest in " + dir.string());
  const json manifest = json::parse(f);
  const json& hp = manifest.at("hyperparameters");
  auto model = std::make_unique<depth::DepthModel<float>>(model_config_from_json(hp.at("model")), 0);
  nn::load_checkpoint(dir, model->params());
  return model;
}

}  // namespace echonav::app

#endif  // ECHONAV_APP_MODEL_IO_HPP_
