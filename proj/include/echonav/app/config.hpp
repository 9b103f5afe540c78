#ifndef ECHONAV_APP_CONFIG_HPP_
#define ECHONAV_APP_CONFIG_HPP_

// Experiment configuration as strict JSON: every section is optional, every
// field defaults, and unknown keys are errors. The resolved configuration
// is embedded in every output and fingerprinted.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "echonav/common.hpp"
#include "echonav/depth.hpp"
#include "echonav/nav.hpp"

namespace echonav::app {

using nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DepthSection {
  depth::DepthArchitecture arch = depth::desk_architecture();
  depth::DepthTrainConfig train{.epochs = 10, .batch_size = 16, .lr = 1e-3, .eval_batch = 32, .jobs = 1};
  std::vector<scene::Side> unseen_targets = {scene::Side::kLeft, scene::Side::kBack, scene::Side::kRight};

  bool operator==(const DepthSection&) const = default;
};

struct NavSection {
  scene::SceneGenConfig scene = [] {
    scene::SceneGenConfig c;
    c.max_width_m = 5.0;
    c.max_depth_m = 5.0;
    c.min_obstacles = 2;
    c.max_obstacles = 5;
    return c;
  }();
  nav::ObservationConfig observation;
  int train_scenes = 100;
  int val_scenes = 5;
  int test_scenes = 10;
  int val_episodes_per_scene = 20;
  int test_episodes_per_scene = 20;  // 200 held-out episodes over the test scenes
  nav::NavPolicyConfig policy = [] {
    nav::NavPolicyConfig c;
    c.hidden = 64;
    c.embedding = 64;
    c.echo_convs = {{8, 8, 4, 2}, {16, 4, 2, 1}, {16, 3, 1, 1}};
    c.vision_convs = {{8, 4, 2, 1}, {16, 4, 2, 1}, {16, 3, 1, 1}};
    return c;
  }();
  nav::PpoConfig ppo = [] {
    nav::PpoConfig c;
    c.rollout = 64;
    c.lr = 1e-3;
    c.updates = 500;
    c.eval_every = 50;
    return c;
  }();
  nav::RewardConfig reward;
  std::vector<nav::NavMode> table3_modes = {nav::NavMode::kBlind, nav::NavMode::kRgb, nav::NavMode::kDepth};
  std::vector<nav::NavMode> table4_modes = {nav::NavMode::kRgb, nav::NavMode::kEchoes, nav::NavMode::kEchoesRgb,
                                            nav::NavMode::kDepth, nav::NavMode::kEchoesDepth};
  std::string est_depth_checkpoint;  // depth model directory for est-depth

  bool operator==(const NavSection&) const = default;
};

struct ExperimentConfig {
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  int jobs = 1;
  depth::DatasetSpec dataset = [] {
    depth::DatasetSpec d;
    d.train_scenes = 12;
    d.val_scenes = 3;
    d.test_scenes = 3;
    d.poses_per_scene = 20;
    d.render.view = {120.0, 120.0, 32, 32};
    return d;
  }();
  DepthSection depth;
  NavSection nav;

  bool operator==(const ExperimentConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Strict reading

/// Reads named fields of one JSON object and rejects any key it was not asked for.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  template <class T, class Read>
  void get(const char* key, T& out, Read read) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      read(*it, path_ + "." + key, out);
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    get(key, out, [](const json& v, const std::string&, T& o) { o = v.get<T>(); });
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(where() + "unknown key \"" + k + "\"");
    }
  }

 private:
  std::string where() const { return (path_.empty() ? std::string("config") : path_) + ": "; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_conv_specs(const json& j, const std::string& path, std::vector<nn::ConvSpec>& out) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of conv specs");
  out.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    nn::ConvSpec c;
    Fields f(j[i], path + "[" + std::to_string(i) + "]");
    f.get("channels", c.channels);
    f.get("kernel", c.kernel);
    f.get("stride", c.stride);
    f.get("padding", c.padding);
    f.finish();
    out.push_back(c);
  }
}

inline json conv_specs_json(const std::vector<nn::ConvSpec>& v) {
  json out = json::array();
  for (const auto& c : v) {
    out.push_back({{"channels", c.channels}, {"kernel", c.kernel}, {"stride", c.stride}, {"padding", c.padding}});
  }
  return out;
}

inline void read_fov(const json& j, const std::string& path, scene::FovSpec& v) {
  Fields f(j, path);
  f.get("theta_full", v.theta_full);
  f.get("theta_sub", v.theta_sub);
  f.get("width_px", v.width_px);
  f.get("height_px", v.height_px);
  f.finish();
}

inline json fov_json(const scene::FovSpec& v) {
  return {{"theta_full", v.theta_full}, {"theta_sub", v.theta_sub}, {"width_px", v.width_px}, {"height_px", v.height_px}};
}

inline void read_scene_gen(const json& j, const std::string& path, scene::SceneGenConfig& c) {
  Fields f(j, path);
  f.get("min_width_m", c.min_width_m);
  f.get("max_width_m", c.max_width_m);
  f.get("min_depth_m", c.min_depth_m);
  f.get("max_depth_m", c.max_depth_m);
  f.get("min_height_m", c.min_height_m);
  f.get("max_height_m", c.max_height_m);
  f.get("min_obstacles", c.min_obstacles);
  f.get("max_obstacles", c.max_obstacles);
  f.get("min_obstacle_cells", c.min_obstacle_cells);
  f.get("max_obstacle_cells", c.max_obstacle_cells);
  f.get("min_obstacle_height_m", c.min_obstacle_height_m);
  f.get("max_obstacle_height_m", c.max_obstacle_height_m);
  f.get("min_reflection", c.min_reflection);
  f.get("max_reflection", c.max_reflection);
  f.get("cell_size", c.cell_size);
  f.get("sensor_height", c.sensor_height);
  f.get("max_attempts", c.max_attempts);
  f.finish();
}

inline json scene_gen_json(const scene::SceneGenConfig& c) {
  return {{"min_width_m", c.min_width_m},
          {"max_width_m", c.max_width_m},
          {"min_depth_m", c.min_depth_m},
          {"max_depth_m", c.max_depth_m},
          {"min_height_m", c.min_height_m},
          {"max_height_m", c.max_height_m},
          {"min_obstacles", c.min_obstacles},
          {"max_obstacles", c.max_obstacles},
          {"min_obstacle_cells", c.min_obstacle_cells},
          {"max_obstacle_cells", c.max_obstacle_cells},
          {"min_obstacle_height_m", c.min_obstacle_height_m},
          {"max_obstacle_height_m", c.max_obstacle_height_m},
          {"min_reflection", c.min_reflection},
          {"max_reflection", c.max_reflection},
          {"cell_size", c.cell_size},
          {"sensor_height", c.sensor_height},
          {"max_attempts", c.max_attempts}};
}

inline void read_acoustics(const json& j, const std::string& path, acoustics::AcousticsConfig& c) {
  Fields f(j, path);
  f.get("sample_rate", c.sample_rate);
  f.get("max_order", c.max_order);
  f.get("echo_length", c.echo_length);
  f.get("speed_of_sound", c.speed_of_sound);
  f.get("min_distance", c.min_distance);
  f.get("occlusion_gain", c.occlusion_gain);
  f.get("sweep_duration_s", c.sweep_duration_s);
  f.get("sweep_f_lo", c.sweep_f_lo);
  f.get("sweep_f_hi", c.sweep_f_hi);
  f.get("sweep_amplitude", c.sweep_amplitude);
  f.finish();
}

inline json acoustics_json(const acoustics::AcousticsConfig& c) {
  return {{"sample_rate", c.sample_rate},       {"max_order", c.max_order},
          {"echo_length", c.echo_length},       {"speed_of_sound", c.speed_of_sound},
          {"min_distance", c.min_distance},     {"occlusion_gain", c.occlusion_gain},
          {"sweep_duration_s", c.sweep_duration_s}, {"sweep_f_lo", c.sweep_f_lo},
          {"sweep_f_hi", c.sweep_f_hi},         {"sweep_amplitude", c.sweep_amplitude}};
}

inline void read_head(const json& j, const std::string& path, acoustics::HeadModel& c) {
  Fields f(j, path);
  f.get("ear_separation_m", c.ear_separation_m);
  f.get("contralateral_attenuation", c.contralateral_attenuation);
  f.finish();
}

inline json head_json(const acoustics::HeadModel& c) {
  return {{"ear_separation_m", c.ear_separation_m}, {"contralateral_attenuation", c.contralateral_attenuation}};
}

inline void read_stft(const json& j, const std::string& path, dsp::StftConfig& c) {
  Fields f(j, path);
  f.get("window_length", c.window_length);
  f.get("hop", c.hop);
  f.get("fft_size", c.fft_size);
  f.get("window", c.window, [](const json& v, const std::string& p, dsp::Window& w) {
    const auto s = v.get<std::string>();
    if (s == "hann") {
      w = dsp::Window::kHann;
    } else if (s == "rectangular") {
      w = dsp::Window::kRectangular;
    } else {
      throw ConfigError(p + ": unknown window " + s);
    }
  });
  f.get("pad_tail", c.pad_tail);
  f.get("log_compress", c.log_compress);
  f.finish();
}

inline json stft_json(const dsp::StftConfig& c) {
  return {{"window_length", c.window_length},
          {"hop", c.hop},
          {"fft_size", c.fft_size},
          {"window", c.window == dsp::Window::kHann ? "hann" : "rectangular"},
          {"pad_tail", c.pad_tail},
          {"log_compress", c.log_compress}};
}

inline void read_render(const json& j, const std::string& path, depth::RenderConfig& c) {
  Fields f(j, path);
  f.get("view", c.view, read_fov);
  f.get("max_depth_m", c.max_depth_m);
  f.get("acoustics", c.acoustics, read_acoustics);
  f.get("head", c.head, read_head);
  f.get("stft", c.stft, read_stft);
  f.finish();
}

inline json render_json(const depth::RenderConfig& c) {
  return {{"view", fov_json(c.view)},
          {"max_depth_m", c.max_depth_m},
          {"acoustics", acoustics_json(c.acoustics)},
          {"head", head_json(c.head)},
          {"stft", stft_json(c.stft)}};
}

inline void read_observation(const json& j, const std::string& path, nav::ObservationConfig& c) {
  Fields f(j, path);
  f.get("view", c.view, read_fov);
  f.get("max_depth_m", c.max_depth_m);
  f.get("acoustics", c.acoustics, read_acoustics);
  f.get("head", c.head, read_head);
  f.get("stft", c.stft, read_stft);
  f.finish();
}

inline json observation_json(const nav::ObservationConfig& c) {
  return {{"view", fov_json(c.view)},
          {"max_depth_m", c.max_depth_m},
          {"acoustics", acoustics_json(c.acoustics)},
          {"head", head_json(c.head)},
          {"stft", stft_json(c.stft)}};
}

inline void read_dataset(const json& j, const std::string& path, depth::DatasetSpec& c) {
  Fields f(j, path);
  f.get("train_scenes", c.train_scenes);
  f.get("val_scenes", c.val_scenes);
  f.get("test_scenes", c.test_scenes);
  f.get("poses_per_scene", c.poses_per_scene);
  f.get("scene", c.scene, read_scene_gen);
  f.get("render", c.render, read_render);
  f.finish();
}

inline json dataset_json(const depth::DatasetSpec& c) {
  return {{"train_scenes", c.train_scenes},
          {"val_scenes", c.val_scenes},
          {"test_scenes", c.test_scenes},
          {"poses_per_scene", c.poses_per_scene},
          {"scene", scene_gen_json(c.scene)},
          {"render", render_json(c.render)}};
}

inline void read_depth_arch(const json& j, const std::string& path, depth::DepthArchitecture& a) {
  Fields f(j, path);
  f.get("echo_encoder", a.echo_encoder, read_conv_specs);
  f.get("echo_embedding", a.echo_embedding);
  f.get("vision_encoder", a.vision_encoder, read_conv_specs);
  f.get("decoder", a.decoder, read_conv_specs);
  f.finish();
}

inline json depth_arch_json(const depth::DepthArchitecture& a) {
  return {{"echo_encoder", conv_specs_json(a.echo_encoder)},
          {"echo_embedding", a.echo_embedding},
          {"vision_encoder", conv_specs_json(a.vision_encoder)},
          {"decoder", conv_specs_json(a.decoder)}};
}

inline scene::Side parse_side(const std::string& s) {
  try {
    return depth::parse_side(s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline void read_sides(const json& j, const std::string& path, std::vector<scene::Side>& out) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of side names");
  out.clear();
  for (const auto& v : j) out.push_back(parse_side(v.get<std::string>()));
}

inline json sides_json(const std::vector<scene::Side>& v) {
  json out = json::array();
  for (auto s : v) out.push_back(scene::side_name(s));
  return out;
}

inline void read_modes(const json& j, const std::string& path, std::vector<nav::NavMode>& out) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of navigation modes");
  out.clear();
  for (const auto& v : j) {
    try {
      out.push_back(nav::parse_nav_mode(v.get<std::string>()));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
}

inline json modes_json(const std::vector<nav::NavMode>& v) {
  json out = json::array();
  for (auto m : v) out.push_back(nav::mode_name(m));
  return out;
}

inline void read_depth_section(const json& j, const std::string& path, DepthSection& d) {
  Fields f(j, path);
  f.get("arch", d.arch, read_depth_arch);
  f.get("train", d.train, [](const json& v, const std::string& p, depth::DepthTrainConfig& t) {
    Fields g(v, p);
    g.get("epochs", t.epochs);
    g.get("batch_size", t.batch_size);
    g.get("lr", t.lr);
    g.get("eval_batch", t.eval_batch);
    g.finish();
  });
  f.get("unseen_targets", d.unseen_targets, read_sides);
  f.finish();
}

inline json depth_section_json(const DepthSection& d) {
  return {{"arch", depth_arch_json(d.arch)},
          {"train",
           {{"epochs", d.train.epochs}, {"batch_size", d.train.batch_size}, {"lr", d.train.lr},
            {"eval_batch", d.train.eval_batch}}},
          {"unseen_targets", sides_json(d.unseen_targets)}};
}

inline void read_policy(const json& j, const std::string& path, nav::NavPolicyConfig& c) {
  Fields f(j, path);
  f.get("hidden", c.hidden);
  f.get("embedding", c.embedding);
  f.get("echo_convs", c.echo_convs, read_conv_specs);
  f.get("vision_convs", c.vision_convs, read_conv_specs);
  f.finish();
}

inline json policy_json(const nav::NavPolicyConfig& c) {
  return {{"hidden", c.hidden},
          {"embedding", c.embedding},
          {"echo_convs", conv_specs_json(c.echo_convs)},
          {"vision_convs", conv_specs_json(c.vision_convs)}};
}

inline void read_ppo(const json& j, const std::string& path, nav::PpoConfig& c) {
  Fields f(j, path);
  f.get("streams", c.streams);
  f.get("rollout", c.rollout);
  f.get("epochs", c.epochs);
  f.get("minibatches", c.minibatches);
  f.get("clip", c.clip);
  f.get("gamma", c.gamma);
  f.get("lambda", c.lambda);
  f.get("entropy_coef", c.entropy_coef);
  f.get("value_coef", c.value_coef);
  f.get("lr", c.lr);
  f.get("max_grad_norm", c.max_grad_norm);
  f.get("linear_lr_decay", c.linear_lr_decay);
  f.get("updates", c.updates);
  f.get("min_episode_cells", c.min_episode_cells);
  f.get("eval_every", c.eval_every);
  f.get("keep_best", c.keep_best);
  f.finish();
}

inline json ppo_json(const nav::PpoConfig& c) {
  return {{"streams", c.streams},
          {"rollout", c.rollout},
          {"epochs", c.epochs},
          {"minibatches", c.minibatches},
          {"clip", c.clip},
          {"gamma", c.gamma},
          {"lambda", c.lambda},
          {"entropy_coef", c.entropy_coef},
          {"value_coef", c.value_coef},
          {"lr", c.lr},
          {"max_grad_norm", c.max_grad_norm},
          {"linear_lr_decay", c.linear_lr_decay},
          {"updates", c.updates},
          {"min_episode_cells", c.min_episode_cells},
          {"eval_every", c.eval_every},
          {"keep_best", c.keep_best}};
}

inline void read_reward(const json& j, const std::string& path, nav::RewardConfig& c) {
  Fields f(j, path);
  f.get("success_reward", c.success_reward);
  f.get("slack_reward", c.slack_reward);
  f.get("shaping_scale", c.shaping_scale);
  f.get("success_radius_cells", c.success_radius_cells);
  f.finish();
}

inline json reward_json(const nav::RewardConfig& c) {
  return {{"success_reward", c.success_reward},
          {"slack_reward", c.slack_reward},
          {"shaping_scale", c.shaping_scale},
          {"success_radius_cells", c.success_radius_cells}};
}

inline void read_nav_section(const json& j, const std::string& path, NavSection& n) {
  Fields f(j, path);
  f.get("scene", n.scene, read_scene_gen);
  f.get("observation", n.observation, read_observation);
  f.get("train_scenes", n.train_scenes);
  f.get("val_scenes", n.val_scenes);
  f.get("test_scenes", n.test_scenes);
  f.get("val_episodes_per_scene", n.val_episodes_per_scene);
  f.get("test_episodes_per_scene", n.test_episodes_per_scene);
  f.get("policy", n.policy, read_policy);
  f.get("ppo", n.ppo, read_ppo);
  f.get("reward", n.reward, read_reward);
  f.get("table3_modes", n.table3_modes, read_modes);
  f.get("table4_modes", n.table4_modes, read_modes);
  f.get("est_depth_checkpoint", n.est_depth_checkpoint);
  f.finish();
}

inline json nav_section_json(const NavSection& n) {
  return {{"scene", scene_gen_json(n.scene)},
          {"observation", observation_json(n.observation)},
          {"train_scenes", n.train_scenes},
          {"val_scenes", n.val_scenes},
          {"test_scenes", n.test_scenes},
          {"val_episodes_per_scene", n.val_episodes_per_scene},
          {"test_episodes_per_scene", n.test_episodes_per_scene},
          {"policy", policy_json(n.policy)},
          {"ppo", ppo_json(n.ppo)},
          {"reward", reward_json(n.reward)},
          {"table3_modes", modes_json(n.table3_modes)},
          {"table4_modes", modes_json(n.table4_modes)},
          {"est_depth_checkpoint", n.est_depth_checkpoint}};
}

// ---------------------------------------------------------------------------
// Whole configuration

inline void validate(const ExperimentConfig& c) {
  if (c.seeds.empty()) throw ConfigError("at least one seed is required");
  if (c.jobs < 1) throw ConfigError("jobs must be at least 1");
  const auto& d = c.dataset;
  if (d.train_scenes < 1 || d.val_scenes < 1 || d.test_scenes < 1 || d.poses_per_scene < 1) {
    throw ConfigError("dataset needs at least one scene per split and one pose per scene");
  }
  scene::validate(d.scene);
  scene::validate(d.render.view);
  acoustics::validate(d.render.acoustics);
  d.render.head.validate();
  if (c.depth.train.epochs < 1 || c.depth.train.batch_size < 2 || c.depth.train.eval_batch < 1 ||
      !(c.depth.train.lr > 0.0)) {
    throw ConfigError("depth training needs epochs >= 1, batch_size >= 2, eval_batch >= 1 and lr > 0");
  }
  const auto& n = c.nav;
  if (n.train_scenes < 1 || n.val_scenes < 0 || n.test_scenes < 1 || n.test_episodes_per_scene < 1 ||
      n.val_episodes_per_scene < 0) {
    throw ConfigError("navigation scene and episode counts are invalid");
  }
  scene::validate(n.scene);
  scene::validate(n.observation.view);
  if (n.ppo.updates < 1 || n.ppo.streams < 1 || n.ppo.rollout < 1 || n.ppo.minibatches < 1 ||
      n.ppo.streams % n.ppo.minibatches != 0) {
    throw ConfigError("ppo needs updates, streams and rollout >= 1 and streams divisible by minibatches");
  }
  for (auto side : c.depth.unseen_targets) {
    if (side == scene::Side::kFront) throw ConfigError("depth.unseen_targets must not contain front");
  }
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Fields f(j, "");
  f.get("seeds", c.seeds);
  f.get("jobs", c.jobs);
  f.get("dataset", c.dataset, read_dataset);
  f.get("depth", c.depth, read_depth_section);
  f.get("nav", c.nav, read_nav_section);
  f.finish();
  validate(c);
  return c;
}

inline json to_json(const ExperimentConfig& c) {
  return {{"seeds", c.seeds},
          {"jobs", c.jobs},
          {"dataset", dataset_json(c.dataset)},
          {"depth", depth_section_json(c.depth)},
          {"nav", nav_section_json(c.nav)}};
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

/// FNV-1a over the canonical (sorted-key) dump, as 16 hex digits.
inline std::string fingerprint(const json& j) { return hex64(fnv1a64(j.dump())); }

/// Fingerprint of what determines outputs: `jobs` only changes scheduling.
inline std::string config_fingerprint(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("jobs");
  return fingerprint(j);
}

}  // namespace echonav::app

#endif  // ECHONAV_APP_CONFIG_HPP_
