#ifndef ECHONAV_NAV_OBSERVATION_HPP_
#define ECHONAV_NAV_OBSERVATION_HPP_

// Navigation modes and per-scene observation tables. Every (free cell,
// heading) slot holds the rendered RGB, depth and one binaural echo
// spectrogram at that heading, computed once per scene.

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "echonav/acoustics.hpp"
#include "echonav/dsp.hpp"
#include "echonav/nav/env.hpp"
#include "echonav/parallel.hpp"
#include "echonav/scene.hpp"

namespace echonav::nav {

enum class NavMode { kBlind, kRgb, kDepth, kEchoes, kEchoesRgb, kEchoesDepth, kEstDepth };

inline constexpr std::array<NavMode, 7> kAllModes = {NavMode::kBlind,     NavMode::kRgb,        NavMode::kDepth,
                                                     NavMode::kEchoes,    NavMode::kEchoesRgb,  NavMode::kEchoesDepth,
                                                     NavMode::kEstDepth};

inline const char* mode_name(NavMode m) {
  switch (m) {
    case NavMode::kBlind: return "blind";
    case NavMode::kRgb: return "rgb";
    case NavMode::kDepth: return "depth";
    case NavMode::kEchoes: return "echoes";
    case NavMode::kEchoesRgb: return "echoes+rgb";
    case NavMode::kEchoesDepth: return "echoes+depth";
    case NavMode::kEstDepth: return "est-depth";
  }
  return "?";
}

inline NavMode parse_nav_mode(const std::string& s) {
  for (NavMode m : kAllModes) {
    if (s == mode_name(m)) return m;
  }
  throw std::invalid_argument("unknown navigation mode " + s);
}

enum class VisionInput { kNone, kRgb, kDepth };

inline bool uses_echo(NavMode m) {
  return m == NavMode::kEchoes || m == NavMode::kEchoesRgb || m == NavMode::kEchoesDepth;
}

/// Estimated depth feeds the same single-channel vision path as true depth.
inline VisionInput vision_input(NavMode m) {
  switch (m) {
    case NavMode::kRgb:
    case NavMode::kEchoesRgb: return VisionInput::kRgb;
    case NavMode::kDepth:
    case NavMode::kEchoesDepth:
    case NavMode::kEstDepth: return VisionInput::kDepth;
    default: return VisionInput::kNone;
  }
}

inline int vision_channels(NavMode m) {
  switch (vision_input(m)) {
    case VisionInput::kRgb: return 3;
    case VisionInput::kDepth: return 1;
    case VisionInput::kNone: return 0;
  }
  return 0;
}

struct ObservationConfig {
  scene::FovSpec view{120.0, 120.0, 16, 16};
  double max_depth_m = 10.0;
  acoustics::AcousticsConfig acoustics;
  acoustics::HeadModel head;
  dsp::StftConfig stft;

  bool operator==(const ObservationConfig&) const = default;

  int freq_bins() const { return stft.freq_bins(); }
  int frames() const { return stft.frame_count(static_cast<std::size_t>(acoustics.echo_length)); }
  std::size_t echo_size() const { return 2u * static_cast<std::size_t>(freq_bins()) * frames(); }
  std::size_t pixels() const { return static_cast<std::size_t>(view.width_px) * view.height_px; }
};

struct ObservationNeeds {
  bool rgb = false;
  bool depth = false;
  bool echo = false;
};

/// What a mode reads. Estimated depth is derived from echoes and RGB.
inline ObservationNeeds needs_for(NavMode m) {
  ObservationNeeds n;
  n.echo = uses_echo(m) || m == NavMode::kEstDepth;
  n.rgb = vision_input(m) == VisionInput::kRgb || m == NavMode::kEstDepth;
  n.depth = m == NavMode::kDepth || m == NavMode::kEchoesDepth;
  return n;
}

inline int heading_index(int heading) { return scene::Pose::normalize_heading(heading) / 90; }

class SceneObservations {
 public:
  SceneObservations(std::shared_ptr<const scene::Scene> s, const ObservationConfig& cfg, ObservationNeeds needs,
                    int jobs = 1)
      : scene_(std::move(s)), cfg_(cfg), needs_(needs) {
    scene::validate(cfg_.view);
    cells_ = scene::free_cells(*scene_);
    index_.assign(static_cast<std::size_t>(scene_->grid_cols()) * scene_->grid_rows(), -1);
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      index_[static_cast<std::size_t>(cells_[i].row) * scene_->grid_cols() + cells_[i].col] = static_cast<int>(i);
    }
    const std::size_t slots = 4 * cells_.size();
    if (needs_.rgb) rgb_.resize(slots * 3 * cfg_.pixels());
    if (needs_.depth) depth_.resize(slots * cfg_.pixels());
    if (needs_.echo) echo_.resize(slots * cfg_.echo_size());
    parallel_chunks(cells_.size(), jobs, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) fill_cell(i);
    });
  }

  const scene::Scene& scene() const { return *scene_; }
  std::shared_ptr<const scene::Scene> scene_ptr() const { return scene_; }
  const ObservationConfig& config() const { return cfg_; }
  const ObservationNeeds& needs() const { return needs_; }
  std::size_t slot_count() const { return 4 * cells_.size(); }

  std::size_t slot(const scene::Pose& p) const {
    const scene::Cell c = require_cell(*scene_, p.position);
    const int i = index_[static_cast<std::size_t>(c.row) * scene_->grid_cols() + c.col];
    return 4 * static_cast<std::size_t>(i) + static_cast<std::size_t>(heading_index(p.heading));
  }

  scene::Pose slot_pose(std::size_t slot) const {
    const scene::Cell c = cells_.at(slot / 4);
    return {scene_->cell_center(c.col, c.row), static_cast<int>(slot % 4) * 90};
  }

  const float* rgb(std::size_t slot) const { return require(rgb_, "rgb") + slot * 3 * cfg_.pixels(); }
  const float* depth(std::size_t slot) const { return require(depth_, "depth") + slot * cfg_.pixels(); }
  const float* echo(std::size_t slot) const { return require(echo_, "echo") + slot * cfg_.echo_size(); }

  /// Replaces (or creates) the depth table, e.g. with model estimates.
  void set_depth(std::vector<float> values) {
    if (values.size() != slot_count() * cfg_.pixels()) throw std::invalid_argument("depth table size mismatch");
    depth_ = std::move(values);
    needs_.depth = true;
  }

  const std::vector<float>& echo_table() const { return echo_; }

 private:
  const float* require(const std::vector<float>& v, const char* what) const {
    if (v.empty()) throw std::logic_error(std::string("observation table has no ") + what);
    return v.data();
  }

  void fill_cell(std::size_t i) {
    const scene::Cell c = cells_[i];
    const Vec3 pos = scene_->cell_center(c.col, c.row);
    const std::size_t hw = cfg_.pixels();
    for (int h = 0; h < 4; ++h) {
      const std::size_t slot = 4 * i + static_cast<std::size_t>(h);
      const scene::Pose pose{pos, 90 * h};
      if (needs_.rgb || needs_.depth) {
        const auto view = scene::render_view(*scene_, pose, cfg_.view, cfg_.max_depth_m);
        if (needs_.rgb) std::copy(view.rgb.values.begin(), view.rgb.values.end(), rgb_.begin() + slot * 3 * hw);
        if (needs_.depth) std::copy(view.depth.values.begin(), view.depth.values.end(), depth_.begin() + slot * hw);
      }
      if (needs_.echo) {
        const auto e = acoustics::simulate_echo(*scene_, pose, cfg_.head, cfg_.acoustics);
        const auto spec = dsp::echo_spectrogram(e, cfg_.stft);
        std::copy(spec.values.begin(), spec.values.end(), echo_.begin() + slot * cfg_.echo_size());
      }
    }
  }

  std::shared_ptr<const scene::Scene> scene_;
  ObservationConfig cfg_;
  ObservationNeeds needs_;
  std::vector<scene::Cell> cells_;
  std::vector<int> index_;
  std::vector<float> rgb_, depth_, echo_;
};

/// Mean and standard deviation over all echo entries of the given tables.
struct EchoScale {
  double mean = 0.0;
  double std = 1.0;

  bool operator==(const EchoScale&) const = default;
};

inline EchoScale fit_echo_scale(const std::vector<const SceneObservations*>& obs) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto* o : obs) {
    for (float v : o->echo_table()) {
      sum += v;
      sq += static_cast<double>(v) * v;
      ++n;
    }
  }
  if (n == 0) return {};
  const double mean = sum / static_cast<double>(n);
  return {mean, std::sqrt(std::max(sq / static_cast<double>(n) - mean * mean, 1e-20))};
}

}  // namespace echonav::nav

#endif  // ECHONAV_NAV_OBSERVATION_HPP_
