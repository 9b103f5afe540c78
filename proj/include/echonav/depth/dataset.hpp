#ifndef ECHONAV_DEPTH_DATASET_HPP_
#define ECHONAV_DEPTH_DATASET_HPP_

// Depth samples (four-orientation echoes, RGB and depth per pose), the task
// description that selects model inputs and targets, and batch assembly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "echonav/acoustics.hpp"
#include "echonav/dsp.hpp"
#include "echonav/nn/tensor.hpp"
#include "echonav/parallel.hpp"
#include "echonav/scene.hpp"

namespace echonav::depth {

using scene::Side;

/// Everything needed to render one pose.
struct RenderConfig {
  scene::FovSpec view{120.0, 120.0, 128, 128};
  double max_depth_m = 10.0;
  acoustics::AcousticsConfig acoustics;
  acoustics::HeadModel head;
  dsp::StftConfig stft;

  bool operator==(const RenderConfig&) const = default;
};

struct SampleGeometry {
  int freq_bins = 0;
  int frames = 0;
  int height = 0;
  int width = 0;
  double theta_full = 120.0;
  double max_depth_m = 10.0;

  bool operator==(const SampleGeometry&) const = default;

  std::size_t echo_size() const { return 2u * static_cast<std::size_t>(freq_bins) * frames; }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
};

inline SampleGeometry geometry_of(const RenderConfig& c) {
  return {c.stft.freq_bins(), c.stft.frame_count(static_cast<std::size_t>(c.acoustics.echo_length)),
          c.view.height_px, c.view.width_px, c.view.theta_full, c.max_depth_m};
}

/// One pose. Arrays are indexed by Side (front, right, back, left relative to
/// the pose heading).
struct DepthSample {
  std::string scene_id;
  scene::Pose pose;
  std::array<std::vector<float>, 4> echoes;        // 2 x F x T magnitude spectrogram
  std::array<std::vector<std::uint8_t>, 4> rgb;    // 3 x H x W, 8-bit
  std::array<std::vector<float>, 4> depth;         // H x W, normalized to [0, 1]
};

struct DepthDataset {
  SampleGeometry geometry;
  std::vector<DepthSample> train;
  std::vector<DepthSample> val;
  std::vector<DepthSample> test;
};

inline std::uint8_t quantize_unit(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline DepthSample make_sample(const scene::Scene& s, const scene::Pose& pose, const RenderConfig& cfg) {
  DepthSample out;
  out.scene_id = s.id;
  out.pose = pose;
  const auto echoes = acoustics::simulate_echo_set(s, pose, cfg.head, cfg.acoustics);
  for (std::size_t i = 0; i < 4; ++i) {
    out.echoes[i] = dsp::echo_spectrogram(echoes[i], cfg.stft).values;
    const auto view = scene::render_view(s, scene::facing(pose, scene::kAllSides[i]), cfg.view, cfg.max_depth_m);
    out.depth[i] = view.depth.values;
    out.rgb[i].resize(view.rgb.values.size());
    for (std::size_t k = 0; k < view.rgb.values.size(); ++k) out.rgb[i][k] = quantize_unit(view.rgb.values[k]);
  }
  return out;
}

/// `count` poses on navigable points with axis-aligned headings, distinct
/// while the scene has enough (point, heading) pairs.
inline std::vector<scene::Pose> sample_poses(const scene::Scene& s, int count, std::mt19937_64& rng) {
  const auto points = scene::navigable_points(s);
  if (points.empty()) throw std::invalid_argument("scene has no navigable points");
  std::vector<scene::Pose> all;
  for (const auto& p : points) {
    for (int h : {0, 90, 180, 270}) all.push_back({p, h});
  }
  std::vector<scene::Pose> out;
  while (static_cast<int>(out.size()) < count) {
    std::vector<scene::Pose> pool = all;
    std::shuffle(pool.begin(), pool.end(), rng);
    for (const auto& p : pool) {
      if (static_cast<int>(out.size()) == count) break;
      out.push_back(p);
    }
  }
  return out;
}

/// Scene counts per split and poses per scene for an in-memory dataset.
struct DatasetSpec {
  int train_scenes = 40;
  int val_scenes = 5;
  int test_scenes = 5;
  int poses_per_scene = 50;
  scene::SceneGenConfig scene;
  RenderConfig render;

  bool operator==(const DatasetSpec&) const = default;

  int total_scenes() const { return train_scenes + val_scenes + test_scenes; }
};

inline std::string scene_id(int index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "scene-%04d", index);
  return buf;
}

/// Scene `index` of a dataset and its poses; depends only on (seed, index).
inline scene::Scene dataset_scene(const DatasetSpec& spec, std::uint64_t seed, int index) {
  scene::Scene s = scene::generate_scene(derive_seed(seed, static_cast<std::uint64_t>(2 * index)), spec.scene);
  s.id = scene_id(index);
  return s;
}

inline std::vector<scene::Pose> dataset_poses(const DatasetSpec& spec, const scene::Scene& s, std::uint64_t seed,
                                              int index) {
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(2 * index + 1)));
  return sample_poses(s, spec.poses_per_scene, rng);
}

/// Scenes [0, train) train, then val, then test; rendered in parallel across
/// scenes with results independent of `jobs`.
inline DepthDataset generate_dataset(const DatasetSpec& spec, std::uint64_t seed, int jobs = 1) {
  if (spec.train_scenes < 1 || spec.val_scenes < 0 || spec.test_scenes < 0 || spec.poses_per_scene < 1) {
    throw std::invalid_argument("invalid dataset spec");
  }
  const int n = spec.total_scenes();
  std::vector<std::vector<DepthSample>> per_scene(static_cast<std::size_t>(n));
  parallel_chunks(static_cast<std::size_t>(n), jobs, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto s = dataset_scene(spec, seed, static_cast<int>(i));
      for (const auto& pose : dataset_poses(spec, s, seed, static_cast<int>(i))) {
        per_scene[i].push_back(make_sample(s, pose, spec.render));
      }
    }
  });
  DepthDataset d;
  d.geometry = geometry_of(spec.render);
  for (int i = 0; i < n; ++i) {
    auto& dst = i < spec.train_scenes ? d.train : (i < spec.train_scenes + spec.val_scenes ? d.val : d.test);
    for (auto& smp : per_scene[static_cast<std::size_t>(i)]) dst.push_back(std::move(smp));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Tasks and batches

enum class InputMode { kRgbOnly, kEchoesOnly, kEchoesRgb, kRgbThreeViews };

inline const char* mode_name(InputMode m) {
  switch (m) {
    case InputMode::kRgbOnly: return "rgb_only";
    case InputMode::kEchoesOnly: return "echoes_only";
    case InputMode::kEchoesRgb: return "echoes+rgb";
    case InputMode::kRgbThreeViews: return "rgb_three_views";
  }
  return "?";
}

inline InputMode parse_mode(const std::string& s) {
  for (InputMode m : {InputMode::kRgbOnly, InputMode::kEchoesOnly, InputMode::kEchoesRgb, InputMode::kRgbThreeViews}) {
    if (s == mode_name(m)) return m;
  }
  throw std::invalid_argument("unknown depth input mode " + s);
}

inline Side parse_side(const std::string& s) {
  for (Side side : scene::kAllSides) {
    if (s == scene::side_name(side)) return side;
  }
  throw std::invalid_argument("unknown orientation " + s);
}

/// What a model consumes and predicts.
struct DepthTask {
  int echo_orientations = 4;  // 0, 1 (front only) or 4 (front, right, back, left)
  int rgb_views = 1;          // 0, 1 (front) or 3 (the sides other than the target)
  double rgb_fov_deg = 120.0;
  double target_fov_deg = 120.0;
  Side target = Side::kFront;

  bool operator==(const DepthTask&) const = default;
};

inline void validate(const DepthTask& t, double theta_full) {
  if (t.echo_orientations != 0 && t.echo_orientations != 1 && t.echo_orientations != 4) {
    throw std::invalid_argument("echo orientations must be 0, 1 or 4");
  }
  if (t.rgb_views != 0 && t.rgb_views != 1 && t.rgb_views != 3) {
    throw std::invalid_argument("rgb views must be 0, 1 or 3");
  }
  if (t.echo_orientations == 0 && t.rgb_views == 0) throw std::invalid_argument("task has no inputs");
  if (t.rgb_views > 0 && t.rgb_fov_deg > t.target_fov_deg) {
    throw std::invalid_argument("rgb fov exceeds target fov");
  }
  scene::fov_width(1, theta_full, t.rgb_fov_deg);
  scene::fov_width(1, theta_full, t.target_fov_deg);
}

inline DepthTask task_for(InputMode mode, Side target, double rgb_fov_deg, double target_fov_deg) {
  DepthTask t;
  t.target = target;
  t.rgb_fov_deg = rgb_fov_deg;
  t.target_fov_deg = target_fov_deg;
  switch (mode) {
    case InputMode::kRgbOnly: t.echo_orientations = 0; break;
    case InputMode::kEchoesOnly: t.rgb_views = 0; break;
    case InputMode::kEchoesRgb: break;
    case InputMode::kRgbThreeViews:
      t.echo_orientations = 0;
      t.rgb_views = 3;
      break;
  }
  return t;
}

inline std::vector<Side> echo_sides(const DepthTask& t) {
  if (t.echo_orientations == 1) return {Side::kFront};
  if (t.echo_orientations == 4) return {scene::kAllSides.begin(), scene::kAllSides.end()};
  return {};
}

inline std::vector<Side> rgb_sides(const DepthTask& t) {
  if (t.rgb_views == 1) return {Side::kFront};
  std::vector<Side> out;
  if (t.rgb_views == 3) {
    for (Side s : scene::kAllSides) {
      if (s != t.target) out.push_back(s);
    }
  }
  return out;
}

/// 1 inside the centered column band of `fov_deg`, per pixel.
inline std::vector<std::uint8_t> fov_column_mask(const SampleGeometry& g, double fov_deg) {
  const int band = scene::fov_width(g.width, g.theta_full, fov_deg);
  const int start = (g.width - band) / 2;
  std::vector<std::uint8_t> m(g.pixels(), 0);
  for (int r = 0; r < g.height; ++r) {
    for (int c = start; c < start + band; ++c) m[static_cast<std::size_t>(r) * g.width + c] = 1;
  }
  return m;
}

/// Affine normalization applied to spectrogram inputs.
struct EchoNormalization {
  double mean = 0.0;
  double std = 1.0;

  bool operator==(const EchoNormalization&) const = default;
};

inline EchoNormalization fit_echo_normalization(const std::vector<DepthSample>& samples) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& s : samples) {
    for (const auto& e : s.echoes) {
      for (float v : e) {
        sum += v;
        sq += static_cast<double>(v) * v;
        ++n;
      }
    }
  }
  if (n == 0) return {};
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(sq / static_cast<double>(n) - mean * mean, 1e-20);
  return {mean, std::sqrt(var)};
}

template <class T>
struct DepthBatch {
  int size = 0;
  nn::Tensor<T> echoes;  // [B * O, 2, F, T], orientation-minor
  nn::Tensor<T> rgb;     // [B, 3V, H, W], masked to the rgb fov
  nn::Tensor<T> target;  // [B, 1, H, W]
  std::vector<std::uint8_t> mask;  // per target element: inside target fov and depth > 0
};

template <class T>
DepthBatch<T> make_batch(const std::vector<const DepthSample*>& samples, const DepthTask& task,
                         const SampleGeometry& g, const EchoNormalization& norm) {
  if (samples.empty()) throw std::invalid_argument("empty batch");
  DepthBatch<T> b;
  b.size = static_cast<int>(samples.size());
  const auto esides = echo_sides(task);
  const auto rsides = rgb_sides(task);
  const std::size_t hw = g.pixels();
  if (!esides.empty()) {
    b.echoes = nn::Tensor<T>({b.size * static_cast<int>(esides.size()), 2, g.freq_bins, g.frames});
    T* dst = b.echoes.ptr();
    const double inv = 1.0 / norm.std;
    for (const auto* s : samples) {
      for (Side side : esides) {
        const auto& e = s->echoes[static_cast<std::size_t>(side)];
        if (e.size() != g.echo_size()) throw std::invalid_argument("echo spectrogram shape mismatch");
        for (float v : e) *dst++ = static_cast<T>((v - norm.mean) * inv);
      }
    }
  }
  if (!rsides.empty()) {
    const auto rgb_mask = fov_column_mask(g, task.rgb_fov_deg);
    b.rgb = nn::Tensor<T>({b.size, 3 * static_cast<int>(rsides.size()), g.height, g.width});
    T* dst = b.rgb.ptr();
    for (const auto* s : samples) {
      for (Side side : rsides) {
        const auto& im = s->rgb[static_cast<std::size_t>(side)];
        if (im.size() != 3 * hw) throw std::invalid_argument("rgb shape mismatch");
        for (std::size_t k = 0; k < im.size(); ++k) {
          *dst++ = rgb_mask[k % hw] ? static_cast<T>(im[k]) / T(255) : T(0);
        }
      }
    }
  }
  const auto target_mask = fov_column_mask(g, task.target_fov_deg);
  b.target = nn::Tensor<T>({b.size, 1, g.height, g.width});
  b.mask.resize(b.target.size());
  for (int i = 0; i < b.size; ++i) {
    const auto& d = samples[static_cast<std::size_t>(i)]->depth[static_cast<std::size_t>(task.target)];
    if (d.size() != hw) throw std::invalid_argument("depth shape mismatch");
    for (std::size_t k = 0; k < hw; ++k) {
      b.target[i * hw + k] = static_cast<T>(d[k]);
      b.mask[i * hw + k] = (target_mask[k] && d[k] > 0.0f) ? 1 : 0;
    }
  }
  return b;
}

}  // namespace echonav::depth

#endif  // ECHONAV_DEPTH_DATASET_HPP_
