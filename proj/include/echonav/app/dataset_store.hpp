#ifndef ECHONAV_APP_DATASET_STORE_HPP_
#define ECHONAV_APP_DATASET_STORE_HPP_

// On-disk depth datasets. Layout under the output directory:
//   manifest.json
//   scenes/scene-NNNN/scene.json      scene definition
//   scenes/scene-NNNN/echoes.ecnv     [poses, 4, 2, F*T] spectrograms
//   scenes/scene-NNNN/rgb.ecnv        [poses, 4, 3, H*W] 8-bit levels / 255
//   scenes/scene-NNNN/depth.ecnv      [poses, 4, H, W] normalized depth
//   scenes/scene-NNNN/complete.json   fingerprint and poses, written last
// A scene whose complete.json carries the expected fingerprint is reused.

#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "echonav/app/config.hpp"
#include "echonav/depth.hpp"
#include "echonav/io/float_array.hpp"
#include "echonav/parallel.hpp"

namespace echonav::app {

namespace fs = std::filesystem;

inline constexpr int kManifestVersion = 1;

inline const char* split_name(int scene_index, const depth::DatasetSpec& spec) {
  if (scene_index < spec.train_scenes) return "train";
  if (scene_index < spec.train_scenes + spec.val_scenes) return "val";
  return "test";
}

/// Everything that determines the bytes of one scene directory.
inline std::string scene_fingerprint(const depth::DatasetSpec& spec, std::uint64_t seed, int index) {
  return fingerprint({{"dataset", dataset_json(spec)}, {"seed", seed}, {"scene", index}});
}

inline json pose_json(const scene::Pose& p) {
  return {{"x", p.position.x}, {"y", p.position.y}, {"z", p.position.z}, {"heading", p.heading}};
}

inline scene::Pose pose_from_json(const json& j) {
  return {{j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>()}, j.at("heading").get<int>()};
}

inline void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f << text;
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline fs::path scene_dir(const fs::path& root, int index) { return root / "scenes" / depth::scene_id(index); }

/// Returns true when the scene directory was already complete.
inline bool build_scene(const fs::path& root, const depth::DatasetSpec& spec, std::uint64_t seed, int index) {
  const fs::path dir = scene_dir(root, index);
  const std::string fp = scene_fingerprint(spec, seed, index);
  const fs::path marker = dir / "complete.json";
  if (fs::exists(marker)) {
    const json done = json::parse(read_text(marker));
    if (done.at("fingerprint").get<std::string>() != fp) {
      throw std::runtime_error(dir.string() + " was built with a different configuration or seed");
    }
    return true;
  }
  fs::create_directories(dir);
  const scene::Scene s = depth::dataset_scene(spec, seed, index);
  const auto poses = depth::dataset_poses(spec, s, seed, index);
  const auto g = depth::geometry_of(spec.render);
  const auto P = static_cast<std::uint32_t>(poses.size());
  io::FloatArray echoes{{P, 4, 2, static_cast<std::uint32_t>(g.freq_bins * g.frames)}, {}, 0.0f,
                        io::ArrayKind::kSpectrogram};
  io::FloatArray rgb{{P, 4, 3, static_cast<std::uint32_t>(g.pixels())}, {}, 0.0f, io::ArrayKind::kRgb};
  io::FloatArray dep{{P, 4, static_cast<std::uint32_t>(g.height), static_cast<std::uint32_t>(g.width)},
                     {},
                     static_cast<float>(g.max_depth_m),
                     io::ArrayKind::kDepth};
  for (const auto& pose : poses) {
    const depth::DepthSample smp = depth::make_sample(s, pose, spec.render);
    for (int k = 0; k < 4; ++k) {
      echoes.values.insert(echoes.values.end(), smp.echoes[k].begin(), smp.echoes[k].end());
      for (std::uint8_t v : smp.rgb[k]) rgb.values.push_back(static_cast<float>(v) / 255.0f);
      dep.values.insert(dep.values.end(), smp.depth[k].begin(), smp.depth[k].end());
    }
  }
  write_text(dir / "scene.json", scene::to_json(s).dump(2) + "\n");
  io::write_file(dir / "echoes.ecnv", echoes);
  io::write_file(dir / "rgb.ecnv", rgb);
  io::write_file(dir / "depth.ecnv", dep);
  json done{{"fingerprint", fp}, {"poses", json::array()}};
  for (const auto& p : poses) done["poses"].push_back(pose_json(p));
  write_text(marker, done.dump(2) + "\n");
  return false;
}

struct BuildReport {
  json manifest;
  int built = 0;
  int reused = 0;
};

/// Generates (or resumes) the dataset and writes manifest.json.
inline BuildReport dataset_build(const fs::path& root, const ExperimentConfig& cfg, std::uint64_t seed, int jobs = 1,
                                 const std::function<void(int, bool)>& on_scene = {}) {
  const auto& spec = cfg.dataset;
  const int n = spec.total_scenes();
  fs::create_directories(root / "scenes");
  std::vector<int> reused(static_cast<std::size_t>(n), 0);
  parallel_chunks(static_cast<std::size_t>(n), jobs, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) reused[i] = build_scene(root, spec, seed, static_cast<int>(i)) ? 1 : 0;
  });
  BuildReport rep;
  json m;
  m["version"] = kManifestVersion;
  m["seed"] = seed;
  m["dataset"] = dataset_json(spec);
  m["fingerprint"] = fingerprint({{"dataset", dataset_json(spec)}, {"seed", seed}});
  m["splits"] = {{"train", json::array()}, {"val", json::array()}, {"test", json::array()}};
  m["samples"] = json::array();
  for (int i = 0; i < n; ++i) {
    (reused[static_cast<std::size_t>(i)] ? rep.reused : rep.built) += 1;
    if (on_scene) on_scene(i, reused[static_cast<std::size_t>(i)] != 0);
    const std::string id = depth::scene_id(i);
    const char* split = split_name(i, spec);
    m["splits"][split].push_back(id);
    const json done = json::parse(read_text(scene_dir(root, i) / "complete.json"));
    const std::string rel = "scenes/" + id + "/";
    int k = 0;
    for (const auto& p : done.at("poses")) {
      m["samples"].push_back({{"scene", id},
                              {"split", split},
                              {"index", k++},
                              {"pose", p},
                              {"files",
                               {{"echoes", rel + "echoes.ecnv"},
                                {"rgb", rel + "rgb.ecnv"},
                                {"depth", rel + "depth.ecnv"},
                                {"scene", rel + "scene.json"}}}});
    }
  }
  m["sample_count"] = m["samples"].size();
  write_text(root / "manifest.json", m.dump(2) + "\n");
  rep.manifest = std::move(m);
  return rep;
}

/// Loads every split listed in the manifest back into memory.
inline depth::DepthDataset load_dataset(const fs::path& root) {
  const json m = json::parse(read_text(root / "manifest.json"));
  if (m.at("version").get<int>() != kManifestVersion) throw std::runtime_error("unsupported manifest version");
  depth::DatasetSpec spec;
  read_dataset(m.at("dataset"), "manifest.dataset", spec);
  depth::DepthDataset d;
  d.geometry = depth::geometry_of(spec.render);
  const std::size_t es = d.geometry.echo_size(), hw = d.geometry.pixels();
  for (const char* split : {"train", "val", "test"}) {
    auto& dst = std::string(split) == "train" ? d.train : (std::string(split) == "val" ? d.val : d.test);
    for (const auto& idj : m.at("splits").at(split)) {
      const std::string id = idj.get<std::string>();
      const fs::path dir = root / "scenes" / id;
      const json done = json::parse(read_text(dir / "complete.json"));
      const auto echoes = io::read_file(dir / "echoes.ecnv");
      const auto rgb = io::read_file(dir / "rgb.ecnv");
      const auto dep = io::read_file(dir / "depth.ecnv");
      const std::size_t P = done.at("poses").size();
      if (echoes.values.size() != P * 4 * es || rgb.values.size() != P * 4 * 3 * hw ||
          dep.values.size() != P * 4 * hw) {
        throw std::runtime_error(dir.string() + ": array sizes do not match the manifest geometry");
      }
      for (std::size_t p = 0; p < P; ++p) {
        depth::DepthSample s;
        s.scene_id = id;
        s.pose = pose_from_json(done.at("poses")[p]);
        for (std::size_t k = 0; k < 4; ++k) {
          const std::size_t slot = 4 * p + k;
          s.echoes[k].assign(echoes.values.begin() + slot * es, echoes.values.begin() + (slot + 1) * es);
          s.depth[k].assign(dep.values.begin() + slot * hw, dep.values.begin() + (slot + 1) * hw);
          s.rgb[k].resize(3 * hw);
          for (std::size_t q = 0; q < 3 * hw; ++q) s.rgb[k][q] = depth::quantize_unit(rgb.values[slot * 3 * hw + q]);
        }
        dst.push_back(std::move(s));
      }
    }
  }
  return d;
}

}  // namespace echonav::app

#endif  // ECHONAV_APP_DATASET_STORE_HPP_
