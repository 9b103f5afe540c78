#ifndef ECHONAV_NN_CHECKPOINT_HPP_
#define ECHONAV_NN_CHECKPOINT_HPP_

// Checkpoints: manifest.json (names, shapes, offsets, hyperparameters) next
// to params.ecnv holding every parameter as one flat f32 array.

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "echonav/io/float_array.hpp"
#include "echonav/nn/tape.hpp"

namespace echonav::nn {

inline constexpr int kCheckpointVersion = 1;

template <class T>
void save_checkpoint(const std::filesystem::path& dir, const ParameterSet<T>& params,
                     const nlohmann::json& hyperparameters) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["hyperparameters"] = hyperparameters;
  manifest["parameters"] = nlohmann::json::array();
  io::FloatArray flat;
  flat.kind = io::ArrayKind::kParameter;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter<T>& p = params[i];
    manifest["parameters"].push_back({{"name", p.name},
                                      {"shape", p.value.shape},
                                      {"offset", flat.values.size()},
                                      {"trainable", p.trainable}});
    for (T v : p.value.data) flat.values.push_back(static_cast<float>(v));
  }
  flat.dims = {static_cast<std::uint32_t>(flat.values.size())};
  if (flat.values.empty()) flat.dims = {0u};
  io::write_file(dir / "params.ecnv", flat);
  std::ofstream f(dir / "manifest.json", std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write checkpoint manifest in " + dir.string());
  f << manifest.dump(2) << "\n";
}

/// Loads values into an already-constructed set; names and shapes must match.
/// Returns the stored hyperparameters.
template <class T>
nlohmann::json load_checkpoint(const std::filesystem::path& dir, ParameterSet<T>& params) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw std::runtime_error("missing checkpoint manifest in " + dir.string());
  const nlohmann::json manifest = nlohmann::json::parse(f);
  if (manifest.at("version").get<int>() != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version");
  }
  const io::FloatArray flat = io::read_file(dir / "params.ecnv");
  const auto& entries = manifest.at("parameters");
  if (entries.size() != params.size()) throw std::runtime_error("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<T>& p = params[i];
    const auto& e = entries[i];
    if (e.at("name").get<std::string>() != p.name || e.at("shape").get<Shape>() != p.value.shape) {
      throw std::runtime_error("checkpoint entry " + e.at("name").get<std::string>() + " does not match " +
                               p.name);
    }
    const std::size_t off = e.at("offset").get<std::size_t>();
    if (off + p.value.size() > flat.values.size()) throw std::runtime_error("checkpoint data truncated");
    for (std::size_t k = 0; k < p.value.size(); ++k) p.value[k] = static_cast<T>(flat.values[off + k]);
  }
  return manifest.at("hyperparameters");
}

}  // namespace echonav::nn

#endif  // ECHONAV_NN_CHECKPOINT_HPP_
