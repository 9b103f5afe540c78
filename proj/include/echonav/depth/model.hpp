#ifndef ECHONAV_DEPTH_MODEL_HPP_
#define ECHONAV_DEPTH_MODEL_HPP_

// Echo encoders (shared across orientations), vision encoder and depth
// decoder. Layer geometry comes from DepthArchitecture so the table is data.

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "echonav/depth/dataset.hpp"
#include "echonav/nn.hpp"

namespace echonav::depth {

using nn::ConvSpec;

struct DepthArchitecture {
  std::vector<ConvSpec> echo_encoder = {{32, 8, 4, 2}, {64, 4, 2, 1}, {128, 3, 1, 1}};
  int echo_embedding = 512;
  std::vector<ConvSpec> vision_encoder = {{32, 4, 2, 1}, {64, 4, 2, 1}, {128, 4, 2, 1}, {256, 4, 2, 1},
                                          {512, 4, 2, 1}};
  // Transposed-conv stages; every stage but the last is followed by
  // BatchNorm + ReLU, the last by Sigmoid and must output one channel.
  std::vector<ConvSpec> decoder = {{256, 4, 2, 1}, {128, 4, 2, 1}, {64, 4, 2, 1}, {32, 4, 2, 1},
                                   {16, 4, 2, 1},  {16, 3, 1, 1},  {1, 3, 1, 1}};

  bool operator==(const DepthArchitecture&) const = default;
};

/// Scaled-down table for 32x32 images (4x4 fusion map) used for desk runs.
inline DepthArchitecture desk_architecture() {
  DepthArchitecture a;
  a.echo_encoder = {{16, 8, 4, 2}, {32, 4, 2, 1}, {32, 3, 1, 1}};
  a.echo_embedding = 128;
  a.vision_encoder = {{16, 4, 2, 1}, {32, 4, 2, 1}, {64, 4, 2, 1}, {64, 3, 1, 1}, {64, 3, 1, 1}};
  a.decoder = {{64, 4, 2, 1}, {32, 4, 2, 1}, {16, 4, 2, 1}, {16, 3, 1, 1}, {16, 3, 1, 1}, {16, 3, 1, 1}, {1, 3, 1, 1}};
  return a;
}

struct DepthModelConfig {
  DepthTask task;
  DepthArchitecture arch;
  SampleGeometry geometry;
  EchoNormalization echo_norm;

  bool operator==(const DepthModelConfig&) const = default;
};

struct FeatureShape {
  int channels = 0;
  int height = 0;
  int width = 0;
};

inline FeatureShape conv_stack_shape(const std::vector<ConvSpec>& specs, FeatureShape in) {
  for (const auto& s : specs) {
    in = {s.channels, nn::conv_out_size(in.height, s.kernel, s.stride, s.padding),
          nn::conv_out_size(in.width, s.kernel, s.stride, s.padding)};
  }
  return in;
}

inline FeatureShape deconv_stack_shape(const std::vector<ConvSpec>& specs, FeatureShape in) {
  for (const auto& s : specs) {
    in = {s.channels, nn::conv_transpose_out_size(in.height, s.kernel, s.stride, s.padding),
          nn::conv_transpose_out_size(in.width, s.kernel, s.stride, s.padding)};
  }
  return in;
}

/// Spatial size where echo and vision features meet. Echo-only models tile
/// to the same size so every mode shares one decoder geometry.
inline FeatureShape fusion_shape(const DepthModelConfig& c) {
  return conv_stack_shape(c.arch.vision_encoder, {3, c.geometry.height, c.geometry.width});
}

inline int decoder_input_channels(const DepthModelConfig& c) {
  int ch = c.task.echo_orientations * c.arch.echo_embedding;
  if (c.task.rgb_views > 0) ch += fusion_shape(c).channels;
  return ch;
}

inline void validate(const DepthModelConfig& c) {
  validate(c.task, c.geometry.theta_full);
  const auto& a = c.arch;
  if (a.echo_encoder.empty() || a.vision_encoder.empty() || a.decoder.empty()) {
    throw std::invalid_argument("architecture stages must be nonempty");
  }
  if (a.echo_embedding <= 0) throw std::invalid_argument("echo embedding must be positive");
  if (a.decoder.back().channels != 1) throw std::invalid_argument("last decoder stage must output one channel");
  if (!(c.echo_norm.std > 0.0)) throw std::invalid_argument("echo normalization std must be positive");
  conv_stack_shape(a.echo_encoder, {2, c.geometry.freq_bins, c.geometry.frames});
  const FeatureShape out = deconv_stack_shape(a.decoder, fusion_shape(c));
  if (out.height != c.geometry.height || out.width != c.geometry.width) {
    throw std::invalid_argument("decoder output " + std::to_string(out.height) + "x" + std::to_string(out.width) +
                                " does not match target " + std::to_string(c.geometry.height) + "x" +
                                std::to_string(c.geometry.width));
  }
}

/// Conv-BN-ReLU blocks, flatten, then a 1x1 projection (a dense layer on the
/// flattened map) to the embedding.
template <class T>
struct EchoEncoder {
  std::vector<nn::Conv2d<T>> convs;
  std::vector<nn::BatchNorm2d<T>> norms;
  nn::Linear<T> proj;
  int embedding = 0;

  EchoEncoder() = default;
  EchoEncoder(nn::ParameterSet<T>& ps, const std::vector<ConvSpec>& specs, int embedding_, int freq_bins,
              int frames, std::mt19937_64& rng)
      : embedding(embedding_) {
    FeatureShape s{2, freq_bins, frames};
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& sp = specs[i];
      const std::string name = "echo.conv" + std::to_string(i);
      convs.emplace_back(ps, name, s.channels, sp.channels, sp.kernel, sp.stride, sp.padding, rng);
      norms.emplace_back(ps, "echo.bn" + std::to_string(i), sp.channels);
      s = conv_stack_shape({sp}, s);
    }
    proj = nn::Linear<T>(ps, "echo.proj", s.channels * s.height * s.width, embedding, rng);
  }

  /// [N, 2, F, T] -> [N, embedding].
  nn::Var<T> operator()(nn::Tape<T>& t, nn::Var<T> x) const {
    for (std::size_t i = 0; i < convs.size(); ++i) x = nn::relu(norms[i](t, convs[i](t, x)));
    return proj(t, nn::flatten(x));
  }
};

template <class T>
struct VisionEncoder {
  std::vector<nn::Conv2d<T>> convs;
  std::vector<nn::BatchNorm2d<T>> norms;

  VisionEncoder() = default;
  VisionEncoder(nn::ParameterSet<T>& ps, const std::vector<ConvSpec>& specs, int in_channels, std::mt19937_64& rng) {
    int ch = in_channels;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& sp = specs[i];
      convs.emplace_back(ps, "vision.conv" + std::to_string(i), ch, sp.channels, sp.kernel, sp.stride, sp.padding,
                         rng);
      norms.emplace_back(ps, "vision.bn" + std::to_string(i), sp.channels);
      ch = sp.channels;
    }
  }

  nn::Var<T> operator()(nn::Tape<T>& t, nn::Var<T> x) const {
    for (std::size_t i = 0; i < convs.size(); ++i) x = nn::relu(norms[i](t, convs[i](t, x)));
    return x;
  }
};

template <class T>
struct DepthDecoder {
  std::vector<nn::ConvTranspose2d<T>> deconvs;
  std::vector<nn::BatchNorm2d<T>> norms;

  DepthDecoder() = default;
  DepthDecoder(nn::ParameterSet<T>& ps, const std::vector<ConvSpec>& specs, int in_channels, std::mt19937_64& rng) {
    int ch = in_channels;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& sp = specs[i];
      deconvs.emplace_back(ps, "decoder.deconv" + std::to_string(i), ch, sp.channels, sp.kernel, sp.stride,
                           sp.padding, rng);
      if (i + 1 < specs.size()) norms.emplace_back(ps, "decoder.bn" + std::to_string(i), sp.channels);
      ch = sp.channels;
    }
  }

  nn::Var<T> operator()(nn::Tape<T>& t, nn::Var<T> x) const {
    for (std::size_t i = 0; i + 1 < deconvs.size(); ++i) x = nn::relu(norms[i](t, deconvs[i](t, x)));
    return nn::sigmoid(deconvs.back()(t, x));
  }
};

template <class T>
class DepthModel {
 public:
  DepthModel(const DepthModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    validate(cfg_);
    std::mt19937_64 rng(seed);
    fuse_ = fusion_shape(cfg_);
    if (cfg_.task.echo_orientations > 0) {
      echo_ = EchoEncoder<T>(params_, cfg_.arch.echo_encoder, cfg_.arch.echo_embedding, cfg_.geometry.freq_bins,
                             cfg_.geometry.frames, rng);
    }
    if (cfg_.task.rgb_views > 0) {
      vision_ = VisionEncoder<T>(params_, cfg_.arch.vision_encoder, 3 * cfg_.task.rgb_views, rng);
    }
    decoder_ = DepthDecoder<T>(params_, cfg_.arch.decoder, decoder_input_channels(cfg_), rng);
  }

  DepthModel(const DepthModel&) = delete;
  DepthModel& operator=(const DepthModel&) = delete;

  const DepthModelConfig& config() const { return cfg_; }
  nn::ParameterSet<T>& params() { return params_; }
  const EchoEncoder<T>& echo_encoder() const { return echo_; }

  /// Concatenated orientation embeddings [B, O * E].
  nn::Var<T> encode_echoes(nn::Tape<T>& t, nn::Var<T> echoes, int batch) const {
    const nn::Var<T> e = echo_(t, echoes);
    return nn::reshape(e, {batch, cfg_.task.echo_orientations * cfg_.arch.echo_embedding});
  }

  /// Depth prediction [B, 1, H, W] in (0, 1).
  nn::Var<T> forward(nn::Tape<T>& t, const DepthBatch<T>& b) const {
    std::vector<nn::Var<T>> parts;
    if (cfg_.task.echo_orientations > 0) {
      const nn::Var<T> e = encode_echoes(t, t.constant(b.echoes), b.size);
      parts.push_back(nn::tile_spatial(e, fuse_.height, fuse_.width));
    }
    if (cfg_.task.rgb_views > 0) parts.push_back(vision_(t, t.constant(b.rgb)));
    const nn::Var<T> fused = parts.size() == 1 ? parts[0] : nn::concat(parts);
    return decoder_(t, fused);
  }

  /// Variant whose inputs are gradient-carrying leaves (for gradient checks).
  nn::Var<T> forward_vars(nn::Tape<T>& t, nn::Var<T> echoes, nn::Var<T> rgb, int batch) const {
    std::vector<nn::Var<T>> parts;
    if (cfg_.task.echo_orientations > 0) {
      parts.push_back(nn::tile_spatial(encode_echoes(t, echoes, batch), fuse_.height, fuse_.width));
    }
    if (cfg_.task.rgb_views > 0) parts.push_back(vision_(t, rgb));
    return decoder_(t, parts.size() == 1 ? parts[0] : nn::concat(parts));
  }

  nn::Var<T> vision_features(nn::Tape<T>& t, nn::Var<T> rgb) const { return vision_(t, rgb); }

 private:
  DepthModelConfig cfg_;
  nn::ParameterSet<T> params_;
  FeatureShape fuse_;
  EchoEncoder<T> echo_;
  VisionEncoder<T> vision_;
  DepthDecoder<T> decoder_;
};

/// Mean absolute error on normalized depth over the batch mask.
template <class T>
nn::Var<T> depth_loss(nn::Var<T> pred, const DepthBatch<T>& b) {
  return nn::l1_loss(pred, b.target, b.mask);
}

}  // namespace echonav::depth

#endif  // ECHONAV_DEPTH_MODEL_HPP_
