#ifndef ECHONAV_NAV_POLICY_HPP_
#define ECHONAV_NAV_POLICY_HPP_

// Recurrent actor-critic: modality encoders without BatchNorm, the GPS
// displacement appended, a GRU, and actor / critic heads.

#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "echonav/depth/model.hpp"
#include "echonav/nav/observation.hpp"
#include "echonav/nn.hpp"

namespace echonav::nav {

using nn::ConvSpec;

struct NavPolicyConfig {
  NavMode mode = NavMode::kEchoes;
  int hidden = 512;
  int embedding = 512;
  std::vector<ConvSpec> echo_convs = {{32, 8, 4, 2}, {64, 4, 2, 1}, {64, 3, 1, 1}};
  std::vector<ConvSpec> vision_convs = {{32, 4, 2, 1}, {64, 4, 2, 1}, {64, 3, 1, 1}};
  EchoScale echo_scale;

  bool operator==(const NavPolicyConfig&) const = default;
};

/// A ReLU conv stack followed by a dense layer with ReLU.
template <class T>
struct PlainEncoder {
  std::vector<nn::Conv2d<T>> convs;
  nn::Linear<T> fc;

  PlainEncoder() = default;
  PlainEncoder(nn::ParameterSet<T>& ps, const std::string& name, const std::vector<ConvSpec>& specs,
               depth::FeatureShape in, int out, std::mt19937_64& rng) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& sp = specs[i];
      convs.emplace_back(ps, name + ".conv" + std::to_string(i), in.channels, sp.channels, sp.kernel, sp.stride,
                         sp.padding, rng);
      in = depth::conv_stack_shape({sp}, in);
    }
    fc = nn::Linear<T>(ps, name + ".fc", in.channels * in.height * in.width, out, rng);
  }

  nn::Var<T> operator()(nn::Tape<T>& t, nn::Var<T> x) const {
    for (const auto& c : convs) x = nn::relu(c(t, x));
    return nn::relu(fc(t, nn::flatten(x)));
  }
};

/// One policy input row: an observation slot plus the GPS reading.
struct ObsRef {
  const SceneObservations* obs = nullptr;
  std::size_t slot = 0;
  Gps gps;
};

template <class T>
struct NavInputs {
  int size = 0;
  nn::Tensor<T> echo;    // [N, 2, F, T], standardized
  nn::Tensor<T> vision;  // [N, C, H, W]
  nn::Tensor<T> gps;     // [N, 2], meters ahead and to the left
};

template <class T>
struct PolicyOutput {
  nn::Var<T> logits;  // [N, 4]
  nn::Var<T> value;   // [N, 1]
  nn::Var<T> hidden;  // [N, H]
};

template <class T>
class NavPolicy {
 public:
  NavPolicy(const NavPolicyConfig& cfg, const ObservationConfig& obs, std::uint64_t seed) : cfg_(cfg), obs_(obs) {
    if (cfg_.hidden < 1 || cfg_.embedding < 1) throw std::invalid_argument("policy sizes must be positive");
    if (!(cfg_.echo_scale.std > 0.0)) throw std::invalid_argument("echo scale must be positive");
    std::mt19937_64 rng(seed);
    int features = 0;
    if (uses_echo(cfg_.mode)) {
      echo_ = PlainEncoder<T>(params_, "echo", cfg_.echo_convs, {2, obs_.freq_bins(), obs_.frames()}, cfg_.embedding,
                              rng);
      features += cfg_.embedding;
    }
    if (vision_input(cfg_.mode) != VisionInput::kNone) {
      vision_ = PlainEncoder<T>(params_, "vision", cfg_.vision_convs,
                                {vision_channels(cfg_.mode), obs_.view.height_px, obs_.view.width_px},
                                cfg_.embedding, rng);
      features += cfg_.embedding;
    }
    feature_size_ = features;
    gru_ = nn::GruCell<T>(params_, "gru", features + 2, cfg_.hidden, rng);
    actor_ = nn::Linear<T>(params_, "actor", cfg_.hidden, kActionCount, rng);
    critic_ = nn::Linear<T>(params_, "critic", cfg_.hidden, 1, rng);
  }

  NavPolicy(const NavPolicy&) = delete;
  NavPolicy& operator=(const NavPolicy&) = delete;

  const NavPolicyConfig& config() const { return cfg_; }
  const ObservationConfig& observation_config() const { return obs_; }
  nn::ParameterSet<T>& params() { return params_; }
  int hidden_size() const { return cfg_.hidden; }
  /// Length of the encoded observation (without GPS).
  int feature_size() const { return feature_size_; }

  NavInputs<T> make_inputs(const std::vector<ObsRef>& refs) const {
    NavInputs<T> in;
    in.size = static_cast<int>(refs.size());
    const int n = in.size;
    in.gps = nn::Tensor<T>({n, 2});
    for (int i = 0; i < n; ++i) {
      in.gps[2 * i] = static_cast<T>(refs[i].gps.forward);
      in.gps[2 * i + 1] = static_cast<T>(refs[i].gps.left);
    }
    if (uses_echo(cfg_.mode)) {
      in.echo = nn::Tensor<T>({n, 2, obs_.freq_bins(), obs_.frames()});
      const std::size_t e = obs_.echo_size();
      const double inv = 1.0 / cfg_.echo_scale.std;
      for (int i = 0; i < n; ++i) {
        const float* src = refs[i].obs->echo(refs[i].slot);
        for (std::size_t k = 0; k < e; ++k) in.echo[i * e + k] = static_cast<T>((src[k] - cfg_.echo_scale.mean) * inv);
      }
    }
    const VisionInput vi = vision_input(cfg_.mode);
    if (vi != VisionInput::kNone) {
      const int c = vision_channels(cfg_.mode);
      in.vision = nn::Tensor<T>({n, c, obs_.view.height_px, obs_.view.width_px});
      const std::size_t len = static_cast<std::size_t>(c) * obs_.pixels();
      for (int i = 0; i < n; ++i) {
        const float* src = vi == VisionInput::kRgb ? refs[i].obs->rgb(refs[i].slot) : refs[i].obs->depth(refs[i].slot);
        for (std::size_t k = 0; k < len; ++k) in.vision[i * len + k] = static_cast<T>(src[k]);
      }
    }
    return in;
  }

  /// Encoded observation [N, D], or nothing for the blind agent.
  std::optional<nn::Var<T>> encode(nn::Tape<T>& t, const NavInputs<T>& in) const {
    std::vector<nn::Var<T>> parts;
    if (uses_echo(cfg_.mode)) parts.push_back(echo_(t, t.constant(in.echo)));
    if (vision_input(cfg_.mode) != VisionInput::kNone) parts.push_back(vision_(t, t.constant(in.vision)));
    if (parts.empty()) return std::nullopt;
    return parts.size() == 1 ? parts[0] : nn::concat(parts);
  }

  /// s_t = [features, gps]; h_t = GRU(s_t, h_{t-1}); heads read h_t.
  PolicyOutput<T> step(nn::Tape<T>& t, const std::optional<nn::Var<T>>& features, nn::Var<T> gps,
                       nn::Var<T> h) const {
    const nn::Var<T> s = features ? nn::concat<T>({*features, gps}) : gps;
    const nn::Var<T> h_new = gru_(t, s, h);
    const auto [logits, value] = heads(t, h_new);
    return {logits, value, h_new};
  }

  std::pair<nn::Var<T>, nn::Var<T>> heads(nn::Tape<T>& t, nn::Var<T> h) const {
    return {actor_(t, h), critic_(t, h)};
  }

  /// Unrolls the GRU over `steps` time steps of `streams` rows each, stored
  /// time-major. `reset[t * streams + j]` zeroes that stream's state before
  /// step t. Returns hidden states [steps * streams, H], time-major.
  nn::Var<T> unroll(nn::Tape<T>& t, const NavInputs<T>& in, int steps, int streams, const nn::Tensor<T>& h0,
                    const std::vector<std::uint8_t>& reset) const {
    if (in.size != steps * streams || reset.size() != static_cast<std::size_t>(in.size)) {
      throw std::invalid_argument("unroll: input size mismatch");
    }
    const auto features = encode(t, in);
    const nn::Var<T> gps_all = t.constant(in.gps);
    nn::Var<T> h = t.constant(h0);
    std::vector<nn::Var<T>> hs;
    for (int k = 0; k < steps; ++k) {
      nn::Tensor<T> keep({streams, cfg_.hidden}, T(1));
      bool any = false;
      for (int j = 0; j < streams; ++j) {
        if (reset[static_cast<std::size_t>(k * streams + j)]) {
          std::fill_n(keep.ptr() + static_cast<std::size_t>(j) * cfg_.hidden, cfg_.hidden, T(0));
          any = true;
        }
      }
      if (any) h = nn::mul(h, t.constant(std::move(keep)));
      std::optional<nn::Var<T>> f;
      if (features) f = nn::slice_rows(*features, k * streams, (k + 1) * streams);
      const nn::Var<T> s = f ? nn::concat<T>({*f, nn::slice_rows(gps_all, k * streams, (k + 1) * streams)})
                             : nn::slice_rows(gps_all, k * streams, (k + 1) * streams);
      h = gru_(t, s, h);
      hs.push_back(h);
    }
    return nn::stack_rows(hs);
  }

 private:
  NavPolicyConfig cfg_;
  ObservationConfig obs_;
  nn::ParameterSet<T> params_;
  PlainEncoder<T> echo_;
  PlainEncoder<T> vision_;
  nn::GruCell<T> gru_;
  nn::Linear<T> actor_;
  nn::Linear<T> critic_;
  int feature_size_ = 0;
};

/// Softmax probabilities of one logits row.
template <class T>
std::array<double, kActionCount> action_probabilities(const nn::Tensor<T>& logits, int row) {
  std::array<double, kActionCount> p{};
  double mx = -1e300;
  for (int a = 0; a < kActionCount; ++a) mx = std::max(mx, static_cast<double>(logits[row * kActionCount + a]));
  double z = 0.0;
  for (int a = 0; a < kActionCount; ++a) {
    p[a] = std::exp(static_cast<double>(logits[row * kActionCount + a]) - mx);
    z += p[a];
  }
  for (auto& v : p) v /= z;
  return p;
}

/// Inverse-CDF draw from `p` with one uniform variate.
inline int sample_action(const std::array<double, kActionCount>& p, std::mt19937_64& rng) {
  const double u = nn::unit_uniform(rng);
  double c = 0.0;
  for (int a = 0; a < kActionCount; ++a) {
    c += p[a];
    if (u < c) return a;
  }
  return kActionCount - 1;
}

inline int argmax_action(const std::array<double, kActionCount>& p) {
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace echonav::nav

#endif  // ECHONAV_NAV_POLICY_HPP_
