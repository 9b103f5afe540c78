#ifndef ECHONAV_ACOUSTICS_HPP_
#define ECHONAV_ACOUSTICS_HPP_

// Image-source room acoustics for shoebox rooms, the 3 ms sweep, an analytic
// ITD/ILD head model and per-orientation binaural echo synthesis.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "echonav/common.hpp"
#include "echonav/io/float_array.hpp"
#include "echonav/scene.hpp"

namespace echonav::acoustics {

struct AcousticsConfig {
  double sample_rate = 16000.0;
  int max_order = 3;
  int echo_length = 1024;
  double speed_of_sound = 343.0;
  double min_distance = 0.1;    // 1/d attenuation clamp
  double occlusion_gain = 0.25; // amplitude factor per path leg crossing an obstacle
  double sweep_duration_s = 0.003;
  double sweep_f_lo = 20.0;
  double sweep_f_hi = 0.0;      // 0 selects 0.9 * Nyquist
  double sweep_amplitude = 1.0;

  bool operator==(const AcousticsConfig&) const = default;
};

inline void validate(const AcousticsConfig& c) {
  if (!(c.sample_rate > 0.0)) throw std::invalid_argument("sample_rate must be positive");
  if (c.max_order < 0) throw std::invalid_argument("max_order must be nonnegative");
  if (c.echo_length <= 0) throw std::invalid_argument("echo_length must be positive");
  if (!(c.speed_of_sound > 0.0) || !(c.min_distance > 0.0)) {
    throw std::invalid_argument("speed of sound and min distance must be positive");
  }
  if (!(c.occlusion_gain >= 0.0 && c.occlusion_gain <= 1.0)) {
    throw std::invalid_argument("occlusion_gain must lie in [0, 1]");
  }
}

struct HeadModel {
  double ear_separation_m = 0.18;
  double contralateral_attenuation = 0.3;  // alpha in g(az) = 1 - alpha * max(0, -+sin az)

  void validate() const {
    if (!(ear_separation_m > 0.0)) throw std::invalid_argument("ear separation must be positive");
    if (!(contralateral_attenuation > 0.0 && contralateral_attenuation <= 1.0)) {
      throw std::invalid_argument("contralateral attenuation must lie in (0, 1]");
    }
  }

  bool operator==(const HeadModel&) const = default;
};

/// One specular path (image source) reaching the receiver.
struct ImageArrival {
  double distance = 0.0;
  double amplitude = 0.0;
  Vec3 direction;  // unit vector from receiver toward the image source; zero when co-located
  int order = 0;
};

struct RoomImpulseResponse {
  std::vector<double> samples;
  double sample_rate = 0.0;
  Vec3 source;
  Vec3 receiver;
};

struct SweepSignal {
  std::vector<double> samples;
  double sample_rate = 0.0;
  double duration_s = 0.0;
  double f_lo = 0.0;
  double f_hi = 0.0;
};

struct EchoResponse {
  std::vector<double> left;
  std::vector<double> right;
  double sample_rate = 0.0;
  scene::Pose pose;
};

namespace detail {

/// Folds an unfolded coordinate back into [0, length] (mirror reflections).
inline double fold(double x, double length) {
  double m = std::fmod(x, 2.0 * length);
  if (m < 0.0) m += 2.0 * length;
  return m <= length ? m : 2.0 * length - m;
}

inline bool segment_hits_box(const scene::Box& b, const Vec3& p0, const Vec3& p1) {
  const Vec3 d = p1 - p0;
  double t0 = 0.0, t1 = 1.0;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (p0[a] <= b.min[a] || p0[a] >= b.max[a]) return false;
      continue;
    }
    double ta = (b.min[a] - p0[a]) / d[a];
    double tb = (b.max[a] - p0[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 >= t1) return false;
  }
  return true;
}

/// Number of physical path legs (between reflections) that cross an obstacle.
inline int blocked_legs(const scene::Scene& s, const Vec3& image, const Vec3& receiver) {
  if (s.obstacles.empty()) return 0;
  const Vec3 d = receiver - image;
  std::vector<double> breaks = {0.0, 1.0};
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) continue;
    const double L = s.extent[a];
    const double lo = std::min(image[a], receiver[a]);
    const double hi = std::max(image[a], receiver[a]);
    for (double k = std::ceil(lo / L); k * L <= hi; k += 1.0) {
      const double t = (k * L - image[a]) / d[a];
      if (t > 0.0 && t < 1.0) breaks.push_back(t);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  auto folded = [&](double t) {
    const Vec3 p = image + d * t;
    return Vec3{fold(p.x, s.extent.x), fold(p.y, s.extent.y), fold(p.z, s.extent.z)};
  };
  int blocked = 0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i + 1] - breaks[i] < 1e-12) continue;
    const Vec3 a = folded(breaks[i]);
    const Vec3 b = folded(breaks[i + 1]);
    for (const auto& box : s.obstacles) {
      if (segment_hits_box(box, a, b)) {
        ++blocked;
        break;
      }
    }
  }
  return blocked;
}

inline void check_inside(const scene::Scene& s, const Vec3& p, const char* what) {
  if (!s.inside(p)) throw std::invalid_argument(std::string(what) + " lies outside the room");
}

}  // namespace detail

/// All image sources up to `max_order` reflections off the six room boundaries.
inline std::vector<ImageArrival> image_sources(const scene::Scene& s, const Vec3& source,
                                               const Vec3& receiver, int max_order,
                                               const AcousticsConfig& cfg = {}) {
  detail::check_inside(s, source, "source");
  detail::check_inside(s, receiver, "receiver");
  if (max_order < 0) throw std::invalid_argument("max_order must be nonnegative");
  struct AxisImage {
    double coord;
    int order;
    double gain;
  };
  std::array<std::vector<AxisImage>, 3> per_axis;
  for (int a = 0; a < 3; ++a) {
    const double L = s.extent[a];
    const double beta_lo = s.wall_reflection[2 * a];
    const double beta_hi = s.wall_reflection[2 * a + 1];
    for (int n = -max_order; n <= max_order; ++n) {
      for (int q = 0; q <= 1; ++q) {
        const int hits_lo = std::abs(n - q);
        const int hits_hi = std::abs(n);
        if (hits_lo + hits_hi > max_order) continue;
        const double coord = (q == 0 ? source[a] : -source[a]) + 2.0 * n * L;
        per_axis[a].push_back({coord, hits_lo + hits_hi,
                               std::pow(beta_lo, hits_lo) * std::pow(beta_hi, hits_hi)});
      }
    }
  }
  std::vector<ImageArrival> out;
  for (const auto& ix : per_axis[0]) {
    for (const auto& iy : per_axis[1]) {
      if (ix.order + iy.order > max_order) continue;
      for (const auto& iz : per_axis[2]) {
        const int order = ix.order + iy.order + iz.order;
        if (order > max_order) continue;
        const Vec3 image{ix.coord, iy.coord, iz.coord};
        const Vec3 delta = image - receiver;
        const double dist = delta.norm();
        double amp = ix.gain * iy.gain * iz.gain / std::max(dist, cfg.min_distance);
        if (dist > 0.0) {
          const int blocked = detail::blocked_legs(s, image, receiver);
          amp *= std::pow(cfg.occlusion_gain, blocked);
        }
        out.push_back({dist, amp, dist > 0.0 ? delta * (1.0 / dist) : Vec3{}, order});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const ImageArrival& a, const ImageArrival& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.direction.x != b.direction.x) return a.direction.x < b.direction.x;
    if (a.direction.y != b.direction.y) return a.direction.y < b.direction.y;
    return a.direction.z < b.direction.z;
  });
  return out;
}

inline long delay_index(double distance, double sample_rate, double c) {
  return std::lround(distance / c * sample_rate);
}

/// Impulse-train RIR: each image contributes its amplitude at round(dist / c * fs).
inline RoomImpulseResponse compute_rir(const scene::Scene& s, const Vec3& source,
                                       const Vec3& receiver, int max_order, double sample_rate,
                                       const AcousticsConfig& cfg = {}) {
  if (!(sample_rate > 0.0)) throw std::invalid_argument("sample_rate must be positive");
  const auto arrivals = image_sources(s, source, receiver, max_order, cfg);
  long last = 0;
  for (const auto& a : arrivals) last = std::max(last, delay_index(a.distance, sample_rate, cfg.speed_of_sound));
  RoomImpulseResponse rir{std::vector<double>(static_cast<std::size_t>(last) + 1, 0.0), sample_rate,
                          source, receiver};
  for (const auto& a : arrivals) {
    rir.samples[static_cast<std::size_t>(delay_index(a.distance, sample_rate, cfg.speed_of_sound))] +=
        a.amplitude;
  }
  return rir;
}

/// Linear chirp from f_lo to f_hi with unit peak amplitude.
inline SweepSignal sweep_signal(double sample_rate, double duration_s = 0.003, double f_lo = 20.0,
                                double f_hi = 0.0) {
  if (!(sample_rate >= 8000.0)) throw std::invalid_argument("sample_rate must be at least 8 kHz");
  if (f_hi <= 0.0) f_hi = 0.9 * sample_rate / 2.0;
  if (!(f_lo > 0.0 && f_lo < f_hi && f_hi < sample_rate / 2.0)) {
    throw std::invalid_argument("sweep band not representable at this sample rate");
  }
  if (!(duration_s > 0.0)) throw std::invalid_argument("sweep duration must be positive");
  const auto n = static_cast<std::size_t>(std::lround(duration_s * sample_rate));
  SweepSignal s{std::vector<double>(n), sample_rate, duration_s, f_lo, f_hi};
  const double rate = (f_hi - f_lo) / duration_s;
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    s.samples[i] = std::sin(2.0 * kPi * (f_lo * t + 0.5 * rate * t * t));
    peak = std::max(peak, std::abs(s.samples[i]));
  }
  if (peak > 0.0) {
    for (auto& v : s.samples) v /= peak;
  }
  return s;
}

inline SweepSignal sweep_signal(const AcousticsConfig& cfg) {
  auto s = sweep_signal(cfg.sample_rate, cfg.sweep_duration_s, cfg.sweep_f_lo, cfg.sweep_f_hi);
  for (auto& v : s.samples) v *= cfg.sweep_amplitude;
  return s;
}

/// A mono arrival of the impulse train: integer sample delay and amplitude.
struct Arrival {
  long delay = 0;
  double amplitude = 0.0;
};

struct BinauralIr {
  std::vector<double> left;
  std::vector<double> right;
};

/// Per-ear delay (samples) and gain for an arrival at `azimuth_deg` (positive = right).
struct EarResponse {
  long left_delay;
  long right_delay;
  double left_gain;
  double right_gain;
};

inline EarResponse ear_response(double azimuth_deg, const HeadModel& head, double sample_rate,
                                double c = 343.0) {
  const double s = std::sin(deg_to_rad(azimuth_deg));
  const double half = head.ear_separation_m / 2.0 / c * sample_rate;
  return {std::lround(half * (1.0 + s)), std::lround(half * (1.0 - s)),
          1.0 - head.contralateral_attenuation * std::max(0.0, s),
          1.0 - head.contralateral_attenuation * std::max(0.0, -s)};
}

/// Splits mono arrivals into two ear impulse trains. Contributions landing on
/// the same sample are summed in sorted order so mirrored inputs give
/// bit-identical mirrored outputs.
inline BinauralIr binauralize(std::span<const Arrival> arrivals,
                              std::span<const double> azimuths_deg, const HeadModel& head,
                              double sample_rate, double c = 343.0) {
  if (arrivals.size() != azimuths_deg.size()) {
    throw std::invalid_argument("one azimuth per arrival required");
  }
  head.validate();
  std::vector<std::pair<long, double>> lc, rc;
  lc.reserve(arrivals.size());
  rc.reserve(arrivals.size());
  long last = -1;
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    const EarResponse e = ear_response(azimuths_deg[i], head, sample_rate, c);
    lc.emplace_back(arrivals[i].delay + e.left_delay, arrivals[i].amplitude * e.left_gain);
    rc.emplace_back(arrivals[i].delay + e.right_delay, arrivals[i].amplitude * e.right_gain);
    last = std::max({last, lc.back().first, rc.back().first});
  }
  auto accumulate = [last](std::vector<std::pair<long, double>>& contrib) {
    std::sort(contrib.begin(), contrib.end());
    std::vector<double> out(static_cast<std::size_t>(last + 1), 0.0);
    for (const auto& [idx, v] : contrib) out[static_cast<std::size_t>(idx)] += v;
    return out;
  };
  return {accumulate(lc), accumulate(rc)};
}

/// Full linear convolution truncated or zero-padded to `length`.
inline std::vector<double> convolve(std::span<const double> x, std::span<const double> h,
                                    std::size_t length) {
  std::vector<double> y(length, 0.0);
  for (std::size_t n = 0; n < length; ++n) {
    double acc = 0.0;
    const std::size_t k_lo = n >= h.size() ? n - h.size() + 1 : 0;
    for (std::size_t k = k_lo; k <= n && k < x.size(); ++k) acc += x[k] * h[n - k];
    y[n] = acc;
  }
  return y;
}

/// Azimuth (degrees, positive to the right) of a direction relative to a heading.
inline double azimuth_deg(const Vec3& direction, const scene::Pose& pose) {
  const double fwd = direction.dot(pose.forward());
  const double rgt = direction.dot(pose.right());
  if (fwd == 0.0 && rgt == 0.0) return 0.0;
  return std::atan2(rgt, fwd) * 180.0 / kPi;
}

/// Binaural echo of the sweep emitted and received at the pose position.
/// `arrivals` must come from image_sources at that position.
inline EchoResponse echo_from_arrivals(std::span<const ImageArrival> arrivals,
                                       const SweepSignal& sweep, const scene::Pose& pose,
                                       const HeadModel& head, const AcousticsConfig& cfg) {
  std::vector<Arrival> mono;
  std::vector<double> az;
  mono.reserve(arrivals.size());
  az.reserve(arrivals.size());
  for (const auto& a : arrivals) {
    mono.push_back({delay_index(a.distance, cfg.sample_rate, cfg.speed_of_sound), a.amplitude});
    az.push_back(azimuth_deg(a.direction, pose));
  }
  const BinauralIr ir = binauralize(mono, az, head, cfg.sample_rate, cfg.speed_of_sound);
  const auto len = static_cast<std::size_t>(cfg.echo_length);
  return {convolve(sweep.samples, ir.left, len), convolve(sweep.samples, ir.right, len),
          cfg.sample_rate, pose};
}

inline EchoResponse simulate_echo(const scene::Scene& s, const scene::Pose& pose,
                                  const HeadModel& head, const AcousticsConfig& cfg) {
  validate(cfg);
  const auto arrivals = image_sources(s, pose.position, pose.position, cfg.max_order, cfg);
  return echo_from_arrivals(arrivals, sweep_signal(cfg), pose, head, cfg);
}

/// Echoes at the four orientations (front, right, back, left) of a pose,
/// sharing one image-source computation.
inline std::array<EchoResponse, 4> simulate_echo_set(const scene::Scene& s,
                                                     const scene::Pose& pose,
                                                     const HeadModel& head,
                                                     const AcousticsConfig& cfg) {
  validate(cfg);
  const auto arrivals = image_sources(s, pose.position, pose.position, cfg.max_order, cfg);
  const auto sweep = sweep_signal(cfg);
  std::array<EchoResponse, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = echo_from_arrivals(arrivals, sweep, scene::facing(pose, scene::kAllSides[i]), head, cfg);
  }
  return out;
}

inline double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

inline io::FloatArray to_float_array(const EchoResponse& e) {
  io::FloatArray a;
  a.dims = {2u, static_cast<std::uint32_t>(e.left.size())};
  a.values.reserve(2 * e.left.size());
  for (double v : e.left) a.values.push_back(static_cast<float>(v));
  for (double v : e.right) a.values.push_back(static_cast<float>(v));
  a.scalar = static_cast<float>(e.sample_rate);
  a.kind = io::ArrayKind::kEcho;
  return a;
}

/// 16-bit stereo PCM wave file, peak-normalized, for listening and debugging.
inline void write_wav(const std::filesystem::path& path, const EchoResponse& e) {
  double peak = 1e-12;
  for (double v : e.left) peak = std::max(peak, std::abs(v));
  for (double v : e.right) peak = std::max(peak, std::abs(v));
  const auto frames = static_cast<std::uint32_t>(e.left.size());
  const auto rate = static_cast<std::uint32_t>(std::lround(e.sample_rate));
  std::vector<unsigned char> b;
  auto u32 = [&b](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
  };
  auto u16 = [&b](std::uint16_t v) {
    b.push_back(static_cast<unsigned char>(v & 0xff));
    b.push_back(static_cast<unsigned char>(v >> 8));
  };
  auto tag = [&b](const char* t) { b.insert(b.end(), t, t + 4); };
  tag("RIFF");
  u32(36 + frames * 4);
  tag("WAVE");
  tag("fmt ");
  u32(16);
  u16(1);
  u16(2);
  u32(rate);
  u32(rate * 4);
  u16(4);
  u16(16);
  tag("data");
  u32(frames * 4);
  for (std::uint32_t i = 0; i < frames; ++i) {
    for (double v : {e.left[i], e.right[i]}) {
      const auto q = static_cast<std::int16_t>(std::lround(std::clamp(v / peak, -1.0, 1.0) * 32767.0));
      u16(static_cast<std::uint16_t>(q));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace echonav::acoustics

#endif  // ECHONAV_ACOUSTICS_HPP_
