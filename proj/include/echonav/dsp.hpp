#ifndef ECHONAV_DSP_HPP_
#define ECHONAV_DSP_HPP_

// Radix-2 FFT, short-time Fourier transform and two-channel echo spectrograms.

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "echonav/acoustics.hpp"
#include "echonav/common.hpp"
#include "echonav/io/float_array.hpp"

namespace echonav::dsp {

enum class Window { kHann, kRectangular };

struct StftConfig {
  int window_length = 64;
  int hop = 16;
  int fft_size = 64;
  Window window = Window::kHann;
  bool pad_tail = true;       // keep the last partial frame, zero-padded
  bool log_compress = false;  // spectrogram values log(1 + |X|) instead of |X|

  bool operator==(const StftConfig&) const = default;

  int freq_bins() const { return fft_size / 2 + 1; }

  int frame_count(std::size_t signal_length) const {
    const auto len = static_cast<long>(signal_length);
    if (len <= window_length) return 1;
    const long span = len - window_length;
    return static_cast<int>(1 + (pad_tail ? (span + hop - 1) / hop : span / hop));
  }
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline void validate(const StftConfig& c) {
  if (!is_power_of_two(c.fft_size)) throw std::invalid_argument("fft_size must be a power of two");
  if (c.window_length <= 0 || c.window_length > c.fft_size) {
    throw std::invalid_argument("window length must be in [1, fft_size]");
  }
  if (c.hop <= 0) throw std::invalid_argument("hop must be positive");
}

/// In-place iterative radix-2 decimation-in-time FFT (forward, unnormalized).
inline void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (!is_power_of_two(static_cast<int>(n))) throw std::invalid_argument("FFT length must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w(std::cos(ang * k), std::sin(ang * k));
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

inline std::vector<double> window_coefficients(const StftConfig& c) {
  std::vector<double> w(static_cast<std::size_t>(c.window_length), 1.0);
  if (c.window == Window::kHann) {
    // periodic Hann
    for (int n = 0; n < c.window_length; ++n) {
      w[n] = 0.5 - 0.5 * std::cos(2.0 * kPi * n / c.window_length);
    }
  }
  return w;
}

/// Complex STFT, freq-major: result[k * frames + t].
struct StftResult {
  int freq_bins = 0;
  int frames = 0;
  std::vector<std::complex<double>> values;

  std::complex<double> at(int k, int t) const { return values[static_cast<std::size_t>(k) * frames + t]; }
};

inline StftResult stft(std::span<const double> signal, const StftConfig& cfg) {
  validate(cfg);
  if (signal.empty()) throw std::invalid_argument("signal must be nonempty");
  const auto w = window_coefficients(cfg);
  StftResult out{cfg.freq_bins(), cfg.frame_count(signal.size()), {}};
  out.values.resize(static_cast<std::size_t>(out.freq_bins) * out.frames);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(cfg.fft_size));
  for (int t = 0; t < out.frames; ++t) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    const std::size_t start = static_cast<std::size_t>(t) * cfg.hop;
    for (int n = 0; n < cfg.window_length; ++n) {
      const std::size_t idx = start + static_cast<std::size_t>(n);
      if (idx < signal.size()) buf[n] = w[n] * signal[idx];
    }
    fft(buf);
    for (int k = 0; k < out.freq_bins; ++k) out.values[static_cast<std::size_t>(k) * out.frames + t] = buf[k];
  }
  return out;
}

struct EchoSpectrogram {
  std::vector<float> values;  // 2 x F x T
  int freq_bins = 0;
  int frames = 0;
  StftConfig config;

  float at(int ch, int k, int t) const {
    return values[(static_cast<std::size_t>(ch) * freq_bins + k) * frames + t];
  }
};

/// Channel 0 = |STFT(left)|, channel 1 = |STFT(right)|.
inline EchoSpectrogram echo_spectrogram(const acoustics::EchoResponse& echo, const StftConfig& cfg) {
  if (echo.left.size() != echo.right.size()) throw std::invalid_argument("echo channels differ in length");
  EchoSpectrogram out;
  out.config = cfg;
  int ch = 0;
  for (const auto* channel : {&echo.left, &echo.right}) {
    const StftResult s = stft(*channel, cfg);
    out.freq_bins = s.freq_bins;
    out.frames = s.frames;
    if (ch == 0) out.values.resize(2 * s.values.size());
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const double mag = std::abs(s.values[i]);
      out.values[ch * s.values.size() + i] = static_cast<float>(cfg.log_compress ? std::log1p(mag) : mag);
    }
    ++ch;
  }
  return out;
}

inline io::FloatArray to_float_array(const EchoSpectrogram& s) {
  return {{2u, static_cast<std::uint32_t>(s.freq_bins), static_cast<std::uint32_t>(s.frames)},
          s.values,
          0.0f,
          io::ArrayKind::kSpectrogram};
}

}  // namespace echonav::dsp

#endif  // ECHONAV_DSP_HPP_
