#ifndef ECHONAV_DEPTH_METRICS_HPP_
#define ECHONAV_DEPTH_METRICS_HPP_

// Depth error metrics in meters over valid pixels (target > 0, mask set).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace echonav::depth {

struct DepthMetrics {
  double rmse = 0.0;
  double rel = 0.0;
  double log10 = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;

  bool operator==(const DepthMetrics&) const = default;
};

/// Predictions below this many meters are clamped before the ratio and log terms.
inline constexpr double kMinPredictionM = 1e-3;

/// `pred` and `target` are normalized depths scaled by `max_depth_m`.
inline DepthMetrics eval_depth(std::span<const float> pred, std::span<const float> target, double max_depth_m,
                               std::span<const std::uint8_t> mask = {}) {
  if (pred.size() != target.size()) throw std::invalid_argument("eval_depth: shape mismatch");
  if (!mask.empty() && mask.size() != pred.size()) throw std::invalid_argument("eval_depth: mask size mismatch");
  DepthMetrics m;
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const double g = static_cast<double>(target[i]) * max_depth_m;
    if (!(g > 0.0)) continue;
    const double p = std::max(static_cast<double>(pred[i]) * max_depth_m, kMinPredictionM);
    se += (p - g) * (p - g);
    m.rel += std::abs(p - g) / g;
    m.log10 += std::abs(std::log10(p) - std::log10(g));
    const double ratio = std::max(p / g, g / p);
    m.delta1 += ratio < 1.25 ? 1.0 : 0.0;
    m.delta2 += ratio < 1.25 * 1.25 ? 1.0 : 0.0;
    m.delta3 += ratio < 1.25 * 1.25 * 1.25 ? 1.0 : 0.0;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("eval_depth: no valid pixels");
  const double inv = 1.0 / static_cast<double>(n);
  m.rmse = std::sqrt(se * inv);
  m.rel *= inv;
  m.log10 *= inv;
  m.delta1 *= inv;
  m.delta2 *= inv;
  m.delta3 *= inv;
  return m;
}

/// Per-image metrics averaged over images.
inline DepthMetrics mean_metrics(std::span<const DepthMetrics> all) {
  if (all.empty()) throw std::invalid_argument("mean_metrics: empty");
  DepthMetrics m;
  for (const auto& x : all) {
    m.rmse += x.rmse;
    m.rel += x.rel;
    m.log10 += x.log10;
    m.delta1 += x.delta1;
    m.delta2 += x.delta2;
    m.delta3 += x.delta3;
  }
  const double inv = 1.0 / static_cast<double>(all.size());
  m.rmse *= inv;
  m.rel *= inv;
  m.log10 *= inv;
  m.delta1 *= inv;
  m.delta2 *= inv;
  m.delta3 *= inv;
  return m;
}

}  // namespace echonav::depth

#endif  // ECHONAV_DEPTH_METRICS_HPP_
