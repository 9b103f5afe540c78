#ifndef ECHONAV_NN_OPTIM_HPP_
#define ECHONAV_NN_OPTIM_HPP_

#include <cmath>
#include <stdexcept>

#include "echonav/nn/tape.hpp"

namespace echonav::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam step for a single parameter; `step` counts from 1.
template <class T>
void adam_update(Parameter<T>& p, const AdamOptions& o, long step) {
  if (step < 1) throw std::invalid_argument("adam step must be >= 1");
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double g = p.grad[i];
    const double m = o.beta1 * p.m[i] + (1.0 - o.beta1) * g;
    const double v = o.beta2 * p.v[i] + (1.0 - o.beta2) * g * g;
    p.m[i] = static_cast<T>(m);
    p.v[i] = static_cast<T>(v);
    p.value[i] = static_cast<T>(p.value[i] - o.lr * (m / c1) / (std::sqrt(v / c2) + o.eps));
  }
}

template <class T>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// Applies one update to every trainable parameter and clears gradients.
  void step(ParameterSet<T>& params) {
    ++step_;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].trainable) adam_update(params[i], options_, step_);
    }
    params.zero_grad();
  }

  long steps() const { return step_; }
  AdamOptions& options() { return options_; }

 private:
  AdamOptions options_;
  long step_ = 0;
};

/// Rescales gradients so their global L2 norm is at most `max_norm`; returns
/// the norm before clipping.
template <class T>
double clip_grad_norm(ParameterSet<T>& params, double max_norm) {
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (T g : params[i].grad.data) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T f = static_cast<T>(max_norm / norm);
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (T& g : params[i].grad.data) g *= f;
    }
  }
  return norm;
}

template <class T>
bool grads_finite(const ParameterSet<T>& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (T g : params[i].grad.data) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

}  // namespace echonav::nn

#endif  // ECHONAV_NN_OPTIM_HPP_
