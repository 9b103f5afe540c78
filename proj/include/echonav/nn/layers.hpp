#ifndef ECHONAV_NN_LAYERS_HPP_
#define ECHONAV_NN_LAYERS_HPP_

// Parameterized layers. Each layer registers its parameters in a
// ParameterSet under a name prefix and records its forward pass on a Tape.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "echonav/nn/tape.hpp"

namespace echonav::nn {

/// Uniform in [0, 1) from the top 53 bits of the generator, independent of
/// the standard library's distribution implementations.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class T>
Tensor<T> uniform_tensor(const Shape& shape, double bound, std::mt19937_64& rng) {
  Tensor<T> t(shape);
  for (auto& v : t.data) v = static_cast<T>((2.0 * unit_uniform(rng) - 1.0) * bound);
  return t;
}

/// Kaiming-uniform for ReLU networks: U(-sqrt(6 / fan_in), sqrt(6 / fan_in)).
inline double kaiming_bound(int fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); }

/// One row of an architecture table.
struct ConvSpec {
  int channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;

  bool operator==(const ConvSpec&) const = default;
};

template <class T>
struct Conv2d {
  Parameter<T>* weight = nullptr;
  Parameter<T>* bias = nullptr;
  int stride = 1;
  int padding = 0;

  Conv2d() = default;
  Conv2d(ParameterSet<T>& ps, const std::string& name, int in, int out, int kernel, int stride_,
         int padding_, std::mt19937_64& rng, bool with_bias = true)
      : stride(stride_), padding(padding_) {
    weight = &ps.add(name + ".weight", uniform_tensor<T>({out, in, kernel, kernel},
                                                         kaiming_bound(in * kernel * kernel), rng));
    if (with_bias) bias = &ps.add(name + ".bias", Tensor<T>({out}));
  }

  Var<T> operator()(Tape<T>& t, Var<T> x) const {
    std::optional<Var<T>> b;
    if (bias) b = t.param(*bias);
    return conv2d(x, t.param(*weight), b, stride, padding);
  }
};

template <class T>
struct ConvTranspose2d {
  Parameter<T>* weight = nullptr;
  Parameter<T>* bias = nullptr;
  int stride = 1;
  int padding = 0;

  ConvTranspose2d() = default;
  ConvTranspose2d(ParameterSet<T>& ps, const std::string& name, int in, int out, int kernel, int stride_,
                  int padding_, std::mt19937_64& rng, bool with_bias = true)
      : stride(stride_), padding(padding_) {
    // Each output pixel sums about in * k^2 / s^2 products.
    const int fan_in = std::max(1, in * kernel * kernel / (stride_ * stride_));
    weight = &ps.add(name + ".weight", uniform_tensor<T>({in, out, kernel, kernel}, kaiming_bound(fan_in), rng));
    if (with_bias) bias = &ps.add(name + ".bias", Tensor<T>({out}));
  }

  Var<T> operator()(Tape<T>& t, Var<T> x) const {
    std::optional<Var<T>> b;
    if (bias) b = t.param(*bias);
    return conv_transpose2d(x, t.param(*weight), b, stride, padding);
  }
};

template <class T>
struct BatchNorm2d {
  Parameter<T>* gamma = nullptr;
  Parameter<T>* beta = nullptr;
  Parameter<T>* running_mean = nullptr;
  Parameter<T>* running_var = nullptr;
  BatchNormOptions options;

  BatchNorm2d() = default;
  BatchNorm2d(ParameterSet<T>& ps, const std::string& name, int channels) {
    gamma = &ps.add(name + ".gamma", Tensor<T>({channels}, T(1)));
    beta = &ps.add(name + ".beta", Tensor<T>({channels}));
    running_mean = &ps.add(name + ".running_mean", Tensor<T>({channels}), false);
    running_var = &ps.add(name + ".running_var", Tensor<T>({channels}, T(1)), false);
  }

  Var<T> operator()(Tape<T>& t, Var<T> x) const {
    return batch_norm2d(x, t.param(*gamma), t.param(*beta), *running_mean, *running_var, options);
  }
};

template <class T>
struct Linear {
  Parameter<T>* weight = nullptr;
  Parameter<T>* bias = nullptr;

  Linear() = default;
  Linear(ParameterSet<T>& ps, const std::string& name, int in, int out, std::mt19937_64& rng,
         double bound = 0.0) {
    weight = &ps.add(name + ".weight", uniform_tensor<T>({out, in}, bound > 0 ? bound : kaiming_bound(in), rng));
    bias = &ps.add(name + ".bias", Tensor<T>({out}));
  }

  Var<T> operator()(Tape<T>& t, Var<T> x) const { return linear(x, t.param(*weight), t.param(*bias)); }
};

/// r = s(W_r [x, h]), z = s(W_z [x, h]), c = tanh(W_h [x, r * h]),
/// h' = (1 - z) * h + z * c. W_r and W_z are stored stacked.
template <class T>
struct GruCell {
  Parameter<T>* w_rz = nullptr;
  Parameter<T>* b_rz = nullptr;
  Parameter<T>* w_h = nullptr;
  Parameter<T>* b_h = nullptr;
  int input_size = 0;
  int hidden_size = 0;

  GruCell() = default;
  GruCell(ParameterSet<T>& ps, const std::string& name, int input, int hidden, std::mt19937_64& rng)
      : input_size(input), hidden_size(hidden) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    w_rz = &ps.add(name + ".w_rz", uniform_tensor<T>({2 * hidden, input + hidden}, bound, rng));
    b_rz = &ps.add(name + ".b_rz", Tensor<T>({2 * hidden}));
    w_h = &ps.add(name + ".w_h", uniform_tensor<T>({hidden, input + hidden}, bound, rng));
    b_h = &ps.add(name + ".b_h", Tensor<T>({hidden}));
  }

  Var<T> operator()(Tape<T>& t, Var<T> x, Var<T> h) const {
    detail::require(x.value().rank() == 2 && h.value().rank() == 2 && x.dim(0) == h.dim(0) &&
                        x.dim(1) == input_size && h.dim(1) == hidden_size,
                    "gru_step: shape mismatch " + shape_str(x.shape()) + ", " + shape_str(h.shape()));
    const Var<T> rz = sigmoid(linear(concat<T>({x, h}), t.param(*w_rz), t.param(*b_rz)));
    const Var<T> r = slice(rz, 0, hidden_size);
    const Var<T> z = slice(rz, hidden_size, 2 * hidden_size);
    const Var<T> cand = tanh(linear(concat<T>({x, mul(r, h)}), t.param(*w_h), t.param(*b_h)));
    return add(h, mul(z, sub(cand, h)));
  }
};

template <class T>
Var<T> gru_step(Tape<T>& t, Var<T> x, Var<T> h, const GruCell<T>& cell) {
  return cell(t, x, h);
}

}  // namespace echonav::nn

#endif  // ECHONAV_NN_LAYERS_HPP_
