#ifndef ECHONAV_NN_GRAD_CHECK_HPP_
#define ECHONAV_NN_GRAD_CHECK_HPP_

// Compares reverse-mode gradients against central finite differences in f64.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "echonav/nn/tape.hpp"

namespace echonav::nn {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-3;
  // Checks at most this many evenly spaced entries per tensor (0 = all).
  std::size_t max_entries_per_tensor = 0;
  bool training = true;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "<tensor>[<index>]" of the largest error
  bool passed = true;
};

using ScalarFn = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

namespace detail {

inline double run_scalar(const ScalarFn& f, const std::vector<Tensor<double>>& inputs, bool training) {
  Tape<double> t(training);
  std::vector<Var<double>> vars;
  for (const auto& x : inputs) vars.push_back(t.constant(x));
  const Var<double> out = f(t, vars);
  if (out.value().size() != 1) throw std::invalid_argument("grad_check needs a scalar function");
  return out.value()[0];
}

inline std::vector<std::size_t> probe_indices(std::size_t n, std::size_t limit) {
  std::vector<std::size_t> idx;
  if (limit == 0 || n <= limit) {
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
  } else {
    for (std::size_t j = 0; j < limit; ++j) idx.push_back(j * (n - 1) / (limit - 1));
  }
  return idx;
}

}  // namespace detail

/// Checks d f / d inputs and, when `params` is given, d f / d params.
inline GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor<double>> inputs,
                                  ParameterSet<double>* params = nullptr, const GradCheckOptions& opt = {}) {
  // Analytic pass.
  std::vector<Tensor<double>> analytic_inputs;
  std::vector<Tensor<double>> analytic_params;
  {
    if (params) params->zero_grad();
    Tape<double> t(opt.training);
    std::vector<Var<double>> vars;
    for (const auto& x : inputs) vars.push_back(t.input(x));
    const Var<double> out = f(t, vars);
    t.backward(out);
    for (const auto& v : vars) {
      analytic_inputs.push_back(t.has_grad(v.id) ? t.grad(v.id) : Tensor<double>(v.shape()));
    }
    if (params) {
      for (std::size_t i = 0; i < params->size(); ++i) analytic_params.push_back((*params)[i].grad);
      params->zero_grad();
    }
  }

  GradCheckReport rep;
  auto compare = [&](double a, double num, const std::string& where) {
    const double err = std::abs(a - num) / std::max({std::abs(a), std::abs(num), opt.floor});
    ++rep.checked;
    if (err >= rep.max_rel_error) {
      rep.max_rel_error = err;
      rep.worst = where;
    }
  };
  const double h = opt.step;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i : detail::probe_indices(inputs[k].size(), opt.max_entries_per_tensor)) {
      const double x0 = inputs[k][i];
      inputs[k][i] = x0 + h;
      const double fp = detail::run_scalar(f, inputs, opt.training);
      inputs[k][i] = x0 - h;
      const double fm = detail::run_scalar(f, inputs, opt.training);
      inputs[k][i] = x0;
      compare(analytic_inputs[k][i], (fp - fm) / (2.0 * h), "input" + std::to_string(k) + "[" + std::to_string(i) + "]");
    }
  }
  if (params) {
    for (std::size_t k = 0; k < params->size(); ++k) {
      Parameter<double>& p = (*params)[k];
      if (!p.trainable) continue;
      for (std::size_t i : detail::probe_indices(p.value.size(), opt.max_entries_per_tensor)) {
        // Running statistics move on every train-mode forward; restore them so
        // every probe sees the same state.
        std::vector<Tensor<double>> frozen;
        for (std::size_t j = 0; j < params->size(); ++j) {
          if (!(*params)[j].trainable) frozen.push_back((*params)[j].value);
        }
        auto restore = [&] {
          std::size_t f_i = 0;
          for (std::size_t j = 0; j < params->size(); ++j) {
            if (!(*params)[j].trainable) (*params)[j].value = frozen[f_i++];
          }
        };
        const double w0 = p.value[i];
        p.value[i] = w0 + h;
        const double fp = detail::run_scalar(f, inputs, opt.training);
        restore();
        p.value[i] = w0 - h;
        const double fm = detail::run_scalar(f, inputs, opt.training);
        restore();
        p.value[i] = w0;
        compare(analytic_params[k][i], (fp - fm) / (2.0 * h), p.name + "[" + std::to_string(i) + "]");
      }
    }
  }
  rep.passed = rep.max_rel_error < opt.tolerance;
  return rep;
}

/// Fixed random projection that turns a tensor output into a scalar loss.
inline Var<double> random_projection(Var<double> y, unsigned seed) {
  Tensor<double> w(y.shape());
  std::uint64_t s = seed * 0x9e3779b97f4a7c15ULL + 1;
  for (auto& v : w.data) {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    v = static_cast<double>(s >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  }
  return sum(mul(y, y.tape->constant(std::move(w))));
}

}  // namespace echonav::nn

#endif  // ECHONAV_NN_GRAD_CHECK_HPP_
