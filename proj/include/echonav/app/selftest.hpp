#ifndef ECHONAV_APP_SELFTEST_HPP_
#define ECHONAV_APP_SELFTEST_HPP_

// Built-in sanity suite behind `echonav selftest`: finite-difference checks
// of every differentiable layer and a micro depth model in f64, plus depth
// metrics and SPL against plain scalar loops.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "echonav/depth.hpp"
#include "echonav/nav.hpp"
#include "echonav/nn.hpp"

namespace echonav::app {

struct SelftestResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace selftest_detail {

using nn::GradCheckReport;
using nn::Tape;
using nn::Tensor;
using nn::Var;

inline Tensor<double> random_tensor(const nn::Shape& shape, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  return nn::uniform_tensor<double>(shape, scale, rng);
}

inline SelftestResult from_report(const std::string& name, const GradCheckReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max rel err %.3g over %zu entries (worst %s)", r.max_rel_error, r.checked,
                r.worst.c_str());
  return {name, r.passed, buf};
}

}  // namespace selftest_detail

/// Finite-difference gradient checks; every entry must stay below 1e-4
/// relative error.
inline std::vector<SelftestResult> gradient_suite() {
  using namespace selftest_detail;
  using namespace nn;
  std::vector<SelftestResult> out;
  out.push_back(from_report(
      "conv2d", grad_check([](Tape<double>&, const std::vector<Var<double>>& in) {
        return random_projection(conv2d(in[0], in[1], in[2], 2, 1), 1);
      },
                           {random_tensor({2, 3, 8, 8}, 4), random_tensor({4, 3, 3, 3}, 5), random_tensor({4}, 6)})));
  out.push_back(from_report(
      "conv_transpose2d",
      grad_check([](Tape<double>&, const std::vector<Var<double>>& in) {
        return random_projection(conv_transpose2d(in[0], in[1], in[2], 2, 1), 2);
      },
                 {random_tensor({2, 3, 4, 4}, 12), random_tensor({3, 2, 4, 4}, 13), random_tensor({2}, 14)})));
  for (bool training : {true, false}) {
    ParameterSet<double> ps;
    BatchNorm2d<double> bn(ps, "bn", 3);
    std::mt19937_64 rng(18);
    bn.gamma->value = uniform_tensor<double>({3}, 1.0, rng);
    bn.beta->value = uniform_tensor<double>({3}, 1.0, rng);
    bn.running_mean->value = uniform_tensor<double>({3}, 0.5, rng);
    bn.running_var->value = Tensor<double>({3}, 1.7);
    GradCheckOptions opt;
    opt.training = training;
    out.push_back(from_report(
        training ? "batch_norm2d (train)" : "batch_norm2d (eval)",
        grad_check([&bn](Tape<double>& t, const std::vector<Var<double>>& in) {
          return random_projection(bn(t, in[0]), 3);
        },
                   {random_tensor({3, 3, 2, 3}, 19, 2.0)}, &ps, opt)));
  }
  out.push_back(from_report(
      "linear", grad_check([](Tape<double>&, const std::vector<Var<double>>& in) {
        return random_projection(linear(in[0], in[1], in[2]), 4);
      },
                           {random_tensor({3, 5}, 20), random_tensor({4, 5}, 21), random_tensor({4}, 22)})));
  {
    ParameterSet<double> ps;
    std::mt19937_64 rng(34);
    GruCell<double> cell(ps, "gru", 3, 4, rng);
    out.push_back(from_report(
        "gru_step (3 steps)",
        grad_check(
            [&cell](Tape<double>& t, const std::vector<Var<double>>& in) {
              Var<double> h = in[3];
              for (int s = 0; s < 3; ++s) h = cell(t, in[s], h);
              return random_projection(h, 7);
            },
            {random_tensor({2, 3}, 35), random_tensor({2, 3}, 36), random_tensor({2, 3}, 37),
             random_tensor({2, 4}, 38, 0.5)},
            &ps)));
  }
  out.push_back(from_report(
      "sigmoid/relu/tanh composite", grad_check([](Tape<double>&, const std::vector<Var<double>>& in) {
        return random_projection(add(sigmoid(mul(relu(in[0]), in[1])), tanh(in[1])), 5);
      },
                                               {random_tensor({4, 6}, 23, 3.0), random_tensor({4, 6}, 24, 3.0)})));
  {
    depth::DepthModelConfig c;
    c.geometry = {9, 9, 8, 8, 120.0, 10.0};
    c.task = depth::task_for(depth::InputMode::kEchoesRgb, scene::Side::kFront, 120.0, 120.0);
    c.arch.echo_encoder = {{3, 3, 2, 1}, {4, 3, 1, 1}, {4, 3, 1, 1}};
    c.arch.echo_embedding = 5;
    c.arch.vision_encoder = {{3, 4, 2, 1}, {4, 4, 2, 1}, {4, 3, 1, 1}, {4, 3, 1, 1}, {4, 3, 1, 1}};
    c.arch.decoder = {{4, 4, 2, 1}, {3, 4, 2, 1}, {3, 3, 1, 1}, {3, 3, 1, 1},
                      {3, 3, 1, 1}, {3, 3, 1, 1}, {1, 3, 1, 1}};
    depth::DepthModel<double> m(c, 16);
    const int batch = 2;
    std::mt19937_64 rng(17);
    depth::DepthBatch<double> b;
    b.size = batch;
    b.target = Tensor<double>({batch, 1, 8, 8});
    for (auto& v : b.target.data) v = unit_uniform(rng) < 0.5 ? 0.0 : 1.0;
    const auto echoes = uniform_tensor<double>({batch * 4, 2, 9, 9}, 1.0, rng);
    const auto rgb = uniform_tensor<double>({batch, 3, 8, 8}, 1.0, rng);
    GradCheckOptions opt;
    opt.max_entries_per_tensor = 24;
    out.push_back(from_report("depth model (micro config)",
                              grad_check(
                                  [&](Tape<double>& t, const std::vector<Var<double>>& in) {
                                    return depth::depth_loss(m.forward_vars(t, in[0], in[1], batch), b);
                                  },
                                  {echoes, rgb}, &m.params(), opt)));
  }
  return out;
}

/// Depth metrics and SPL against scalar loops on random instances.
inline std::vector<SelftestResult> metric_suite(int instances = 100) {
  std::vector<SelftestResult> out;
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  double worst = 0.0;
  bool monotone = true;
  for (int trial = 0; trial < instances; ++trial) {
    std::vector<float> pred(16), target(16);
    for (int i = 0; i < 16; ++i) {
      pred[i] = u(rng);
      target[i] = i % 7 == 3 ? 0.0f : 0.05f + u(rng);
    }
    const auto m = depth::eval_depth(pred, target, 10.0);
    std::vector<double> p, g;
    for (int i = 0; i < 16; ++i) {
      if (target[i] <= 0.0f) continue;
      g.push_back(10.0 * target[i]);
      p.push_back(std::max(10.0 * pred[i], 1e-3));
    }
    const double n = static_cast<double>(g.size());
    double se = 0, rel = 0, lg = 0, d[3] = {0, 0, 0};
    for (std::size_t i = 0; i < g.size(); ++i) {
      se += (p[i] - g[i]) * (p[i] - g[i]);
      rel += std::fabs(p[i] - g[i]) / g[i];
      lg += std::fabs(std::log10(p[i]) - std::log10(g[i]));
      const double ratio = std::max(p[i] / g[i], g[i] / p[i]);
      for (int k = 0; k < 3; ++k) d[k] += ratio < std::pow(1.25, k + 1) ? 1.0 : 0.0;
    }
    for (double e : {m.rmse - std::sqrt(se / n), m.rel - rel / n, m.log10 - lg / n, m.delta1 - d[0] / n,
                     m.delta2 - d[1] / n, m.delta3 - d[2] / n}) {
      worst = std::max(worst, std::fabs(e));
    }
    monotone = monotone && m.delta1 <= m.delta2 && m.delta2 <= m.delta3;
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max abs diff %.3g over %d instances", worst, instances);
  out.push_back({"eval_depth vs scalar loop", worst <= 1e-9, buf});
  out.push_back({"delta1 <= delta2 <= delta3", monotone, ""});

  std::uniform_real_distribution<double> len(0.5, 10.0);
  worst = 0.0;
  bool bounded = true;
  for (int trial = 0; trial < instances; ++trial) {
    std::vector<nav::EpisodeOutcome> o(1 + trial % 9);
    double spl = 0.0, sr = 0.0;
    for (auto& e : o) {
      e.success = nn::unit_uniform(rng) < 0.6;
      e.shortest_path_length = len(rng);
      e.path_length = nn::unit_uniform(rng) < 0.2 ? 0.0 : len(rng);
      if (e.success) {
        spl += e.shortest_path_length / std::max(e.path_length, e.shortest_path_length);
        sr += 1.0;
      }
    }
    const auto r = nav::summarize(o);
    worst = std::max({worst, std::fabs(r.spl - spl / o.size()), std::fabs(r.success_rate - sr / o.size())});
    bounded = bounded && r.spl <= r.success_rate + 1e-12;
  }
  std::snprintf(buf, sizeof(buf), "max abs diff %.3g over %d instances", worst, instances);
  out.push_back({"SPL vs scalar loop", worst <= 1e-9, buf});
  out.push_back({"SPL <= success rate", bounded, ""});
  const bool hand = nav::episode_spl({true, 3.0, 3.0, 6}) == 1.0 && nav::episode_spl({true, 3.0, 6.0, 12}) == 0.5 &&
                    nav::episode_spl({false, 3.0, 3.0, 6}) == 0.0;
  out.push_back({"SPL hand cases 1 / 0.5 / 0", hand, ""});
  return out;
}

}  // namespace echonav::app

#endif  // ECHONAV_APP_SELFTEST_HPP_
