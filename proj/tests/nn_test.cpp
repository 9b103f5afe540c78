#include "echonav/nn.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "test_util.hpp"

namespace echonav::nn {
namespace {

Tensor<double> RandomTensor(const Shape& shape, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  return uniform_tensor<double>(shape, scale, rng);
}

TEST(Conv2d, ZeroInputGivesBroadcastBias) {
  Tape<double> t;
  const auto x = t.constant(Tensor<double>({2, 3, 5, 6}));
  const auto w = t.constant(RandomTensor({4, 3, 3, 3}, 1));
  const auto b = t.constant(Tensor<double>({4}, {0.5, -1.0, 2.0, 0.25}));
  const auto y = conv2d(x, w, b, 1, 1);
  ASSERT_EQ(y.shape(), (Shape{2, 4, 5, 6}));
  for (std::size_t i = 0; i < y.value().size(); ++i) {
    EXPECT_EQ(y.value()[i], b.value()[(i / 30) % 4]);
  }
}

TEST(Conv2d, OnesKernelSumsWindow) {
  Tape<double> t;
  const auto y = conv2d(t.constant(Tensor<double>({1, 1, 3, 3}, 1.0)), t.constant(Tensor<double>({1, 1, 3, 3}, 1.0)),
                        t.constant(Tensor<double>({1}, 0.5)), 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.value()[0], 9.5);
}

// Direct seven-loop cross-correlation.
Tensor<double> NaiveConv(const Tensor<double>& x, const Tensor<double>& w, int s, int p) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3), o = w.dim(0), k = w.dim(2);
  const int oh = (h + 2 * p - k) / s + 1, ow = (wd + 2 * p - k) / s + 1;
  Tensor<double> y({n, o, oh, ow});
  for (int i = 0; i < n; ++i)
    for (int oc = 0; oc < o; ++oc)
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx) {
          double acc = 0;
          for (int ic = 0; ic < c; ++ic)
            for (int ki = 0; ki < k; ++ki)
              for (int kj = 0; kj < k; ++kj) {
                const int iy = yy * s - p + ki, ix = xx * s - p + kj;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += x[((i * c + ic) * h + iy) * wd + ix] * w[((oc * c + ic) * k + ki) * k + kj];
              }
          y[((i * o + oc) * oh + yy) * ow + xx] = acc;
        }
  return y;
}

TEST(Conv2d, MatchesNaiveLoop) {
  const auto x = RandomTensor({2, 3, 9, 7}, 2);
  const auto w = RandomTensor({5, 3, 4, 4}, 3);
  Tape<double> t;
  const auto y = conv2d(t.constant(x), t.constant(w), std::nullopt, 2, 1);
  const auto ref = NaiveConv(x, w, 2, 1);
  ASSERT_EQ(y.shape(), ref.shape);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.value()[i], ref[i], 1e-12);
}

TEST(Conv2d, GradientMatchesFiniteDifferences) {
  const GradCheckReport r = grad_check(
      [](Tape<double>&, const std::vector<Var<double>>& in) {
        return random_projection(conv2d(in[0], in[1], in[2], 2, 1), 1);
      },
      {RandomTensor({2, 3, 8, 8}, 4), RandomTensor({4, 3, 3, 3}, 5), RandomTensor({4}, 6)});
  EXPECT_TRUE(r.passed) << r.max_rel_error << " at " << r.worst;
  EXPECT_EQ(r.checked, 2u * 3 * 64 + 4 * 27 + 4);
}

TEST(Conv2d, RejectsBadGeometry) {
  Tape<double> t;
  const auto x = t.constant(Tensor<double>({1, 3, 4, 4}));
  EXPECT_THROW(conv2d(x, t.constant(Tensor<double>({2, 2, 3, 3})), std::nullopt, 1, 0), std::invalid_argument);
  EXPECT_THROW(conv2d(x, t.constant(Tensor<double>({2, 3, 7, 7})), std::nullopt, 1, 1), std::invalid_argument);
  EXPECT_THROW(conv2d(x, t.constant(Tensor<double>({2, 3, 3, 3})), std::nullopt, 0, 0), std::invalid_argument);
}

TEST(ConvTranspose2d, IdentityKernelCopiesInput) {
  const auto x = RandomTensor({2, 3, 4, 5}, 7);
  Tensor<double> w({3, 3, 1, 1});
  for (int i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  Tape<double> t;
  const auto y = conv_transpose2d(t.constant(x), t.constant(w), t.constant(Tensor<double>({3}, 0.5)), 1, 0);
  ASSERT_EQ(y.shape(), x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.value()[i], x[i] + 0.5);
}

TEST(ConvTranspose2d, IsAdjointOfConv2d) {
  // <conv(x), y> == <x, conv_transpose(y)> with shared weights.
  const auto x = RandomTensor({2, 3, 9, 9}, 8);
  const auto w = RandomTensor({4, 3, 3, 3}, 9);
  Tape<double> t;
  const auto cx = conv2d(t.constant(x), t.constant(w), std::nullopt, 2, 1);
  const auto y = RandomTensor(cx.shape(), 10);
  const auto ty = conv_transpose2d(t.constant(y), t.constant(w), std::nullopt, 2, 1);
  ASSERT_EQ(ty.shape(), x.shape);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += cx.value()[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * ty.value()[i];
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(ConvTranspose2d, InvertsConvShapeMap) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 5);
    const int s = 1 + static_cast<int>(rng() % 3);
    const int p = static_cast<int>(rng() % k);
    const int out = 1 + static_cast<int>(rng() % 9);
    const int in = (out - 1) * s - 2 * p + k;  // an input size that tiles exactly
    if (in < 1) continue;
    EXPECT_EQ(conv_out_size(in, k, s, p), out);
    EXPECT_EQ(conv_transpose_out_size(out, k, s, p), in);
  }
}

TEST(ConvTranspose2d, GradientMatchesFiniteDifferences) {
  const GradCheckReport r = grad_check(
      [](Tape<double>&, const std::vector<Var<double>>& in) {
        return random_projection(conv_transpose2d(in[0], in[1], in[2], 2, 1), 2);
      },
      {RandomTensor({2, 3, 4, 4}, 12), RandomTensor({3, 2, 4, 4}, 13), RandomTensor({2}, 14)});
  EXPECT_TRUE(r.passed) << r.max_rel_error << " at " << r.worst;
}

TEST(ConvTranspose2d, RejectsInvalidGeometry) {
  Tape<double> t;
  const auto x = t.constant(Tensor<double>({1, 2, 1, 1}));
  EXPECT_THROW(conv_transpose2d(x, t.constant(Tensor<double>({2, 1, 1, 1})), std::nullopt, 1, 1),
               std::invalid_argument);
  EXPECT_THROW(conv_transpose2d(x, t.constant(Tensor<double>({3, 1, 2, 2})), std::nullopt, 1, 0),
               std::invalid_argument);
}

struct BnFixture {
  ParameterSet<double> ps;
  BatchNorm2d<double> bn{ps, "bn", 3};
};

TEST(BatchNorm2d, TrainModeStandardizesChannels) {
  BnFixture f;
  Tape<double> t(true);
  // Inputs with variance ~33 keep the eps = 1e-5 shrinkage below 1e-6.
  const auto x = RandomTensor({4, 3, 5, 5}, 15, 10.0);
  const auto y = f.bn(t, t.constant(x)).value();
  for (int c = 0; c < 3; ++c) {
    double m = 0, v = 0;
    for (int n = 0; n < 4; ++n)
      for (int k = 0; k < 25; ++k) m += y[(n * 3 + c) * 25 + k];
    m /= 100;
    for (int n = 0; n < 4; ++n)
      for (int k = 0; k < 25; ++k) v += std::pow(y[(n * 3 + c) * 25 + k] - m, 2);
    v /= 100;
    EXPECT_NEAR(m, 0.0, 1e-6);
    EXPECT_NEAR(v, 1.0, 1e-6);
  }
}

TEST(BatchNorm2d, AffineParameters) {
  BnFixture f;
  const auto x = RandomTensor({2, 3, 3, 3}, 16);
  Tape<double> t0(true);
  const auto base = f.bn(t0, t0.constant(x)).value();
  f.bn.gamma->value = Tensor<double>({3}, 2.0);
  f.bn.beta->value = Tensor<double>({3}, 3.0);
  Tape<double> t1(true);
  const auto y = f.bn(t1, t1.constant(x)).value();
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], 2.0 * base[i] + 3.0, 1e-12);
}

TEST(BatchNorm2d, RunningStatisticsUseMomentum) {
  BnFixture f;
  const auto x = RandomTensor({2, 3, 2, 2}, 17);
  Tape<double> t(true);
  f.bn(t, t.constant(x));
  for (int c = 0; c < 3; ++c) {
    double m = 0, v = 0;
    for (int n = 0; n < 2; ++n)
      for (int k = 0; k < 4; ++k) m += x[(n * 3 + c) * 4 + k];
    m /= 8;
    for (int n = 0; n < 2; ++n)
      for (int k = 0; k < 4; ++k) v += std::pow(x[(n * 3 + c) * 4 + k] - m, 2);
    v /= 7;
    EXPECT_NEAR(f.bn.running_mean->value[c], 0.1 * m, 1e-12);
    EXPECT_NEAR(f.bn.running_var->value[c], 0.9 + 0.1 * v, 1e-12);
  }
}

TEST(BatchNorm2d, RejectsSingletonStatisticsInTrainMode) {
  BnFixture f;
  Tape<double> train(true);
  EXPECT_THROW(f.bn(train, train.constant(Tensor<double>({1, 3, 1, 1}))), std::invalid_argument);
  Tape<double> eval(false);
  EXPECT_NO_THROW(f.bn(eval, eval.constant(Tensor<double>({1, 3, 1, 1}))));
}

TEST(BatchNorm2d, GradientMatchesFiniteDifferencesInBothModes) {
  for (bool training : {true, false}) {
    BnFixture f;
    std::mt19937_64 rng(18);
    f.bn.gamma->value = uniform_tensor<double>({3}, 1.0, rng);
    f.bn.beta->value = uniform_tensor<double>({3}, 1.0, rng);
    f.bn.running_mean->value = uniform_tensor<double>({3}, 0.5, rng);
    f.bn.running_var->value = Tensor<double>({3}, 1.7);
    GradCheckOptions opt;
    opt.training = training;
    const GradCheckReport r = grad_check(
        [&f](Tape<double>& t, const std::vector<Var<double>>& in) { return random_projection(f.bn(t, in[0]), 3); },
        {RandomTensor({3, 3, 2, 3}, 19, 2.0)}, &f.ps, opt);
    EXPECT_TRUE(r.passed) << (training ? "train " : "eval ") << r.max_rel_error << " at " << r.worst;
  }
}

TEST(Linear, MatchesHandProductAndGradient) {
  Tape<double> t;
  const auto y = linear(t.constant(Tensor<double>({1, 2}, {1.0, 2.0})),
                        t.constant(Tensor<double>({2, 2}, {1.0, -1.0, 0.5, 0.25})),
                        t.constant(Tensor<double>({2}, {0.1, 0.2})));
  EXPECT_NEAR(y.value()[0], -0.9, 1e-15);
  EXPECT_NEAR(y.value()[1], 1.2, 1e-15);
  const GradCheckReport r = grad_check(
      [](Tape<double>&, const std::vector<Var<double>>& in) {
        return random_projection(linear(in[0], in[1], in[2]), 4);
      },
      {RandomTensor({3, 5}, 20), RandomTensor({4, 5}, 21), RandomTensor({4}, 22)});
  EXPECT_TRUE(r.passed) << r.max_rel_error << " at " << r.worst;
}

TEST(Activations, SigmoidReluTanhCompositeGradient) {
  const GradCheckReport r = grad_check(
      [](Tape<double>&, const std::vector<Var<double>>& in) {
        const auto a = relu(in[0]);
        return random_projection(add(sigmoid(mul(a, in[1])), tanh(in[1])), 5);
      },
      {RandomTensor({4, 6}, 23, 3.0), RandomTensor({4, 6}, 24, 3.0)});
  EXPECT_TRUE(r.passed) << r.max_rel_error << " at " << r.worst;
}

TEST(Activations, SigmoidStaysInOpenUnitInterval) {
  Tape<float> t;
  const auto y = sigmoid(t.constant(Tensor<float>({5}, {-30.f, -5.f, 0.f, 5.f, 15.f})));
  for (float v : y.value().data) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(ShapeOps, TileSpatialCopiesVector) {
  Tape<double> t;
  const auto v = RandomTensor({2, 3}, 25);
  const auto y = tile_spatial(t.constant(v), 2, 2).value();
  ASSERT_EQ(y.shape, (Shape{2, 3, 2, 2}));
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 4; ++k) EXPECT_EQ(y[(b * 3 + c) * 4 + k], v[b * 3 + c]);
}

TEST(ShapeOps, ConcatThenSliceRecoversInputs) {
  Tape<double> t;
  const auto a = RandomTensor({2, 3, 2, 2}, 26), b = RandomTensor({2, 1, 2, 2}, 27);
  const auto c = concat<double>({t.constant(a), t.constant(b)});
  ASSERT_EQ(c.shape(), (Shape{2, 4, 2, 2}));
  EXPECT_EQ(slice(c, 0, 3).value(), a);
  EXPECT_EQ(slice(c, 3, 4).value(), b);
  EXPECT_THROW(concat<double>({t.constant(a), t.constant(RandomTensor({2, 1, 3, 2}, 1))}), std::invalid_argument);
}

TEST(ShapeOps, GradientsThroughShapeOps) {
  const GradCheckReport r = grad_check(
      [](Tape<double>&, const std::vector<Var<double>>& in) {
        const auto tiled = tile_spatial(in[0], 2, 3);
        const auto cat = concat<double>({tiled, in[1]});
        const auto flat = flatten(slice(cat, 1, 4));
        return random_projection(reshape(flat, {2, 3, 6}), 6);
      },
      {RandomTensor({2, 3}, 28), RandomTensor({2, 2, 2, 3}, 29)});
  EXPECT_TRUE(r.passed) << r.max_rel_error << " at " << r.worst;
}

TEST(Losses, LogSoftmaxGatherMinimumClampGradient) {
  const GradCheckReport r = grad_check(
      [](Tape<double>& t, const std::vector<Var<double>>& in) {
        const auto lp = gather(log_softmax(in[0]), {0, 3, 2});
        const auto ratio = exp(lp);
        const auto adv = t.constant(Tensor<double>({3}, {1.0, -0.5, 2.0}));
        const auto surr = minimum(mul(ratio, adv), mul(clamp(ratio, 0.5, 0.9), adv));
        return add(mean(surr), sum(sum_rows(square(in[0]))));
      },
      {Tensor<double>({3, 4}, {0.1, -0.4, 0.3, 1.2, 0.7, -1.0, 0.2, 0.05, -0.3, 0.6, 0.9, 0.0})});
  EXPECT_TRUE(r.passed) << r.max_rel_error << " at " << r.worst;
}

TEST(Losses, L1LossValuesAndMask) {
  Tape<double> t;
  const Tensor<double> target({2, 2}, {0.2, 0.4, 0.6, 0.8});
  Tensor<double> shifted = target;
  for (auto& v : shifted.data) v += 0.1;
  EXPECT_EQ(l1_loss(t.constant(target), target).value()[0], 0.0);
  EXPECT_NEAR(l1_loss(t.constant(shifted), target).value()[0], 0.1, 1e-12);
  shifted[0] = 5.0;
  EXPECT_NEAR(l1_loss(t.constant(shifted), target, {0, 1, 1, 1}).value()[0], 0.1, 1e-12);
  EXPECT_THROW(l1_loss(t.constant(shifted), target, {0, 0, 0, 0}), std::invalid_argument);
}

TEST(Gru, ZeroWeightsAndZeroStateStayZero) {
  ParameterSet<double> ps;
  std::mt19937_64 rng(30);
  GruCell<double> cell(ps, "gru", 3, 4, rng);
  for (std::size_t i = 0; i < ps.size(); ++i) std::fill(ps[i].value.data.begin(), ps[i].value.data.end(), 0.0);
  Tape<double> t;
  const auto h = cell(t, t.constant(RandomTensor({2, 3}, 31)), t.constant(Tensor<double>({2, 4})));
  for (double v : h.value().data) EXPECT_EQ(v, 0.0);
}

TEST(Gru, HiddenStateStaysInOpenInterval) {
  ParameterSet<double> ps;
  std::mt19937_64 rng(32);
  GruCell<double> cell(ps, "gru", 3, 8, rng);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (auto& v : ps[i].value.data) v *= 10.0;
  }
  Tape<double> t;
  auto h = t.constant(Tensor<double>({2, 8}));
  for (int step = 0; step < 50; ++step) {
    h = cell(t, t.constant(RandomTensor({2, 3}, 33 + step, 5.0)), h);
    for (double v : h.value().data) {
      ASSERT_GT(v, -1.0);
      ASSERT_LT(v, 1.0);
    }
  }
}

TEST(Gru, BackpropThroughTimeMatchesFiniteDifferences) {
  ParameterSet<double> ps;
  std::mt19937_64 rng(34);
  GruCell<double> cell(ps, "gru", 3, 4, rng);
  const GradCheckReport r = grad_check(
      [&cell](Tape<double>& t, const std::vector<Var<double>>& in) {
        Var<double> h = in[3];
        for (int s = 0; s < 3; ++s) h = cell(t, in[s], h);
        return random_projection(h, 7);
      },
      {RandomTensor({2, 3}, 35), RandomTensor({2, 3}, 36), RandomTensor({2, 3}, 37), RandomTensor({2, 4}, 38, 0.5)},
      &ps);
  EXPECT_TRUE(r.passed) << r.max_rel_error << " at " << r.worst;
  Tape<double> t;
  EXPECT_THROW(cell(t, t.constant(Tensor<double>({2, 4})), t.constant(Tensor<double>({2, 4}))),
               std::invalid_argument);
}

TEST(Adam, ZeroGradientLeavesParameterUnchanged) {
  ParameterSet<double> ps;
  auto& p = ps.add("w", Tensor<double>({3}, {1.0, -2.0, 0.5}));
  const auto before = p.value;
  Adam<double> opt({0.1});
  for (int i = 0; i < 5; ++i) opt.step(ps);
  EXPECT_EQ(p.value, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // m1 = (1 - b1) g, v1 = (1 - b2) g^2; bias correction makes the step g / |g| * lr.
  ParameterSet<double> ps;
  auto& p = ps.add("w", Tensor<double>({2}, {1.0, 1.0}));
  p.grad = Tensor<double>({2}, {3.0, -0.02});
  Adam<double> opt({0.01});
  opt.step(ps);
  EXPECT_NEAR(p.value[0], 1.0 - 0.01 * 3.0 / (3.0 + 1e-8), 1e-12);
  EXPECT_NEAR(p.value[1], 1.0 + 0.01 * 0.02 / (0.02 + 1e-8), 1e-12);
  EXPECT_THROW(adam_update(p, AdamOptions{}, 0), std::invalid_argument);
}

TEST(Adam, ConvergesOnScalarQuadratic) {
  // f(w) = (w - 3)^2 from w = 2, against a hand-rolled scalar Adam recursion.
  ParameterSet<double> ps;
  auto& w = ps.add("w", Tensor<double>({1}, 2.0));
  Adam<double> opt({0.1});
  double ref = 2.0, m = 0.0, v = 0.0;
  for (int i = 1; i <= 50; ++i) {
    Tape<double> t;
    const auto d = add_scalar(t.param(w), -3.0);
    t.backward(sum(square(d)));
    opt.step(ps);
    const double g = 2.0 * (ref - 3.0);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    ref -= 0.1 * (m / (1.0 - std::pow(0.9, i))) / (std::sqrt(v / (1.0 - std::pow(0.999, i))) + 1e-8);
    ASSERT_NEAR(w.value[0], ref, 1e-12);
  }
  EXPECT_LT(std::abs(w.value[0] - 3.0), 1e-2);
}

TEST(Tape, BackwardAccumulatesWithoutTouchingValues) {
  ParameterSet<double> ps;
  std::mt19937_64 rng(39);
  Linear<double> fc(ps, "fc", 3, 2, rng);
  const auto w0 = fc.weight->value;
  const auto x = RandomTensor({4, 3}, 40);
  Tensor<double> g1;
  for (int pass = 0; pass < 2; ++pass) {
    Tape<double> t;
    t.backward(random_projection(fc(t, t.constant(x)), 8));
    if (pass == 0) g1 = fc.weight->grad;
  }
  EXPECT_EQ(fc.weight->value, w0);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_DOUBLE_EQ(fc.weight->grad[i], 2.0 * g1[i]);
}

TEST(Tape, SeededInitializationIsReproducible) {
  auto build = [](std::uint64_t seed) {
    ParameterSet<float> ps;
    std::mt19937_64 rng(seed);
    Conv2d<float> c(ps, "c", 2, 4, 3, 1, 1, rng);
    Linear<float> l(ps, "l", 5, 6, rng);
    std::vector<float> all;
    for (std::size_t i = 0; i < ps.size(); ++i) all.insert(all.end(), ps[i].value.data.begin(), ps[i].value.data.end());
    return all;
  };
  EXPECT_TRUE(test::BitEqual(build(5), build(5)));
  EXPECT_FALSE(test::BitEqual(build(5), build(6)));
}

TEST(Properties, ConvShapeContractHoldsForRandomHyperparameters) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 60; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 4);
    const int s = 1 + static_cast<int>(rng() % 3);
    const int p = static_cast<int>(rng() % 3);
    const int h = k + static_cast<int>(rng() % 8), w = k + static_cast<int>(rng() % 8);
    const int c = 1 + static_cast<int>(rng() % 3), o = 1 + static_cast<int>(rng() % 3);
    Tape<float> t;
    const auto y = conv2d(t.constant(Tensor<float>({2, c, h, w})), t.constant(Tensor<float>({o, c, k, k})),
                          std::nullopt, s, p);
    EXPECT_EQ(y.shape(), (Shape{2, o, (h + 2 * p - k) / s + 1, (w + 2 * p - k) / s + 1}));
    const int ph = std::max(1, p < k ? p : 0);
    if ((h - 1) * s - 2 * ph + k > 0) {
      const auto z = conv_transpose2d(t.constant(Tensor<float>({1, c, h, w})), t.constant(Tensor<float>({c, o, k, k})),
                                      std::nullopt, s, ph);
      EXPECT_EQ(z.shape(), (Shape{1, o, (h - 1) * s - 2 * ph + k, (w - 1) * s - 2 * ph + k}));
    }
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ParameterSet<float> a;
  std::mt19937_64 rng(42);
  Conv2d<float> c(a, "conv", 2, 3, 3, 1, 1, rng);
  BatchNorm2d<float> bn(a, "bn", 3);
  bn.running_mean->value[1] = 0.123f;
  const auto dir = std::filesystem::temp_directory_path() / "echonav_ckpt_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(dir, a, {{"note", "x"}});
  ParameterSet<float> b;
  std::mt19937_64 other(7);
  Conv2d<float> c2(b, "conv", 2, 3, 3, 1, 1, other);
  BatchNorm2d<float> bn2(b, "bn", 3);
  const auto hyper = load_checkpoint(dir, b);
  EXPECT_EQ(hyper.at("note"), "x");
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(test::BitEqual(a[i].value.data, b[i].value.data));
  ParameterSet<float> wrong;
  Conv2d<float> c3(wrong, "conv", 2, 4, 3, 1, 1, other);
  BatchNorm2d<float> bn3(wrong, "bn", 4);
  EXPECT_THROW(load_checkpoint(dir, wrong), std::runtime_error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace echonav::nn
