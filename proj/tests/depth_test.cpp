#include "echonav/depth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "test_util.hpp"

namespace echonav::depth {
namespace {

using nn::Tape;
using nn::Tensor;
using nn::Var;

SampleGeometry FullGeometry() { return geometry_of(RenderConfig{}); }

DepthModelConfig DefaultConfig(InputMode mode) {
  DepthModelConfig c;
  c.geometry = FullGeometry();
  c.task = task_for(mode, Side::kFront, 120.0, 120.0);
  return c;
}

Tensor<float> RandomEchoes(int n, const SampleGeometry& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return nn::uniform_tensor<float>({n, 2, g.freq_bins, g.frames}, 1.0, rng);
}

// A small rendered dataset shared by the training tests.
const DepthDataset& TinyDataset() {
  static const DepthDataset ds = [] {
    DatasetSpec spec;
    spec.train_scenes = 2;
    spec.val_scenes = 1;
    spec.test_scenes = 1;
    spec.poses_per_scene = 8;
    spec.render.view = {120.0, 120.0, 32, 32};
    return generate_dataset(spec, 11);
  }();
  return ds;
}

DepthModelConfig DeskConfig(InputMode mode, const DepthDataset& ds) {
  DepthModelConfig c;
  c.geometry = ds.geometry;
  c.arch = desk_architecture();
  c.task = task_for(mode, Side::kFront, 120.0, 120.0);
  c.echo_norm = fit_echo_normalization(ds.train);
  return c;
}

// ---------------------------------------------------------------------------
// Encoders and decoder

TEST(EchoEncoder, OutputsFiveHundredTwelveValues) {
  DepthModel<float> m(DefaultConfig(InputMode::kEchoesOnly), 1);
  Tape<float> t(false);
  const auto e = m.echo_encoder()(t, t.constant(RandomEchoes(3, FullGeometry(), 2)));
  EXPECT_EQ(e.shape(), (nn::Shape{3, 512}));
}

TEST(EchoEncoder, IdenticalOrientationsGiveIdenticalVectors) {
  DepthModel<float> m(DefaultConfig(InputMode::kEchoesOnly), 3);
  const auto g = FullGeometry();
  const Tensor<float> one = RandomEchoes(1, g, 4);
  Tensor<float> four({4, 2, g.freq_bins, g.frames});
  for (int k = 0; k < 4; ++k) std::copy(one.data.begin(), one.data.end(), four.data.begin() + k * one.size());
  Tape<float> t(false);
  const auto e = m.encode_echoes(t, t.constant(four), 1).value();
  ASSERT_EQ(e.shape, (nn::Shape{1, 2048}));
  for (int k = 1; k < 4; ++k) {
    for (int i = 0; i < 512; ++i) EXPECT_EQ(e[k * 512 + i], e[i]);
  }
}

TEST(EchoEncoder, OrientationsShareOneParameterSet) {
  DepthModelConfig c = DefaultConfig(InputMode::kEchoesOnly);
  DepthModel<float> four(c, 5);
  c.task.echo_orientations = 1;
  DepthModel<float> one(c, 5);
  std::size_t n4 = 0, n1 = 0;
  for (std::size_t i = 0; i < four.params().size(); ++i) {
    if (four.params()[i].name.rfind("echo.", 0) == 0) n4 += four.params()[i].value.size();
  }
  for (std::size_t i = 0; i < one.params().size(); ++i) {
    if (one.params()[i].name.rfind("echo.", 0) == 0) n1 += one.params()[i].value.size();
  }
  EXPECT_EQ(n4, n1);

  // Perturbing the shared weights moves every orientation slice exactly as the
  // single encoder applied to that orientation's input.
  const auto g = FullGeometry();
  const Tensor<float> x = RandomEchoes(4, g, 6);
  four.params().find("echo.conv0.weight")->value[7] += 0.5f;
  Tape<float> t(false);
  const auto joint = four.encode_echoes(t, t.constant(x), 1).value();
  for (int k = 0; k < 4; ++k) {
    Tensor<float> xk({1, 2, g.freq_bins, g.frames});
    std::copy_n(x.data.begin() + k * xk.size(), xk.size(), xk.data.begin());
    Tape<float> tk(false);
    const auto ek = four.echo_encoder()(tk, tk.constant(xk)).value();
    for (int i = 0; i < 512; ++i) EXPECT_NEAR(joint[k * 512 + i], ek[i], 1e-5f);
  }
}

// Transposed-conv output size (in - 1) * s - 2p + k, composed by hand.
int DeconvOut(int in, int k, int s, int p) { return (in - 1) * s - 2 * p + k; }
int ConvOut(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

TEST(VisionEncoder, DefaultTableGivesFourByFourAt128) {
  int size = 128;
  for (int i = 0; i < 5; ++i) size = ConvOut(size, 4, 2, 1);
  ASSERT_EQ(size, 4);
  DepthModel<float> m(DefaultConfig(InputMode::kRgbOnly), 7);
  std::mt19937_64 rng(8);
  Tape<float> t(false);
  const auto f = m.vision_features(t, t.constant(nn::uniform_tensor<float>({2, 3, 128, 128}, 1.0, rng)));
  EXPECT_EQ(f.shape(), (nn::Shape{2, 512, size, size}));
}

TEST(VisionEncoder, ZeroInputGivesZeroPreNormActivations) {
  DepthModel<float> m(DefaultConfig(InputMode::kRgbOnly), 9);
  const auto* w = m.params().find("vision.conv0.weight");
  const auto* b = m.params().find("vision.conv0.bias");
  ASSERT_TRUE(w && b);
  Tape<float> t(false);
  const auto y = nn::conv2d(t.constant(Tensor<float>({1, 3, 128, 128})), t.constant(w->value),
                            t.constant(b->value), 2, 1);
  for (float v : y.value().data) EXPECT_EQ(v, 0.0f);
}

TEST(DepthDecoder, DefaultOutputMatchesTargetDims) {
  int size = 4;
  const int stages[7][3] = {{4, 2, 1}, {4, 2, 1}, {4, 2, 1}, {4, 2, 1}, {4, 2, 1}, {3, 1, 1}, {3, 1, 1}};
  for (const auto& s : stages) size = DeconvOut(size, s[0], s[1], s[2]);
  EXPECT_EQ(size, 128);

  DepthModel<float> m(DefaultConfig(InputMode::kEchoesRgb), 10);
  const auto g = FullGeometry();
  DepthBatch<float> b;
  b.size = 1;
  b.echoes = RandomEchoes(4, g, 11);
  std::mt19937_64 rng(12);
  b.rgb = nn::uniform_tensor<float>({1, 3, 128, 128}, 1.0, rng);
  Tape<float> t(false);
  const auto y = m.forward(t, b).value();
  EXPECT_EQ(y.shape, (nn::Shape{1, 1, size, size}));
  for (float v : y.data) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(DepthDecoder, FourOrientationEchoOnlyConsumes2048Channels) {
  const auto c = DefaultConfig(InputMode::kEchoesOnly);
  EXPECT_EQ(decoder_input_channels(c), 4 * 512);
  DepthModel<float> m(c, 13);
  EXPECT_EQ(m.params().find("decoder.deconv0.weight")->value.dim(0), 2048);
}

TEST(DepthModel, RejectsMismatchedDecoder) {
  auto c = DefaultConfig(InputMode::kEchoesRgb);
  c.arch.decoder.erase(c.arch.decoder.begin());  // one upsampling stage short: 64x64
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = DefaultConfig(InputMode::kEchoesRgb);
  c.arch.decoder.back().channels = 2;
  EXPECT_THROW(validate(c), std::invalid_argument);
}

TEST(DepthModel, EchoOnlyPredictionIgnoresRgb) {
  const auto& ds = TinyDataset();
  DepthModel<float> m(DeskConfig(InputMode::kEchoesOnly, ds), 14);
  const auto& mc = m.config();
  std::vector<const DepthSample*> ptrs = {&ds.train[0], &ds.train[1]};
  auto b = make_batch<float>(ptrs, mc.task, mc.geometry, mc.echo_norm);
  EXPECT_TRUE(b.rgb.empty());
  Tape<float> t1(false);
  const auto y1 = m.forward(t1, b).value();
  std::mt19937_64 rng(15);
  b.rgb = nn::uniform_tensor<float>({2, 3, 32, 32}, 1.0, rng);
  Tape<float> t2(false);
  EXPECT_TRUE(test::BitEqual(y1.data, m.forward(t2, b).value().data));
}

// Micro configuration in f64: every parameter and both inputs against
// central differences, BatchNorm in train mode.
TEST(DepthModel, EndToEndGradientMatchesFiniteDifferences) {
  DepthModelConfig c;
  c.geometry = {9, 9, 8, 8, 120.0, 10.0};
  c.task = task_for(InputMode::kEchoesRgb, Side::kFront, 120.0, 120.0);
  c.arch.echo_encoder = {{3, 3, 2, 1}, {4, 3, 1, 1}, {4, 3, 1, 1}};
  c.arch.echo_embedding = 5;
  c.arch.vision_encoder = {{3, 4, 2, 1}, {4, 4, 2, 1}, {4, 3, 1, 1}, {4, 3, 1, 1}, {4, 3, 1, 1}};
  c.arch.decoder = {{4, 4, 2, 1}, {3, 4, 2, 1}, {3, 3, 1, 1}, {3, 3, 1, 1}, {3, 3, 1, 1}, {3, 3, 1, 1}, {1, 3, 1, 1}};
  DepthModel<double> m(c, 16);
  const int batch = 2;
  std::mt19937_64 rng(17);
  DepthBatch<double> b;
  b.size = batch;
  b.target = Tensor<double>({batch, 1, 8, 8});
  for (auto& v : b.target.data) v = nn::unit_uniform(rng) < 0.5 ? 0.0 : 1.0;  // L1 stays smooth at {0, 1}
  const auto echoes = nn::uniform_tensor<double>({batch * 4, 2, 9, 9}, 1.0, rng);
  const auto rgb = nn::uniform_tensor<double>({batch, 3, 8, 8}, 1.0, rng);
  nn::GradCheckOptions opt;
  opt.max_entries_per_tensor = 24;
  const auto r = nn::grad_check(
      [&](Tape<double>& t, const std::vector<Var<double>>& in) {
        return depth_loss(m.forward_vars(t, in[0], in[1], batch), b);
      },
      {echoes, rgb}, &m.params(), opt);
  EXPECT_TRUE(r.passed) << r.max_rel_error << " at " << r.worst;
  EXPECT_GT(r.checked, 500u);
}

// ---------------------------------------------------------------------------
// Loss and metrics

TEST(DepthLoss, ZeroForPerfectPrediction) {
  Tape<double> t;
  std::mt19937_64 rng(18);
  const auto target = nn::uniform_tensor<double>({1, 1, 4, 4}, 1.0, rng);
  DepthBatch<double> b;
  b.target = target;
  EXPECT_EQ(depth_loss(t.constant(target), b).value()[0], 0.0);
}

TEST(DepthLoss, ConstantOffsetGivesOffset) {
  Tape<double> t;
  DepthBatch<double> b;
  b.target = Tensor<double>({1, 1, 4, 4}, 0.3);
  EXPECT_NEAR(depth_loss(t.constant(Tensor<double>({1, 1, 4, 4}, 0.4)), b).value()[0], 0.1, 1e-15);
}

TEST(DepthLoss, MatchesScalarLoopOnRandomMaps) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    DepthBatch<double> b;
    b.target = nn::uniform_tensor<double>({1, 1, 4, 4}, 1.0, rng);
    const auto pred = nn::uniform_tensor<double>({1, 1, 4, 4}, 1.0, rng);
    b.mask.resize(16);
    for (auto& m : b.mask) m = nn::unit_uniform(rng) < 0.7 ? 1 : 0;
    b.mask[0] = 1;
    double acc = 0.0;
    int n = 0;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        if (!b.mask[r * 4 + c]) continue;
        acc += std::fabs(pred.data[r * 4 + c] - b.target.data[r * 4 + c]);
        n += 1;
      }
    }
    Tape<double> t;
    EXPECT_NEAR(depth_loss(t.constant(pred), b).value()[0], acc / n, 1e-7);
  }
}

TEST(EvalDepth, PerfectPrediction) {
  const std::vector<float> d = {0.1f, 0.2f, 0.5f, 0.9f};
  const auto m = eval_depth(d, d, 10.0);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.rel, 0.0);
  EXPECT_EQ(m.log10, 0.0);
  EXPECT_EQ(m.delta1, 1.0);
  EXPECT_EQ(m.delta2, 1.0);
  EXPECT_EQ(m.delta3, 1.0);
}

TEST(EvalDepth, ThirtyPercentOverestimate) {
  // 1.25 < 1.3 < 1.5625, so only the wider two thresholds accept.
  std::vector<float> target, pred;
  for (int i = 1; i <= 20; ++i) {
    target.push_back(0.02f * i);
    pred.push_back(static_cast<float>(1.3 * static_cast<double>(0.02f * i)));
  }
  const auto m = eval_depth(pred, target, 1.0);
  EXPECT_EQ(m.delta1, 0.0);
  EXPECT_EQ(m.delta2, 1.0);
  EXPECT_EQ(m.delta3, 1.0);
  EXPECT_NEAR(m.rel, 0.3, 1e-6);
}

// Independent oracle: meters first, then each metric in its own pass.
DepthMetrics OracleMetrics(const std::vector<float>& pred, const std::vector<float>& target, double scale) {
  std::vector<double> p, g;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (target[i] <= 0.0f) continue;
    g.push_back(scale * target[i]);
    p.push_back(std::max(scale * pred[i], 1e-3));
  }
  const double n = static_cast<double>(g.size());
  DepthMetrics m;
  double se = 0;
  for (std::size_t i = 0; i < g.size(); ++i) se += std::pow(p[i] - g[i], 2);
  m.rmse = std::sqrt(se / n);
  for (std::size_t i = 0; i < g.size(); ++i) m.rel += std::fabs(p[i] - g[i]) / g[i] / n;
  for (std::size_t i = 0; i < g.size(); ++i) m.log10 += std::fabs(std::log(p[i] / g[i])) / std::log(10.0) / n;
  const double th[3] = {1.25, 1.5625, 1.953125};
  double* out[3] = {&m.delta1, &m.delta2, &m.delta3};
  for (int k = 0; k < 3; ++k) {
    int hits = 0;
    for (std::size_t i = 0; i < g.size(); ++i) hits += (p[i] / g[i] < th[k] && g[i] / p[i] < th[k]) ? 1 : 0;
    *out[k] = hits / n;
  }
  return m;
}

TEST(EvalDepth, MatchesScalarOracleOnRandomMaps) {
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<float> pred(16), target(16);
    for (int i = 0; i < 16; ++i) {
      pred[i] = u(rng);
      target[i] = i % 7 == 3 ? 0.0f : 0.05f + u(rng);
    }
    const auto m = eval_depth(pred, target, 10.0);
    const auto o = OracleMetrics(pred, target, 10.0);
    EXPECT_NEAR(m.rmse, o.rmse, 1e-9);
    EXPECT_NEAR(m.rel, o.rel, 1e-9);
    EXPECT_NEAR(m.log10, o.log10, 1e-9);
    EXPECT_NEAR(m.delta1, o.delta1, 1e-9);
    EXPECT_NEAR(m.delta2, o.delta2, 1e-9);
    EXPECT_NEAR(m.delta3, o.delta3, 1e-9);
    EXPECT_LE(m.delta1, m.delta2);
    EXPECT_LE(m.delta2, m.delta3);
  }
}

TEST(EvalDepth, RelAndDeltaInvariantUnderJointScalingRmseLinear) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<float> u(0.05f, 1.0f);
  std::vector<float> pred(64), target(64);
  for (int i = 0; i < 64; ++i) {
    pred[i] = u(rng);
    target[i] = u(rng);
  }
  const auto a = eval_depth(pred, target, 2.0);
  const auto b = eval_depth(pred, target, 6.0);
  EXPECT_NEAR(b.rel, a.rel, 1e-12);
  EXPECT_NEAR(b.log10, a.log10, 1e-12);
  EXPECT_EQ(b.delta1, a.delta1);
  EXPECT_EQ(b.delta3, a.delta3);
  EXPECT_NEAR(b.rmse, 3.0 * a.rmse, 1e-12);
}

TEST(EvalDepth, RejectsMismatchAndEmptyValidSet) {
  const std::vector<float> a = {0.1f, 0.2f}, b = {0.1f}, zero = {0.0f, 0.0f};
  EXPECT_THROW(eval_depth(a, b, 10.0), std::invalid_argument);
  EXPECT_THROW(eval_depth(a, zero, 10.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Tasks and batches

TEST(DepthTask, RejectsRgbWiderThanTarget) {
  EXPECT_THROW(validate(task_for(InputMode::kEchoesRgb, Side::kFront, 120.0, 90.0), 120.0), std::invalid_argument);
  EXPECT_NO_THROW(validate(task_for(InputMode::kEchoesOnly, Side::kFront, 120.0, 90.0), 120.0));
  EXPECT_THROW(parse_mode("sonar"), std::invalid_argument);
}

TEST(DepthTask, FullFovMaskKeepsEveryColumn) {
  const auto& g = TinyDataset().geometry;
  const auto m = fov_column_mask(g, 120.0);
  for (auto v : m) EXPECT_EQ(v, 1);
  const auto& s = TinyDataset().train[0];
  const auto b = make_batch<float>({&s}, task_for(InputMode::kRgbOnly, Side::kFront, 120.0, 120.0), g, {});
  for (std::size_t k = 0; k < b.rgb.size(); ++k) EXPECT_EQ(b.rgb[k], s.rgb[0][k] / 255.0f);
}

TEST(DepthTask, ThreeViewModeUsesTheOtherSides) {
  const auto t = unseen_task(InputMode::kRgbThreeViews, Side::kLeft);
  const auto sides = rgb_sides(t);
  ASSERT_EQ(sides.size(), 3u);
  for (Side s : sides) EXPECT_NE(s, Side::kLeft);
  const auto& ds = TinyDataset();
  const auto b = make_batch<float>({&ds.train[0]}, t, ds.geometry, {});
  EXPECT_EQ(b.rgb.dim(1), 9);
}

TEST(DepthTask, UnseenTargetsDoNotOverlapTheRgbView) {
  for (Side target : {Side::kLeft, Side::kRight, Side::kBack}) {
    const auto t = unseen_task(InputMode::kEchoesRgb, target);
    ASSERT_EQ(rgb_sides(t), std::vector<Side>{Side::kFront});
    // Both bands are 90 degrees wide and centered on headings 90 or more apart.
    EXPECT_LE(t.rgb_fov_deg / 2 + t.target_fov_deg / 2, std::abs(scene::side_offset_deg(target)));
  }
  EXPECT_THROW(unseen_task(InputMode::kRgbOnly, Side::kFront), std::invalid_argument);
}

TEST(DepthTask, BatchMasksTargetOutsideFov) {
  const auto& ds = TinyDataset();
  const auto t = task_for(InputMode::kRgbOnly, Side::kFront, 60.0, 90.0);
  const auto b = make_batch<float>({&ds.train[0]}, t, ds.geometry, {});
  const int band = scene::fov_width(32, 120.0, 90.0);
  int on = 0;
  for (auto v : b.mask) on += v;
  EXPECT_EQ(on, band * 32);
  const int rgb_band = scene::fov_width(32, 120.0, 60.0);
  int lit = 0;
  for (int c = 0; c < 32; ++c) lit += b.rgb[c] != 0.0f || b.rgb[32 * 32 + c] != 0.0f || b.rgb[2 * 32 * 32 + c] != 0.0f;
  EXPECT_LE(lit, rgb_band);
}

TEST(Dataset, CountsAndDeterminism) {
  DatasetSpec spec;
  spec.train_scenes = 2;
  spec.val_scenes = 1;
  spec.test_scenes = 1;
  spec.poses_per_scene = 3;
  spec.render.view = {120.0, 120.0, 16, 16};
  const auto a = generate_dataset(spec, 5, 1);
  const auto b = generate_dataset(spec, 5, 3);
  ASSERT_EQ(a.train.size(), 6u);
  ASSERT_EQ(a.val.size(), 3u);
  ASSERT_EQ(a.test.size(), 3u);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train[i].pose, b.train[i].pose);
    for (int k = 0; k < 4; ++k) {
      EXPECT_TRUE(test::BitEqual(a.train[i].echoes[k], b.train[i].echoes[k]));
      EXPECT_TRUE(test::BitEqual(a.train[i].depth[k], b.train[i].depth[k]));
    }
  }
  EXPECT_EQ(a.train[0].scene_id, "scene-0000");
  EXPECT_EQ(a.test[0].scene_id, "scene-0003");
}

// ---------------------------------------------------------------------------
// Training

TEST(TrainDepth, SameSeedGivesIdenticalLogs) {
  const auto& ds = TinyDataset();
  DepthTrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  auto run = [&] {
    DepthModel<float> m(DeskConfig(InputMode::kEchoesRgb, ds), 22);
    return to_json(train_depth(m, ds.train, ds.val, cfg, 23)).dump();
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainDepth, KeepsBestValidationWeights) {
  const auto& ds = TinyDataset();
  DepthTrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  DepthModel<float> m(DeskConfig(InputMode::kEchoesRgb, ds), 24);
  const auto rep = train_depth(m, ds.train, ds.val, cfg, 25);
  ASSERT_EQ(rep.epochs.size(), 3u);
  const auto& best = rep.epochs[static_cast<std::size_t>(rep.best_epoch)];
  for (const auto& e : rep.epochs) EXPECT_LE(best.val.rmse, e.val.rmse);
  EXPECT_NEAR(evaluate(m, pointers(ds.val)).metrics.rmse, best.val.rmse, 1e-9);
}

TEST(TrainDepth, RejectsEmptySplits) {
  const auto& ds = TinyDataset();
  DepthModel<float> m(DeskConfig(InputMode::kEchoesRgb, ds), 26);
  EXPECT_THROW(train_depth(m, {}, ds.val, {}, 1), std::invalid_argument);
  EXPECT_THROW(train_depth(m, ds.train, {}, {}, 1), std::invalid_argument);
}

TEST(TrainDepth, FirstStepLossNearRandomPredictionBaseline) {
  const auto& ds = TinyDataset();
  DepthTrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  for (InputMode mode : {InputMode::kEchoesOnly, InputMode::kRgbOnly, InputMode::kEchoesRgb}) {
    DepthModel<float> m(DeskConfig(mode, ds), 27);
    const auto rep = train_depth(m, ds.train, ds.val, cfg, 28);
    const double expect = random_prediction_loss(pointers(ds.train), m.config().task, ds.geometry);
    EXPECT_GT(rep.step0_loss, 0.3 * expect) << mode_name(mode);
    EXPECT_LT(rep.step0_loss, 1.5 * expect) << mode_name(mode);
  }
}

TEST(TrainDepth, OverfitsEightSamples) {
  const auto& ds = TinyDataset();
  DepthModel<float> m(DeskConfig(InputMode::kEchoesRgb, ds), 29);
  const std::vector<DepthSample> eight(ds.train.begin(), ds.train.begin() + 8);
  const auto r = overfit_depth(m, eight, 2000, 0.05);
  EXPECT_TRUE(r.reached) << "rmse " << r.train_rmse << " after " << r.steps;
  EXPECT_LE(r.steps, 2000);
}

TEST(AverageBaseline, PredictsTrainingMeanMap) {
  const auto& ds = TinyDataset();
  const auto avg = mean_depth_map(ds.train, Side::kFront, ds.geometry);
  double direct = 0.0;
  int n = 0;
  for (const auto& s : ds.train) {
    if (s.depth[0][100] > 0.0f) {
      direct += s.depth[0][100];
      ++n;
    }
  }
  EXPECT_NEAR(avg[100], direct / n, 1e-6);
}

TEST(Checkpoint, DepthModelRoundTrip) {
  const auto& ds = TinyDataset();
  const auto dir = std::filesystem::temp_directory_path() / "echonav_depth_ckpt";
  std::filesystem::remove_all(dir);
  DepthModel<float> a(DeskConfig(InputMode::kEchoesRgb, ds), 30);
  nn::save_checkpoint(dir, a.params(), {{"seed", 30}});
  DepthModel<float> b(DeskConfig(InputMode::kEchoesRgb, ds), 31);
  nn::load_checkpoint(dir, b.params());
  const auto pa = predict(a, pointers(ds.test));
  const auto pb = predict(b, pointers(ds.test));
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(test::BitEqual(pa[i], pb[i]));
  std::filesystem::remove_all(dir);
}

TEST(Experiments, FovSweepHasEightByTwoRows) {
  const auto& ds = TinyDataset();
  ExperimentSettings s;
  s.arch = desk_architecture();
  s.train.epochs = 1;
  s.train.batch_size = 16;
  s.seeds = {1};
  const auto rows = run_fov_sweep(ds, default_fovs(), s);
  ASSERT_EQ(rows.size(), 16u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].task.rgb_fov_deg, default_fovs()[i / 2]);
    EXPECT_EQ(rows[i].task.echo_orientations, i % 2 == 0 ? 0 : 4);
  }
}

}  // namespace
}  // namespace echonav::depth
