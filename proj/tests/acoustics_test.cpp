#include "echonav/acoustics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "test_util.hpp"

namespace echonav::acoustics {
namespace {

using scene::Pose;
using scene::Scene;

Scene Shoebox(double w, double d, double h, double refl = 0.8) {
  Scene s;
  s.id = "shoebox";
  s.extent = {w, d, h};
  s.wall_reflection.fill(refl);
  s.cell_size = 0.5;
  s.sensor_height = 1.25;
  for (int i = 0; i < scene::kWallCount; ++i) s.albedo.push_back({0.5f, 0.5f, 0.5f});
  return s;
}

std::vector<std::size_t> NonzeroIndices(const std::vector<double>& x) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != 0.0) idx.push_back(i);
  return idx;
}

TEST(ComputeRir, DirectPathOnlyAtAnalyticDelay) {
  const Scene s = Shoebox(6.0, 4.0, 3.0);
  const RoomImpulseResponse rir = compute_rir(s, {1.0, 2.0, 1.5}, {4.43, 2.0, 1.5}, 0, 16000.0);
  // 3.43 m / 343 m/s * 16 kHz = 160 samples
  EXPECT_EQ(NonzeroIndices(rir.samples), std::vector<std::size_t>{160});
  EXPECT_NEAR(rir.samples[160], 1.0 / 3.43, 1e-12);
}

TEST(ComputeRir, CoLocatedSourceClampsDistance) {
  const Scene s = Shoebox(5.0, 4.0, 3.0);
  const Vec3 p{2.0, 1.0, 1.25};
  const RoomImpulseResponse rir = compute_rir(s, p, p, 0, 16000.0);
  ASSERT_EQ(rir.samples.size(), 1u);
  EXPECT_DOUBLE_EQ(rir.samples[0], 1.0 / 0.1);
}

TEST(ComputeRir, FirstOrderShoeboxHasSevenArrivals) {
  const Scene s = Shoebox(5.0, 4.0, 3.0, 0.7);
  const Vec3 src{1.1, 0.9, 1.3}, rcv{3.7, 2.6, 1.6};
  const auto arrivals = image_sources(s, src, rcv, 1);
  ASSERT_EQ(arrivals.size(), 7u);
  // Mirror the source across each boundary plane.
  std::vector<double> expected = {(src - rcv).norm()};
  for (int a = 0; a < 3; ++a) {
    Vec3 lo = src, hi = src;
    lo[a] = -src[a];
    hi[a] = 2 * s.extent[a] - src[a];
    expected.push_back((lo - rcv).norm());
    expected.push_back((hi - rcv).norm());
  }
  std::sort(expected.begin(), expected.end());
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_NEAR(arrivals[i].distance, expected[i], 1e-12);
    const double gain = arrivals[i].order == 0 ? 1.0 : 0.7;
    EXPECT_NEAR(arrivals[i].amplitude, gain / expected[i], 1e-12);
    if (i > 1) {
      EXPECT_LE(arrivals[i].amplitude, arrivals[i - 1].amplitude);
    }
  }
  const RoomImpulseResponse rir = compute_rir(s, src, rcv, 1, 16000.0);
  EXPECT_EQ(NonzeroIndices(rir.samples).size(), 7u);
}

TEST(ComputeRir, DirectDelayWithinOneSampleForRandomPairs) {
  const Scene s = Shoebox(6.0, 5.0, 3.0);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> ux(0, 6), uy(0, 5), uz(0, 3);
  for (int i = 0; i < 100; ++i) {
    const Vec3 a{ux(rng), uy(rng), uz(rng)}, b{ux(rng), uy(rng), uz(rng)};
    const RoomImpulseResponse rir = compute_rir(s, a, b, 2, 16000.0);
    const double analytic = (a - b).norm() / 343.0 * 16000.0;
    const auto first = NonzeroIndices(rir.samples).front();
    EXPECT_LE(std::abs(static_cast<double>(first) - analytic), 1.0);
    EXPECT_NE(rir.samples[static_cast<std::size_t>(std::lround(analytic))], 0.0);
  }
}

TEST(ComputeRir, RejectsPositionsOutsideRoom) {
  const Scene s = Shoebox(3.0, 3.0, 3.0);
  EXPECT_THROW(compute_rir(s, {-0.1, 1, 1}, {1, 1, 1}, 1, 16000.0), std::invalid_argument);
  EXPECT_THROW(compute_rir(s, {1, 1, 1}, {1, 4, 1}, 1, 16000.0), std::invalid_argument);
}

TEST(ComputeRir, EnergyDecreasesWithReflection) {
  double prev = std::numeric_limits<double>::infinity();
  for (double refl : {0.95, 0.8, 0.6, 0.4, 0.2}) {
    const Scene s = Shoebox(4.5, 3.5, 2.7, refl);
    const auto rir = compute_rir(s, {1.2, 1.0, 1.25}, {3.0, 2.2, 1.4}, 3, 16000.0);
    const double e = energy(rir.samples);
    EXPECT_LT(e, prev);
    EXPECT_TRUE(std::isfinite(e));
    prev = e;
  }
}

TEST(ComputeRir, ObstacleOcclusionAttenuatesBlockedPaths) {
  Scene s = Shoebox(6.0, 4.0, 3.0);
  const Vec3 src{1.0, 2.0, 1.25}, rcv{5.0, 2.0, 1.25};
  const double open = compute_rir(s, src, rcv, 0, 16000.0).samples[187];
  s.obstacles.push_back({{2.5, 1.5, 0.0}, {3.5, 2.5, 2.0}});
  s.obstacle_reflection.push_back(0.5);
  s.albedo.push_back({0.1f, 0.1f, 0.1f});
  const double blocked = compute_rir(s, src, rcv, 0, 16000.0).samples[187];
  EXPECT_NEAR(blocked, open * 0.25, 1e-12);
}

TEST(Sweep, ThreeMillisecondsAtSixteenKilohertz) {
  const SweepSignal s = sweep_signal(16000.0);
  EXPECT_EQ(s.samples.size(), 48u);
  double peak = 0;
  for (double v : s.samples) peak = std::max(peak, std::abs(v));
  EXPECT_DOUBLE_EQ(peak, 1.0);
  EXPECT_EQ(sweep_signal(16000.0).samples, s.samples);
}

TEST(Sweep, ZeroCrossingsTrackBandEdges) {
  // High sample rate so crossings are resolved to well under a percent.
  const double fs = 4.0e6;
  const SweepSignal s = sweep_signal(fs, 0.003, 20.0, 7200.0);
  std::vector<double> crossings;
  for (std::size_t i = 1; i < s.samples.size(); ++i) {
    if ((s.samples[i - 1] < 0) != (s.samples[i] < 0)) {
      const double frac = s.samples[i - 1] / (s.samples[i - 1] - s.samples[i]);
      crossings.push_back((static_cast<double>(i - 1) + frac) / fs);
    }
  }
  ASSERT_GT(crossings.size(), 4u);
  // End: the half-period between the last two crossings measures the
  // frequency at their midpoint; extrapolate along the chirp to t = T.
  const double k = (7200.0 - 20.0) / 0.003;
  const std::size_t n = crossings.size();
  const double f_mid = 1.0 / (2.0 * (crossings[n - 1] - crossings[n - 2]));
  const double t_mid = 0.5 * (crossings[n - 1] + crossings[n - 2]);
  EXPECT_NEAR(f_mid + k * (0.003 - t_mid), 7200.0, 0.01 * 7200.0);
  // Start: the first crossing solves f_lo t + k t^2 / 2 = 1/2.
  const double t1 = (-20.0 + std::sqrt(20.0 * 20.0 + k)) / k;
  EXPECT_NEAR(crossings[0], t1, 2.0 / fs);
  // The same crossing time under a different start frequency is clearly distinguishable.
  const double t1_other = (-200.0 + std::sqrt(200.0 * 200.0 + k)) / k;
  EXPECT_GT(std::abs(crossings[0] - t1_other), 20.0 / fs);
}

TEST(Sweep, RejectsLowSampleRate) {
  EXPECT_THROW(sweep_signal(4000.0), std::invalid_argument);
  EXPECT_THROW(sweep_signal(16000.0, 0.003, 9000.0, 8500.0), std::invalid_argument);
}

TEST(Binauralize, FrontalArrivalIsSymmetric) {
  const std::vector<Arrival> a = {{10, 0.5}};
  const std::vector<double> az = {0.0};
  const BinauralIr ir = binauralize(a, az, HeadModel{}, 16000.0);
  EXPECT_EQ(ir.left, ir.right);
}

TEST(Binauralize, RightArrivalLeadsAndIsLouderOnRight) {
  const std::vector<Arrival> a = {{20, 1.0}};
  const std::vector<double> az = {90.0};
  const HeadModel head;
  const BinauralIr ir = binauralize(a, az, head, 16000.0);
  const auto l = NonzeroIndices(ir.left), r = NonzeroIndices(ir.right);
  ASSERT_EQ(l.size(), 1u);
  ASSERT_EQ(r.size(), 1u);
  const long expected_lead = std::lround(head.ear_separation_m / 343.0 * 16000.0);
  EXPECT_EQ(static_cast<long>(l[0]) - static_cast<long>(r[0]), expected_lead);
  EXPECT_EQ(expected_lead, 8);
  EXPECT_DOUBLE_EQ(ir.right[r[0]], 1.0);
  EXPECT_DOUBLE_EQ(ir.left[l[0]], 1.0 - head.contralateral_attenuation);
}

TEST(Binauralize, MirrorAzimuthSwapsChannels) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> amp(-1, 1), ang(-180, 180);
  std::vector<Arrival> a;
  std::vector<double> az, mirrored;
  for (int i = 0; i < 40; ++i) {
    a.push_back({static_cast<long>(rng() % 200), amp(rng)});
    az.push_back(ang(rng));
    mirrored.push_back(-az.back());
  }
  const BinauralIr x = binauralize(a, az, HeadModel{}, 16000.0);
  const BinauralIr y = binauralize(a, mirrored, HeadModel{}, 16000.0);
  EXPECT_TRUE(test::BitEqual(x.left, y.right));
  EXPECT_TRUE(test::BitEqual(x.right, y.left));
}

TEST(Binauralize, RejectsMismatchedCounts) {
  const std::vector<Arrival> a = {{1, 1.0}, {2, 1.0}};
  const std::vector<double> az = {0.0};
  EXPECT_THROW(binauralize(a, az, HeadModel{}, 16000.0), std::invalid_argument);
}

TEST(SimulateEcho, DeterministicAndFixedLength) {
  const Scene s = scene::generate_scene(5, scene::SceneGenConfig{});
  const AcousticsConfig cfg;
  const auto pts = scene::navigable_points(s);
  const EchoResponse a = simulate_echo(s, {pts[0], 90}, HeadModel{}, cfg);
  const EchoResponse b = simulate_echo(s, {pts[0], 90}, HeadModel{}, cfg);
  EXPECT_TRUE(test::BitEqual(a.left, b.left));
  EXPECT_TRUE(test::BitEqual(a.right, b.right));
  for (const auto& p : pts) {
    const EchoResponse e = simulate_echo(s, {p, 0}, HeadModel{}, cfg);
    EXPECT_EQ(e.left.size(), 1024u);
    EXPECT_EQ(e.right.size(), 1024u);
    EXPECT_EQ(e.sample_rate, 16000.0);
  }
}

Scene SingleReflectingWall() {
  Scene s = Shoebox(6.0, 6.0, 3.0, 0.0);
  s.wall_reflection[static_cast<int>(scene::Wall::kXMin)] = 0.9;
  return s;
}

TEST(SimulateEcho, LateralWallSwapsChannelsWhenTurnedAround) {
  const Scene s = SingleReflectingWall();
  const Pose left_wall{{2.0, 3.0, 1.25}, 90};  // facing +y, the x = 0 wall is on the left
  const EchoResponse a = simulate_echo(s, left_wall, HeadModel{}, AcousticsConfig{});
  const EchoResponse b = simulate_echo(s, left_wall.rotated(180), HeadModel{}, AcousticsConfig{});
  EXPECT_TRUE(test::BitEqual(a.left, b.right));
  EXPECT_TRUE(test::BitEqual(a.right, b.left));
  EXPECT_FALSE(test::BitEqual(a.left, a.right));
  // The nearer-ear channel carries more energy.
  EXPECT_GT(energy(a.left), energy(a.right));
  // A +90 turn puts the wall straight ahead: no interaural difference.
  const EchoResponse c = simulate_echo(s, left_wall.rotated(90), HeadModel{}, AcousticsConfig{});
  EXPECT_TRUE(test::BitEqual(c.left, c.right));
}

TEST(SimulateEcho, SymmetricRoomGivesIdenticalChannels) {
  Scene s = Shoebox(4.0, 4.0, 3.0, 0.85);
  s.wall_reflection[0] = 0.6;  // front/back walls may differ; lateral pair stays mirrored
  const Pose pose{{2.0, 2.0, 1.25}, 0};
  AcousticsConfig cfg;
  cfg.max_order = 4;
  const EchoResponse e = simulate_echo(s, pose, HeadModel{}, cfg);
  EXPECT_TRUE(test::BitEqual(e.left, e.right));
  EXPECT_GT(energy(e.left), 0.0);
}

TEST(SimulateEcho, LinearInSweepAmplitude) {
  const Scene s = scene::generate_scene(17, scene::SceneGenConfig{});
  const Pose pose{scene::navigable_points(s)[3], 180};
  AcousticsConfig cfg;
  const EchoResponse base = simulate_echo(s, pose, HeadModel{}, cfg);
  cfg.sweep_amplitude = 0.37;
  const EchoResponse scaled = simulate_echo(s, pose, HeadModel{}, cfg);
  for (std::size_t i = 0; i < base.left.size(); ++i) {
    EXPECT_NEAR(scaled.left[i], 0.37 * base.left[i], 1e-9 * std::max(1.0, std::abs(base.left[i])));
    EXPECT_NEAR(scaled.right[i], 0.37 * base.right[i], 1e-9 * std::max(1.0, std::abs(base.right[i])));
  }
}

TEST(SimulateEcho, EchoSetMatchesPerOrientationCalls) {
  const Scene s = scene::generate_scene(18, scene::SceneGenConfig{});
  const Pose pose{scene::navigable_points(s)[1], 270};
  const auto set = simulate_echo_set(s, pose, HeadModel{}, AcousticsConfig{});
  for (std::size_t i = 0; i < 4; ++i) {
    const EchoResponse e =
        simulate_echo(s, scene::facing(pose, scene::kAllSides[i]), HeadModel{}, AcousticsConfig{});
    EXPECT_TRUE(test::BitEqual(set[i].left, e.left));
    EXPECT_TRUE(test::BitEqual(set[i].right, e.right));
  }
}

TEST(SimulateEcho, WavExport) {
  const Scene s = Shoebox(4.0, 4.0, 3.0);
  const EchoResponse e = simulate_echo(s, {{1.0, 1.0, 1.25}, 0}, HeadModel{}, AcousticsConfig{});
  const auto path = std::filesystem::temp_directory_path() / "echonav_test_echo.wav";
  write_wav(path, e);
  EXPECT_EQ(std::filesystem::file_size(path), 44u + 4u * 1024u);
  std::filesystem::remove(path);
  const io::FloatArray a = io::decode(io::encode(to_float_array(e)));
  EXPECT_EQ(a.scalar, 16000.0f);
  EXPECT_EQ(a.dims, (std::vector<std::uint32_t>{2u, 1024u}));
}

}  // namespace
}  // namespace echonav::acoustics
