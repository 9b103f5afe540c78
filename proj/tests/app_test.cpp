#include "echonav/app.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <regex>
#include <set>

#include "test_util.hpp"

namespace echonav::app {
namespace {

namespace fs = std::filesystem;

fs::path FreshDir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("echonav_app_" + name);
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig TinyConfig() {
  ExperimentConfig c;
  c.seeds = {1};
  c.dataset.train_scenes = 2;
  c.dataset.val_scenes = 1;
  c.dataset.test_scenes = 1;
  c.dataset.poses_per_scene = 3;
  c.dataset.render.view = {120.0, 120.0, 32, 32};
  c.depth.train.epochs = 1;
  c.depth.unseen_targets = {scene::Side::kBack};
  c.nav.train_scenes = 2;
  c.nav.val_scenes = 1;
  c.nav.test_scenes = 1;
  c.nav.val_episodes_per_scene = 2;
  c.nav.test_episodes_per_scene = 4;
  c.nav.ppo.updates = 2;
  c.nav.ppo.rollout = 8;
  c.nav.ppo.eval_every = 1;
  c.nav.table3_modes = {nav::NavMode::kBlind, nav::NavMode::kDepth};
  c.nav.table4_modes = {nav::NavMode::kDepth};
  return c;
}

// ---------------------------------------------------------------------------
// Config

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig c;
  EXPECT_TRUE(config_from_json(to_json(c)) == c);
  const ExperimentConfig t = TinyConfig();
  EXPECT_TRUE(config_from_json(to_json(t)) == t);
}

TEST(Config, EmptyObjectGivesDefaults) { EXPECT_TRUE(config_from_json(json::object()) == ExperimentConfig{}); }

TEST(Config, RejectsUnknownKeysAtEveryLevel) {
  EXPECT_THROW(config_from_json({{"seed", 3}}), ConfigError);
  EXPECT_THROW(config_from_json({{"nav", {{"ppo", {{"learning_rate", 0.1}}}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"dataset", {{"render", {{"stft", {{"hopp", 8}}}}}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"depth", {{"arch", {{"decoder", {{{"channels", 4}, {"pad", 1}}}}}}}}}),
               ConfigError);
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(config_from_json({{"seeds", json::array()}}), ConfigError);
  EXPECT_THROW(config_from_json({{"jobs", "two"}}), ConfigError);
  EXPECT_THROW(config_from_json({{"depth", {{"unseen_targets", {"front"}}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"depth", {{"unseen_targets", {"up"}}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"nav", {{"table4_modes", {"sonar"}}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"nav", {{"ppo", {{"streams", 6}, {"minibatches", 4}}}}}}), ConfigError);
}

TEST(Config, OverridesApply) {
  const auto c = config_from_json({{"seeds", {7, 8}}, {"nav", {{"table3_modes", {"rgb"}}}}});
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{7, 8}));
  ASSERT_EQ(c.nav.table3_modes.size(), 1u);
  EXPECT_EQ(c.nav.table3_modes[0], nav::NavMode::kRgb);
}

TEST(Config, LoadReportsPathOnParseError) {
  const auto dir = FreshDir("cfg");
  fs::create_directories(dir);
  write_text(dir / "bad.json", "{\"seeds\": [1,");
  try {
    load_config(dir / "bad.json");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json"), std::string::npos);
  }
  fs::remove_all(dir);
}

TEST(Config, FingerprintIgnoresJobsOnly) {
  ExperimentConfig a, b;
  b.jobs = 4;
  EXPECT_EQ(config_fingerprint(a), config_fingerprint(b));
  b.seeds = {1, 2};
  EXPECT_NE(config_fingerprint(a), config_fingerprint(b));
  EXPECT_TRUE(std::regex_match(config_fingerprint(a), std::regex("[0-9a-f]{16}")));
}

// ---------------------------------------------------------------------------
// Dataset store

TEST(DatasetStore, SameConfigAndSeedGiveIdenticalManifest) {
  const auto cfg = TinyConfig();
  const auto a = FreshDir("ds_a"), b = FreshDir("ds_b");
  const auto ra = dataset_build(a, cfg, 5);
  const auto rb = dataset_build(b, cfg, 5);
  EXPECT_EQ(ra.manifest["fingerprint"], rb.manifest["fingerprint"]);
  EXPECT_EQ(read_text(a / "manifest.json"), read_text(b / "manifest.json"));
  EXPECT_EQ(read_text(a / "scenes/scene-0001/echoes.ecnv"), read_text(b / "scenes/scene-0001/echoes.ecnv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(DatasetStore, SplitsAreSceneDisjointAndCountsMatch) {
  const auto cfg = TinyConfig();
  const auto dir = FreshDir("ds_split");
  const auto m = dataset_build(dir, cfg, 5).manifest;
  std::set<std::string> seen;
  std::size_t total = 0;
  for (const char* split : {"train", "val", "test"}) {
    for (const auto& id : m["splits"][split]) {
      EXPECT_TRUE(seen.insert(id.get<std::string>()).second) << id;
      ++total;
    }
  }
  EXPECT_EQ(total, 4u);
  EXPECT_EQ(m["splits"]["train"].size(), 2u);
  const std::size_t expected = static_cast<std::size_t>(cfg.dataset.total_scenes() * cfg.dataset.poses_per_scene);
  EXPECT_EQ(m["sample_count"].get<std::size_t>(), expected);
  EXPECT_EQ(m["samples"].size(), expected);
  for (const auto& s : m["samples"]) {
    for (const char* split : {"train", "val", "test"}) {
      const auto& ids = m["splits"][split];
      if (std::find(ids.begin(), ids.end(), s["scene"]) != ids.end()) {
        EXPECT_EQ(s["split"], split);
      }
    }
  }
  fs::remove_all(dir);
}

TEST(DatasetStore, LoadMatchesInMemoryGeneration) {
  const auto cfg = TinyConfig();
  const auto dir = FreshDir("ds_load");
  dataset_build(dir, cfg, 5);
  const auto loaded = load_dataset(dir);
  const auto direct = depth::generate_dataset(cfg.dataset, 5);
  EXPECT_TRUE(loaded.geometry == direct.geometry);
  ASSERT_EQ(loaded.train.size(), direct.train.size());
  ASSERT_EQ(loaded.test.size(), direct.test.size());
  for (std::size_t i = 0; i < direct.train.size(); ++i) {
    const auto& a = loaded.train[i];
    const auto& b = direct.train[i];
    EXPECT_EQ(a.scene_id, b.scene_id);
    EXPECT_EQ(a.pose.heading, b.pose.heading);
    for (int k = 0; k < 4; ++k) {
      EXPECT_TRUE(test::BitEqual(a.echoes[k], b.echoes[k]));
      EXPECT_TRUE(test::BitEqual(a.depth[k], b.depth[k]));
      EXPECT_TRUE(test::BitEqual(a.rgb[k], b.rgb[k]));
    }
  }
  fs::remove_all(dir);
}

TEST(DatasetStore, ResumeSkipsCompleteScenesAndRebuildsPartialOnes) {
  const auto cfg = TinyConfig();
  const auto dir = FreshDir("ds_resume");
  const auto first = dataset_build(dir, cfg, 5);
  EXPECT_EQ(first.built, 4);
  const std::string manifest = read_text(dir / "manifest.json");
  fs::remove(dir / "scenes/scene-0002/complete.json");
  const auto second = dataset_build(dir, cfg, 5);
  EXPECT_EQ(second.reused, 3);
  EXPECT_EQ(second.built, 1);
  EXPECT_EQ(read_text(dir / "manifest.json"), manifest);
  fs::remove_all(dir);
}

TEST(DatasetStore, ResumeWithDifferentSeedIsAnError) {
  const auto cfg = TinyConfig();
  const auto dir = FreshDir("ds_mismatch");
  dataset_build(dir, cfg, 5);
  EXPECT_THROW(dataset_build(dir, cfg, 6), std::runtime_error);
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// Model checkpoints

TEST(ModelIo, ConfigJsonRoundTrip) {
  depth::DepthModelConfig mc;
  mc.task = depth::task_for(depth::InputMode::kEchoesRgb, scene::Side::kLeft, 90.0, 90.0);
  mc.arch = depth::desk_architecture();
  mc.geometry = {33, 61, 32, 32, 120.0, 10.0};
  mc.echo_norm = {0.25, 1.5};
  EXPECT_TRUE(model_config_from_json(model_config_json(mc)) == mc);
}

TEST(ModelIo, SavedModelReloadsWithIdenticalPredictions) {
  const auto ds = depth::generate_dataset(TinyConfig().dataset, 3);
  depth::DepthModelConfig mc;
  mc.task = depth::task_for(depth::InputMode::kEchoesRgb, scene::Side::kFront, 90.0, 120.0);
  mc.arch = depth::desk_architecture();
  mc.geometry = ds.geometry;
  mc.echo_norm = depth::fit_echo_normalization(ds.train);
  depth::DepthModel<float> model(mc, 4);
  const auto dir = FreshDir("model");
  save_depth_model(dir, model);
  const auto back = load_depth_model(dir);
  EXPECT_TRUE(back->config() == mc);
  const auto a = depth::predict(model, depth::pointers(ds.test));
  const auto b = depth::predict(*back, depth::pointers(ds.test));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(test::BitEqual(a[i], b[i]));
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// Plots

std::size_t Count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

TEST(Plot, LinePlotHasOnePolylinePerSeriesAndOneMarkerPerPoint) {
  const std::vector<std::string> x = {"15", "30", "45"};
  const auto svg = svg_line_plot("t", "x", "y", x, {{"a", "red", {1, 2, 3}}, {"b", "blue", {3, 2, 1}}});
  EXPECT_EQ(Count(svg, "<polyline"), 2u);
  EXPECT_EQ(Count(svg, "<circle"), 6u);
  EXPECT_EQ(svg.rfind("</svg>"), svg.size() - 7);
}

TEST(Plot, BarHeightsAreProportional) {
  const auto svg = svg_bar_chart("t", "y", {"back"}, {{"a", "red", {1.0}}, {"b", "blue", {0.5}}});
  EXPECT_EQ(Count(svg, "class=\"bar\""), 2u);
  std::smatch m;
  std::vector<double> heights;
  std::string rest = svg;
  const std::regex re("class=\"bar\"[^>]*height=\"([0-9.]+)\"");
  while (std::regex_search(rest, m, re)) {
    heights.push_back(std::stod(m[1]));
    rest = m.suffix();
  }
  ASSERT_EQ(heights.size(), 2u);
  EXPECT_NEAR(heights[0], 2.0 * heights[1], 0.02);
}

TEST(Plot, EscapesMarkup) {
  const auto svg = svg_bar_chart("a<b & c", "y", {"g"}, {{"s", "red", {1.0}}});
  EXPECT_NE(svg.find("a&lt;b &amp; c"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Reproduce

TEST(Checks, Relations) {
  EXPECT_TRUE(make_check("x", 1.0, "<", 2.0).pass);
  EXPECT_FALSE(make_check("x", 2.0, "<", 2.0).pass);
  EXPECT_TRUE(make_check("x", 0.505, "<=", 0.5, kSplTieBand).pass);
  EXPECT_FALSE(make_check("x", 0.52, "<=", 0.5, kSplTieBand).pass);
  EXPECT_TRUE(make_check("x", 0.495, ">=", 0.5, kSplTieBand).pass);
  EXPECT_FALSE(make_check("x", 0.48, ">=", 0.5, kSplTieBand).pass);
  EXPECT_THROW(make_check("x", 0, "==", 0), std::invalid_argument);
}

TEST(Experiments, NamesRoundTrip) {
  for (auto e : kAllExperiments) EXPECT_EQ(parse_experiment(experiment_name(e)), e);
  EXPECT_THROW(parse_experiment("table9"), std::invalid_argument);
}

TEST(Reproduce, Table2ReportEmbedsFingerprintAndRows) {
  const auto out = FreshDir("repro_t2");
  Reproducer r(TinyConfig(), 5, out);
  const auto rep = r.run(Experiment::kTable2);
  ASSERT_EQ(rep.table.size(), 2u);
  ASSERT_EQ(rep.checks.size(), 1u);
  const json j = json::parse(read_text(out / "table2-ordering/report.json"));
  EXPECT_EQ(j["config_fingerprint"], config_fingerprint(TinyConfig()));
  EXPECT_EQ(j["table"][0]["label"], "echoes_1");
  EXPECT_EQ(j["table"][1]["label"], "echoes_4");
  EXPECT_EQ(j["passed"], rep.passed());
  EXPECT_TRUE(config_from_json(j["config"]) == TinyConfig());
  EXPECT_TRUE(fs::exists(out / "dataset/manifest.json"));
  fs::remove_all(out);
}

TEST(Reproduce, Fig4ReportHasEightFovsTimesTwoConditions) {
  auto cfg = TinyConfig();
  const auto out = FreshDir("repro_f4");
  Reproducer r(cfg, 5, out);
  const auto rep = r.run(Experiment::kFig4);
  EXPECT_EQ(rep.table.size(), 16u);
  EXPECT_EQ(rep.checks.size(), 8u);
  const std::string svg = read_text(out / "fig4/fig4.svg");
  EXPECT_EQ(Count(svg, "<polyline"), 2u);
  EXPECT_EQ(Count(svg, "<circle"), 16u);
  fs::remove_all(out);
}

TEST(Reproduce, NavTablesShareTrainedRowsAndCheckOrderings) {
  const auto out = FreshDir("repro_nav");
  Reproducer r(TinyConfig(), 5, out);
  const auto t3 = r.run(Experiment::kTable3);
  const auto t4 = r.run(Experiment::kTable4);
  ASSERT_EQ(t3.table.size(), 5u);  // three baselines, blind, depth
  EXPECT_EQ(t3.table[0]["label"], "random");
  EXPECT_EQ(t3.checks.size(), 2u);  // random < goal_follower < blind
  ASSERT_EQ(t4.table.size(), 1u);
  EXPECT_EQ(t4.table[0], t3.table[4]);
  EXPECT_TRUE(t4.checks.empty());
  fs::remove_all(out);
}

TEST(Reproduce, ErrorsStillWriteTheReport) {
  auto cfg = TinyConfig();
  cfg.nav.est_depth_checkpoint = (FreshDir("missing_ckpt")).string();
  const auto out = FreshDir("repro_err");
  Reproducer r(cfg, 5, out);
  EXPECT_THROW(r.run(Experiment::kTable3), std::runtime_error);
  const json j = json::parse(read_text(out / "table3-ordering/report.json"));
  EXPECT_FALSE(j["passed"].get<bool>());
  EXPECT_TRUE(j.contains("error"));
  fs::remove_all(out);
}

TEST(Reproduce, RepeatedRunsAreByteIdentical) {
  const auto a = FreshDir("repro_det_a"), b = FreshDir("repro_det_b");
  for (const auto& out : {a, b}) {
    Reproducer r(TinyConfig(), 5, out);
    r.run(Experiment::kTable2);
    r.run(Experiment::kTable3);
  }
  EXPECT_EQ(read_text(a / "dataset/manifest.json"), read_text(b / "dataset/manifest.json"));
  EXPECT_EQ(read_text(a / "table2-ordering/report.json"), read_text(b / "table2-ordering/report.json"));
  EXPECT_EQ(read_text(a / "table3-ordering/report.json"), read_text(b / "table3-ordering/report.json"));
  fs::remove_all(a);
  fs::remove_all(b);
}

// ---------------------------------------------------------------------------
// Selftest

TEST(Selftest, EverySuiteEntryPasses) {
  for (const auto& r : gradient_suite()) EXPECT_TRUE(r.pass) << r.name << ": " << r.detail;
  for (const auto& r : metric_suite()) EXPECT_TRUE(r.pass) << r.name << ": " << r.detail;
}

}  // namespace
}  // namespace echonav::app
