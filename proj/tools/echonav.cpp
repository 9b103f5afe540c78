// echonav command line: scene generation, dataset builds, depth and
// navigation training / evaluation, experiment reproduction and selftest.
//
// Exit codes: 0 success, 1 error, 2 a reproduce ordering or selftest check failed.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "echonav/app.hpp"

namespace {

namespace fs = std::filesystem;
using echonav::app::json;
using namespace echonav;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitCheckFailed = 2;

struct Globals {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out = "echonav-out";
  std::string config;
  std::vector<std::string> overrides;  // dotted.path=json-value
};

void log(const std::string& s) {
  std::cerr << s << std::endl;
}

// "nav.ppo.updates=100" sets j["nav"]["ppo"]["updates"] = 100. Values that do
// not parse as JSON are taken as strings.
void apply_override(json& j, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw app::ConfigError("override must look like key.path=value: " + spec);
  const std::string path = spec.substr(0, eq), text = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw app::ConfigError("empty key in override " + spec);
    if (!node->is_object()) throw app::ConfigError("override " + spec + " descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

app::ExperimentConfig resolve_config(const Globals& g) {
  json j = json::object();
  if (!g.config.empty()) {
    try {
      j = json::parse(app::read_text(g.config));
    } catch (const json::parse_error& e) {
      throw app::ConfigError(g.config + ": " + e.what());
    }
  }
  for (const auto& o : g.overrides) apply_override(j, o);
  auto cfg = app::config_from_json(j);
  cfg.jobs = g.jobs;
  app::validate(cfg);
  return cfg;
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  app::write_text(path, j.dump(2) + "\n");
}

json run_header(const app::ExperimentConfig& cfg, std::uint64_t seed) {
  return {{"seed", seed}, {"config_fingerprint", app::config_fingerprint(cfg)}, {"config", app::to_json(cfg)}};
}

// ---------------------------------------------------------------------------
// scene

int cmd_scene(const Globals& g, const std::string& kind, int index) {
  const auto cfg = resolve_config(g);
  scene::Scene s;
  if (kind == "dataset") {
    s = depth::dataset_scene(cfg.dataset, g.seed, index);
  } else {
    s = scene::generate_scene(derive_seed(derive_seed(g.seed, 1), static_cast<std::uint64_t>(index)), cfg.nav.scene);
    s.id = app::nav_scene_id("train", index);
  }
  const fs::path out(g.out);
  write_json(out / (s.id + ".json"), scene::to_json(s));
  const auto cells = scene::free_cells(s);
  if (!cells.empty()) {
    const scene::Pose p{s.cell_center(cells.front().col, cells.front().row), 0};
    nav::render_trajectory_map(out / s.id, s, p, {}, p.position);
  }
  std::printf("%s: %.2f x %.2f m, %zu obstacles, %zu free cells -> %s\n", s.id.c_str(), s.extent.x, s.extent.y,
              s.obstacles.size(), cells.size(), out.string().c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// dataset

int cmd_dataset_build(const Globals& g) {
  const auto cfg = resolve_config(g);
  const fs::path out(g.out);
  const auto rep = app::dataset_build(out, cfg, g.seed, g.jobs, [](int i, bool reused) {
    log(depth::scene_id(i) + (reused ? " reused" : " built"));
  });
  std::printf("%d scenes built, %d reused, %zu samples, fingerprint %s\n", rep.built, rep.reused,
              rep.manifest["sample_count"].get<std::size_t>(), rep.manifest["fingerprint"].get<std::string>().c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// depth

struct DepthTaskArgs {
  std::string mode = "echoes+rgb";
  std::string target = "front";
  double rgb_fov = 120.0;
  double target_fov = 0.0;  // 0 = camera FoV
  int orientations = 4;
};

depth::DepthTask make_task(const DepthTaskArgs& a, double theta_full) {
  depth::DepthTask t = depth::task_for(depth::parse_mode(a.mode), depth::parse_side(a.target), a.rgb_fov,
                                       a.target_fov > 0.0 ? a.target_fov : theta_full);
  if (t.echo_orientations > 0) t.echo_orientations = a.orientations;
  depth::validate(t, theta_full);
  return t;
}

depth::ExperimentSettings depth_settings(const app::ExperimentConfig& cfg) {
  depth::ExperimentSettings s;
  s.arch = cfg.depth.arch;
  s.train = cfg.depth.train;
  s.train.jobs = cfg.jobs;
  s.seeds = cfg.seeds;
  return s;
}

int cmd_depth_train(const Globals& g, const std::string& dataset_dir, const DepthTaskArgs& args) {
  const auto cfg = resolve_config(g);
  const auto ds = app::load_dataset(dataset_dir);
  depth::DepthModelConfig mc;
  mc.task = make_task(args, ds.geometry.theta_full);
  mc.arch = cfg.depth.arch;
  mc.geometry = ds.geometry;
  mc.echo_norm = depth::fit_echo_normalization(ds.train);
  depth::DepthModel<float> model(mc, derive_seed(g.seed, 0));
  auto tc = cfg.depth.train;
  tc.jobs = g.jobs;
  const auto rep = depth::train_depth(model, ds.train, ds.val, tc, derive_seed(g.seed, 1), [](const depth::EpochLog& e) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "epoch %d train loss %.4f val loss %.4f val rmse %.4f", e.epoch, e.train_loss,
                  e.val_loss, e.val.rmse);
    log(buf);
  });
  const auto test = depth::evaluate(model, depth::pointers(ds.test), tc.eval_batch, g.jobs);
  const fs::path out(g.out);
  app::save_depth_model(out / "model", model, {{"seed", g.seed}});
  json j = run_header(cfg, g.seed);
  j["task"] = depth::to_json(mc.task);
  j["training"] = depth::to_json(rep);
  j["test"] = depth::to_json(test.metrics);
  write_json(out / "depth_train.json", j);
  std::printf("test rmse %.4f rel %.4f delta1 %.4f (best epoch %d)\n", test.metrics.rmse, test.metrics.rel,
              test.metrics.delta1, rep.best_epoch);
  return kExitOk;
}

int cmd_depth_eval(const Globals& g, const std::string& dataset_dir, const std::string& checkpoint,
                   const std::string& split) {
  const auto ds = app::load_dataset(dataset_dir);
  const auto model = app::load_depth_model(checkpoint);
  if (!(model->config().geometry == ds.geometry)) throw std::runtime_error("checkpoint geometry does not match dataset");
  const auto& samples = split == "train" ? ds.train : (split == "val" ? ds.val : ds.test);
  const auto r = depth::evaluate(*model, depth::pointers(samples), 32, g.jobs);
  json j{{"split", split}, {"task", depth::to_json(model->config().task)}, {"metrics", depth::to_json(r.metrics)}};
  write_json(fs::path(g.out) / "depth_eval.json", j);
  std::printf("%s\n", j["metrics"].dump().c_str());
  return kExitOk;
}

int cmd_depth_fov_sweep(const Globals& g, const std::string& dataset_dir) {
  const auto cfg = resolve_config(g);
  const auto ds = app::load_dataset(dataset_dir);
  const auto rows = depth::run_fov_sweep(ds, depth::default_fovs(), depth_settings(cfg), log);
  json j = run_header(cfg, g.seed);
  j["rows"] = json::array();
  app::Series rgb{"RGB only", "#2ca02c", {}}, fused{"echoes + RGB", "#d62728", {}};
  std::vector<std::string> x;
  for (const auto& r : rows) {
    j["rows"].push_back(depth::to_json(r));
    (r.task.echo_orientations == 0 ? rgb : fused).y.push_back(r.mean.rmse);
    if (r.task.echo_orientations == 0) x.push_back(std::to_string(static_cast<int>(r.task.rgb_fov_deg)));
  }
  const fs::path out(g.out);
  write_json(out / "fov_sweep.json", j);
  app::write_text(out / "fov_sweep.svg",
                  app::svg_line_plot("Depth RMSE over RGB field of view", "RGB FoV (degrees)", "RMSE (m)", x,
                                     {rgb, fused}));
  for (const auto& r : rows) std::printf("%-18s rmse %.4f\n", r.label.c_str(), r.mean.rmse);
  return kExitOk;
}

int cmd_depth_unseen(const Globals& g, const std::string& dataset_dir, const std::vector<std::string>& targets) {
  const auto cfg = resolve_config(g);
  const auto ds = app::load_dataset(dataset_dir);
  const auto s = depth_settings(cfg);
  json j = run_header(cfg, g.seed);
  j["rows"] = json::array();
  for (const auto& t : targets) {
    for (auto m : {depth::InputMode::kRgbOnly, depth::InputMode::kEchoesOnly, depth::InputMode::kEchoesRgb}) {
      const auto r = depth::run_unseen_orientation(ds, depth::parse_side(t), m, s, log);
      j["rows"].push_back(depth::to_json(r));
      std::printf("%-22s rmse %.4f\n", r.label.c_str(), r.mean.rmse);
    }
  }
  write_json(fs::path(g.out) / "unseen.json", j);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// nav

json spl_json(const nav::SplResult& r) {
  return {{"spl", r.spl}, {"success_rate", r.success_rate}, {"episodes", r.episodes}};
}

int cmd_nav_train(const Globals& g, const std::string& mode_name) {
  const auto cfg = resolve_config(g);
  const auto mode = nav::parse_nav_mode(mode_name);
  log("building navigation scenes");
  const auto bench = app::build_mode_bench(cfg.nav, g.seed, mode, g.jobs, cfg.depth.train.eval_batch);
  std::unique_ptr<nav::NavPolicy<float>> policy;
  const auto r = app::train_and_evaluate(
      cfg.nav, mode, bench, g.seed, g.jobs,
      [](const nav::CurveRow& row) {
        if (row.eval_spl < 0.0) return;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "update %d train success %.3f val SPL %.3f", row.update, row.success_rate,
                      row.eval_spl);
        log(buf);
      },
      &policy);
  const fs::path out(g.out);
  app::save_policy(out / "policy", *policy, {{"seed", g.seed}});
  app::write_text(out / "curve.csv", nav::curve_csv(r.report.curve));
  write_json(out / "episodes.json", {{"val", app::episodes_json(bench.val_episodes)},
                                     {"test", app::episodes_json(bench.test_episodes)}});
  json j = run_header(cfg, g.seed);
  j["mode"] = mode_name;
  j["best_update"] = r.report.best_update;
  j["best_val_spl"] = r.report.best_eval_spl;
  j["test"] = spl_json(r.test);
  write_json(out / "nav_train.json", j);
  std::printf("%s: test SPL %.4f success %.4f over %d episodes\n", mode_name.c_str(), r.test.spl,
              r.test.success_rate, r.test.episodes);
  return kExitOk;
}

int cmd_nav_eval(const Globals& g, const std::string& checkpoint) {
  const auto cfg = resolve_config(g);
  const auto policy = app::load_policy(checkpoint);
  const auto mode = policy->config().mode;
  const auto bench = app::build_mode_bench(cfg.nav, g.seed, mode, g.jobs, cfg.depth.train.eval_batch);
  const nav::NavPolicy<float>& p = *policy;
  const auto r = nav::evaluate_spl([&p] { return std::make_unique<nav::PolicyAgent<float>>(p); },
                                   bench.test_episodes, bench.test, derive_seed(g.seed, 2), g.jobs);
  json j = run_header(cfg, g.seed);
  j["mode"] = nav::mode_name(mode);
  j["test"] = spl_json(r);
  write_json(fs::path(g.out) / "nav_eval.json", j);
  std::printf("%s: test SPL %.4f success %.4f\n", nav::mode_name(mode), r.spl, r.success_rate);
  return kExitOk;
}

int cmd_nav_baseline(const Globals& g, const std::string& kind_name) {
  const auto cfg = resolve_config(g);
  const auto kind = nav::parse_baseline(kind_name);
  const auto bench = app::build_nav_bench(cfg.nav, g.seed, {}, g.jobs);
  const auto r = nav::run_baseline(kind, bench.test_episodes, bench.test, derive_seed(g.seed, 2), g.jobs);
  json j = run_header(cfg, g.seed);
  j["baseline"] = kind_name;
  j["test"] = spl_json(r);
  write_json(fs::path(g.out) / "nav_baseline.json", j);
  std::printf("%s: test SPL %.4f success %.4f\n", kind_name.c_str(), r.spl, r.success_rate);
  return kExitOk;
}

int cmd_nav_trace(const Globals& g, const std::string& checkpoint, const std::string& baseline, int episode) {
  const auto cfg = resolve_config(g);
  std::unique_ptr<nav::NavPolicy<float>> policy;
  std::unique_ptr<nav::Agent> agent;
  nav::NavMode mode = nav::NavMode::kBlind;
  std::string label;
  if (!checkpoint.empty()) {
    policy = app::load_policy(checkpoint);
    mode = policy->config().mode;
    agent = std::make_unique<nav::PolicyAgent<float>>(*policy);
    label = nav::mode_name(mode);
  } else {
    agent = nav::make_baseline(nav::parse_baseline(baseline));
    label = baseline;
  }
  const auto bench = app::build_mode_bench(cfg.nav, g.seed, mode, g.jobs, cfg.depth.train.eval_batch);
  if (episode < 0 || episode >= static_cast<int>(bench.test_episodes.size())) {
    throw std::invalid_argument("episode index out of range (0.." + std::to_string(bench.test_episodes.size() - 1) +
                                ")");
  }
  const auto& ep = bench.test_episodes[static_cast<std::size_t>(episode)];
  const auto& obs = bench.test.at(ep.scene_id);
  const auto tr = nav::run_episode(ep, obs, *agent, derive_seed(derive_seed(g.seed, 2), episode), cfg.nav.reward);
  const std::vector<scene::Pose> path(tr.poses.begin() + 1, tr.poses.end());
  const fs::path out(g.out);
  fs::create_directories(out);
  const std::string stem = "trace-" + label + "-" + std::to_string(episode);
  nav::render_trajectory_map(out / stem, obs.scene(), ep.start, path, ep.goal);
  json j{{"episode", app::episode_json(ep)},
         {"agent", label},
         {"success", tr.outcome.success},
         {"path_length", tr.outcome.path_length},
         {"spl", nav::episode_spl(tr.outcome)},
         {"actions", json::array()}};
  for (auto a : tr.actions) j["actions"].push_back(nav::action_name(a));
  write_json(out / (stem + ".json"), j);
  std::printf("%s episode %d: success %d, path %.2f m, shortest %.2f m -> %s.png/.svg\n", label.c_str(), episode,
              tr.outcome.success ? 1 : 0, tr.outcome.path_length, ep.shortest_path_length,
              (out / stem).string().c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// reproduce / selftest

int cmd_reproduce(const Globals& g, const std::vector<std::string>& names) {
  const auto cfg = resolve_config(g);
  std::vector<app::Experiment> exps;
  for (const auto& n : names) {
    if (n == "all") {
      exps.assign(app::kAllExperiments.begin(), app::kAllExperiments.end());
    } else {
      exps.push_back(app::parse_experiment(n));
    }
  }
  app::Reproducer r(cfg, g.seed, g.out, log);
  bool ok = true;
  for (auto e : exps) {
    const auto rep = r.run(e);
    std::printf("%s\n", app::experiment_name(e));
    for (const auto& c : rep.checks) {
      std::printf("  [%s] %s (%.4f %s %.4f)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.lhs, c.relation.c_str(),
                  c.rhs);
    }
    ok = ok && rep.passed();
  }
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_selftest() {
  bool ok = true;
  auto show = [&ok](const std::vector<app::SelftestResult>& rs) {
    for (const auto& r : rs) {
      std::printf("[%s] %s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
      ok = ok && r.pass;
    }
  };
  show(app::gradient_suite());
  show(app::metric_suite());
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Echo-augmented depth estimation and PointGoal navigation"};
  cli.require_subcommand(1);
  Globals g;
  cli.add_option("--seed", g.seed, "Data / run seed")->capture_default_str();
  cli.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  cli.add_option("--out", g.out, "Output directory")->capture_default_str();
  cli.add_option("--config", g.config, "JSON configuration file")->check(CLI::ExistingFile);
  cli.add_option("--set", g.overrides, "Config override key.path=value (repeatable)");

  int rc = kExitOk;
  auto guard = [&rc](auto fn) {
    return [&rc, fn] { rc = fn(); };
  };

  auto* scene_cmd = cli.add_subcommand("scene", "Generate one procedural scene and its top-down map");
  std::string scene_kind = "nav";
  int scene_index = 0;
  scene_cmd->add_option("--kind", scene_kind, "dataset or nav")->check(CLI::IsMember({"dataset", "nav"}));
  scene_cmd->add_option("--index", scene_index, "Scene index")->check(CLI::NonNegativeNumber);
  scene_cmd->callback(guard([&] { return cmd_scene(g, scene_kind, scene_index); }));

  auto* dataset_cmd = cli.add_subcommand("dataset", "Depth dataset generation");
  dataset_cmd->require_subcommand(1);
  dataset_cmd->add_subcommand("build", "Generate or resume a dataset in --out")->callback(guard([&] {
    return cmd_dataset_build(g);
  }));

  auto* depth_cmd = cli.add_subcommand("depth", "Depth estimation");
  depth_cmd->require_subcommand(1);
  std::string dataset_dir, checkpoint, split = "test";
  DepthTaskArgs task;
  std::vector<std::string> unseen_targets = {"left", "back", "right"};
  auto* dtrain = depth_cmd->add_subcommand("train", "Train one depth model");
  dtrain->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  dtrain->add_option("--mode", task.mode, "rgb_only, echoes_only, echoes+rgb or rgb_three_views");
  dtrain->add_option("--target", task.target, "front, right, back or left");
  dtrain->add_option("--rgb-fov", task.rgb_fov, "RGB field of view in degrees");
  dtrain->add_option("--target-fov", task.target_fov, "Target field of view (default: camera FoV)");
  dtrain->add_option("--orientations", task.orientations, "Echo orientations, 1 or 4");
  dtrain->callback(guard([&] { return cmd_depth_train(g, dataset_dir, task); }));
  auto* deval = depth_cmd->add_subcommand("eval", "Evaluate a depth checkpoint");
  deval->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  deval->add_option("--checkpoint", checkpoint, "Model directory")->required();
  deval->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  deval->callback(guard([&] { return cmd_depth_eval(g, dataset_dir, checkpoint, split); }));
  auto* dsweep = depth_cmd->add_subcommand("fov-sweep", "RGB vs echoes+RGB over RGB FoV");
  dsweep->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  dsweep->callback(guard([&] { return cmd_depth_fov_sweep(g, dataset_dir); }));
  auto* dunseen = depth_cmd->add_subcommand("unseen", "Depth of sides the camera does not see");
  dunseen->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  dunseen->add_option("--target", unseen_targets, "Target sides");
  dunseen->callback(guard([&] { return cmd_depth_unseen(g, dataset_dir, unseen_targets); }));

  auto* nav_cmd = cli.add_subcommand("nav", "PointGoal navigation");
  nav_cmd->require_subcommand(1);
  std::string mode = "echoes", baseline = "goal_follower";
  int episode = 0;
  const auto modes = CLI::IsMember({"blind", "rgb", "depth", "echoes", "echoes+rgb", "echoes+depth", "est-depth"});
  const auto baselines = CLI::IsMember({"random", "forward", "goal_follower"});
  auto* ntrain = nav_cmd->add_subcommand("train", "Train a policy with PPO");
  ntrain->add_option("--mode", mode, "Sensor mode")->check(modes);
  ntrain->callback(guard([&] { return cmd_nav_train(g, mode); }));
  auto* neval = nav_cmd->add_subcommand("eval", "Evaluate a policy checkpoint on the test episodes");
  neval->add_option("--checkpoint", checkpoint, "Policy directory")->required();
  neval->callback(guard([&] { return cmd_nav_eval(g, checkpoint); }));
  auto* nbase = nav_cmd->add_subcommand("baseline", "Evaluate a non-learning baseline");
  nbase->add_option("--kind", baseline, "random, forward or goal_follower")->check(baselines);
  nbase->callback(guard([&] { return cmd_nav_baseline(g, baseline); }));
  auto* ntrace = nav_cmd->add_subcommand("trace", "Render one test episode as a top-down trajectory map");
  ntrace->add_option("--checkpoint", checkpoint, "Policy directory (otherwise --baseline is traced)");
  ntrace->add_option("--baseline", baseline, "Baseline to trace without a checkpoint")->check(baselines);
  ntrace->add_option("--episode", episode, "Test episode index");
  ntrace->callback(guard([&] { return cmd_nav_trace(g, checkpoint, baseline, episode); }));

  auto* repro = cli.add_subcommand("reproduce", "Run experiments and check the expected orderings");
  std::vector<std::string> experiments;
  repro->add_option("experiments", experiments, "fig4, fig5, table2-ordering, table3-ordering, table4-ordering or all")
      ->required();
  repro->callback(guard([&] { return cmd_reproduce(g, experiments); }));

  cli.add_subcommand("selftest", "Gradient checks and metric oracles")->callback(guard([] { return cmd_selftest(); }));

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? kExitOk : kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitError;
  }
  return rc;
}
