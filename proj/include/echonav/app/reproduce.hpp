#ifndef ECHONAV_APP_REPRODUCE_HPP_
#define ECHONAV_APP_REPRODUCE_HPP_

// End-to-end experiment runs with ordering checks. Each experiment writes
// <out>/<name>/report.json (resolved config, fingerprint, table, checks) and
// its plot when it has one. The depth dataset lives in <out>/dataset and is
// built or resumed on first use.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "echonav/app/config.hpp"
#include "echonav/app/dataset_store.hpp"
#include "echonav/app/model_io.hpp"
#include "echonav/app/nav_bench.hpp"
#include "echonav/app/plot.hpp"
#include "echonav/depth.hpp"
#include "echonav/nav.hpp"

namespace echonav::app {

enum class Experiment { kFig4, kFig5, kTable2, kTable3, kTable4 };

inline constexpr std::array<Experiment, 5> kAllExperiments = {Experiment::kTable2, Experiment::kFig4,
                                                              Experiment::kFig5, Experiment::kTable3,
                                                              Experiment::kTable4};

inline const char* experiment_name(Experiment e) {
  switch (e) {
    case Experiment::kFig4: return "fig4";
    case Experiment::kFig5: return "fig5";
    case Experiment::kTable2: return "table2-ordering";
    case Experiment::kTable3: return "table3-ordering";
    case Experiment::kTable4: return "table4-ordering";
  }
  return "?";
}

inline Experiment parse_experiment(const std::string& s) {
  for (auto e : kAllExperiments) {
    if (s == experiment_name(e)) return e;
  }
  throw std::invalid_argument("unknown experiment " + s);
}

/// Weak SPL inequalities tolerate this much.
inline constexpr double kSplTieBand = 0.01;

struct Check {
  std::string name;
  double lhs = 0.0;
  std::string relation;  // "<", "<=" or ">="
  double rhs = 0.0;
  double band = 0.0;
  bool pass = false;
};

inline Check make_check(std::string name, double lhs, const std::string& relation, double rhs, double band = 0.0) {
  Check c{std::move(name), lhs, relation, rhs, band, false};
  if (relation == "<") {
    c.pass = lhs < rhs;
  } else if (relation == "<=") {
    c.pass = lhs <= rhs + band;
  } else if (relation == ">=") {
    c.pass = lhs >= rhs - band;
  } else {
    throw std::invalid_argument("unknown relation " + relation);
  }
  return c;
}

inline json to_json(const Check& c) {
  return {{"name", c.name}, {"lhs", c.lhs}, {"relation", c.relation},
          {"rhs", c.rhs},   {"band", c.band}, {"pass", c.pass}};
}

struct Report {
  Experiment experiment = Experiment::kTable2;
  json table = json::array();
  std::vector<Check> checks;
  std::string error;

  bool passed() const {
    if (!error.empty()) return false;
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return true;
  }
};

using Progress = std::function<void(const std::string&)>;

/// Shared state for one `reproduce` invocation. Results that several
/// experiments need (the dataset, the navigation scenes, trained SPL rows)
/// are computed once.
class Reproducer {
 public:
  Reproducer(ExperimentConfig cfg, std::uint64_t data_seed, std::filesystem::path out, Progress progress = {})
      : cfg_(std::move(cfg)), seed_(data_seed), out_(std::move(out)), progress_(std::move(progress)) {
    validate(cfg_);
  }

  const ExperimentConfig& config() const { return cfg_; }

  /// Runs one experiment and always writes its report, rethrowing errors
  /// after the report is on disk.
  Report run(Experiment e) {
    std::filesystem::create_directories(report_dir(e));
    Report r;
    r.experiment = e;
    try {
      switch (e) {
        case Experiment::kTable2: table2(r); break;
        case Experiment::kFig4: fig4(r); break;
        case Experiment::kFig5: fig5(r); break;
        case Experiment::kTable3: table3(r); break;
        case Experiment::kTable4: table4(r); break;
      }
    } catch (const std::exception& ex) {
      r.error = ex.what();
      write_report(r);
      throw;
    }
    write_report(r);
    return r;
  }

  std::filesystem::path report_dir(Experiment e) const { return out_ / experiment_name(e); }

  json report_json(const Report& r) const {
    json j;
    j["experiment"] = experiment_name(r.experiment);
    j["data_seed"] = seed_;
    j["seeds"] = cfg_.seeds;
    j["config_fingerprint"] = config_fingerprint(cfg_);
    j["config"] = to_json(cfg_);
    j["table"] = r.table;
    j["checks"] = json::array();
    for (const auto& c : r.checks) j["checks"].push_back(to_json(c));
    j["passed"] = r.passed();
    if (!r.error.empty()) j["error"] = r.error;
    return j;
  }

 private:
  void say(const std::string& s) const {
    if (progress_) progress_(s);
  }

  void write_report(const Report& r) const {
    write_text(report_dir(r.experiment) / "report.json", report_json(r).dump(2) + "\n");
  }

  // -------------------------------------------------------------------------
  // Depth experiments

  const depth::DepthDataset& dataset() {
    if (!dataset_) {
      const auto root = out_ / "dataset";
      say("building dataset in " + root.string());
      dataset_build(root, cfg_, seed_, cfg_.jobs);
      dataset_ = load_dataset(root);
    }
    return *dataset_;
  }

  depth::ExperimentSettings depth_settings() const {
    depth::ExperimentSettings s;
    s.arch = cfg_.depth.arch;
    s.train = cfg_.depth.train;
    s.train.jobs = cfg_.jobs;
    s.seeds = cfg_.seeds;
    return s;
  }

  static const depth::CellResult& find_cell(const std::vector<depth::CellResult>& rows, const std::string& label) {
    for (const auto& r : rows) {
      if (r.label == label) return r;
    }
    throw std::logic_error("missing result row " + label);
  }

  void table2(Report& r) {
    const auto rows = depth::run_orientation_count(dataset(), depth_settings(), progress_);
    for (const auto& row : rows) r.table.push_back(depth::to_json(row));
    r.checks.push_back(make_check("echoes_4 rmse < echoes_1 rmse", find_cell(rows, "echoes_4").mean.rmse, "<",
                                  find_cell(rows, "echoes_1").mean.rmse));
  }

  void fig4(Report& r) {
    const auto& fovs = depth::default_fovs();
    const auto rows = depth::run_fov_sweep(dataset(), fovs, depth_settings(), progress_);
    std::vector<std::string> x;
    Series rgb{"RGB only", "#2ca02c", {}}, fused{"echoes + RGB", "#d62728", {}};
    for (const auto& row : rows) r.table.push_back(depth::to_json(row));
    for (double fov : fovs) {
      const std::string f = std::to_string(static_cast<int>(fov));
      const double a = find_cell(rows, std::string("echoes+rgb@") + f).mean.rmse;
      const double b = find_cell(rows, std::string("rgb_only@") + f).mean.rmse;
      x.push_back(f);
      rgb.y.push_back(b);
      fused.y.push_back(a);
      r.checks.push_back(make_check("fov " + f + ": echoes+rgb rmse <= rgb_only rmse", a, "<=", b));
    }
    write_text(report_dir(Experiment::kFig4) / "fig4.svg",
               svg_line_plot("Depth RMSE over RGB field of view", "RGB FoV (degrees)", "RMSE (m)", x, {rgb, fused}));
  }

  void fig5(Report& r) {
    const auto& ds = dataset();
    const auto s = depth_settings();
    std::vector<std::string> groups;
    Series rgb{"RGB only", "#1f77b4", {}}, echo{"echoes only", "#7f7f7f", {}}, fused{"echoes + RGB", "#d62728", {}};
    for (auto target : cfg_.depth.unseen_targets) {
      const auto a = depth::run_unseen_orientation(ds, target, depth::InputMode::kRgbOnly, s, progress_);
      const auto b = depth::run_unseen_orientation(ds, target, depth::InputMode::kEchoesOnly, s, progress_);
      const auto c = depth::run_unseen_orientation(ds, target, depth::InputMode::kEchoesRgb, s, progress_);
      for (const auto* row : {&a, &b, &c}) r.table.push_back(depth::to_json(*row));
      const std::string side = scene::side_name(target);
      groups.push_back(side);
      rgb.y.push_back(a.mean.rmse);
      echo.y.push_back(b.mean.rmse);
      fused.y.push_back(c.mean.rmse);
      r.checks.push_back(make_check(side + ": echoes+rgb rmse < rgb_only rmse", c.mean.rmse, "<", a.mean.rmse));
      if (target == scene::Side::kBack) {
        r.checks.push_back(make_check(side + ": echoes_only rmse < rgb_only rmse", b.mean.rmse, "<", a.mean.rmse));
      }
    }
    write_text(report_dir(Experiment::kFig5) / "fig5.svg",
               svg_bar_chart("Depth RMSE outside the camera view", "RMSE (m)", groups, {rgb, echo, fused}));
  }

  // -------------------------------------------------------------------------
  // Navigation experiments

  std::vector<nav::NavMode> all_nav_modes() const {
    std::vector<nav::NavMode> modes = cfg_.nav.table3_modes;
    modes.insert(modes.end(), cfg_.nav.table4_modes.begin(), cfg_.nav.table4_modes.end());
    return modes;
  }

  const NavBench& bench() {
    if (!bench_) {
      say("building navigation scenes");
      bench_ = std::make_unique<NavBench>(build_nav_bench(cfg_.nav, seed_, needs_for_modes(all_nav_modes()), cfg_.jobs));
    }
    return *bench_;
  }

  const NavBench& est_depth_bench() {
    if (!est_bench_) {
      say("building navigation scenes with estimated depth");
      est_bench_ = std::make_unique<NavBench>(
          build_mode_bench(cfg_.nav, seed_, nav::NavMode::kEstDepth, cfg_.jobs, cfg_.depth.train.eval_batch));
    }
    return *est_bench_;
  }

  const SplRow& row(const std::string& label) {
    auto it = rows_.find(label);
    if (it != rows_.end()) return it->second;
    for (auto k : {nav::BaselineKind::kRandom, nav::BaselineKind::kForward, nav::BaselineKind::kGoalFollower}) {
      if (label == nav::baseline_name(k)) {
        return rows_.emplace(label, baseline_row(k, bench(), cfg_.seeds, cfg_.jobs)).first->second;
      }
    }
    const nav::NavMode mode = nav::parse_nav_mode(label);
    const NavBench& b = mode == nav::NavMode::kEstDepth ? est_depth_bench() : bench();
    return rows_.emplace(label, mode_row(cfg_.nav, mode, b, cfg_.seeds, cfg_.jobs, progress_)).first->second;
  }

  void spl_table(Report& r, const std::vector<std::string>& labels) {
    for (const auto& l : labels) r.table.push_back(to_json(row(l)));
  }

  bool has(const std::vector<std::string>& labels, const std::string& l) const {
    return std::find(labels.begin(), labels.end(), l) != labels.end();
  }

  void spl_check(Report& r, const std::vector<std::string>& labels, const std::string& a, const std::string& rel,
                 const std::string& b) {
    if (!has(labels, a) || !has(labels, b)) return;
    const double band = rel == "<" ? 0.0 : kSplTieBand;
    r.checks.push_back(make_check(a + " spl " + rel + " " + b + " spl", row(a).mean_spl, rel, row(b).mean_spl, band));
  }

  void table3(Report& r) {
    std::vector<std::string> labels = {"random", "forward", "goal_follower"};
    for (auto m : cfg_.nav.table3_modes) labels.push_back(nav::mode_name(m));
    if (!cfg_.nav.est_depth_checkpoint.empty() && !has(labels, "est-depth")) labels.push_back("est-depth");
    spl_table(r, labels);
    spl_check(r, labels, "random", "<", "goal_follower");
    spl_check(r, labels, "goal_follower", "<", "blind");
    spl_check(r, labels, "blind", "<", "rgb");
    spl_check(r, labels, "rgb", "<=", "depth");
  }

  void table4(Report& r) {
    std::vector<std::string> labels;
    for (auto m : cfg_.nav.table4_modes) labels.push_back(nav::mode_name(m));
    spl_table(r, labels);
    spl_check(r, labels, "rgb", "<=", "echoes");
    spl_check(r, labels, "echoes", "<=", "depth");
    spl_check(r, labels, "echoes+depth", ">=", "depth");
  }

  ExperimentConfig cfg_;
  std::uint64_t seed_;
  std::filesystem::path out_;
  Progress progress_;
  std::optional<depth::DepthDataset> dataset_;
  std::unique_ptr<NavBench> bench_;
  std::unique_ptr<NavBench> est_bench_;
  std::map<std::string, SplRow> rows_;
};

}  // namespace echonav::app

#endif  // ECHONAV_APP_REPRODUCE_HPP_
