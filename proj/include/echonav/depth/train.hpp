#ifndef ECHONAV_DEPTH_TRAIN_HPP_
#define ECHONAV_DEPTH_TRAIN_HPP_

// Training loop, batched prediction and evaluation for depth models.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "echonav/depth/dataset.hpp"
#include "echonav/depth/metrics.hpp"
#include "echonav/depth/model.hpp"
#include "echonav/nn.hpp"
#include "echonav/parallel.hpp"

namespace echonav::depth {

struct DepthTrainConfig {
  int epochs = 50;
  int batch_size = 16;
  double lr = 1e-3;
  int eval_batch = 32;
  int jobs = 1;  // evaluation threads

  bool operator==(const DepthTrainConfig&) const = default;
};

struct EpochLog {
  int epoch = 0;
  long steps = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  DepthMetrics val;
};

struct TrainReport {
  double step0_loss = 0.0;
  std::vector<EpochLog> epochs;
  int best_epoch = -1;
  long steps = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::json to_json(const DepthMetrics& m) {
  return {{"rmse", m.rmse}, {"rel", m.rel}, {"log10", m.log10},
          {"delta1", m.delta1}, {"delta2", m.delta2}, {"delta3", m.delta3}};
}

inline nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json j;
  j["step0_loss"] = r.step0_loss;
  j["best_epoch"] = r.best_epoch;
  j["steps"] = r.steps;
  j["epochs"] = nlohmann::json::array();
  for (const auto& e : r.epochs) {
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"steps", e.steps},
                           {"train_loss", e.train_loss},
                           {"val_loss", e.val_loss},
                           {"val", to_json(e.val)}});
  }
  return j;
}

inline std::vector<const DepthSample*> pointers(const std::vector<DepthSample>& v) {
  std::vector<const DepthSample*> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(&s);
  return out;
}

/// Eval-mode predictions (normalized depth, H*W per sample). Weights are
/// only read, so chunks run concurrently.
template <class T>
std::vector<std::vector<float>> predict(const DepthModel<T>& model, const std::vector<const DepthSample*>& samples,
                                        int eval_batch = 32, int jobs = 1) {
  const auto& cfg = model.config();
  const std::size_t hw = cfg.geometry.pixels();
  std::vector<std::vector<float>> out(samples.size());
  const std::size_t step = static_cast<std::size_t>(std::max(eval_batch, 1));
  const std::size_t batches = (samples.size() + step - 1) / step;
  parallel_chunks(batches, jobs, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      const std::size_t lo = b * step, hi = std::min(samples.size(), lo + step);
      std::vector<const DepthSample*> chunk(samples.begin() + lo, samples.begin() + hi);
      const auto batch = make_batch<T>(chunk, cfg.task, cfg.geometry, cfg.echo_norm);
      nn::Tape<T> tape(false);
      const auto& pred = model.forward(tape, batch).value();
      for (std::size_t i = 0; i < chunk.size(); ++i) {
        out[lo + i].assign(pred.data.begin() + i * hw, pred.data.begin() + (i + 1) * hw);
      }
    }
  });
  return out;
}

inline std::vector<std::uint8_t> target_mask(const DepthTask& task, const SampleGeometry& g, const DepthSample& s) {
  auto m = fov_column_mask(g, task.target_fov_deg);
  const auto& d = s.depth[static_cast<std::size_t>(task.target)];
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = (m[k] && d[k] > 0.0f) ? 1 : 0;
  return m;
}

/// Per-image metrics averaged over images, plus the mean masked L1 loss on
/// normalized depth.
struct EvalResult {
  DepthMetrics metrics;
  double loss = 0.0;
};

inline EvalResult score_predictions(const std::vector<std::vector<float>>& preds,
                                    const std::vector<const DepthSample*>& samples, const DepthTask& task,
                                    const SampleGeometry& g) {
  if (preds.size() != samples.size() || samples.empty()) throw std::invalid_argument("score: size mismatch");
  std::vector<DepthMetrics> per;
  double loss = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& target = samples[i]->depth[static_cast<std::size_t>(task.target)];
    const auto mask = target_mask(task, g, *samples[i]);
    per.push_back(eval_depth(preds[i], target, g.max_depth_m, mask));
    for (std::size_t k = 0; k < mask.size(); ++k) {
      if (!mask[k]) continue;
      loss += std::abs(static_cast<double>(preds[i][k]) - target[k]);
      ++n;
    }
  }
  return {mean_metrics(per), loss / static_cast<double>(n)};
}

template <class T>
EvalResult evaluate(const DepthModel<T>& model, const std::vector<const DepthSample*>& samples, int eval_batch = 32,
                    int jobs = 1) {
  return score_predictions(predict(model, samples, eval_batch, jobs), samples, model.config().task,
                           model.config().geometry);
}

/// One optimizer step on `batch`; returns the loss before the update.
template <class T>
double train_step(DepthModel<T>& model, nn::Adam<T>& opt, const DepthBatch<T>& batch) {
  nn::Tape<T> tape(true);
  const auto loss = depth_loss(model.forward(tape, batch), batch);
  const double l = static_cast<double>(loss.value()[0]);
  if (!std::isfinite(l)) throw TrainingDiverged("non-finite depth loss at step " + std::to_string(opt.steps()));
  tape.backward(loss);
  if (!nn::grads_finite(model.params())) {
    throw TrainingDiverged("non-finite gradient at step " + std::to_string(opt.steps()));
  }
  opt.step(model.params());
  return l;
}

template <class T>
std::vector<nn::Tensor<T>> snapshot(nn::ParameterSet<T>& ps) {
  std::vector<nn::Tensor<T>> out;
  for (std::size_t i = 0; i < ps.size(); ++i) out.push_back(ps[i].value);
  return out;
}

template <class T>
void restore(nn::ParameterSet<T>& ps, const std::vector<nn::Tensor<T>>& values) {
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i].value = values[i];
}

/// Adam on the masked L1 loss with per-epoch validation. The model ends up
/// holding the weights of the best validation epoch.
template <class T>
TrainReport train_depth(DepthModel<T>& model, const std::vector<DepthSample>& train,
                        const std::vector<DepthSample>& val, const DepthTrainConfig& cfg, std::uint64_t seed,
                        const std::function<void(const EpochLog&)>& on_epoch = {}) {
  if (train.empty() || val.empty()) throw std::invalid_argument("train_depth needs nonempty train and val splits");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw std::invalid_argument("train_depth: bad epochs or batch size");
  const auto& mc = model.config();
  std::mt19937_64 rng(seed);
  nn::AdamOptions ao;
  ao.lr = cfg.lr;
  nn::Adam<T> opt(ao);
  const auto val_ptrs = pointers(val);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainReport report;
  std::vector<nn::Tensor<T>> best;
  double best_rmse = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    int batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch_size));
      // A trailing single sample cannot give batch statistics.
      if (hi - lo < 2 && batches > 0) break;
      std::vector<const DepthSample*> chunk;
      for (std::size_t k = lo; k < hi; ++k) chunk.push_back(&train[order[k]]);
      const auto batch = make_batch<T>(chunk, mc.task, mc.geometry, mc.echo_norm);
      const double l = train_step(model, opt, batch);
      if (opt.steps() == 1) report.step0_loss = l;
      sum += l;
      ++batches;
    }
    EpochLog log;
    log.epoch = epoch;
    log.steps = opt.steps();
    log.train_loss = sum / std::max(batches, 1);
    const EvalResult ev = evaluate(model, val_ptrs, cfg.eval_batch, cfg.jobs);
    log.val_loss = ev.loss;
    log.val = ev.metrics;
    report.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
    if (report.best_epoch < 0 || ev.metrics.rmse < best_rmse) {
      best_rmse = ev.metrics.rmse;
      report.best_epoch = epoch;
      best = snapshot(model.params());
    }
  }
  report.steps = opt.steps();
  restore(model.params(), best);
  return report;
}

struct OverfitResult {
  long steps = 0;
  double train_rmse = 0.0;  // normalized depth units
  bool reached = false;
};

/// Full-batch training on a handful of samples until the eval-mode RMSE on
/// them (in normalized depth units) drops below `target_rmse`.
template <class T>
OverfitResult overfit_depth(DepthModel<T>& model, const std::vector<DepthSample>& samples, long max_steps,
                            double target_rmse, double lr = 1e-3, int check_every = 25) {
  const auto& mc = model.config();
  const auto ptrs = pointers(samples);
  const auto batch = make_batch<T>(ptrs, mc.task, mc.geometry, mc.echo_norm);
  nn::AdamOptions ao;
  ao.lr = lr;
  nn::Adam<T> opt(ao);
  OverfitResult r;
  while (opt.steps() < max_steps) {
    train_step(model, opt, batch);
    if (opt.steps() % check_every == 0 || opt.steps() == max_steps) {
      r.train_rmse = evaluate(model, ptrs).metrics.rmse / mc.geometry.max_depth_m;
      r.steps = opt.steps();
      if (r.train_rmse < target_rmse) {
        r.reached = true;
        break;
      }
    }
  }
  return r;
}

/// The "average" baseline: the per-pixel training-set mean depth map of the
/// target side, over valid pixels.
inline std::vector<float> mean_depth_map(const std::vector<DepthSample>& train, Side target,
                                         const SampleGeometry& g) {
  if (train.empty()) throw std::invalid_argument("mean_depth_map: empty training set");
  std::vector<double> sum(g.pixels(), 0.0);
  std::vector<int> count(g.pixels(), 0);
  double all = 0.0;
  long all_n = 0;
  for (const auto& s : train) {
    const auto& d = s.depth[static_cast<std::size_t>(target)];
    for (std::size_t k = 0; k < d.size(); ++k) {
      if (d[k] <= 0.0f) continue;
      sum[k] += d[k];
      ++count[k];
      all += d[k];
      ++all_n;
    }
  }
  const double fallback = all_n ? all / static_cast<double>(all_n) : 0.5;
  std::vector<float> out(g.pixels());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = static_cast<float>(count[k] ? sum[k] / count[k] : fallback);
  }
  return out;
}

inline EvalResult evaluate_average_baseline(const std::vector<DepthSample>& train,
                                            const std::vector<const DepthSample*>& test, const DepthTask& task,
                                            const SampleGeometry& g) {
  const auto avg = mean_depth_map(train, task.target, g);
  return score_predictions(std::vector<std::vector<float>>(test.size(), avg), test, task, g);
}

/// Mean over the valid target pixels of E|U - d| for U ~ U(0,1), which is
/// (d^2 + (1-d)^2) / 2: the loss expected from uniformly random predictions.
inline double random_prediction_loss(const std::vector<const DepthSample*>& samples, const DepthTask& task,
                                     const SampleGeometry& g) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto* s : samples) {
    const auto mask = target_mask(task, g, *s);
    const auto& d = s->depth[static_cast<std::size_t>(task.target)];
    for (std::size_t k = 0; k < mask.size(); ++k) {
      if (!mask[k]) continue;
      const double v = d[k];
      acc += 0.5 * (v * v + (1.0 - v) * (1.0 - v));
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("random_prediction_loss: no valid pixels");
  return acc / static_cast<double>(n);
}

}  // namespace echonav::depth

#endif  // ECHONAV_DEPTH_TRAIN_HPP_
