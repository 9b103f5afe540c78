#ifndef ECHONAV_NAV_PPO_HPP_
#define ECHONAV_NAV_PPO_HPP_

// Recurrent PPO: rollout collection over parallel episode streams, GAE,
// the clipped surrogate update and the training loop.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "echonav/nav/agents.hpp"
#include "echonav/nav/env.hpp"
#include "echonav/nav/policy.hpp"
#include "echonav/nn.hpp"

namespace echonav::nav {

struct PpoConfig {
  int streams = 8;
  int rollout = 128;
  int epochs = 4;
  int minibatches = 4;
  double clip = 0.2;
  double gamma = 0.99;
  double lambda = 0.95;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double lr = 2.5e-4;
  double max_grad_norm = 0.5;
  bool linear_lr_decay = false;  // lr falls linearly to zero over `updates`
  int updates = 200;
  int min_episode_cells = 2;
  int eval_every = 0;  // updates between validation SPL checks; 0 disables
  bool keep_best = true;
  int jobs = 1;

  bool operator==(const PpoConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Advantages

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Time-major [steps][streams] arrays. `done[t]` marks that the transition at
/// t ended its episode, so nothing is bootstrapped across it.
inline Advantages compute_advantages(const std::vector<double>& rewards, const std::vector<double>& values,
                                     const std::vector<std::uint8_t>& done, const std::vector<double>& last_values,
                                     int streams, double gamma, double lambda) {
  if (rewards.empty() || streams < 1) throw std::invalid_argument("compute_advantages: empty buffer");
  const std::size_t n = rewards.size();
  if (values.size() != n || done.size() != n || n % static_cast<std::size_t>(streams) != 0 ||
      last_values.size() != static_cast<std::size_t>(streams)) {
    throw std::invalid_argument("compute_advantages: size mismatch");
  }
  const int steps = static_cast<int>(n / static_cast<std::size_t>(streams));
  Advantages out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  for (int j = 0; j < streams; ++j) {
    double next_adv = 0.0;
    double next_value = last_values[static_cast<std::size_t>(j)];
    for (int t = steps - 1; t >= 0; --t) {
      const std::size_t i = static_cast<std::size_t>(t) * streams + j;
      const double live = done[i] ? 0.0 : 1.0;
      const double delta = rewards[i] + gamma * next_value * live - values[i];
      next_adv = delta + gamma * lambda * live * next_adv;
      out.advantages[i] = next_adv;
      out.returns[i] = next_adv + values[i];
      next_value = values[i];
    }
  }
  return out;
}

inline void normalize(std::vector<double>& v) {
  if (v.size() < 2) return;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  const double sd = std::sqrt(sq / static_cast<double>(v.size()));
  for (double& x : v) x = (x - mean) / (sd + 1e-8);
}

/// Per-sample clipped surrogate min(rho * A, clip(rho, 1 - eps, 1 + eps) * A).
inline double clipped_surrogate(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

// ---------------------------------------------------------------------------
// Loss

struct PpoLosses {
  double policy = 0.0;   // negated mean surrogate
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
};

/// Builds the PPO loss on `t` from logits [N, 4] and values [N, 1].
template <class T>
nn::Var<T> ppo_loss(nn::Var<T> logits, nn::Var<T> values, const std::vector<int>& actions,
                    const std::vector<double>& old_logp, const std::vector<double>& advantages,
                    const std::vector<double>& returns, const PpoConfig& cfg, PpoLosses* report = nullptr) {
  nn::Tape<T>& t = *logits.tape;
  const int n = static_cast<int>(actions.size());
  auto column = [n](const std::vector<double>& v) {
    nn::Tensor<T> out({n});
    for (int i = 0; i < n; ++i) out[i] = static_cast<T>(v[static_cast<std::size_t>(i)]);
    return out;
  };
  const nn::Var<T> logp_all = nn::log_softmax(logits);
  const nn::Var<T> logp = nn::gather(logp_all, actions);
  const nn::Var<T> ratio = nn::exp(nn::sub(logp, t.constant(column(old_logp))));
  const nn::Var<T> adv = t.constant(column(advantages));
  const nn::Var<T> surr = nn::minimum(nn::mul(ratio, adv),
                                      nn::mul(nn::clamp(ratio, T(1 - cfg.clip), T(1 + cfg.clip)), adv));
  const nn::Var<T> policy_loss = nn::scale(nn::mean(surr), T(-1));
  const nn::Var<T> v = nn::reshape(values, {n});
  const nn::Var<T> value_loss = nn::mean(nn::square(nn::sub(v, t.constant(column(returns)))));
  const nn::Var<T> entropy = nn::scale(nn::sum(nn::mul(nn::exp(logp_all), logp_all)), T(-1) / static_cast<T>(n));
  const nn::Var<T> total = nn::sub(nn::add(policy_loss, nn::scale(value_loss, static_cast<T>(cfg.value_coef))),
                                   nn::scale(entropy, static_cast<T>(cfg.entropy_coef)));
  if (report) {
    report->policy = policy_loss.value()[0];
    report->value = value_loss.value()[0];
    report->entropy = entropy.value()[0];
    report->total = total.value()[0];
  }
  return total;
}

// ---------------------------------------------------------------------------
// Rollouts

struct RolloutBuffer {
  int steps = 0;
  int streams = 0;
  std::vector<ObsRef> obs;             // time-major
  std::vector<int> actions;
  std::vector<double> logp;
  std::vector<double> values;
  std::vector<double> rewards;
  std::vector<std::uint8_t> done;      // transition ended its episode
  std::vector<std::uint8_t> reset;     // hidden state zeroed before this step
  std::vector<float> h0;               // [streams, H] state entering the rollout
  std::vector<double> last_values;     // bootstrap per stream
};

struct RolloutStats {
  int episodes = 0;
  int successes = 0;
  double spl_sum = 0.0;
  double reward_sum = 0.0;
};

/// Episode streams drawing scenes and episodes from the training set.
template <class T>
class RolloutCollector {
 public:
  RolloutCollector(const SceneSet& scenes, const PpoConfig& cfg, const RewardConfig& reward, std::uint64_t seed,
                   int hidden)
      : scenes_(scenes), cfg_(cfg), reward_(reward), hidden_(hidden) {
    if (scenes_.size() == 0) throw std::invalid_argument("no training scenes");
    for (int j = 0; j < cfg_.streams; ++j) {
      Stream s;
      s.rng.seed(derive_seed(seed, static_cast<std::uint64_t>(j)));
      s.h = nn::Tensor<T>({1, hidden_});
      new_episode(s);
      streams_.push_back(std::move(s));
    }
  }

  RolloutBuffer collect(const NavPolicy<T>& policy, RolloutStats& stats) {
    const int S = cfg_.streams, L = cfg_.rollout, H = hidden_;
    RolloutBuffer b;
    b.steps = L;
    b.streams = S;
    b.h0.resize(static_cast<std::size_t>(S) * H);
    for (int j = 0; j < S; ++j) {
      std::copy(streams_[j].h.data.begin(), streams_[j].h.data.end(), b.h0.begin() + static_cast<std::ptrdiff_t>(j) * H);
    }
    for (int t = 0; t < L; ++t) {
      std::vector<ObsRef> refs;
      nn::Tensor<T> h({S, H});
      for (int j = 0; j < S; ++j) {
        Stream& s = streams_[j];
        refs.push_back(ref(s));
        b.reset.push_back(s.fresh ? 1 : 0);
        if (!s.fresh) std::copy(s.h.data.begin(), s.h.data.end(), h.ptr() + static_cast<std::size_t>(j) * H);
      }
      const auto in = policy.make_inputs(refs);
      nn::Tape<T> tape(false);
      const auto out = policy.step(tape, policy.encode(tape, in), tape.constant(in.gps), tape.constant(h));
      const auto& lv = out.logits.value();
      for (int j = 0; j < S; ++j) {
        Stream& s = streams_[j];
        const auto p = action_probabilities(lv, j);
        const int a = sample_action(p, s.rng);
        const StepResult r = s.env->step(static_cast<Action>(a));
        b.obs.push_back(refs[static_cast<std::size_t>(j)]);
        b.actions.push_back(a);
        b.logp.push_back(std::log(std::max(p[a], 1e-30)));
        b.values.push_back(out.value.value()[j]);
        b.rewards.push_back(r.reward);
        b.done.push_back(r.done ? 1 : 0);
        stats.reward_sum += r.reward;
        std::copy_n(out.hidden.value().ptr() + static_cast<std::size_t>(j) * H, H, s.h.ptr());
        s.fresh = false;
        if (r.done) {
          ++stats.episodes;
          const EpisodeOutcome o{r.success, s.env->episode().shortest_path_length, s.env->path_length(),
                                 s.env->steps()};
          stats.successes += o.success ? 1 : 0;
          stats.spl_sum += episode_spl(o);
          new_episode(s);
        }
      }
    }
    // Bootstrap values of the observations following the rollout.
    std::vector<ObsRef> refs;
    nn::Tensor<T> h({S, H});
    for (int j = 0; j < S; ++j) {
      refs.push_back(ref(streams_[j]));
      if (!streams_[j].fresh) {
        std::copy(streams_[j].h.data.begin(), streams_[j].h.data.end(), h.ptr() + static_cast<std::size_t>(j) * H);
      }
    }
    const auto in = policy.make_inputs(refs);
    nn::Tape<T> tape(false);
    const auto out = policy.step(tape, policy.encode(tape, in), tape.constant(in.gps), tape.constant(h));
    for (int j = 0; j < S; ++j) b.last_values.push_back(out.value.value()[j]);
    return b;
  }

 private:
  struct Stream {
    std::mt19937_64 rng;
    std::unique_ptr<NavEnv> env;
    const SceneObservations* obs = nullptr;
    nn::Tensor<T> h;
    bool fresh = true;
  };

  ObsRef ref(const Stream& s) const { return {s.obs, s.obs->slot(s.env->pose()), s.env->gps()}; }

  void new_episode(Stream& s) {
    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, scenes_.size() - 1)(s.rng);
    s.obs = &scenes_[k];
    const auto eps = generate_episodes(s.obs->scene(), 1, s.rng, cfg_.min_episode_cells);
    s.env = std::make_unique<NavEnv>(s.obs->scene_ptr(), eps.front(), reward_);
    s.fresh = true;
  }

  const SceneSet& scenes_;
  PpoConfig cfg_;
  RewardConfig reward_;
  int hidden_;
  std::vector<Stream> streams_;
};

/// Clipped-surrogate epochs over stream minibatches; the GRU is re-unrolled
/// from each stream's rollout-entry state. Returns mean losses.
template <class T>
PpoLosses ppo_update(NavPolicy<T>& policy, nn::Adam<T>& opt, const RolloutBuffer& b, const PpoConfig& cfg,
                     std::mt19937_64& rng) {
  if (b.obs.empty()) throw std::invalid_argument("ppo_update: empty buffer");
  if (cfg.minibatches < 1 || b.streams % cfg.minibatches != 0) {
    throw std::invalid_argument("streams must divide into minibatches");
  }
  Advantages adv = compute_advantages(b.rewards, b.values, b.done, b.last_values, b.streams, cfg.gamma, cfg.lambda);
  normalize(adv.advantages);
  const int per = b.streams / cfg.minibatches, H = policy.hidden_size();
  std::vector<int> order(static_cast<std::size_t>(b.streams));
  std::iota(order.begin(), order.end(), 0);
  PpoLosses mean;
  int count = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int m = 0; m < cfg.minibatches; ++m) {
      std::vector<int> ids(order.begin() + m * per, order.begin() + (m + 1) * per);
      std::vector<ObsRef> refs;
      std::vector<std::uint8_t> reset;
      std::vector<int> actions;
      std::vector<double> old_logp, a, ret;
      for (int t = 0; t < b.steps; ++t) {
        for (int j : ids) {
          const std::size_t i = static_cast<std::size_t>(t) * b.streams + j;
          refs.push_back(b.obs[i]);
          reset.push_back(b.reset[i]);
          actions.push_back(b.actions[i]);
          old_logp.push_back(b.logp[i]);
          a.push_back(adv.advantages[i]);
          ret.push_back(adv.returns[i]);
        }
      }
      nn::Tensor<T> h0({per, H});
      for (int k = 0; k < per; ++k) {
        for (int u = 0; u < H; ++u) h0[k * H + u] = static_cast<T>(b.h0[static_cast<std::size_t>(ids[k]) * H + u]);
      }
      nn::Tape<T> tape(true);
      const auto in = policy.make_inputs(refs);
      const nn::Var<T> hs = policy.unroll(tape, in, b.steps, per, h0, reset);
      const auto [logits, values] = policy.heads(tape, hs);
      PpoLosses l;
      const nn::Var<T> loss = ppo_loss(logits, values, actions, old_logp, a, ret, cfg, &l);
      if (!std::isfinite(l.total)) throw std::runtime_error("non-finite PPO loss");
      tape.backward(loss);
      if (!nn::grads_finite(policy.params())) throw std::runtime_error("non-finite PPO gradient");
      if (cfg.max_grad_norm > 0.0) nn::clip_grad_norm(policy.params(), cfg.max_grad_norm);
      opt.step(policy.params());
      mean.policy += l.policy;
      mean.value += l.value;
      mean.entropy += l.entropy;
      mean.total += l.total;
      ++count;
    }
  }
  mean.policy /= count;
  mean.value /= count;
  mean.entropy /= count;
  mean.total /= count;
  return mean;
}

// ---------------------------------------------------------------------------
// Training loop

struct CurveRow {
  int update = 0;
  long env_steps = 0;
  int episodes = 0;
  double success_rate = 0.0;  // over episodes finished during the rollout
  double train_spl = 0.0;
  double mean_reward = 0.0;   // per step
  PpoLosses losses;
  double eval_spl = -1.0;     // -1 when not evaluated
};

struct NavTrainReport {
  std::vector<CurveRow> curve;
  int best_update = -1;
  double best_eval_spl = -1.0;
};

inline std::string curve_csv(const std::vector<CurveRow>& rows) {
  std::string out = "update,env_steps,episodes,success_rate,train_spl,mean_reward,policy_loss,value_loss,entropy,eval_spl\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%ld,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.update, r.env_steps,
                  r.episodes, r.success_rate, r.train_spl, r.mean_reward, r.losses.policy, r.losses.value,
                  r.losses.entropy, r.eval_spl);
    out += buf;
  }
  return out;
}

template <class T>
NavTrainReport train_nav(NavPolicy<T>& policy, const SceneSet& train_scenes, const PpoConfig& cfg,
                         const RewardConfig& reward, std::uint64_t seed, const std::vector<NavEpisode>& val_episodes = {},
                         const SceneSet* val_scenes = nullptr,
                         const std::function<void(const CurveRow&)>& on_update = {}) {
  if (cfg.updates < 1 || cfg.streams < 1 || cfg.rollout < 1) throw std::invalid_argument("invalid PPO config");
  const bool eval = cfg.eval_every > 0 && !val_episodes.empty() && val_scenes;
  nn::AdamOptions ao;
  ao.lr = cfg.lr;
  nn::Adam<T> opt(ao);
  std::mt19937_64 rng(derive_seed(seed, 1u << 20));
  RolloutCollector<T> collector(train_scenes, cfg, reward, derive_seed(seed, 1u << 21), policy.hidden_size());
  NavTrainReport report;
  std::vector<nn::Tensor<T>> best;
  long env_steps = 0;
  for (int u = 0; u < cfg.updates; ++u) {
    RolloutStats stats;
    const RolloutBuffer b = collector.collect(policy, stats);
    env_steps += static_cast<long>(b.obs.size());
    if (cfg.linear_lr_decay) opt.options().lr = cfg.lr * (1.0 - static_cast<double>(u) / cfg.updates);
    CurveRow row;
    row.update = u;
    row.losses = ppo_update(policy, opt, b, cfg, rng);
    row.env_steps = env_steps;
    row.episodes = stats.episodes;
    row.success_rate = stats.episodes ? static_cast<double>(stats.successes) / stats.episodes : 0.0;
    row.train_spl = stats.episodes ? stats.spl_sum / stats.episodes : 0.0;
    row.mean_reward = stats.reward_sum / static_cast<double>(b.obs.size());
    if (eval && ((u + 1) % cfg.eval_every == 0 || u + 1 == cfg.updates)) {
      row.eval_spl = evaluate_spl([&policy] { return std::make_unique<PolicyAgent<T>>(policy); }, val_episodes,
                                  *val_scenes, derive_seed(seed, 1u << 22), cfg.jobs)
                         .spl;
      if (row.eval_spl > report.best_eval_spl) {
        report.best_eval_spl = row.eval_spl;
        report.best_update = u;
        if (cfg.keep_best) {
          best.clear();
          for (std::size_t i = 0; i < policy.params().size(); ++i) best.push_back(policy.params()[i].value);
        }
      }
    }
    report.curve.push_back(row);
    if (on_update) on_update(row);
  }
  if (eval && cfg.keep_best && !best.empty()) {
    for (std::size_t i = 0; i < policy.params().size(); ++i) policy.params()[i].value = best[i];
  }
  return report;
}

}  // namespace echonav::nav

#endif  // ECHONAV_NAV_PPO_HPP_
