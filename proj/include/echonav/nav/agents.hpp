#ifndef ECHONAV_NAV_AGENTS_HPP_
#define ECHONAV_NAV_AGENTS_HPP_

// Agents (non-learning baselines and the trained policy), episode runner and
// SPL evaluation over episode sets.

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "echonav/nav/env.hpp"
#include "echonav/nav/observation.hpp"
#include "echonav/nav/policy.hpp"
#include "echonav/parallel.hpp"

namespace echonav::nav {

class Agent {
 public:
  virtual ~Agent() = default;
  virtual void reset(std::uint64_t seed) = 0;
  virtual Action act(const NavEnv& env, const SceneObservations& obs) = 0;
};

class RandomAgent : public Agent {
 public:
  void reset(std::uint64_t seed) override { rng_.seed(seed); }
  Action act(const NavEnv&, const SceneObservations&) override {
    return static_cast<Action>(std::uniform_int_distribution<int>(0, kActionCount - 1)(rng_));
  }

 private:
  std::mt19937_64 rng_;
};

class ForwardAgent : public Agent {
 public:
  void reset(std::uint64_t) override {}
  Action act(const NavEnv& env, const SceneObservations&) override {
    return env.within_success_radius() ? Action::kStop : Action::kMoveForward;
  }
};

/// Turns toward the goal bearing (within +-45 degrees counts as ahead), then
/// moves forward; stops inside the success radius.
class GoalFollowerAgent : public Agent {
 public:
  void reset(std::uint64_t) override {}
  Action act(const NavEnv& env, const SceneObservations&) override {
    if (env.within_success_radius()) return Action::kStop;
    const Gps g = env.gps();
    if (std::abs(g.left) <= g.forward) return Action::kMoveForward;
    return g.left > 0.0 ? Action::kTurnLeft : Action::kTurnRight;
  }
};

template <class T>
class PolicyAgent : public Agent {
 public:
  explicit PolicyAgent(const NavPolicy<T>& policy, bool stochastic = true)
      : policy_(policy), stochastic_(stochastic) {}

  void reset(std::uint64_t seed) override {
    rng_.seed(seed);
    h_ = nn::Tensor<T>({1, policy_.hidden_size()});
  }

  Action act(const NavEnv& env, const SceneObservations& obs) override {
    const auto in = policy_.make_inputs({{&obs, obs.slot(env.pose()), env.gps()}});
    nn::Tape<T> tape(false);
    const auto out = policy_.step(tape, policy_.encode(tape, in), tape.constant(in.gps), tape.constant(h_));
    h_ = out.hidden.value();
    const auto p = action_probabilities(out.logits.value(), 0);
    return static_cast<Action>(stochastic_ ? sample_action(p, rng_) : argmax_action(p));
  }

 private:
  const NavPolicy<T>& policy_;
  bool stochastic_;
  std::mt19937_64 rng_;
  nn::Tensor<T> h_;
};

enum class BaselineKind { kRandom, kForward, kGoalFollower };

inline const char* baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::kRandom: return "random";
    case BaselineKind::kForward: return "forward";
    case BaselineKind::kGoalFollower: return "goal_follower";
  }
  return "?";
}

inline BaselineKind parse_baseline(const std::string& s) {
  for (BaselineKind k : {BaselineKind::kRandom, BaselineKind::kForward, BaselineKind::kGoalFollower}) {
    if (s == baseline_name(k)) return k;
  }
  throw std::invalid_argument("unknown baseline " + s);
}

inline std::unique_ptr<Agent> make_baseline(BaselineKind k) {
  switch (k) {
    case BaselineKind::kRandom: return std::make_unique<RandomAgent>();
    case BaselineKind::kForward: return std::make_unique<ForwardAgent>();
    case BaselineKind::kGoalFollower: return std::make_unique<GoalFollowerAgent>();
  }
  throw std::invalid_argument("unknown baseline");
}

/// Observation tables keyed by scene id.
class SceneSet {
 public:
  void add(std::unique_ptr<SceneObservations> obs) {
    const std::string id = obs->scene().id;
    if (by_id_.count(id)) throw std::invalid_argument("duplicate scene id " + id);
    by_id_[id] = obs.get();
    items_.push_back(std::move(obs));
  }

  const SceneObservations& at(const std::string& id) const {
    const auto it = by_id_.find(id);
    if (it == by_id_.end()) throw std::out_of_range("unknown scene " + id);
    return *it->second;
  }

  std::size_t size() const { return items_.size(); }
  const SceneObservations& operator[](std::size_t i) const { return *items_[i]; }
  SceneObservations& operator[](std::size_t i) { return *items_[i]; }

  std::vector<const SceneObservations*> pointers() const {
    std::vector<const SceneObservations*> out;
    for (const auto& p : items_) out.push_back(p.get());
    return out;
  }

 private:
  std::vector<std::unique_ptr<SceneObservations>> items_;
  std::map<std::string, const SceneObservations*> by_id_;
};

struct EpisodeTrace {
  EpisodeOutcome outcome;
  std::vector<scene::Pose> poses;  // start pose, then one per action
  std::vector<Action> actions;
};

inline EpisodeTrace run_episode(const NavEpisode& ep, const SceneObservations& obs, Agent& agent,
                                std::uint64_t seed, const RewardConfig& reward = {}) {
  NavEnv env(obs.scene_ptr(), ep, reward);
  agent.reset(seed);
  EpisodeTrace tr;
  tr.poses.push_back(env.pose());
  while (!env.done()) {
    const Action a = agent.act(env, obs);
    env.step(a);
    tr.actions.push_back(a);
    tr.poses.push_back(env.pose());
  }
  tr.outcome = {env.success(), ep.shortest_path_length, env.path_length(), env.steps()};
  return tr;
}

using AgentFactory = std::function<std::unique_ptr<Agent>()>;

/// Runs every episode with a fresh agent state; episode i uses seed
/// derive_seed(seed, i), so results do not depend on `jobs`.
inline std::vector<EpisodeOutcome> evaluate_agent(const AgentFactory& factory, const std::vector<NavEpisode>& episodes,
                                                  const SceneSet& scenes, std::uint64_t seed, int jobs = 1,
                                                  const RewardConfig& reward = {}) {
  std::vector<EpisodeOutcome> out(episodes.size());
  parallel_chunks(episodes.size(), jobs, [&](std::size_t b, std::size_t e) {
    auto agent = factory();
    for (std::size_t i = b; i < e; ++i) {
      out[i] = run_episode(episodes[i], scenes.at(episodes[i].scene_id), *agent, derive_seed(seed, i), reward).outcome;
    }
  });
  return out;
}

inline SplResult evaluate_spl(const AgentFactory& factory, const std::vector<NavEpisode>& episodes,
                              const SceneSet& scenes, std::uint64_t seed, int jobs = 1) {
  return summarize(evaluate_agent(factory, episodes, scenes, seed, jobs));
}

inline SplResult run_baseline(BaselineKind kind, const std::vector<NavEpisode>& episodes, const SceneSet& scenes,
                              std::uint64_t seed, int jobs = 1) {
  return evaluate_spl([kind] { return make_baseline(kind); }, episodes, scenes, seed, jobs);
}

}  // namespace echonav::nav

#endif  // ECHONAV_NAV_AGENTS_HPP_
