#ifndef MESHRL_ORACLE_HPP_
#define MESHRL_ORACLE_HPP_

// Brute-force optimal actions, normalized reward, and greedy policy
// evaluation on the simulator and on the surrogate target.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meshrl/agent.hpp"
#include "meshrl/core.hpp"
#include "meshrl/loadgen.hpp"
#include "meshrl/objectives.hpp"
#include "meshrl/region.hpp"
#include "meshrl/simenv.hpp"
#include "meshrl/surrogate.hpp"

namespace meshrl {

struct OracleChoice {
  std::size_t index = 0;
  double reward = 0;
};

// Argmax over admitted actions, lowest index on ties. An all-false mask
// falls back to every action.
inline OracleChoice optimal_action(std::span<const double> rewards,
                                   std::span<const std::uint8_t> mask) {
  if (rewards.empty() || rewards.size() != mask.size())
    throw ValidationError("oracle needs one reward per action");
  bool any = false;
  for (auto m : mask) any = any || m;
  OracleChoice best{rewards.size(), -std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k < rewards.size(); ++k) {
    if (any && !mask[k]) continue;
    if (best.index == rewards.size() || rewards[k] > best.reward) best = {k, rewards[k]};
  }
  return best;
}

// Rewards of every action under the surrogate's noiseless response.
inline std::vector<double> ground_truth_rewards(const SurrogateConfig& cfg,
                                                const MeshTopology& topo,
                                                const RewardSpec& spec, const ActionGrid& grid,
                                                const ActionTable& table,
                                                const LoadVector& load) {
  std::vector<double> out(table.size());
  std::vector<ServiceObservation> obs(topo.service_count());
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto resp = mesh_response(cfg, topo, load, table[k]);
    for (std::size_t i = 0; i < obs.size(); ++i)
      obs[i] = {load[i], resp.carried[i], resp.mean_delay[i], 0.0};
    out[k] = reward(spec, obs, table[k], grid);
  }
  return out;
}

// Agent reward over optimal reward; a zero optimum counts as matched.
inline double normalized_reward(double agent, double optimal) {
  if (!(optimal > 0)) return 1.0;
  return agent / optimal;
}

struct MeanCi {
  double mean = 0;
  double half_width = 0;  // 95%, normal approximation
};

inline MeanCi mean_ci95(std::span<const double> xs) {
  if (xs.empty()) throw ValidationError("no samples");
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return {mean, 1.96 * sd / std::sqrt(static_cast<double>(xs.size()))};
}

// A decision rule given the state, the admissible set and the rewards the
// oracle scores against. Only the oracle policy looks at the rewards.
using DecisionRule = std::function<std::size_t(
    const SystemState&, std::span<const std::uint8_t> mask, std::span<const double> rewards)>;

inline DecisionRule greedy_rule(const PolicyNetwork& policy) {
  return [&policy](const SystemState& s, std::span<const std::uint8_t> mask,
                   std::span<const double>) {
    Rng unused(0);
    return act(policy, s, mask, ActMode::greedy, unused);
  };
}

inline DecisionRule oracle_rule() {
  return [](const SystemState&, std::span<const std::uint8_t> mask,
            std::span<const double> rewards) { return optimal_action(rewards, mask).index; };
}

// Uniform over the admissible set.
inline DecisionRule random_rule(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(hash_counter({seed, 0x4a4dull}));
  return [rng](const SystemState&, std::span<const std::uint8_t> mask,
               std::span<const double>) {
    std::vector<std::size_t> ok;
    for (std::size_t k = 0; k < mask.size(); ++k)
      if (mask[k]) ok.push_back(k);
    if (ok.empty()) throw ValidationError("mask admits no action");
    return ok[rng->below(ok.size())];
  };
}

enum class EnvKind { simulator, surrogate };
enum class Scoring { ground_truth, model };

inline const char* to_string(EnvKind e) { return e == EnvKind::simulator ? "simulator" : "surrogate"; }
inline const char* to_string(LoadKind k) { return k == LoadKind::random ? "random" : "sinusoidal"; }
inline const char* to_string(Scoring s) { return s == Scoring::model ? "model" : "ground_truth"; }

struct StepRecord {
  long t = 0;
  LoadVector load;
  std::vector<double> carried;
  std::vector<double> delay;  // state delays seen by the agent
  std::size_t agent_index = 0;
  ControlAction agent_action;
  double agent_reward = 0;
  std::size_t optimal_index = 0;
  ControlAction optimal_action;
  double optimal_reward = 0;
  double nr = 0;
};

struct EvaluationReport {
  EnvKind environment = EnvKind::simulator;
  LoadKind pattern = LoadKind::random;
  Scoring scoring = Scoring::model;
  std::vector<StepRecord> steps;
  double anr = 0;
  double ci95 = 0;

  void summarize() {
    std::vector<double> nr;
    nr.reserve(steps.size());
    for (const auto& s : steps) nr.push_back(s.nr);
    const auto m = mean_ci95(nr);
    anr = m.mean;
    ci95 = m.half_width;
  }
};

inline void check_policy_grid(const PolicyNetwork& policy, const ActionGrid& grid,
                              const ActionTable& table) {
  if (policy.grid_hash != grid.hash())
    throw ValidationError("policy was trained on a different action grid");
  if (policy.action_count() != table.size())
    throw ValidationError("policy action count does not match the grid");
}

// Runs `rule` for n_steps on the simulator; rewards and the oracle both come
// from the learned model. The environment is reset with `seed`.
inline EvaluationReport evaluate_simulator(SimEnvironment& env, const DecisionRule& rule,
                                           long n_steps, std::uint64_t seed) {
  if (n_steps < 1) throw ValidationError("n_steps must be at least 1");
  EvaluationReport rep;
  rep.environment = EnvKind::simulator;
  rep.pattern = env.pattern().kind;
  rep.scoring = Scoring::model;
  env.reset(seed);
  const auto& table = env.actions();
  for (long t = 0; t < n_steps; ++t) {
    const auto ev = env.current();
    const SystemState s = env.state();
    const std::size_t k = rule(s, ev->mask.allowed, ev->reward);
    if (k >= table.size() || !ev->mask.allowed[k])
      throw ValidationError("decision rule chose an inadmissible action");
    const auto best = optimal_action(ev->reward, ev->mask.allowed);
    StepRecord r;
    r.t = t;
    r.load = s.load;
    r.delay = s.delay;
    for (std::size_t i = 0; i < s.load.size(); ++i)
      r.carried.push_back(carried_load(s.load[i], table[k].b[i]));
    r.agent_index = k;
    r.agent_action = table[k];
    r.agent_reward = ev->reward[k];
    r.optimal_index = best.index;
    r.optimal_action = table[best.index];
    r.optimal_reward = best.reward;
    r.nr = normalized_reward(r.agent_reward, r.optimal_reward);
    rep.steps.push_back(std::move(r));
    env.step(k);
  }
  rep.summarize();
  return rep;
}

inline EvaluationReport evaluate_simulator(SimEnvironment& env, const PolicyNetwork& policy,
                                           long n_steps, std::uint64_t seed) {
  check_policy_grid(policy, env.grid(), env.actions());
  return evaluate_simulator(env, greedy_rule(policy), n_steps, seed);
}

// Runs `rule` against the surrogate target. The agent sees offered loads and
// measured (noisy) delays and is restricted by the learned operating region.
// Each decision is held until the target has settled on it; the carried load
// and delays recorded are the target's. Rewards for NR come either from the
// surrogate's noiseless response or from the learned model.
inline EvaluationReport evaluate_surrogate(const SurrogateConfig& cfg, SimEnvironment& sim,
                                           const DecisionRule& rule, LoadPattern pattern,
                                           long n_steps, std::uint64_t seed, Scoring scoring) {
  if (n_steps < 1) throw ValidationError("n_steps must be at least 1");
  const MeshTopology& topo = sim.topology();
  const ActionTable& table = sim.actions();
  cfg.validate(topo);
  pattern.seed = seed;
  pattern.validate();

  EvaluationReport rep;
  rep.environment = EnvKind::surrogate;
  rep.pattern = pattern.kind;
  rep.scoring = scoring;

  const ControlAction start = sim.grid().default_action(topo);
  SurrogateState target = initial_surrogate_state(start);
  SystemState s{load_at(pattern, 0), mesh_response(cfg, topo, load_at(pattern, 0), start).mean_delay};
  const int max_hold = 1 + std::max({cfg.settle.blocking, cfg.settle.routing, cfg.settle.scaling});
  std::uint64_t tick = 0;

  for (long t = 0; t < n_steps; ++t) {
    const auto ev = sim.evaluate(s.load);
    std::vector<double> scores = scoring == Scoring::model
                                     ? ev->reward
                                     : ground_truth_rewards(cfg, topo, sim.reward_spec(),
                                                            sim.grid(), table, s.load);
    if (scoring == Scoring::model)
      for (std::size_t k = 0; k < scores.size(); ++k)
        if (!ev->mask.allowed[k]) scores[k] = sim.reward_at(*ev, k);
    const std::size_t k = rule(s, ev->mask.allowed, scores);
    if (k >= table.size() || !ev->mask.allowed[k])
      throw ValidationError("decision rule chose an inadmissible action");
    const auto best = optimal_action(scores, ev->mask.allowed);

    SurrogateStep step;
    for (int h = 0; h < max_hold; ++h) {
      step = surrogate_step(cfg, topo, target, s.load, table[k], hash_counter({seed, tick++}));
      target = step.next;
      if (step.settled) break;
    }

    StepRecord r;
    r.t = t;
    r.load = s.load;
    r.delay = s.delay;
    for (const auto& o : step.observations) r.carried.push_back(o.carried);
    r.agent_index = k;
    r.agent_action = table[k];
    r.agent_reward = scores[k];
    r.optimal_index = best.index;
    r.optimal_action = table[best.index];
    r.optimal_reward = best.reward;
    r.nr = normalized_reward(r.agent_reward, r.optimal_reward);
    rep.steps.push_back(std::move(r));

    s.load = load_at(pattern, t + 1);
    for (std::size_t i = 0; i < s.delay.size(); ++i) s.delay[i] = step.observations[i].d_mean;
  }
  rep.summarize();
  return rep;
}

inline EvaluationReport evaluate_surrogate(const SurrogateConfig& cfg, SimEnvironment& sim,
                                           const PolicyNetwork& policy, LoadPattern pattern,
                                           long n_steps, std::uint64_t seed,
                                           Scoring scoring = Scoring::ground_truth) {
  check_policy_grid(policy, sim.grid(), sim.actions());
  return evaluate_surrogate(cfg, sim, greedy_rule(policy), std::move(pattern), n_steps, seed,
                            scoring);
}

// Adapts SimEnvironment to the training protocol.
class SimAgentEnv {
 public:
  SimAgentEnv(SimEnvironment& env, StateBounds bounds) : env_(&env), bounds_(std::move(bounds)) {
    bounds_.validate();
  }

  std::size_t action_count() const { return env_->actions().size(); }
  std::vector<double> observation() const { return normalize_state(env_->state(), bounds_); }
  std::span<const std::uint8_t> admissible() const { return env_->mask().allowed; }
  double act(std::size_t k) { return env_->step(k).reward; }
  void reset(std::uint64_t seed) { env_->reset(seed); }

  SimEnvironment& env() { return *env_; }

 private:
  SimEnvironment* env_;
  StateBounds bounds_;
};

}  // namespace meshrl

#endif  // MESHRL_ORACLE_HPP_
