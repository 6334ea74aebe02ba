#ifndef MESHRL_PIPELINE_HPP_
#define MESHRL_PIPELINE_HPP_

// The end-to-end workflow as library calls: collect traces on the target,
// fit the system model, train on the simulator, evaluate on both.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "meshrl/agent.hpp"
#include "meshrl/config.hpp"
#include "meshrl/forest.hpp"
#include "meshrl/oracle.hpp"
#include "meshrl/region.hpp"
#include "meshrl/simenv.hpp"
#include "meshrl/surrogate.hpp"

namespace meshrl {

inline std::vector<TraceRecord> collect(const ScenarioConfig& cfg, long steps,
                                        std::uint64_t seed) {
  const MeshTopology topo = cfg.topology();
  const ActionTable table(cfg.grid, topo);
  LoadPattern pattern = cfg.training;
  pattern.seed = hash_counter({seed, 0x10adull});
  return collect_traces(cfg.surrogate, topo, cfg.grid, pattern,
                        uniform_action_sampler(table, hash_counter({seed, 0xac7ull})), steps,
                        hash_counter({seed, 0x4015eull}));
}

// Deterministic shuffle-and-split; the second part holds `fraction` of the records.
inline std::pair<std::vector<TraceRecord>, std::vector<TraceRecord>> split_traces(
    const std::vector<TraceRecord>& traces, double fraction, std::uint64_t seed) {
  if (!(fraction > 0 && fraction < 1)) throw ValidationError("split fraction outside (0,1)");
  std::vector<std::size_t> idx(traces.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  Rng rng(hash_counter({seed, 0x5b117ull}));
  for (std::size_t k = idx.size(); k > 1; --k) std::swap(idx[k - 1], idx[rng.below(k)]);
  const auto held = static_cast<std::size_t>(fraction * static_cast<double>(traces.size()));
  std::vector<std::size_t> train_idx(idx.begin() + held, idx.end()), test_idx(idx.begin(), idx.begin() + held);
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::pair<std::vector<TraceRecord>, std::vector<TraceRecord>> out;
  for (auto k : train_idx) out.first.push_back(traces[k]);
  for (auto k : test_idx) out.second.push_back(traces[k]);
  return out;
}

struct FitResult {
  ForestModel model;
  std::vector<double> nmae;  // d_mean_1..m, d_var_1..m on the held-out part
  std::size_t train_records = 0, held_out_records = 0;
};

inline FitResult fit_model(const ScenarioConfig& cfg, const std::vector<TraceRecord>& traces,
                           std::uint64_t seed, unsigned workers = 1) {
  const MeshTopology topo = cfg.topology();
  for (const auto& r : traces)
    if (r.state.load.size() != topo.service_count() ||
        r.action.c.size() != topo.scalable_count())
      throw ValidationError("trace feature arity does not match the scenario topology");
  auto [train, held] = split_traces(traces, cfg.model.holdout_fraction, seed);
  FitOptions opt;
  opt.tree_count = cfg.model.tree_count;
  opt.seed = seed;
  opt.workers = workers;
  FitResult out{fit_forest(train, opt), {}, train.size(), held.size()};
  out.nmae = nmae(out.model, held);
  return out;
}

inline SimEnvironment make_simulator(const ScenarioConfig& cfg,
                                     std::shared_ptr<const ForestModel> model,
                                     const LoadPattern& pattern) {
  return SimEnvironment(std::move(model), cfg.model.rho, pattern, cfg.reward, cfg.grid,
                        cfg.topology());
}

inline PolicyNetwork initial_policy(const ScenarioConfig& cfg, std::uint64_t seed) {
  const StateBounds bounds = cfg.state_bounds();
  const ActionTable table(cfg.grid, cfg.topology());
  PolicyNetwork p =
      PolicyNetwork::create(bounds.feature_count(), table.size(), cfg.agent.hidden, seed);
  p.bounds = bounds;
  p.grid_hash = cfg.grid.hash();
  return p;
}

// Trains on the simulator with the training pattern. The learning curve uses
// a separate simulator so evaluation never disturbs the rollout.
inline TrainResult train_policy(const ScenarioConfig& cfg,
                                std::shared_ptr<const ForestModel> model, std::uint64_t seed,
                                std::uint64_t* masked_evaluations = nullptr) {
  SimEnvironment env = make_simulator(cfg, model, cfg.training);
  SimEnvironment probe = make_simulator(cfg, model, cfg.training);
  SimAgentEnv agent_env(env, cfg.state_bounds());
  AgentConfig ac = cfg.agent;
  ac.seed = seed;
  std::uint64_t point = 0;
  CurveEvaluator curve = [&](const PolicyNetwork& p) {
    const auto rep =
        evaluate_simulator(probe, p, cfg.eval.curve_steps, hash_counter({seed, 0xc0ull, point++}));
    return CurvePoint{0, rep.anr, rep.ci95};
  };
  TrainResult res = train(agent_env, ac, initial_policy(cfg, seed), curve);
  if (masked_evaluations) *masked_evaluations = env.masked_reward_evaluations();
  return res;
}

}  // namespace meshrl

#endif  // MESHRL_PIPELINE_HPP_
