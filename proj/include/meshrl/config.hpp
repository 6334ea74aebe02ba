#ifndef MESHRL_CONFIG_HPP_
#define MESHRL_CONFIG_HPP_

// Scenario configuration: one JSON document per scenario holding every
// parameter of the pipeline. Missing keys take the scenario defaults.

#include <cstdint>
#include <fstream>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "meshrl/agent.hpp"
#include "meshrl/core.hpp"
#include "meshrl/forest.hpp"
#include "meshrl/loadgen.hpp"
#include "meshrl/objectives.hpp"
#include "meshrl/surrogate.hpp"

namespace meshrl {

using Json = nlohmann::ordered_json;

struct ModelConfig {
  std::size_t tree_count = 120;
  double rho = 0.5;
  double holdout_fraction = 0.2;
};

struct CollectConfig {
  long steps = 20000;
  double sample_period_seconds = 5;
  double agent_step_seconds = 5;
};

struct EvalConfig {
  long random_steps = 150;
  long sine_steps = 400;
  long curve_steps = 100;
};

struct Seeds {
  std::uint64_t collect = 1;
  std::uint64_t fit = 1;
  std::uint64_t train = 1;
  std::uint64_t evaluate = 1;
};

struct ScenarioConfig {
  int scenario = 1;
  double info_delay_bound = 0.10;
  double compute_delay_bound = 0.50;
  SurrogateConfig surrogate;
  ActionGrid grid;
  LoadPattern training;
  LoadPattern evaluation;
  RewardSpec reward;
  AgentConfig agent;
  bool policy_uses_delay = true;
  double policy_delay_scale = 1.0;  // s; delays are divided by this, then clamped
  ModelConfig model;
  CollectConfig collect;
  EvalConfig eval;
  Seeds seeds;

  MeshTopology topology() const {
    return standard_topology(scenario, info_delay_bound, compute_delay_bound);
  }

  StateBounds state_bounds() const {
    StateBounds b;
    for (auto [lo, hi] : training.bounds()) {
      b.load_min.push_back(lo);
      b.load_max.push_back(hi);
    }
    if (policy_uses_delay) b.delay_max.assign(training.services.size(), policy_delay_scale);
    return b;
  }

  void validate() const {
    const MeshTopology topo = topology();
    const std::size_t m = topo.service_count();
    surrogate.validate(topo);
    grid.validate();
    training.validate();
    evaluation.validate();
    if (training.services.size() != m || evaluation.services.size() != m)
      throw ValidationError("load pattern service count does not match topology");
    reward.validate(m);
    if (reward.scenario != scenario) throw ValidationError("reward scenario differs from config");
    agent.validate();
    if (!(model.rho > 0)) throw ValidationError("region threshold must be positive");
    if (model.tree_count == 0) throw ValidationError("tree count must be positive");
    if (!(model.holdout_fraction > 0 && model.holdout_fraction < 1))
      throw ValidationError("holdout fraction must lie in (0,1)");
    if (collect.steps < 1) throw ValidationError("collect steps must be positive");
    if (eval.random_steps < 1 || eval.sine_steps < 1 || eval.curve_steps < 1)
      throw ValidationError("evaluation lengths must be positive");
    if (!(policy_delay_scale > 0)) throw ValidationError("delay scale must be positive");
    state_bounds().validate();
  }
};

// Scenarios 1-3 steer blocking and routing with cores at the maximum;
// scenario 4 steers routing and cores with no blocking.
inline ActionGrid default_grid(int scenario_id) {
  ActionGrid g;
  g.b_levels = {0.0, 0.2, 0.4, 0.6, 0.8};
  g.p_levels = {0.0, 0.25, 0.5, 0.75, 1.0};
  g.c_levels = {1, 2, 3, 4};
  g.blocking_active = scenario_id != 4;
  g.routing_active = true;
  g.scaling_active = scenario_id == 4;
  return g;
}

inline ScenarioConfig default_config(int scenario_id) {
  if (scenario_id < 1 || scenario_id > 4) throw ValidationError("unknown scenario");
  ScenarioConfig cfg;
  cfg.scenario = scenario_id;
  const MeshTopology topo = cfg.topology();
  cfg.surrogate = standard_surrogate(topo);
  cfg.grid = default_grid(scenario_id);
  std::tie(cfg.training, cfg.evaluation) = default_patterns(scenario_id, 1);
  cfg.reward = default_reward(scenario_id);
  cfg.agent.total_steps = 30720;
  if (scenario_id == 4) cfg.collect.agent_step_seconds = 60;
  cfg.validate();
  return cfg;
}

// --- JSON mapping ----------------------------------------------------------

namespace detail {

template <class T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

inline Json pattern_to_json(const LoadPattern& p) {
  Json j;
  j["kind"] = p.kind == LoadKind::random ? "random" : "sinusoidal";
  j["period"] = p.period;
  j["seed"] = p.seed;
  Json services = Json::array();
  for (const auto& s : p.services) {
    if (p.kind == LoadKind::random)
      services.push_back({{"values", s.values}});
    else
      services.push_back({{"mean", s.mean}, {"amplitude", s.amplitude}, {"phase", s.phase}});
  }
  j["services"] = services;
  return j;
}

inline LoadPattern pattern_from_json(const Json& j, LoadPattern p) {
  if (j.contains("kind")) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "random")
      p.kind = LoadKind::random;
    else if (kind == "sinusoidal" || kind == "sine")
      p.kind = LoadKind::sinusoidal;
    else
      throw ValidationError("unknown load pattern kind: " + kind);
  }
  read_opt(j, "period", p.period);
  read_opt(j, "seed", p.seed);
  if (j.contains("services")) {
    p.services.clear();
    for (const auto& s : j.at("services")) {
      ServiceLoad sl;
      read_opt(s, "values", sl.values);
      read_opt(s, "mean", sl.mean);
      read_opt(s, "amplitude", sl.amplitude);
      read_opt(s, "phase", sl.phase);
      p.services.push_back(std::move(sl));
    }
  }
  return p;
}

}  // namespace detail

inline Json to_json(const ScenarioConfig& c) {
  Json j;
  j["scenario"] = c.scenario;
  j["topology"] = {{"info_delay_bound", c.info_delay_bound},
                   {"compute_delay_bound", c.compute_delay_bound}};
  j["surrogate"] = {{"service_rate", c.surrogate.service_rate},
                    {"base_latency", c.surrogate.base_latency},
                    {"demand", c.surrogate.demand},
                    {"noise", c.surrogate.noise},
                    {"max_delay", c.surrogate.max_delay},
                    {"saturated_variance_factor", c.surrogate.saturated_variance_factor},
                    {"settle",
                     {{"routing", c.surrogate.settle.routing},
                      {"blocking", c.surrogate.settle.blocking},
                      {"scaling", c.surrogate.settle.scaling}}}};
  j["grid"] = {{"b_levels", c.grid.b_levels},
               {"p_levels", c.grid.p_levels},
               {"c_levels", c.grid.c_levels},
               {"blocking_active", c.grid.blocking_active},
               {"routing_active", c.grid.routing_active},
               {"scaling_active", c.grid.scaling_active}};
  j["patterns"] = {{"training", detail::pattern_to_json(c.training)},
                   {"evaluation", detail::pattern_to_json(c.evaluation)}};
  j["reward"] = {{"delay_bounds", c.reward.delay_bounds},
                 {"weights", c.reward.weights},
                 {"min_carried", c.reward.min_carried},
                 {"steepness", c.reward.steepness},
                 {"cost_floor", c.reward.cost_floor}};
  const auto& a = c.agent;
  j["agent"] = {{"learning_rate", a.learning_rate},
                {"gamma", a.gamma},
                {"batch_size", a.batch_size},
                {"update_interval", a.update_interval},
                {"epochs", a.epochs},
                {"clip", a.clip},
                {"entropy_coef", a.entropy_coef},
                {"value_coef", a.value_coef},
                {"max_grad_norm", a.max_grad_norm},
                {"hidden", a.hidden},
                {"total_steps", a.total_steps},
                {"episode_length", a.episode_length},
                {"eval_every", a.eval_every},
                {"use_delay", c.policy_uses_delay},
                {"delay_scale", c.policy_delay_scale}};
  j["model"] = {{"tree_count", c.model.tree_count},
                {"rho", c.model.rho},
                {"holdout_fraction", c.model.holdout_fraction}};
  j["collect"] = {{"steps", c.collect.steps},
                  {"sample_period_seconds", c.collect.sample_period_seconds},
                  {"agent_step_seconds", c.collect.agent_step_seconds}};
  j["evaluation"] = {{"random_steps", c.eval.random_steps},
                     {"sine_steps", c.eval.sine_steps},
                     {"curve_steps", c.eval.curve_steps}};
  j["seeds"] = {{"collect", c.seeds.collect},
                {"fit", c.seeds.fit},
                {"train", c.seeds.train},
                {"evaluate", c.seeds.evaluate}};
  return j;
}

inline ScenarioConfig config_from_json(const Json& j) {
  using detail::read_opt;
  if (!j.is_object() || !j.contains("scenario"))
    throw ValidationError("config must be an object with a scenario id");
  ScenarioConfig c = default_config(j.at("scenario").get<int>());
  try {
    if (j.contains("topology")) {
      read_opt(j["topology"], "info_delay_bound", c.info_delay_bound);
      read_opt(j["topology"], "compute_delay_bound", c.compute_delay_bound);
    }
    if (j.contains("surrogate")) {
      const auto& s = j["surrogate"];
      read_opt(s, "service_rate", c.surrogate.service_rate);
      read_opt(s, "base_latency", c.surrogate.base_latency);
      read_opt(s, "demand", c.surrogate.demand);
      read_opt(s, "noise", c.surrogate.noise);
      read_opt(s, "max_delay", c.surrogate.max_delay);
      read_opt(s, "saturated_variance_factor", c.surrogate.saturated_variance_factor);
      if (s.contains("settle")) {
        read_opt(s["settle"], "routing", c.surrogate.settle.routing);
        read_opt(s["settle"], "blocking", c.surrogate.settle.blocking);
        read_opt(s["settle"], "scaling", c.surrogate.settle.scaling);
      }
    }
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      read_opt(g, "b_levels", c.grid.b_levels);
      read_opt(g, "p_levels", c.grid.p_levels);
      read_opt(g, "c_levels", c.grid.c_levels);
      read_opt(g, "blocking_active", c.grid.blocking_active);
      read_opt(g, "routing_active", c.grid.routing_active);
      read_opt(g, "scaling_active", c.grid.scaling_active);
    }
    if (j.contains("patterns")) {
      if (j["patterns"].contains("training"))
        c.training = detail::pattern_from_json(j["patterns"]["training"], c.training);
      if (j["patterns"].contains("evaluation"))
        c.evaluation = detail::pattern_from_json(j["patterns"]["evaluation"], c.evaluation);
    }
    if (j.contains("reward")) {
      const auto& r = j["reward"];
      read_opt(r, "delay_bounds", c.reward.delay_bounds);
      read_opt(r, "weights", c.reward.weights);
      read_opt(r, "min_carried", c.reward.min_carried);
      read_opt(r, "steepness", c.reward.steepness);
      read_opt(r, "cost_floor", c.reward.cost_floor);
    }
    if (j.contains("agent")) {
      const auto& a = j["agent"];
      read_opt(a, "learning_rate", c.agent.learning_rate);
      read_opt(a, "gamma", c.agent.gamma);
      read_opt(a, "batch_size", c.agent.batch_size);
      read_opt(a, "update_interval", c.agent.update_interval);
      read_opt(a, "epochs", c.agent.epochs);
      read_opt(a, "clip", c.agent.clip);
      read_opt(a, "entropy_coef", c.agent.entropy_coef);
      read_opt(a, "value_coef", c.agent.value_coef);
      read_opt(a, "max_grad_norm", c.agent.max_grad_norm);
      read_opt(a, "hidden", c.agent.hidden);
      read_opt(a, "total_steps", c.agent.total_steps);
      read_opt(a, "episode_length", c.agent.episode_length);
      read_opt(a, "eval_every", c.agent.eval_every);
      read_opt(a, "use_delay", c.policy_uses_delay);
      read_opt(a, "delay_scale", c.policy_delay_scale);
    }
    if (j.contains("model")) {
      read_opt(j["model"], "tree_count", c.model.tree_count);
      read_opt(j["model"], "rho", c.model.rho);
      read_opt(j["model"], "holdout_fraction", c.model.holdout_fraction);
    }
    if (j.contains("collect")) {
      read_opt(j["collect"], "steps", c.collect.steps);
      read_opt(j["collect"], "sample_period_seconds", c.collect.sample_period_seconds);
      read_opt(j["collect"], "agent_step_seconds", c.collect.agent_step_seconds);
    }
    if (j.contains("evaluation")) {
      read_opt(j["evaluation"], "random_steps", c.eval.random_steps);
      read_opt(j["evaluation"], "sine_steps", c.eval.sine_steps);
      read_opt(j["evaluation"], "curve_steps", c.eval.curve_steps);
    }
    if (j.contains("seeds")) {
      read_opt(j["seeds"], "collect", c.seeds.collect);
      read_opt(j["seeds"], "fit", c.seeds.fit);
      read_opt(j["seeds"], "train", c.seeds.train);
      read_opt(j["seeds"], "evaluate", c.seeds.evaluate);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
  c.reward.scenario = c.scenario;
  c.validate();
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace meshrl

#endif  // MESHRL_CONFIG_HPP_
