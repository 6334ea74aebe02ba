#ifndef MESHRL_OBJECTIVES_HPP_
#define MESHRL_OBJECTIVES_HPP_

// Reward functions for the four management objectives.
//
//   1: maximize total carried load subject to soft delay bounds
//   2: maximize weighted carried load (utility) subject to soft delay bounds
//   3: maximize service 2's carried load, keep service 1 above l_min
//   4: minimize allocated cores subject to soft delay bounds
//
// Soft constraints use tanh steps, so a slight violation still earns some
// reward and a gross one earns almost none.

#include <cmath>
#include <vector>

#include "meshrl/core.hpp"

namespace meshrl {

struct RewardSpec {
  int scenario = 1;
  std::vector<double> delay_bounds{0.10, 0.10};  // O_i, s, per service position
  std::vector<double> weights{1.0, 1.0};         // utility weight per unit carried load
  double min_carried = 5.0;                      // l_min, req/s
  double steepness = 10.0;                       // kappa
  double cost_floor = 0.5;                       // C at maximum allocation

  void validate(std::size_t services) const {
    if (scenario < 1 || scenario > 4) throw ValidationError("unknown scenario");
    if (services != 2) throw ValidationError("objectives are defined for two services");
    if (delay_bounds.size() != services || weights.size() != services)
      throw ValidationError("reward spec arity mismatch");
    for (double o : delay_bounds)
      if (!(o > 0)) throw ValidationError("delay bound must be positive");
    if (!(steepness > 0)) throw ValidationError("steepness must be positive");
    if (!(min_carried > 0)) throw ValidationError("l_min must be positive");
    if (!(cost_floor > 0 && cost_floor < 1)) throw ValidationError("cost floor outside (0,1)");
  }
};

// Soft upper bound on delay: 0.5 at d == O, strictly decreasing.
inline double r_delay(double d, double bound, double steepness) {
  return 0.5 * (1.0 - std::tanh(steepness * (d - bound) / bound));
}

// Soft lower bound on carried load: 0.5 at l_c == l_min, strictly increasing.
inline double r_floor(double carried, double min_carried, double steepness) {
  return 0.5 * (1.0 + std::tanh(steepness * (carried - min_carried) / min_carried));
}

// Linear in total cores: 1 at the minimum allocation, cost_floor at the maximum.
inline double cost_factor(const ControlAction& a, const RewardSpec& spec,
                          const ActionGrid& grid) {
  const double k = static_cast<double>(a.c.size());
  if (k == 0) return 1.0;
  const double lo = k * grid.c_levels.front(), hi = k * grid.c_levels.back();
  if (hi == lo) return 1.0;
  double total = 0;
  for (int c : a.c) total += c;
  return 1.0 - (1.0 - spec.cost_floor) * (total - lo) / (hi - lo);
}

inline double reward(const RewardSpec& spec, const std::vector<ServiceObservation>& obs,
                     const ControlAction& a, const ActionGrid& grid) {
  if (obs.size() != 2) throw ValidationError("reward expects two services");
  auto rd = [&](std::size_t i) {
    return r_delay(obs[i].d_mean, spec.delay_bounds[i], spec.steepness);
  };
  switch (spec.scenario) {
    case 1:
      return obs[0].carried * rd(0) + obs[1].carried * rd(1);
    case 2:
      return spec.weights[0] * obs[0].carried * rd(0) + spec.weights[1] * obs[1].carried * rd(1);
    case 3:
      return obs[1].carried *
             (r_floor(obs[0].carried, spec.min_carried, spec.steepness) + rd(1));
    case 4:
      return cost_factor(a, spec, grid) * (rd(0) + rd(1));
    default:
      throw ValidationError("unknown scenario");
  }
}

// Per-scenario defaults: information bounds 0.10 s, compute bound 0.50 s,
// utility weights (1, 5) for scenario 2.
inline RewardSpec default_reward(int scenario_id) {
  RewardSpec spec;
  spec.scenario = scenario_id;
  if (scenario_id == 2) spec.weights = {1.0, 5.0};
  if (scenario_id == 4) spec.delay_bounds = {0.10, 0.50};
  spec.validate(2);
  return spec;
}

}  // namespace meshrl

#endif  // MESHRL_OBJECTIVES_HPP_
