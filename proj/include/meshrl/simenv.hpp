#ifndef MESHRL_SIMENV_HPP_
#define MESHRL_SIMENV_HPP_

// Training environment built on the learned system model. The reward of an
// action depends only on the current load and the action, so everything the
// environment needs at a load vector (predictions for all actions, the
// operating-region mask, in-region rewards) is computed once and cached.
// Grid predictions are shared between loads in the same model cell.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "meshrl/core.hpp"
#include "meshrl/forest.hpp"
#include "meshrl/loadgen.hpp"
#include "meshrl/objectives.hpp"
#include "meshrl/region.hpp"

namespace meshrl {

struct LoadEvaluation {
  LoadVector load;
  GridPrediction prediction;
  ActionMask mask;
  std::vector<double> reward;  // NaN for masked actions

  std::vector<ServiceObservation> observations(std::size_t action,
                                               const ControlAction& a) const {
    std::vector<ServiceObservation> obs(prediction.services);
    for (std::size_t i = 0; i < obs.size(); ++i)
      obs[i] = {load[i], carried_load(load[i], a.b[i]), prediction.mean(action, i),
                prediction.var(action, i)};
    return obs;
  }
};

struct EnvStep {
  SystemState state;  // s_{t+1}
  double reward = 0;
  std::shared_ptr<const LoadEvaluation> next;  // mask and oracle data for s_{t+1}
};

class SimEnvironment {
 public:
  SimEnvironment(std::shared_ptr<const ForestModel> model, double rho, LoadPattern pattern,
                 RewardSpec spec, ActionGrid grid, MeshTopology topo)
      : model_(std::move(model)),
        rho_(rho),
        pattern_(std::move(pattern)),
        spec_(std::move(spec)),
        grid_(std::move(grid)),
        topo_(std::move(topo)),
        table_(std::make_shared<const ActionTable>(grid_, topo_)) {
    if (!model_) throw ValidationError("environment needs a fitted model");
    if (!(rho_ > 0)) throw ValidationError("region threshold must be positive");
    if (model_->service_count() != topo_.service_count() ||
        model_->scalable_count() != topo_.scalable_count())
      throw ValidationError("model does not match topology");
    if (pattern_.services.size() != topo_.service_count())
      throw ValidationError("load pattern does not match topology");
    pattern_.validate();
    spec_.validate(topo_.service_count());
    default_index_ = table_->index_of(grid_.default_action(topo_));
    reset(pattern_.seed);
  }

  const ActionTable& actions() const { return *table_; }
  const ActionGrid& grid() const { return grid_; }
  const MeshTopology& topology() const { return topo_; }
  const RewardSpec& reward_spec() const { return spec_; }
  const LoadPattern& pattern() const { return pattern_; }
  const ForestModel& model() const { return *model_; }
  double rho() const { return rho_; }
  long time() const { return t_; }
  const SystemState& state() const { return state_; }
  const ActionMask& mask() const { return current_->mask; }
  std::shared_ptr<const LoadEvaluation> current() const { return current_; }

  // Number of rewards computed for actions outside the current mask.
  std::uint64_t masked_reward_evaluations() const { return masked_evals_; }

  SystemState reset(std::uint64_t seed) {
    pattern_.seed = seed;
    t_ = 0;
    current_ = evaluate(load_at(pattern_, 0));
    state_.load = current_->load;
    state_.delay.resize(topo_.service_count());
    for (std::size_t i = 0; i < state_.delay.size(); ++i)
      state_.delay[i] = current_->prediction.mean(default_index_, i);
    return state_;
  }

  EnvStep step(const ControlAction& a) {
    const std::size_t k = table_->index_of(a);
    if (k == table_->size()) throw ValidationError("action is not on the grid");
    return step(k);
  }

  EnvStep step(std::size_t k) {
    if (k >= table_->size()) throw ValidationError("action index out of range");
    double r;
    if (current_->mask.allowed[k]) {
      r = current_->reward[k];
    } else {
      ++masked_evals_;
      r = reward_at(*current_, k);
    }
    SystemState next;
    next.delay.resize(topo_.service_count());
    for (std::size_t i = 0; i < next.delay.size(); ++i)
      next.delay[i] = current_->prediction.mean(k, i);
    ++t_;
    current_ = evaluate(load_at(pattern_, t_));
    next.load = current_->load;
    state_ = next;
    return {std::move(next), r, current_};
  }

  // Cached predictions, mask and in-region rewards at a load vector.
  std::shared_ptr<const LoadEvaluation> evaluate(const LoadVector& load) {
    std::string key(load.size() * sizeof(double), '\0');
    std::memcpy(key.data(), load.data(), key.size());
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    if (cache_.size() >= kCacheCapacity) cache_.clear();

    // Predictions and mask depend on the load only through its cell.
    const auto cell = model_->load_cell(load);
    std::string cell_key(cell.size() * sizeof(std::uint32_t), '\0');
    std::memcpy(cell_key.data(), cell.data(), cell_key.size());
    auto hit = cells_.find(cell_key);
    if (hit == cells_.end()) {
      if (cells_.size() >= kCacheCapacity) cells_.clear();
      auto pred = model_->predict_grid(load, *table_);
      auto mask = mask_from_prediction(pred, rho_);
      hit = cells_.emplace(std::move(cell_key),
                           std::make_shared<const CellEvaluation>(
                               CellEvaluation{std::move(pred), std::move(mask)}))
                .first;
    }

    auto ev = std::make_shared<LoadEvaluation>();
    ev->load = load;
    ev->prediction = hit->second->prediction;
    ev->mask = hit->second->mask;
    ev->reward.assign(table_->size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < table_->size(); ++k)
      if (ev->mask.allowed[k]) ev->reward[k] = reward_at(*ev, k);
    std::shared_ptr<const LoadEvaluation> out = std::move(ev);
    cache_.emplace(std::move(key), out);
    return out;
  }

  double reward_at(const LoadEvaluation& ev, std::size_t k) const {
    const ControlAction& a = (*table_)[k];
    return reward(spec_, ev.observations(k, a), a, grid_);
  }

 private:
  static constexpr std::size_t kCacheCapacity = 4096;

  std::shared_ptr<const ForestModel> model_;
  double rho_;
  LoadPattern pattern_;
  RewardSpec spec_;
  ActionGrid grid_;
  MeshTopology topo_;
  std::shared_ptr<const ActionTable> table_;
  std::size_t default_index_ = 0;

  long t_ = 0;
  SystemState state_;
  std::shared_ptr<const LoadEvaluation> current_;
  struct CellEvaluation {
    GridPrediction prediction;
    ActionMask mask;
  };
  std::unordered_map<std::string, std::shared_ptr<const LoadEvaluation>> cache_;
  std::unordered_map<std::string, std::shared_ptr<const CellEvaluation>> cells_;
  std::uint64_t masked_evals_ = 0;
};

}  // namespace meshrl

#endif  // MESHRL_SIMENV_HPP_
