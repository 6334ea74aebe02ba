#ifndef MESHRL_SURROGATE_HPP_
#define MESHRL_SURROGATE_HPP_

// Parametric queueing stand-in for the target system. Each node j is a
// processor-sharing queue with capacity mu_j * c_j work units per second;
// a request of service i places demand w_ij on every node of its path.
//
//   lambda_j = sum_i l_i (1 - b_i) * share_i(j) * w_ij
//   delay_ij = min(D_max, d0_j + w_ij / (mu_j c_j - lambda_j))   lambda_j < mu_j c_j
//            = D_max                                              otherwise
//
// A service's mean delay is the routing-weighted sum of its path delays.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "meshrl/core.hpp"
#include "meshrl/loadgen.hpp"
#include "meshrl/random.hpp"

namespace meshrl {

struct SettleSteps {
  int routing = 0;
  int blocking = 0;
  int scaling = 1;
};

struct SurrogateConfig {
  std::vector<double> service_rate;         // mu_j, work units / s / core
  std::vector<double> base_latency;         // d0_j, s
  std::vector<std::vector<double>> demand;  // w_ij, [service][node]
  double noise = 0.1;                       // sigma of the lognormal delay noise
  double max_delay = 2.0;                   // D_max, s
  double saturated_variance_factor = 4.0;   // var = factor * mean^2 when saturated
  SettleSteps settle;

  void validate(const MeshTopology& topo) const {
    const auto n = topo.node_count();
    if (service_rate.size() != n || base_latency.size() != n)
      throw ValidationError("surrogate node parameters do not match topology");
    if (demand.size() != topo.service_count())
      throw ValidationError("surrogate demand rows do not match services");
    for (const auto& row : demand) {
      if (row.size() != n) throw ValidationError("surrogate demand row arity");
      for (double w : row)
        if (!(w >= 0)) throw ValidationError("negative demand weight");
    }
    for (double mu : service_rate)
      if (!(mu > 0)) throw ValidationError("service rate must be positive");
    for (double d0 : base_latency)
      if (!(d0 >= 0)) throw ValidationError("base latency must be non-negative");
    if (!(noise >= 0)) throw ValidationError("noise must be non-negative");
    if (!(max_delay > 0)) throw ValidationError("max delay must be positive");
    if (settle.routing < 0 || settle.blocking < 0 || settle.scaling < 0)
      throw ValidationError("settle steps must be non-negative");
  }
};

// Calibration for standard_topology(): front node 200/s, processing nodes
// 4/s per core, database nodes 30/s. Service 2 requests cost more database
// work than service 1 requests.
inline SurrogateConfig standard_surrogate(const MeshTopology& topo) {
  SurrogateConfig cfg;
  cfg.service_rate = {200.0, 4.0, 4.0, 30.0, 30.0};
  cfg.base_latency.assign(5, 0.005);
  for (const auto& s : topo.services()) {
    if (s.kind == ServiceKind::compute) {
      cfg.demand.push_back({1.0, 1.0, 1.0, 0.0, 0.0});
    } else {
      const double db = s.id == 1 ? 0.7 : 1.2;
      cfg.demand.push_back({1.0, 0.05, 0.05, db, db});
    }
  }
  return cfg;
}

// Noiseless closed-form response of the mesh to (load, action).
struct MeshResponse {
  std::vector<double> arrival;     // lambda_j, work units / s
  std::vector<double> capacity;    // mu_j c_j
  std::vector<char> node_saturated;
  std::vector<double> carried;     // per service, after blocking and overload shedding
  std::vector<double> mean_delay;  // per service, s
  std::vector<char> saturated;     // per service: a traversed node is saturated
};

inline double path_share(const ControlAction& a, std::size_t service, std::size_t path,
                         std::size_t path_count) {
  if (path_count == 1) return 1.0;
  return path == 0 ? a.p[service] : 1.0 - a.p[service];
}

inline MeshResponse mesh_response(const SurrogateConfig& cfg, const MeshTopology& topo,
                                  const LoadVector& load, const ControlAction& a) {
  const auto n = topo.node_count();
  const auto m = topo.service_count();
  if (load.size() != m) throw ValidationError("load arity does not match topology");
  MeshResponse r;
  r.arrival.assign(n, 0.0);
  r.capacity.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const int idx = topo.scalable_index(static_cast<int>(j));
    r.capacity[j] = cfg.service_rate[j] * (idx < 0 ? 1.0 : a.c[idx]);
  }
  std::vector<double> admitted(m);
  for (std::size_t i = 0; i < m; ++i) {
    admitted[i] = carried_load(load[i], a.b[i]);
    const auto& paths = topo.services()[i].paths;
    for (std::size_t k = 0; k < paths.size(); ++k) {
      const double share = path_share(a, i, k, paths.size());
      for (int j : paths[k]) r.arrival[j] += admitted[i] * share * cfg.demand[i][j];
    }
  }
  r.node_saturated.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    r.node_saturated[j] = r.arrival[j] >= r.capacity[j];

  r.carried.resize(m);
  r.mean_delay.resize(m);
  r.saturated.assign(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& paths = topo.services()[i].paths;
    double delay = 0, served = 0;
    for (std::size_t k = 0; k < paths.size(); ++k) {
      const double share = path_share(a, i, k, paths.size());
      double path_delay = 0, throughput = 1.0;
      for (int j : paths[k]) {
        const double w = cfg.demand[i][j];
        double node_delay;
        if (r.node_saturated[j]) {
          node_delay = cfg.max_delay;
          throughput = std::min(throughput, r.capacity[j] / r.arrival[j]);
          if (share > 0) r.saturated[i] = 1;
        } else {
          node_delay = std::min(cfg.max_delay,
                                cfg.base_latency[j] + w / (r.capacity[j] - r.arrival[j]));
        }
        path_delay += node_delay;
      }
      delay += share * path_delay;
      served += share * throughput;
    }
    r.mean_delay[i] = delay;
    r.carried[i] = admitted[i] * served;
  }
  return r;
}

struct SurrogateState {
  ControlAction effective;
  std::optional<ControlAction> pending;  // requested but not yet settled
  int settle_remaining = 0;
};

inline SurrogateState initial_surrogate_state(ControlAction effective) {
  return SurrogateState{std::move(effective), std::nullopt, 0};
}

struct SurrogateStep {
  std::vector<ServiceObservation> observations;
  SurrogateState next;
  bool settled = false;  // observations reflect the requested action exactly
};

// Advances the target by one step. Knobs with a zero settle time apply
// immediately; slower knobs (scaling) keep their old value until their
// settle counter runs out. `noise_key` drives the per-service noise draws.
inline SurrogateStep surrogate_step(const SurrogateConfig& cfg, const MeshTopology& topo,
                                    const SurrogateState& state, const LoadVector& load,
                                    const ControlAction& requested,
                                    std::uint64_t noise_key) {
  validate_action(requested, topo);
  SurrogateState next = state;

  // Split the request into the part that applies now and the part that waits.
  ControlAction now = state.effective;
  int wait = 0;
  auto apply = [&](auto member, int settle) {
    if (settle == 0)
      now.*member = requested.*member;
    else if (now.*member != requested.*member)
      wait = std::max(wait, settle);
  };
  apply(&ControlAction::b, cfg.settle.blocking);
  apply(&ControlAction::p, cfg.settle.routing);
  apply(&ControlAction::c, cfg.settle.scaling);

  next.effective = now;
  if (wait == 0) {
    next.pending.reset();
    next.settle_remaining = 0;
  } else {
    // Restart the counter only when the slow knobs change target.
    auto same_target = [&](auto member, int settle) {
      return settle == 0 || (*state.pending).*member == requested.*member;
    };
    const bool restart = !state.pending ||
                         !same_target(&ControlAction::b, cfg.settle.blocking) ||
                         !same_target(&ControlAction::p, cfg.settle.routing) ||
                         !same_target(&ControlAction::c, cfg.settle.scaling);
    next.pending = requested;
    if (restart) next.settle_remaining = wait;
  }

  const MeshResponse resp = mesh_response(cfg, topo, load, next.effective);
  SurrogateStep out;
  out.settled = next.effective == requested;
  out.observations.resize(topo.service_count());
  for (std::size_t i = 0; i < topo.service_count(); ++i) {
    const double z = counter_normal(hash_counter({noise_key, i}));
    const double mean =
        resp.mean_delay[i] * std::exp(cfg.noise * z - 0.5 * cfg.noise * cfg.noise);
    const double var = resp.saturated[i] ? cfg.saturated_variance_factor * mean * mean
                                         : (cfg.noise * mean) * (cfg.noise * mean);
    out.observations[i] = {load[i], resp.carried[i], mean, var};
  }

  if (next.pending && --next.settle_remaining <= 0) {
    next.effective = *next.pending;
    next.pending.reset();
    next.settle_remaining = 0;
  }
  out.next = std::move(next);
  return out;
}

using ActionSampler = std::function<ControlAction(long step)>;

inline ActionSampler uniform_action_sampler(const ActionTable& table, std::uint64_t seed) {
  return [&table, seed](long step) -> ControlAction {
    const auto h = hash_counter({seed, 0xac710ull, static_cast<std::uint64_t>(step)});
    return table[h % table.size()];
  };
}

// Runs the target under sampled actions and records (s_t, a_t, obs_{t+1}).
// An action is held until its slow knobs have settled; the observations made
// while settling are not recorded.
inline std::vector<TraceRecord> collect_traces(const SurrogateConfig& cfg,
                                               const MeshTopology& topo,
                                               const ActionGrid& grid,
                                               const LoadPattern& pattern,
                                               const ActionSampler& sampler, long n_steps,
                                               std::uint64_t noise_seed) {
  if (n_steps < 1) throw ValidationError("n_steps must be at least 1");
  cfg.validate(topo);
  pattern.validate();
  const ControlAction start = grid.default_action(topo);
  SurrogateState state = initial_surrogate_state(start);

  std::vector<double> delay =
      mesh_response(cfg, topo, load_at(pattern, 0), start).mean_delay;
  std::vector<TraceRecord> out;
  std::optional<ControlAction> held;
  long draws = 0;
  for (long t = 0; t < n_steps; ++t) {
    if (!held) held = sampler(draws++);
    const LoadVector load = load_at(pattern, t);
    auto step = surrogate_step(cfg, topo, state, load, *held,
                               hash_counter({noise_seed, static_cast<std::uint64_t>(t)}));
    if (step.settled) {
      out.push_back({t, SystemState{load, delay}, *held, step.observations});
      held.reset();
    }
    for (std::size_t i = 0; i < delay.size(); ++i) delay[i] = step.observations[i].d_mean;
    state = std::move(step.next);
  }
  return out;
}

}  // namespace meshrl

#endif  // MESHRL_SURROGATE_HPP_
