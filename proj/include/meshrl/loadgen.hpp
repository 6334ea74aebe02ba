#ifndef MESHRL_LOADGEN_HPP_
#define MESHRL_LOADGEN_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "meshrl/core.hpp"
#include "meshrl/random.hpp"

namespace meshrl {

enum class LoadKind { random, sinusoidal };

struct ServiceLoad {
  std::vector<double> values;  // random kind: the set drawn from each step
  double mean = 0;             // sinusoidal kind
  double amplitude = 0;
  double phase = 0;  // radians
};

struct LoadPattern {
  LoadKind kind = LoadKind::random;
  std::vector<ServiceLoad> services;
  double period = 100;  // steps, sinusoidal kind
  std::uint64_t seed = 0;

  void validate() const {
    if (services.empty()) throw ValidationError("load pattern without services");
    if (kind == LoadKind::random) {
      for (const auto& s : services) {
        if (s.values.empty()) throw ValidationError("empty random value set");
        for (double v : s.values)
          if (!(v >= 0)) throw ValidationError("negative load value");
      }
    } else {
      if (!(period > 0)) throw ValidationError("sinusoid period must be positive");
      for (const auto& s : services)
        if (!(s.amplitude >= 0) || s.amplitude > s.mean)
          throw ValidationError("sinusoid amplitude must lie in [0, mean]");
    }
  }

  // Per-service [min, max] reachable by load_at.
  std::vector<std::pair<double, double>> bounds() const {
    std::vector<std::pair<double, double>> out;
    for (const auto& s : services) {
      if (kind == LoadKind::random) {
        auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
        out.emplace_back(*lo, *hi);
      } else {
        out.emplace_back(s.mean - s.amplitude, s.mean + s.amplitude);
      }
    }
    return out;
  }
};

// Offered load at step t; a pure function of (pattern, t).
inline LoadVector load_at(const LoadPattern& pattern, long t) {
  LoadVector out(pattern.services.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& s = pattern.services[i];
    if (pattern.kind == LoadKind::random) {
      const auto h = hash_counter({pattern.seed, i, static_cast<std::uint64_t>(t)});
      out[i] = s.values[h % s.values.size()];
    } else {
      out[i] = s.mean + s.amplitude * std::sin(2.0 * std::numbers::pi *
                                                    static_cast<double>(t) / pattern.period +
                                                s.phase);
    }
  }
  return out;
}

inline ServiceLoad random_load(ServiceKind kind) {
  if (kind == ServiceKind::compute) return {{1, 2, 3, 4, 5}, 0, 0, 0};
  return {{5, 10, 15, 20}, 0, 0, 0};
}

inline ServiceLoad sine_load(ServiceKind kind, double phase) {
  if (kind == ServiceKind::compute) return {{}, 3.0, 2.0, phase};
  return {{}, 12.5, 7.5, phase};
}

// (training, evaluation) patterns for a scenario's services: uniform draws
// for training, a sinusoid per service (phases 0 and pi/2) for evaluation.
inline std::pair<LoadPattern, LoadPattern> default_patterns(int scenario_id,
                                                            std::uint64_t seed = 1) {
  const MeshTopology topo = standard_topology(scenario_id);
  LoadPattern train{LoadKind::random, {}, 100, seed};
  LoadPattern eval{LoadKind::sinusoidal, {}, 100, seed};
  for (std::size_t i = 0; i < topo.service_count(); ++i) {
    const auto kind = topo.services()[i].kind;
    train.services.push_back(random_load(kind));
    eval.services.push_back(sine_load(kind, i % 2 == 0 ? 0.0 : std::numbers::pi / 2));
  }
  return {train, eval};
}

}  // namespace meshrl

#endif  // MESHRL_LOADGEN_HPP_
