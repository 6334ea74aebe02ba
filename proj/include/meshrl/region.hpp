#ifndef MESHRL_REGION_HPP_
#define MESHRL_REGION_HPP_

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "meshrl/core.hpp"
#include "meshrl/forest.hpp"

namespace meshrl {

// (s, a) lies in the operating region when every service's predicted
// delay variance stays below rho times its predicted mean.
struct OperatingRegion {
  std::shared_ptr<const ForestModel> model;
  double rho = 0.5;
};

inline bool stationary(const std::vector<double>& mean, const std::vector<double>& var,
                       double rho) {
  for (std::size_t i = 0; i < mean.size(); ++i)
    if (!(var[i] <= 0 || var[i] < rho * mean[i])) return false;
  return true;
}

inline bool in_region(const OperatingRegion& region, const SystemState& s,
                      const ControlAction& a) {
  const auto pred = region.model->predict(s.load, a);
  return stationary(pred.mean, pred.var, region.rho);
}

struct ActionMask {
  std::vector<std::uint8_t> allowed;  // per enumerated action
  bool fallback = false;              // nothing was in-region; everything allowed

  std::size_t admitted() const {
    std::size_t n = 0;
    for (auto a : allowed) n += a;
    return n;
  }
};

inline ActionMask mask_from_prediction(const GridPrediction& pred, double rho) {
  ActionMask mask;
  mask.allowed.resize(pred.actions);
  bool any = false;
  std::vector<double> mean(pred.services), var(pred.services);
  for (std::size_t k = 0; k < pred.actions; ++k) {
    for (std::size_t i = 0; i < pred.services; ++i) {
      mean[i] = pred.mean(k, i);
      var[i] = pred.var(k, i);
    }
    mask.allowed[k] = stationary(mean, var, rho);
    any = any || mask.allowed[k];
  }
  if (!any) {
    std::fill(mask.allowed.begin(), mask.allowed.end(), std::uint8_t{1});
    mask.fallback = true;
  }
  return mask;
}

inline ActionMask action_mask(const OperatingRegion& region, const SystemState& s,
                              const ActionTable& table) {
  return mask_from_prediction(region.model->predict_grid(s.load, table), region.rho);
}

// Normalized mean absolute error per target (d_mean_1..m, d_var_1..m):
// mean |y - y_hat| divided by mean y.
inline std::vector<double> nmae(const ForestModel& model,
                                const std::vector<TraceRecord>& held_out) {
  if (held_out.empty()) throw ValidationError("empty held-out set");
  const std::size_t m = model.service_count();
  std::vector<double> abs_err(2 * m, 0.0), total(2 * m, 0.0);
  for (const auto& r : held_out) {
    if (r.next.size() != m) throw ValidationError("held-out record arity mismatch");
    const auto pred = model.predict(r.state.load, r.action);
    for (std::size_t i = 0; i < m; ++i) {
      abs_err[i] += std::abs(r.next[i].d_mean - pred.mean[i]);
      total[i] += r.next[i].d_mean;
      abs_err[m + i] += std::abs(r.next[i].d_var - pred.var[i]);
      total[m + i] += r.next[i].d_var;
    }
  }
  std::vector<double> out(2 * m);
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (total[t] == 0) throw NumericalError("NMAE undefined: target mean is zero");
    out[t] = abs_err[t] / total[t];
  }
  return out;
}

}  // namespace meshrl

#endif  // MESHRL_REGION_HPP_
