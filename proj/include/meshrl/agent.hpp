#ifndef MESHRL_AGENT_HPP_
#define MESHRL_AGENT_HPP_

// Masked proximal policy optimization over an enumerated action list.
//
// The actor maps state features to one logit per enumerated action; actions
// outside the mask get probability exactly zero. The critic is a separate
// network with the same hidden shape. With discount 0 every step is its own
// episode, so the advantage is simply reward - V(s).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "meshrl/core.hpp"
#include "meshrl/nn.hpp"
#include "meshrl/random.hpp"

namespace meshrl {

struct AgentConfig {
  double learning_rate = 1e-3;
  double gamma = 0.0;
  std::size_t batch_size = 64;
  std::size_t update_interval = 1024;
  std::size_t epochs = 10;
  double clip = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  std::size_t hidden = 64;
  std::size_t total_steps = 50000;  // environment steps
  std::size_t episode_length = 1024;
  std::size_t eval_every = 1000;  // 0 disables the learning curve
  std::uint64_t seed = 1;

  void validate() const {
    if (!(learning_rate > 0)) throw ValidationError("learning rate must be positive");
    if (!(gamma >= 0 && gamma < 1)) throw ValidationError("discount must lie in [0,1)");
    if (batch_size == 0 || batch_size > update_interval)
      throw ValidationError("batch size must lie in [1, update interval]");
    if (epochs == 0 || hidden == 0 || episode_length == 0)
      throw ValidationError("epochs, hidden width and episode length must be positive");
    if (!(clip > 0)) throw ValidationError("clip ratio must be positive");
  }
};

// Affine map of loads (and optionally delays) into [0,1], clamped.
struct StateBounds {
  std::vector<double> load_min, load_max;
  std::vector<double> delay_max;  // empty: delays are not policy inputs

  std::size_t feature_count() const { return load_min.size() + delay_max.size(); }

  void validate() const {
    if (load_min.size() != load_max.size()) throw ValidationError("bounds arity mismatch");
    for (std::size_t i = 0; i < load_min.size(); ++i)
      if (!std::isfinite(load_min[i]) || !std::isfinite(load_max[i]) ||
          !(load_max[i] > load_min[i]))
        throw ValidationError("degenerate load bounds");
    for (double d : delay_max)
      if (!std::isfinite(d) || !(d > 0)) throw ValidationError("degenerate delay bounds");
  }
};

inline std::vector<double> normalize_state(const SystemState& s, const StateBounds& bounds) {
  bounds.validate();
  if (s.load.size() != bounds.load_min.size() ||
      (!bounds.delay_max.empty() && s.delay.size() != bounds.delay_max.size()))
    throw ValidationError("state arity does not match bounds");
  std::vector<double> x;
  x.reserve(bounds.feature_count());
  for (std::size_t i = 0; i < s.load.size(); ++i)
    x.push_back(std::clamp((s.load[i] - bounds.load_min[i]) /
                               (bounds.load_max[i] - bounds.load_min[i]),
                           0.0, 1.0));
  for (std::size_t i = 0; i < bounds.delay_max.size(); ++i)
    x.push_back(std::clamp(s.delay[i] / bounds.delay_max[i], 0.0, 1.0));
  return x;
}

struct PolicyNetwork {
  Mlp actor;   // features -> one logit per action
  Mlp critic;  // features -> V(s)
  StateBounds bounds;
  std::uint64_t grid_hash = 0;

  std::size_t action_count() const { return actor.output_size(); }

  static PolicyNetwork create(std::size_t features, std::size_t actions, std::size_t hidden,
                              std::uint64_t seed) {
    Rng rng(hash_counter({seed, 0x1417ull}));
    PolicyNetwork p;
    p.actor = Mlp({features, hidden, hidden, actions}, rng, 0.01);
    p.critic = Mlp({features, hidden, hidden, 1}, rng, 1.0);
    return p;
  }
};

// log pi over the admissible actions; masked entries are -inf.
inline std::vector<double> masked_log_softmax(std::span<const double> logits,
                                              std::span<const std::uint8_t> mask) {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < logits.size(); ++k)
    if (mask[k]) top = std::max(top, logits[k]);
  if (!std::isfinite(top)) throw ValidationError("mask admits no action");
  double z = 0;
  for (std::size_t k = 0; k < logits.size(); ++k)
    if (mask[k]) z += std::exp(logits[k] - top);
  const double lse = top + std::log(z);
  std::vector<double> out(logits.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < logits.size(); ++k)
    if (mask[k]) out[k] = logits[k] - lse;
  return out;
}

enum class ActMode { sample, greedy };

// Greedy ties resolve to the lowest index.
inline std::size_t choose_action(std::span<const double> logits,
                                 std::span<const std::uint8_t> mask, ActMode mode, Rng& rng) {
  if (logits.size() != mask.size()) throw ValidationError("mask arity mismatch");
  if (mode == ActMode::greedy) {
    std::size_t best = logits.size();
    for (std::size_t k = 0; k < logits.size(); ++k)
      if (mask[k] && (best == logits.size() || logits[k] > logits[best])) best = k;
    if (best == logits.size()) throw ValidationError("mask admits no action");
    return best;
  }
  const auto logp = masked_log_softmax(logits, mask);
  const double u = rng.uniform();
  double acc = 0;
  std::size_t last = logits.size();
  for (std::size_t k = 0; k < logp.size(); ++k) {
    if (!mask[k]) continue;
    acc += std::exp(logp[k]);
    last = k;
    if (u < acc) return k;
  }
  return last;  // rounding left u above the final partial sum
}

inline std::size_t act(const PolicyNetwork& policy, std::span<const double> features,
                       std::span<const std::uint8_t> mask, ActMode mode, Rng& rng) {
  const auto logits = policy.actor.forward(features);
  return choose_action(logits, mask, mode, rng);
}

inline std::size_t act(const PolicyNetwork& policy, const SystemState& s,
                       std::span<const std::uint8_t> mask, ActMode mode, Rng& rng) {
  return act(policy, normalize_state(s, policy.bounds), mask, mode, rng);
}

// --- loss and gradients ----------------------------------------------------

struct PpoSample {
  std::span<const double> features;
  std::span<const std::uint8_t> mask;
  std::size_t action = 0;
  double old_log_prob = 0;
  double advantage = 0;  // already normalized
  double target = 0;     // value regression target
};

struct PpoLoss {
  double total = 0, policy = 0, value = 0, entropy = 0;
  std::vector<double> actor_grad, critic_grad;
};

// Mean over the batch of
//   -min(rho A, clip(rho) A) - c_ent H(pi) + c_v (V - target)^2
// with analytic gradients for both networks.
inline PpoLoss ppo_loss(const PolicyNetwork& net, std::span<const PpoSample> batch,
                        const AgentConfig& cfg) {
  PpoLoss out;
  out.actor_grad.assign(net.actor.params().size(), 0.0);
  out.critic_grad.assign(net.critic.params().size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Mlp::Tape tape;
  std::vector<double> dz;
  for (const auto& s : batch) {
    net.actor.forward(s.features, tape);
    const auto logp = masked_log_softmax(tape.output(), s.mask);
    if (!s.mask[s.action]) throw ValidationError("sample action is masked");
    const double ratio = std::exp(logp[s.action] - s.old_log_prob);
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    const double surr1 = ratio * s.advantage, surr2 = clipped * s.advantage;
    double g;  // d(policy loss)/d(log pi_a)
    if (surr1 <= surr2 || clipped == ratio)
      g = -ratio * s.advantage;
    else
      g = 0.0;
    out.policy += -std::min(surr1, surr2) * inv_n;

    double entropy = 0;
    for (std::size_t k = 0; k < logp.size(); ++k)
      if (s.mask[k]) entropy -= std::exp(logp[k]) * logp[k];
    out.entropy += entropy * inv_n;

    dz.assign(logp.size(), 0.0);
    for (std::size_t k = 0; k < logp.size(); ++k) {
      if (!s.mask[k]) continue;
      const double pk = std::exp(logp[k]);
      dz[k] = inv_n * (g * ((k == s.action ? 1.0 : 0.0) - pk) +
                       cfg.entropy_coef * pk * (logp[k] + entropy));
    }
    net.actor.backward(tape, dz, out.actor_grad);

    net.critic.forward(s.features, tape);
    const double err = tape.output()[0] - s.target;
    out.value += err * err * inv_n;
    const double dv = 2.0 * cfg.value_coef * err * inv_n;
    net.critic.backward(tape, std::span<const double>(&dv, 1), out.critic_grad);
  }
  out.total = out.policy - cfg.entropy_coef * out.entropy + cfg.value_coef * out.value;
  return out;
}

// --- training --------------------------------------------------------------

// Environment protocol used by train(): observation() gives normalized
// features of the current state, admissible() its action mask, and
// act(k) applies action k, advances and returns the reward.
template <class E>
concept BanditEnvironment = requires(E& e, const E& ce, std::size_t k, std::uint64_t seed) {
  { ce.action_count() } -> std::convertible_to<std::size_t>;
  { ce.observation() } -> std::convertible_to<std::vector<double>>;
  { ce.admissible() } -> std::convertible_to<std::span<const std::uint8_t>>;
  { e.act(k) } -> std::convertible_to<double>;
  e.reset(seed);
};

struct CurvePoint {
  std::size_t step = 0;
  double anr = 0;
  double ci95 = 0;
};

struct TrainResult {
  PolicyNetwork policy;
  std::vector<CurvePoint> curve;
  std::size_t gradient_steps = 0;
};

using CurveEvaluator = std::function<CurvePoint(const PolicyNetwork&)>;

template <BanditEnvironment Env>
TrainResult train(Env& env, const AgentConfig& cfg, PolicyNetwork init,
                  const CurveEvaluator& evaluate = {}) {
  cfg.validate();
  TrainResult result{std::move(init), {}, 0};
  PolicyNetwork& net = result.policy;
  const std::size_t actions = env.action_count();
  const std::size_t features = net.actor.input_size();
  if (net.action_count() != actions) throw ValidationError("policy/action count mismatch");

  Rng rng(hash_counter({cfg.seed, 0x7a11ull}));
  Adam actor_opt(net.actor.params().size(), cfg.learning_rate);
  Adam critic_opt(net.critic.params().size(), cfg.learning_rate);

  const std::size_t cap = cfg.update_interval;
  std::vector<double> obs(cap * features), logp(cap), value(cap), rewards(cap), adv(cap),
      target(cap);
  std::vector<std::uint8_t> masks(cap * actions), episode_end(cap);
  std::vector<std::size_t> chosen(cap);

  std::uint64_t episode = 0;
  env.reset(hash_counter({cfg.seed, episode}));
  std::size_t in_episode = 0, filled = 0;
  Mlp::Tape tape;

  auto update = [&](std::size_t n) {
    double bootstrap = 0;
    if (cfg.gamma > 0) {
      const auto x = env.observation();
      bootstrap = net.critic.forward(x)[0];
    }
    double ret = bootstrap;
    for (std::size_t t = n; t-- > 0;) {
      if (episode_end[t]) ret = 0;
      ret = rewards[t] + cfg.gamma * ret;
      target[t] = ret;
      adv[t] = ret - value[t];
    }
    std::vector<std::size_t> order(n);
    std::vector<PpoSample> batch;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
      for (std::size_t start = 0; start < n; start += cfg.batch_size) {
        const std::size_t end = std::min(n, start + cfg.batch_size);
        double mean = 0, sq = 0;
        for (std::size_t k = start; k < end; ++k) mean += adv[order[k]];
        mean /= static_cast<double>(end - start);
        for (std::size_t k = start; k < end; ++k)
          sq += (adv[order[k]] - mean) * (adv[order[k]] - mean);
        const double sd = end - start > 1 ? std::sqrt(sq / (end - start - 1)) : 1.0;
        batch.clear();
        for (std::size_t k = start; k < end; ++k) {
          const std::size_t t = order[k];
          const double a = end - start > 1 ? (adv[t] - mean) / (sd + 1e-8) : adv[t];
          batch.push_back({std::span<const double>(obs.data() + t * features, features),
                           std::span<const std::uint8_t>(masks.data() + t * actions, actions),
                           chosen[t], logp[t], a, target[t]});
        }
        PpoLoss loss = ppo_loss(net, batch, cfg);
        if (!std::isfinite(loss.total))
          throw NumericalError("non-finite PPO loss at gradient step " +
                               std::to_string(result.gradient_steps));
        double norm = 0;
        for (double g : loss.actor_grad) norm += g * g;
        for (double g : loss.critic_grad) norm += g * g;
        norm = std::sqrt(norm);
        if (cfg.max_grad_norm > 0 && norm > cfg.max_grad_norm) {
          const double s = cfg.max_grad_norm / (norm + 1e-6);
          for (double& g : loss.actor_grad) g *= s;
          for (double& g : loss.critic_grad) g *= s;
        }
        actor_opt.step(net.actor.params(), loss.actor_grad);
        critic_opt.step(net.critic.params(), loss.critic_grad);
        ++result.gradient_steps;
      }
    }
  };

  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    const auto x = env.observation();
    const auto mask = env.admissible();
    std::copy(x.begin(), x.end(), obs.begin() + filled * features);
    std::copy(mask.begin(), mask.end(), masks.begin() + filled * actions);
    net.actor.forward(x, tape);
    const auto lp = masked_log_softmax(tape.output(), mask);
    const std::size_t a = choose_action(tape.output(), mask, ActMode::sample, rng);
    chosen[filled] = a;
    logp[filled] = lp[a];
    value[filled] = net.critic.forward(x)[0];
    rewards[filled] = env.act(a);
    if (!std::isfinite(rewards[filled])) throw NumericalError("non-finite reward");
    episode_end[filled] = ++in_episode >= cfg.episode_length;
    if (episode_end[filled]) {
      env.reset(hash_counter({cfg.seed, ++episode}));
      in_episode = 0;
    }
    if (++filled == cap) {
      update(filled);
      filled = 0;
    }
    if (evaluate && cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) {
      CurvePoint p = evaluate(net);
      p.step = step + 1;
      result.curve.push_back(p);
    }
  }
  return result;
}

}  // namespace meshrl

#endif  // MESHRL_AGENT_HPP_
