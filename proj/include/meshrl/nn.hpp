#ifndef MESHRL_NN_HPP_
#define MESHRL_NN_HPP_

// Minimal dense network with tanh hidden layers and a linear output layer,
// plus Adam. Parameters live in one flat array; layer l stores its weight
// matrix W_l (out x in, row-major) followed by its bias b_l.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "meshrl/core.hpp"
#include "meshrl/random.hpp"

namespace meshrl {

class Mlp {
 public:
  Mlp() = default;

  // Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); the output layer is
  // additionally multiplied by `output_scale`. Biases start at zero.
  Mlp(std::vector<std::size_t> sizes, Rng& rng, double output_scale = 1.0)
      : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ValidationError("network needs at least two layers");
    params_.assign(count_params(sizes_), 0.0);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      const double scale = (l + 2 == sizes_.size() ? output_scale : 1.0) /
                           std::sqrt(static_cast<double>(in));
      for (std::size_t k = 0; k < in * out; ++k) params_[off + k] = rng.uniform(-scale, scale);
      off += in * out + out;
    }
  }

  Mlp(std::vector<std::size_t> sizes, std::vector<double> params)
      : sizes_(std::move(sizes)), params_(std::move(params)) {
    if (sizes_.size() < 2 || params_.size() != count_params(sizes_))
      throw ValidationError("network parameter count does not match layer sizes");
  }

  static std::size_t count_params(const std::vector<std::size_t>& sizes) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
    return n;
  }

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // Layer activations from one forward pass; act[0] is the input.
  struct Tape {
    std::vector<std::vector<double>> act;
    const std::vector<double>& output() const { return act.back(); }
  };

  void forward(std::span<const double> x, Tape& tape) const {
    if (x.size() != input_size()) throw ValidationError("network input arity mismatch");
    tape.act.resize(sizes_.size());
    tape.act[0].assign(x.begin(), x.end());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      const double* w = params_.data() + off;
      const double* b = w + in * out;
      const auto& a = tape.act[l];
      auto& z = tape.act[l + 1];
      z.resize(out);
      const bool hidden = l + 2 < sizes_.size();
      for (std::size_t o = 0; o < out; ++o) {
        double s = b[o];
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
        z[o] = hidden ? std::tanh(s) : s;
      }
      off += in * out + out;
    }
  }

  std::vector<double> forward(std::span<const double> x) const {
    Tape tape;
    forward(x, tape);
    return tape.act.back();
  }

  // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  void backward(const Tape& tape, std::span<const double> grad_out,
                std::span<double> grad) const {
    std::vector<double> delta(grad_out.begin(), grad_out.end()), prev;
    std::size_t off = params_.size();
    for (std::size_t l = sizes_.size() - 1; l-- > 0;) {
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      off -= in * out + out;
      const double* w = params_.data() + off;
      double* gw = grad.data() + off;
      double* gb = gw + in * out;
      const auto& a = tape.act[l];
      prev.assign(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0) continue;
        gb[o] += d;
        double* grow = gw + o * in;
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) {
          grow[i] += d * a[i];
          prev[i] += d * row[i];
        }
      }
      if (l > 0)
        for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - a[i] * a[i];
      delta.swap(prev);
    }
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<double> params_;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr, double eps = 1e-5, double beta1 = 0.9, double beta2 = 0.999)
      : lr_(lr), eps_(eps), beta1_(beta1), beta2_(beta2), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      m_[k] = beta1_ * m_[k] + (1 - beta1_) * grad[k];
      v_[k] = beta2_ * v_[k] + (1 - beta2_) * grad[k] * grad[k];
      params[k] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
    }
  }

 private:
  double lr_ = 1e-3, eps_ = 1e-5, beta1_ = 0.9, beta2_ = 0.999;
  std::vector<double> m_, v_;
  long t_ = 0;
};

}  // namespace meshrl

#endif  // MESHRL_NN_HPP_
