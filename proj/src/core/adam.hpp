#pragma once

#include "nets.hpp"

namespace ls::num {

// Bias-corrected Adam over an ordered parameter list. Moment buffers are
// positional, so the parameter list must be stable across steps.
class Adam {
 public:
  Adam() = default;
  explicit Adam(real lr, real beta1 = 0.9, real beta2 = 0.999, real eps = 1e-7)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  real learning_rate() const { return lr_; }
  long step_count() const { return t_; }

  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    check(params.size() == grads.size(), "adam: params/grads length mismatch");
    if (m_.empty()) {
      for (Tensor* p : params) {
        m_.emplace_back(p->shape);
        v_.emplace_back(p->shape);
      }
    }
    check(m_.size() == params.size(), "adam: parameter list changed");
    t_++;
    const real c1 = 1.0 - std::pow(beta1_, real(t_));
    const real c2 = 1.0 - std::pow(beta2_, real(t_));
    for (size_t i = 0; i < params.size(); i++) {
      Tensor& p = *params[i];
      const Tensor& gr = grads[i];
      check(p.same_shape(gr), "adam: grad shape mismatch");
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      for (long j = 0; j < p.numel(); j++) {
        const real g = gr.at(j);
        m.at(j) = beta1_ * m.at(j) + (1.0 - beta1_) * g;
        v.at(j) = beta2_ * v.at(j) + (1.0 - beta2_) * g * g;
        const real mhat = m.at(j) / c1;
        const real vhat = v.at(j) / c2;
        p.at(j) -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

 private:
  real lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-7;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Scales gradients in place so their global L2 norm does not exceed
// `max_norm`. Returns the pre-clip norm.
inline real clip_global_norm(std::vector<Tensor>& grads, real max_norm) {
  real sq = 0.0;
  for (const Tensor& g : grads)
    for (real x : g.data) sq += x * x;
  const real norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const real scale = max_norm / norm;
    for (Tensor& g : grads)
      for (real& x : g.data) x *= scale;
  }
  return norm;
}

}  // namespace ls::num
