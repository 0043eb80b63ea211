#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "aap/core/graph.hpp"

namespace aap {

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Adam with bias correction over a fixed list of parameter leaves. Moment
// tensors are created lazily on the first step and keep parameter order.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.lr < 0.0f) throw std::invalid_argument("Adam: negative learning rate");
  }

  void step(const std::vector<Node*>& params, float lr) {
    if (lr < 0.0f) throw std::invalid_argument("Adam: negative learning rate");
    if (m_.empty()) {
      for (Node* p : params) {
        m_.push_back(Tensor::zeros(p->value.shape()));
        v_.push_back(Tensor::zeros(p->value.shape()));
      }
    }
    if (m_.size() != params.size())
      throw std::invalid_argument("Adam: parameter list changed size");
    ++step_count_;
    const float bc1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(step_count_));
    const float bc2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(step_count_));
    for (size_t i = 0; i < params.size(); ++i) {
      Node* p = params[i];
      if (p->grad.empty()) p->grad = Tensor::zeros(p->value.shape());
      if (!p->grad.same_shape(p->value)) shape_fail("adam_step", p->grad, p->value);
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      for (int64_t j = 0; j < p->value.size(); ++j) {
        const float g = p->grad[j];
        if (!std::isfinite(g))
          throw std::runtime_error("adam_step: non-finite gradient encountered");
        m[j] = cfg_.beta1 * m[j] + (1.0f - cfg_.beta1) * g;
        v[j] = cfg_.beta2 * v[j] + (1.0f - cfg_.beta2) * g * g;
        const float mhat = m[j] / bc1;
        const float vhat = v[j] / bc2;
        p->value[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  void step(const std::vector<Node*>& params) { step(params, cfg_.lr); }

  const AdamConfig& config() const { return cfg_; }
  int64_t step_count() const { return step_count_; }
  std::vector<Tensor>& moment1() { return m_; }
  std::vector<Tensor>& moment2() { return v_; }
  void restore(int64_t step_count, std::vector<Tensor> m, std::vector<Tensor> v) {
    step_count_ = step_count;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  int64_t step_count_ = 0;
};

// Global-norm gradient clipping. Returns the pre-clip norm; gradients are
// rescaled in place to exactly max_norm when they exceed it.
inline double clip_grad_norm(const std::vector<Node*>& params, double max_norm) {
  if (max_norm <= 0.0) throw std::invalid_argument("clip_grad_norm: max_norm must be positive");
  double sumsq = 0.0;
  for (Node* p : params) {
    if (p->grad.empty()) continue;
    for (int64_t j = 0; j < p->grad.size(); ++j) {
      const double g = p->grad[j];
      sumsq += g * g;
    }
  }
  const double norm = std::sqrt(sumsq);
  if (norm > max_norm && norm > 0.0) {
    const float s = static_cast<float>(max_norm / norm);
    for (Node* p : params) {
      if (p->grad.empty()) continue;
      for (int64_t j = 0; j < p->grad.size(); ++j) p->grad[j] *= s;
    }
  }
  return norm;
}

}  // namespace aap
