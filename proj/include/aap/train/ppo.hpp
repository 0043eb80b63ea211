#pragma once

#include <numeric>

#include "aap/core/optim.hpp"
#include "aap/train/gae.hpp"

namespace aap::train {

struct PpoConfig {
  double clip = 0.1;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double forward_coef = 1.0;  // alpha for the forward-prediction loss
  double max_grad_norm = 0.5;
  int epochs = 4;
  int minibatches = 4;
  bool normalize_advantage = true;
};

struct UpdateStats {
  double total = 0.0, policy = 0.0, value = 0.0, entropy = 0.0, forward = 0.0;
  double grad_norm = 0.0;
  int steps = 0;  // optimizer steps taken
};

// Clipped-surrogate PPO plus the forward-prediction MSE, jointly optimized.
// Minibatches are environment subsets replayed over the full window so the
// recurrent paths see exactly the rollout's computation.
inline UpdateStats ppo_update(policy::Policy& pol, RolloutBuffer& buf, const PpoConfig& cfg,
                              Adam& adam, float lr, Rng& rng) {
  const int64_t E = buf.E;
  if (E % cfg.minibatches != 0)
    throw std::invalid_argument("ppo_update: env count not divisible into minibatches");
  if (buf.advantage.empty()) throw std::logic_error("ppo_update: advantages not computed");

  std::vector<float> adv = buf.advantage;
  if (cfg.normalize_advantage) {
    double mean = 0.0;
    for (float a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    double var = 0.0;
    for (float a : adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(adv.size());
    const double inv = 1.0 / std::sqrt(var + 1e-8);
    for (float& a : adv) a = static_cast<float>((a - mean) * inv);
  }

  const int64_t ds = pol.task().state_change_dim;
  UpdateStats stats;
  const auto leaves = pol.params().leaves();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order(E);
    std::iota(order.begin(), order.end(), 0);
    for (int64_t i = E - 1; i > 0; --i)
      std::swap(order[i], order[rng.below(static_cast<uint64_t>(i + 1))]);

    const int64_t per = E / cfg.minibatches;
    for (int mb = 0; mb < cfg.minibatches; ++mb) {
      std::vector<int> ids(order.begin() + mb * per, order.begin() + (mb + 1) * per);
      policy::SeqBatch sb = buf.minibatch(ids, pol);
      const int64_t S = sb.T * sb.E;

      // Per-row constants for this minibatch.
      Tensor old_logp({S, 1}), advantages({S, 1}), targets({S, 1});
      Tensor ds_target({S, std::max<int64_t>(1, ds)});
      Tensor ds_mask({S, std::max<int64_t>(1, ds)});
      double valid_rows = 0.0;
      for (int64_t t = 0; t < sb.T; ++t)
        for (int64_t j = 0; j < sb.E; ++j) {
          const int64_t src = t * E + ids[j], dst = t * sb.E + j;
          old_logp[dst] = buf.logprob[src];
          advantages[dst] = adv[src];
          targets[dst] = buf.value_target[src];
          if (pol.has_fwd() && buf.fwd_valid[src] > 0.5f) {
            std::copy_n(buf.delta_s.ptr() + src * ds, ds, ds_target.ptr() + dst * ds);
            std::fill_n(ds_mask.ptr() + dst * ds, ds, 1.0f);
            valid_rows += 1.0;
          }
        }

      Graph g;
      policy::EvalNodes ev = pol.evaluate(g, sb);

      Node* logp_taken = ops::gather_cols(g, ev.logp, sb.action);
      Node* ratio = ops::exp(g, ops::sub(g, logp_taken, g.constant(old_logp)));
      Node* surr1 = ops::mul_const(g, ratio, advantages);
      Node* surr2 = ops::mul_const(
          g, ops::clamp(g, ratio, 1.0f - static_cast<float>(cfg.clip),
                        1.0f + static_cast<float>(cfg.clip)),
          advantages);
      Node* policy_loss =
          ops::scale(g, ops::sum_all(g, ops::minimum(g, surr1, surr2)), -1.0f / S);

      Node* vdiff = ops::sub(g, ev.value, g.constant(targets));
      Node* value_loss = ops::scale(g, ops::sum_all(g, ops::mul(g, vdiff, vdiff)), 0.5f / S);

      Node* probs = ops::exp(g, ev.logp);
      Node* neg_entropy = ops::scale(g, ops::sum_all(g, ops::mul(g, probs, ev.logp)), 1.0f / S);

      Node* loss = ops::add(g, policy_loss,
                            ops::scale(g, value_loss, static_cast<float>(cfg.value_coef)));
      loss = ops::add(g, loss, ops::scale(g, neg_entropy, static_cast<float>(cfg.entropy_coef)));

      Node* forward_loss = nullptr;
      if (ev.fwd_pred && valid_rows > 0.0) {
        Node* diff = ops::mul_const(g, ops::sub(g, ev.fwd_pred, g.constant(ds_target)), ds_mask);
        forward_loss = ops::scale(g, ops::sum_all(g, ops::mul(g, diff, diff)),
                                  static_cast<float>(1.0 / (valid_rows * ds)));
        loss = ops::add(g, loss, ops::scale(g, forward_loss, static_cast<float>(cfg.forward_coef)));
      }

      if (!std::isfinite(loss->value[0]))
        throw std::runtime_error("ppo_update: non-finite loss (policy=" +
                                 std::to_string(policy_loss->value[0]) +
                                 " value=" + std::to_string(value_loss->value[0]) + ")");

      pol.params().zero_grads();
      g.backward(loss);
      stats.grad_norm += clip_grad_norm(leaves, cfg.max_grad_norm);
      adam.step(leaves, lr);

      stats.total += loss->value[0];
      stats.policy += policy_loss->value[0];
      stats.value += value_loss->value[0];
      stats.entropy += -neg_entropy->value[0];
      stats.forward += forward_loss ? forward_loss->value[0] : 0.0;
      ++stats.steps;
    }
  }

  const double inv = 1.0 / std::max(1, stats.steps);
  stats.total *= inv;
  stats.policy *= inv;
  stats.value *= inv;
  stats.entropy *= inv;
  stats.forward *= inv;
  stats.grad_norm *= inv;
  return stats;
}

// Linear decay to zero over the training budget.
inline double lr_schedule(double lr0, int64_t step, int64_t total) {
  if (step < 0 || step > total) throw std::invalid_argument("lr_schedule: step out of range");
  return lr0 * (1.0 - static_cast<double>(step) / static_cast<double>(total));
}

}  // namespace aap::train
