#pragma once

#include "aap/train/rollout.hpp"

namespace aap::train {

// Standard GAE recursion with episode-boundary masking, evaluated in double.
// Value targets are advantage + value.
inline void compute_gae(RolloutBuffer& buf, double gamma, double lambda) {
  if (gamma < 0.0 || gamma > 1.0 || lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("compute_gae: gamma and lambda must lie in [0,1]");
  const int64_t T = buf.T, E = buf.E;
  buf.advantage.assign(T * E, 0.0f);
  buf.value_target.assign(T * E, 0.0f);
  for (int64_t e = 0; e < E; ++e) {
    double acc = 0.0;
    for (int64_t t = T - 1; t >= 0; --t) {
      const int64_t i = t * E + e;
      const double nonterminal = buf.done[i] > 0.5f ? 0.0 : 1.0;
      const double next_value =
          (t == T - 1) ? buf.bootstrap_value[e] : buf.value[(t + 1) * E + e];
      const double delta =
          buf.reward[i] + gamma * next_value * nonterminal - buf.value[i];
      acc = delta + gamma * lambda * nonterminal * acc;
      buf.advantage[i] = static_cast<float>(acc);
      buf.value_target[i] = static_cast<float>(acc + buf.value[i]);
    }
  }
}

}  // namespace aap::train
