#pragma once

#include <functional>
#include <memory>
#include <numeric>

#include "aap/eval/metrics.hpp"
#include "aap/policy/policy.hpp"

namespace aap::eval {

struct EvalOptions {
  int episodes_per_cell = 100;
  uint64_t seed = 9000;
  std::vector<int> disabled;
  std::function<std::unique_ptr<sim::Env>()> factory;
  // Optional per-step trace hook (cell, episode, step, action, result, state).
  std::function<void(const sim::DriftCell&, int, int, int, const sim::StepResult&,
                     const std::vector<float>&)>
      trace;
};

inline uint64_t episode_seed(uint64_t base, const sim::DriftCell& cell, int episode) {
  uint64_t x = base;
  uint64_t a = Rng::splitmix64(x);
  uint64_t b = a ^ (static_cast<uint64_t>(static_cast<int64_t>(cell.d_m * 1e6)) * 0x9E3779B97F4A7C15ULL);
  b ^= static_cast<uint64_t>(static_cast<int64_t>(cell.d_r * 1e6)) + 0x632BE59BD9B4E019ULL;
  b ^= static_cast<uint64_t>(episode) * 0xD1B54A32D192ED03ULL;
  return Rng::splitmix64(b);
}

// Greedy evaluation of one drift cell: episodes run as a lockstep batch, each
// environment playing exactly one episode. Records come back in episode
// order, so identical seeds give identical files.
inline std::vector<EpisodeRecord> run_cell(policy::Policy& pol, const sim::DriftCell& cell,
                                           const EvalOptions& opt) {
  const int N = opt.episodes_per_cell;
  if (N <= 0) throw std::invalid_argument("run_cell: need at least one episode");
  const sim::TaskInfo& ti = pol.task();

  std::vector<std::unique_ptr<sim::Env>> envs;
  std::vector<policy::RecurrentState> states;
  std::vector<Rng> rngs;  // unused by greedy selection; kept for interface parity
  std::vector<double> rewards(N, 0.0);
  std::vector<bool> done(N, false), success(N, false);
  std::vector<std::vector<float>> obs(N);

  sim::DriftSpec drift;
  drift.d_m = cell.d_m;
  drift.d_r = cell.d_r;
  drift.disabled = opt.disabled;
  for (int i = 0; i < N; ++i) {
    envs.push_back(opt.factory());
    states.push_back(pol.make_state());
    rngs.emplace_back(episode_seed(opt.seed, cell, i) ^ 0x5A5AULL);
    obs[i] = envs[i]->reset(drift, episode_seed(opt.seed, cell, i));
  }

  std::vector<int> active(N);
  std::iota(active.begin(), active.end(), 0);
  std::vector<policy::ActResult> acts;
  int step_counter = 0;
  while (!active.empty()) {
    Tensor obs_t({static_cast<int64_t>(active.size()), ti.obs_dim});
    std::vector<policy::RecurrentState> batch_states;
    std::vector<Rng> batch_rngs;
    batch_states.reserve(active.size());
    for (size_t k = 0; k < active.size(); ++k) {
      const int i = active[k];
      std::copy_n(obs[i].data(), ti.obs_dim, obs_t.ptr() + k * ti.obs_dim);
      batch_states.push_back(states[i]);
      batch_rngs.push_back(rngs[i]);
    }
    pol.act(obs_t, batch_states, batch_rngs, /*greedy=*/true, acts);

    std::vector<int> still;
    for (size_t k = 0; k < active.size(); ++k) {
      const int i = active[k];
      states[i] = batch_states[k];
      sim::StepResult r = envs[i]->step(acts[k].action);
      rewards[i] += r.reward;
      if (opt.trace)
        opt.trace(cell, i, step_counter, acts[k].action, r, envs[i]->state_vector());
      if (r.done) {
        done[i] = true;
        success[i] = r.success;
      } else {
        obs[i] = r.obs;
        still.push_back(i);
      }
    }
    active = std::move(still);
    ++step_counter;
  }

  std::vector<EpisodeRecord> out;
  for (int i = 0; i < N; ++i) {
    EpisodeRecord rec;
    rec.success = success[i];
    rec.path_length = envs[i]->path_length();
    rec.shortest_path = envs[i]->shortest_path();
    rec.start_distance = envs[i]->start_distance();
    rec.final_distance = envs[i]->current_distance();
    rec.steps = envs[i]->steps();
    rec.total_reward = rewards[i];
    rec.disabled_uses = envs[i]->disabled_use_count();
    rec.drift_dm = cell.d_m;
    rec.drift_dr = cell.d_r;
    rec.seed = episode_seed(opt.seed, cell, i);
    out.push_back(rec);
  }
  return out;
}

// Full drift sweep for one checkpoint/seed.
inline std::pair<std::vector<CellMetrics>, std::vector<EpisodeRecord>> run_grid(
    policy::Policy& pol, const std::vector<sim::DriftCell>& cells, const EvalOptions& opt) {
  std::vector<CellMetrics> metrics;
  std::vector<EpisodeRecord> all;
  for (const sim::DriftCell& c : cells) {
    std::vector<EpisodeRecord> recs = run_cell(pol, c, opt);
    metrics.push_back(summarize_cell(recs, c.d_m, c.d_r, c.seen));
    all.insert(all.end(), recs.begin(), recs.end());
  }
  return {std::move(metrics), std::move(all)};
}

}  // namespace aap::eval
