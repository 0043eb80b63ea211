#pragma once

#include <filesystem>
#include <json.hpp>

#include "aap/io/checkpoint.hpp"
#include "aap/train/ppo.hpp"

namespace aap::train {

struct TrainConfig {
  int64_t total_steps = 2'000'000;
  int64_t rollout_len = 200;
  int64_t num_envs = 16;
  double lr = 1e-3;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  PpoConfig ppo;
  int64_t checkpoint_every = 100'000;
  int workers = 1;
  uint64_t seed = 1;

  void validate() const {
    if (total_steps <= 0 || rollout_len <= 0 || num_envs <= 0)
      throw std::invalid_argument("TrainConfig: non-positive sizes");
    if (gamma < 0 || gamma > 1 || gae_lambda < 0 || gae_lambda > 1)
      throw std::invalid_argument("TrainConfig: gamma/lambda outside [0,1]");
    if (ppo.forward_coef < 0) throw std::invalid_argument("TrainConfig: negative alpha");
    if (ppo.clip <= 0) throw std::invalid_argument("TrainConfig: non-positive clip");
  }
};

inline void save_params(io::CheckpointWriter& w, const ParamStore& ps, const std::string& prefix) {
  for (size_t i = 0; i < ps.count(); ++i) {
    const ParamId id = static_cast<ParamId>(i);
    w.add_array(prefix + ps.name(id), ps.value(id));
  }
}

inline void load_params(const io::CheckpointReader& r, ParamStore& ps, const std::string& prefix) {
  for (size_t i = 0; i < ps.count(); ++i) {
    const ParamId id = static_cast<ParamId>(i);
    Tensor t = r.array(prefix + ps.name(id));
    if (!t.same_shape(ps.value(id)))
      throw std::runtime_error("checkpoint: shape mismatch for " + ps.name(id));
    ps.value(id) = t;
  }
}

// On-policy training loop: collect -> GAE -> clipped PPO with the forward
// loss, learning rate decaying linearly to zero over the step budget.
// Checkpoints carry the full run state, so a resumed run continues the exact
// trajectory of the original.
class Trainer {
 public:
  Trainer(policy::Policy& pol, Collector& collector, TrainConfig cfg, std::string out_dir,
          std::string config_text)
      : pol_(pol),
        collector_(collector),
        cfg_(cfg),
        out_dir_(std::move(out_dir)),
        config_text_(std::move(config_text)),
        update_rng_(Rng::substream(cfg.seed, 0x75706474ULL)) {
    cfg_.validate();
    std::filesystem::create_directories(out_dir_);
    log_path_ = out_dir_ + "/train_log.jsonl";
  }

  int64_t steps_done() const { return steps_done_; }
  const std::string& last_log_line() const { return last_log_line_; }

  void run() {
    std::ofstream log(log_path_, steps_done_ > 0 ? std::ios::app : std::ios::trunc);
    while (steps_done_ < cfg_.total_steps) {
      run_one_update(log);
      if (steps_done_ % cfg_.checkpoint_every == 0 || steps_done_ >= cfg_.total_steps)
        save_checkpoint(checkpoint_path(steps_done_));
    }
    save_checkpoint(out_dir_ + "/ckpt_final.aap");
  }

  // Single update, exposed for tests.
  void run_one_update() {
    std::ofstream log(log_path_, steps_done_ > 0 ? std::ios::app : std::ios::trunc);
    run_one_update(log);
  }

  std::string checkpoint_path(int64_t steps) const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "/ckpt_%010lld.aap", static_cast<long long>(steps));
    return out_dir_ + buf;
  }

  void save_checkpoint(const std::string& path) {
    io::CheckpointWriter w;
    w.set_steps(steps_done_);
    w.set_config(config_text_);
    save_params(w, pol_.params(), "param.");
    // Full run state: optimizer moments, collector (environments, recurrent
    // states, seed streams), and the update RNG.
    auto& m1 = adam_.moment1();
    auto& m2 = adam_.moment2();
    for (size_t i = 0; i < m1.size(); ++i) {
      w.add_array("opt.m." + pol_.params().name(static_cast<ParamId>(i)), m1[i]);
      w.add_array("opt.v." + pol_.params().name(static_cast<ParamId>(i)), m2[i]);
    }
    w.add_kv("adam_steps", std::to_string(adam_.step_count()));
    w.add_kv("collector", collector_.save_state());
    std::ostringstream rs;
    for (uint64_t v : update_rng_.state()) rs << v << " ";
    w.add_kv("update_rng", rs.str());
    w.write(path);
  }

  void restore(const io::CheckpointReader& r) {
    if (r.config_hash() != Rng::hash64(config_text_))
      throw std::runtime_error("restore: checkpoint was produced by a different config");
    load_params(r, pol_.params(), "param.");
    steps_done_ = r.steps();
    if (r.has_kv("adam_steps")) {
      std::vector<Tensor> m1, m2;
      for (size_t i = 0; i < pol_.params().count(); ++i) {
        m1.push_back(r.array("opt.m." + pol_.params().name(static_cast<ParamId>(i))));
        m2.push_back(r.array("opt.v." + pol_.params().name(static_cast<ParamId>(i))));
      }
      adam_.restore(std::stoll(r.kv("adam_steps")), std::move(m1), std::move(m2));
      collector_.load_state(r.kv("collector"));
      std::istringstream rs(r.kv("update_rng"));
      std::array<uint64_t, 4> st{};
      for (auto& v : st) rs >> v;
      update_rng_.set_state(st);
    }
  }

 private:
  void run_one_update(std::ofstream& log) {
    const double lr = lr_schedule(cfg_.lr, steps_done_, cfg_.total_steps);
    RolloutBuffer buf = collector_.collect(cfg_.rollout_len);
    compute_gae(buf, cfg_.gamma, cfg_.gae_lambda);
    UpdateStats st = ppo_update(pol_, buf, cfg_.ppo, adam_, static_cast<float>(lr), update_rng_);
    steps_done_ += cfg_.rollout_len * cfg_.num_envs;

    nlohmann::json rec{{"step", steps_done_},
                       {"lr", lr},
                       {"loss", st.total},
                       {"policy_loss", st.policy},
                       {"value_loss", st.value},
                       {"entropy", st.entropy},
                       {"forward_loss", st.forward},
                       {"grad_norm", st.grad_norm},
                       {"return", collector_.recent_return()},
                       {"sr", collector_.recent_success_rate()},
                       {"episodes", collector_.episodes_done()}};
    last_log_line_ = rec.dump();
    log << last_log_line_ << "\n";
    log.flush();
  }

  policy::Policy& pol_;
  Collector& collector_;
  TrainConfig cfg_;
  std::string out_dir_, config_text_, log_path_, last_log_line_;
  Adam adam_;
  Rng update_rng_;
  int64_t steps_done_ = 0;
};

}  // namespace aap::train
