#pragma once

#include <array>
#include <cstring>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>

#include "aap/policy/policy.hpp"

namespace aap::train {

// M consecutive transitions from E lockstep environments, time-major rows
// (index t*E + e), plus the recurrent snapshot needed to replay the window.
struct RolloutBuffer {
  int64_t T = 0, E = 0;
  Tensor obs, prev_obs;          // [T*E, obs_dim]
  std::vector<int> prev_action;  // [T*E]
  std::vector<int> action;
  std::vector<float> logprob, value, reward, done;
  Tensor delta_s;                // [T*E, ds] ground-truth state change
  std::vector<float> fwd_valid;  // 1 when delta_s supervises this row
  Tensor belief0, bank0;         // [E, ...] snapshots at window start
  std::vector<uint8_t> executed0;
  std::vector<float> bootstrap_value;  // [E]
  std::vector<float> advantage, value_target;

  // Column extraction: the same window restricted to a subset of envs.
  policy::SeqBatch minibatch(const std::vector<int>& ids, const policy::Policy& pol) const {
    const int64_t Em = static_cast<int64_t>(ids.size());
    const int64_t od = obs.cols(), n = pol.task().action_count;
    policy::SeqBatch sb;
    sb.T = T;
    sb.E = Em;
    sb.obs = Tensor({T * Em, od});
    sb.prev_obs = Tensor({T * Em, od});
    sb.prev_action.resize(T * Em);
    sb.action.resize(T * Em);
    sb.done.resize(T * Em);
    for (int64_t t = 0; t < T; ++t)
      for (int64_t j = 0; j < Em; ++j) {
        const int64_t src = t * E + ids[j], dst = t * Em + j;
        std::copy_n(obs.ptr() + src * od, od, sb.obs.ptr() + dst * od);
        std::copy_n(prev_obs.ptr() + src * od, od, sb.prev_obs.ptr() + dst * od);
        sb.prev_action[dst] = prev_action[src];
        sb.action[dst] = action[src];
        sb.done[dst] = done[src];
      }
    sb.belief0 = Tensor({Em, belief0.cols()});
    for (int64_t j = 0; j < Em; ++j)
      std::copy_n(belief0.ptr() + ids[j] * belief0.cols(), belief0.cols(),
                  sb.belief0.ptr() + j * belief0.cols());
    if (pol.has_bank()) {
      sb.bank0 = Tensor({Em, bank0.cols()});
      for (int64_t j = 0; j < Em; ++j)
        std::copy_n(bank0.ptr() + ids[j] * bank0.cols(), bank0.cols(),
                    sb.bank0.ptr() + j * bank0.cols());
    }
    sb.executed0.resize(Em * n);
    for (int64_t j = 0; j < Em; ++j)
      std::copy_n(executed0.data() + ids[j] * n, n, sb.executed0.data() + j * n);
    return sb;
  }
};

struct EpisodeStats {
  double total_reward = 0.0;
  int length = 0;
  bool success = false;
};

// Owns the lockstep environment batch and per-env recurrent/sampling state.
// Episode boundaries reset the recurrent state and resample the drift from
// the environment's own seed stream, so a (seed, config) pair fully
// determines every trajectory.
class Collector {
 public:
  using EnvFactory = std::function<std::unique_ptr<sim::Env>()>;

  Collector(policy::Policy& pol, const EnvFactory& factory, int64_t num_envs,
            const sim::DriftRegime& regime, const std::vector<int>& disabled, uint64_t seed,
            int workers = 1)
      : pol_(pol), regime_(regime), disabled_(disabled), workers_(std::max(1, workers)) {
    for (int64_t e = 0; e < num_envs; ++e) {
      envs_.push_back(factory());
      env_rngs_.push_back(Rng::substream(seed, 0x656e7600ULL + static_cast<uint64_t>(e)));
      act_rngs_.push_back(Rng::substream(seed, 0x61637400ULL + static_cast<uint64_t>(e)));
      states_.push_back(pol_.make_state());
    }
    const sim::TaskInfo& ti = pol_.task();
    obs_ = Tensor({num_envs, ti.obs_dim});
    episode_reward_.assign(num_envs, 0.0);
    for (int64_t e = 0; e < num_envs; ++e) start_episode(e);
  }

  int64_t num_envs() const { return static_cast<int64_t>(envs_.size()); }
  sim::Env& env(int64_t e) { return *envs_[e]; }

  RolloutBuffer collect(int64_t T) {
    const int64_t E = num_envs();
    const sim::TaskInfo& ti = pol_.task();
    RolloutBuffer buf;
    buf.T = T;
    buf.E = E;
    buf.obs = Tensor({T * E, ti.obs_dim});
    buf.prev_obs = Tensor({T * E, ti.obs_dim});
    buf.prev_action.resize(T * E);
    buf.action.resize(T * E);
    buf.logprob.resize(T * E);
    buf.value.resize(T * E);
    buf.reward.resize(T * E);
    buf.done.resize(T * E);
    buf.delta_s = Tensor({T * E, std::max<int64_t>(1, ti.state_change_dim)});
    buf.fwd_valid.assign(T * E, 0.0f);

    buf.belief0 = Tensor({E, pol_.dims().belief});
    for (int64_t e = 0; e < E; ++e)
      std::copy_n(states_[e].belief.data(), pol_.dims().belief,
                  buf.belief0.ptr() + e * pol_.dims().belief);
    if (pol_.has_bank()) {
      const int64_t w = ti.action_count * pol_.dims().memory;
      buf.bank0 = Tensor({E, w});
      for (int64_t e = 0; e < E; ++e)
        std::copy_n(states_[e].bank.data(), w, buf.bank0.ptr() + e * w);
    }
    buf.executed0.resize(E * ti.action_count);
    for (int64_t e = 0; e < E; ++e)
      std::copy_n(states_[e].executed.data(), ti.action_count,
                  buf.executed0.data() + e * ti.action_count);

    std::vector<policy::ActResult> acts;
    for (int64_t t = 0; t < T; ++t) {
      for (int64_t e = 0; e < E; ++e) {
        const int64_t row = t * E + e;
        std::copy_n(obs_.ptr() + e * ti.obs_dim, ti.obs_dim, buf.obs.ptr() + row * ti.obs_dim);
        std::copy_n(states_[e].prev_obs.data(), ti.obs_dim,
                    buf.prev_obs.ptr() + row * ti.obs_dim);
        buf.prev_action[row] = states_[e].prev_action;
      }

      pol_.act(obs_, states_, act_rngs_, /*greedy=*/false, acts);

      step_envs(acts, [&](int64_t e, const sim::StepResult& sr) {
        const int64_t row = t * E + e;
        buf.action[row] = acts[e].action;
        buf.logprob[row] = acts[e].logprob;
        buf.value[row] = acts[e].value;
        buf.reward[row] = static_cast<float>(sr.reward);
        buf.done[row] = sr.done ? 1.0f : 0.0f;
        if (!sr.state_change.empty()) {
          std::copy_n(sr.state_change.data(), ti.state_change_dim,
                      buf.delta_s.ptr() + row * ti.state_change_dim);
          buf.fwd_valid[row] = 1.0f;
        }
        episode_reward_[e] += sr.reward;
        if (sr.done) {
          finished_.push_back({episode_reward_[e], envs_[e]->steps(), sr.success});
          if (finished_.size() > 100) finished_.pop_front();
          ++episodes_done_;
          start_episode(e);
        } else {
          std::copy_n(sr.obs.data(), ti.obs_dim, obs_.ptr() + e * ti.obs_dim);
        }
      });
    }

    buf.bootstrap_value = pol_.bootstrap_values(obs_, states_);
    return buf;
  }

  // Mean return / success rate over the last completed episodes.
  double recent_return() const {
    if (finished_.empty()) return 0.0;
    double s = 0.0;
    for (const auto& ep : finished_) s += ep.total_reward;
    return s / static_cast<double>(finished_.size());
  }
  double recent_success_rate() const {
    if (finished_.empty()) return 0.0;
    double s = 0.0;
    for (const auto& ep : finished_) s += ep.success ? 1.0 : 0.0;
    return s / static_cast<double>(finished_.size());
  }
  int64_t episodes_done() const { return episodes_done_; }

  std::string save_state() const {
    std::ostringstream os;
    os << envs_.size() << "\n";
    for (size_t e = 0; e < envs_.size(); ++e) {
      os << envs_[e]->save_state() << "\n";
      for (uint64_t w : env_rngs_[e].state()) os << w << " ";
      for (uint64_t w : act_rngs_[e].state()) os << w << " ";
      os << sim::detail::dbl_to_hex(episode_reward_[e]) << "\n";
      const policy::RecurrentState& st = states_[e];
      os << st.prev_action << " " << st.belief.size() << " " << st.bank.size() << " "
         << st.executed.size() << "\n";
      auto dump = [&os](const std::vector<float>& v) {
        for (float f : v) {
          uint32_t bits;
          std::memcpy(&bits, &f, 4);
          os << bits << " ";
        }
        os << "\n";
      };
      dump(st.belief);
      dump(st.bank);
      for (uint8_t u : st.executed) os << int(u) << " ";
      os << "\n";
      dump(st.prev_obs);
    }
    const sim::TaskInfo& ti = pol_.task();
    for (int64_t e = 0; e < num_envs(); ++e) {
      for (int64_t c = 0; c < ti.obs_dim; ++c) {
        uint32_t bits;
        float f = obs_.at(e, c);
        std::memcpy(&bits, &f, 4);
        os << bits << " ";
      }
    }
    os << "\n" << episodes_done_ << " " << finished_.size() << "\n";
    for (const auto& ep : finished_)
      os << sim::detail::dbl_to_hex(ep.total_reward) << " " << ep.length << " "
         << (ep.success ? 1 : 0) << "\n";
    return os.str();
  }

  void load_state(const std::string& s) {
    std::istringstream is(s);
    size_t count = 0;
    is >> count;
    if (count != envs_.size()) throw std::invalid_argument("Collector::load_state: env count");
    skip_line(is);
    for (size_t e = 0; e < envs_.size(); ++e) {
      std::string line;
      std::getline(is, line);
      envs_[e]->load_state(line);
      std::array<uint64_t, 4> st{};
      for (auto& w : st) is >> w;
      env_rngs_[e].set_state(st);
      for (auto& w : st) is >> w;
      act_rngs_[e].set_state(st);
      std::string hex;
      is >> hex;
      episode_reward_[e] = sim::detail::hex_to_dbl(hex);
      size_t nb = 0, nk = 0, ne = 0;
      is >> states_[e].prev_action >> nb >> nk >> ne;
      auto read_vec = [&is](std::vector<float>& v, size_t n) {
        v.resize(n);
        for (size_t i = 0; i < n; ++i) {
          uint32_t bits;
          is >> bits;
          std::memcpy(&v[i], &bits, 4);
        }
      };
      read_vec(states_[e].belief, nb);
      read_vec(states_[e].bank, nk);
      states_[e].executed.resize(ne);
      for (auto& u : states_[e].executed) {
        int x;
        is >> x;
        u = static_cast<uint8_t>(x);
      }
      read_vec(states_[e].prev_obs, pol_.task().obs_dim);
      skip_line(is);
    }
    const sim::TaskInfo& ti = pol_.task();
    for (int64_t e = 0; e < num_envs(); ++e)
      for (int64_t c = 0; c < ti.obs_dim; ++c) {
        uint32_t bits;
        is >> bits;
        float f;
        std::memcpy(&f, &bits, 4);
        obs_.at(e, c) = f;
      }
    size_t nfin = 0;
    is >> episodes_done_ >> nfin;
    finished_.clear();
    for (size_t i = 0; i < nfin; ++i) {
      std::string hex;
      int len, suc;
      is >> hex >> len >> suc;
      finished_.push_back({sim::detail::hex_to_dbl(hex), len, suc != 0});
    }
    if (!is) throw std::invalid_argument("Collector::load_state: truncated");
  }

 private:
  static void skip_line(std::istream& is) {
    is.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  }

  void start_episode(int64_t e) {
    sim::DriftSpec drift = regime_.mode == sim::DriftRegime::Mode::train
                               ? sim::sample_train(regime_, env_rngs_[e])
                               : sim::DriftSpec{};
    drift.disabled = disabled_;
    const uint64_t ep_seed = env_rngs_[e].next_u64();
    std::vector<float> o = envs_[e]->reset(drift, ep_seed);
    std::copy_n(o.data(), o.size(), obs_.ptr() + e * pol_.task().obs_dim);
    states_[e].reset();
    episode_reward_[e] = 0.0;
  }

  template <typename F>
  void step_envs(const std::vector<policy::ActResult>& acts, F&& record) {
    const int64_t E = num_envs();
    if (workers_ <= 1 || E < 2 * workers_) {
      for (int64_t e = 0; e < E; ++e) record(e, envs_[e]->step(acts[e].action));
      return;
    }
    // Stepping is parallel; recording stays in env order for determinism.
    std::vector<sim::StepResult> results(E);
    std::vector<std::thread> pool;
    const int64_t chunk = (E + workers_ - 1) / workers_;
    for (int w = 0; w < workers_; ++w) {
      const int64_t lo = w * chunk, hi = std::min<int64_t>(E, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi] {
        for (int64_t e = lo; e < hi; ++e) results[e] = envs_[e]->step(acts[e].action);
      });
    }
    for (auto& th : pool) th.join();
    for (int64_t e = 0; e < E; ++e) record(e, results[e]);
  }

  policy::Policy& pol_;
  sim::DriftRegime regime_;
  std::vector<int> disabled_;
  int workers_;
  std::vector<std::unique_ptr<sim::Env>> envs_;
  std::vector<Rng> env_rngs_, act_rngs_;
  std::vector<policy::RecurrentState> states_;
  Tensor obs_;
  std::vector<double> episode_reward_;
  std::deque<EpisodeStats> finished_;
  int64_t episodes_done_ = 0;
};

}  // namespace aap::train
