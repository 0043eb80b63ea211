#pragma once

#include <sstream>

#include "aap/sim/env.hpp"

namespace aap::sim {

// Particle world with acceleration actions and episode-fixed rotation drift
// applied to the commanded acceleration. PointNav drives the agent onto the
// target; ObjectPush drives a ball onto it through a linear contact spring.
struct ParticleConfig {
  bool object_push = false;
  double dt = 0.1;
  double damping = 0.25;
  double bound = 1.0;  // world is [-bound, bound]^2
  double success_radius = 0.1;
  int max_steps = 128;
  double contact_dist = 0.1;  // agent radius + ball radius
  double contact_k = 30.0;
  double min_sep_target = 0.5;  // task entity to target at reset
  double min_sep_agent_ball = 0.2;
};

class ParticleEnv final : public Env {
 public:
  explicit ParticleEnv(ParticleConfig cfg = {}) : cfg_(cfg) {}

  TaskInfo info() const override {
    TaskInfo t;
    t.task = cfg_.object_push ? TaskKind::particle_objectpush : TaskKind::particle_pointnav;
    t.obs_dim = cfg_.object_push ? 10 : 6;
    t.goal_offset = t.obs_dim - 2;  // GPS delta is the last pair
    t.goal_dim = 2;
    t.action_count = 12;
    t.end_action = -1;
    t.state_change_dim = 4;  // (dp, dv) of the agent
    t.obs_scale.assign(t.obs_dim, 1.0f);
    return t;
  }

  std::vector<float> reset(const DriftSpec& drift, uint64_t episode_seed) override {
    if (!drift.disabled.empty())
      throw std::invalid_argument("ParticleEnv: disabled actions are a nav2d feature");
    drift_ = drift;
    rng_ = Rng::substream(episode_seed, 0x70617274);
    steps_ = 0;
    done_ = false;
    vx_ = vy_ = bvx_ = bvy_ = 0.0;
    px_ = rng_.uniform(-cfg_.bound, cfg_.bound);
    py_ = rng_.uniform(-cfg_.bound, cfg_.bound);
    if (cfg_.object_push) {
      do {
        bx_ = rng_.uniform(-cfg_.bound, cfg_.bound);
        by_ = rng_.uniform(-cfg_.bound, cfg_.bound);
      } while (std::hypot(px_ - bx_, py_ - by_) < cfg_.min_sep_agent_ball);
    }
    do {
      tx_ = rng_.uniform(-cfg_.bound, cfg_.bound);
      ty_ = rng_.uniform(-cfg_.bound, cfg_.bound);
    } while (std::hypot(tx_ - entity_x(), ty_ - entity_y()) < cfg_.min_sep_target);
    start_distance_ = task_distance();
    path_length_ = 0.0;
    return observation();
  }

  StepResult step(int action) override {
    if (done_) throw std::logic_error("ParticleEnv::step: episode already finished");
    if (action < 0 || action >= 12) throw std::invalid_argument("ParticleEnv::step: bad action");
    ++steps_;

    const auto accel = apply_drift_rotation(particle_actions()[action], drift_.d_r);
    double fx = 0.0, fy = 0.0, bfx = 0.0, bfy = 0.0;
    if (cfg_.object_push) {
      const double ddx = px_ - bx_, ddy = py_ - by_;
      const double dist = std::hypot(ddx, ddy);
      if (dist < cfg_.contact_dist) {
        const double mag = cfg_.contact_k * (cfg_.contact_dist - dist);
        const double ux = dist > 1e-9 ? ddx / dist : 1.0;
        const double uy = dist > 1e-9 ? ddy / dist : 0.0;
        fx = mag * ux;
        fy = mag * uy;
        bfx = -fx;
        bfy = -fy;
      }
    }

    const double prev_px = px_, prev_py = py_, prev_vx = vx_, prev_vy = vy_;
    const double prev_dist = task_distance();
    const double prev_ex = entity_x(), prev_ey = entity_y();

    vx_ = vx_ * (1.0 - cfg_.damping) + (accel[0] + fx) * cfg_.dt;
    vy_ = vy_ * (1.0 - cfg_.damping) + (accel[1] + fy) * cfg_.dt;
    px_ = std::clamp(px_ + vx_ * cfg_.dt, -cfg_.bound, cfg_.bound);
    py_ = std::clamp(py_ + vy_ * cfg_.dt, -cfg_.bound, cfg_.bound);
    if (cfg_.object_push) {
      bvx_ = bvx_ * (1.0 - cfg_.damping) + bfx * cfg_.dt;
      bvy_ = bvy_ * (1.0 - cfg_.damping) + bfy * cfg_.dt;
      bx_ = std::clamp(bx_ + bvx_ * cfg_.dt, -cfg_.bound, cfg_.bound);
      by_ = std::clamp(by_ + bvy_ * cfg_.dt, -cfg_.bound, cfg_.bound);
    }

    path_length_ += std::hypot(entity_x() - prev_ex, entity_y() - prev_ey);

    StepResult r;
    r.success = task_distance() <= cfg_.success_radius;
    r.done = r.success || steps_ >= cfg_.max_steps;
    done_ = r.done;
    r.reward = shaped_reward(prev_dist, task_distance(), r.success);
    r.obs = observation();
    r.state_change = {static_cast<float>(px_ - prev_px), static_cast<float>(py_ - prev_py),
                      static_cast<float>(vx_ - prev_vx), static_cast<float>(vy_ - prev_vy)};
    r.applied = {static_cast<float>(accel[0]), static_cast<float>(accel[1])};
    return r;
  }

  bool episode_active() const override { return !done_; }
  double start_distance() const override { return start_distance_; }
  double current_distance() const override { return task_distance(); }
  double shortest_path() const override { return start_distance_; }
  double path_length() const override { return path_length_; }
  int steps() const override { return steps_; }
  int disabled_use_count() const override { return 0; }

  std::vector<float> state_vector() const override {
    std::vector<float> s = {static_cast<float>(px_), static_cast<float>(py_),
                            static_cast<float>(vx_), static_cast<float>(vy_)};
    if (cfg_.object_push) {
      s.push_back(static_cast<float>(bx_));
      s.push_back(static_cast<float>(by_));
      s.push_back(static_cast<float>(bvx_));
      s.push_back(static_cast<float>(bvy_));
    }
    s.push_back(static_cast<float>(tx_));
    s.push_back(static_cast<float>(ty_));
    return s;
  }

  std::string save_state() const override {
    std::ostringstream os;
    using detail::dbl_to_hex;
    os << "particle";
    for (double v : {px_, py_, vx_, vy_, bx_, by_, bvx_, bvy_, tx_, ty_, start_distance_,
                     path_length_, drift_.d_m, drift_.d_r})
      os << " " << dbl_to_hex(v);
    os << " " << steps_ << " " << (done_ ? 1 : 0);
    for (uint64_t w : rng_.state()) os << " " << w;
    return os.str();
  }

  void load_state(const std::string& s) override {
    std::istringstream is(s);
    std::string tag;
    is >> tag;
    if (tag != "particle") throw std::invalid_argument("ParticleEnv::load_state: bad tag");
    std::string h;
    for (double* v : {&px_, &py_, &vx_, &vy_, &bx_, &by_, &bvx_, &bvy_, &tx_, &ty_,
                      &start_distance_, &path_length_, &drift_.d_m, &drift_.d_r}) {
      is >> h;
      *v = detail::hex_to_dbl(h);
    }
    int done_flag = 0;
    is >> steps_ >> done_flag;
    done_ = done_flag != 0;
    std::array<uint64_t, 4> st{};
    for (auto& w : st) is >> w;
    rng_.set_state(st);
    if (!is) throw std::invalid_argument("ParticleEnv::load_state: truncated state");
  }

  const DriftSpec& drift() const { return drift_; }

 private:
  double entity_x() const { return cfg_.object_push ? bx_ : px_; }
  double entity_y() const { return cfg_.object_push ? by_ : py_; }
  double task_distance() const { return std::hypot(tx_ - entity_x(), ty_ - entity_y()); }

  std::vector<float> observation() const {
    std::vector<float> o = {static_cast<float>(px_), static_cast<float>(py_),
                            static_cast<float>(vx_), static_cast<float>(vy_)};
    if (cfg_.object_push) {
      o.push_back(static_cast<float>(bx_));
      o.push_back(static_cast<float>(by_));
      o.push_back(static_cast<float>(bvx_));
      o.push_back(static_cast<float>(bvy_));
    }
    o.push_back(static_cast<float>(tx_ - px_));
    o.push_back(static_cast<float>(ty_ - py_));
    return o;
  }

  ParticleConfig cfg_;
  DriftSpec drift_;
  Rng rng_;
  double px_ = 0, py_ = 0, vx_ = 0, vy_ = 0;
  double bx_ = 0, by_ = 0, bvx_ = 0, bvy_ = 0;
  double tx_ = 0, ty_ = 0;
  double start_distance_ = 0, path_length_ = 0;
  int steps_ = 0;
  bool done_ = true;
};

}  // namespace aap::sim
