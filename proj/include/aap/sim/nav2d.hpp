#pragma once

#include <deque>
#include <limits>
#include <queue>
#include <sstream>

#include "aap/sim/env.hpp"

namespace aap::sim {

struct NoiseSpec {
  double sigma_d = 0.005;    // meters, per Move
  double sigma_theta = 0.5;  // degrees, per Rotate
  bool enabled = true;

  void validate() const {
    if (sigma_d < 0.0 || sigma_theta < 0.0)
      throw std::invalid_argument("NoiseSpec: negative noise scale");
  }
};

struct Nav2dConfig {
  double room = 5.0;  // square room [0, room]^2
  int min_obstacles = 3;
  int max_obstacles = 6;
  double obstacle_min_side = 0.3;
  double obstacle_max_side = 1.2;
  double agent_radius = 0.15;
  int rays = 12;
  double success_radius = 0.2;
  int max_steps = 500;
  double grid_res = 0.05;
  double min_start_target_dist = 0.5;
  NoiseSpec noise{};
  // Fixed scene for every episode when >= 0; otherwise the scene is derived
  // from the episode seed.
  int64_t fixed_scene_seed = -1;
};

struct Rect {
  double x0, y0, x1, y1;
  bool contains(double x, double y, double pad = 0.0) const {
    return x >= x0 - pad && x <= x1 + pad && y >= y0 - pad && y <= y1 + pad;
  }
};

// Continuous room with rectangular obstacles, a Move/Rotate/End action table,
// movement and rotation drifts, truncated Gaussian actuator noise, and
// optional disabled actions. Heading is degrees clockwise from +y.
class Nav2dEnv final : public Env {
 public:
  explicit Nav2dEnv(Nav2dConfig cfg = {}) : cfg_(cfg) { cfg_.noise.validate(); }

  TaskInfo info() const override {
    TaskInfo t;
    t.task = TaskKind::nav2d_pointnav;
    t.obs_dim = 2 + cfg_.rays + 1;
    t.goal_offset = 0;
    t.goal_dim = 2;
    t.action_count = 16;
    t.end_action = kNav2dEndAction;
    t.state_change_dim = 3;  // egocentric (forward, lateral, heading-radians)
    t.obs_scale.assign(t.obs_dim, 1.0f);
    t.obs_scale[0] = static_cast<float>(cfg_.room);
    t.obs_scale[1] = 180.0f;
    for (int k = 0; k < cfg_.rays; ++k) t.obs_scale[2 + k] = static_cast<float>(cfg_.room);
    return t;
  }

  std::vector<float> reset(const DriftSpec& drift, uint64_t episode_seed) override {
    const uint64_t scene_seed = cfg_.fixed_scene_seed >= 0
                                    ? static_cast<uint64_t>(cfg_.fixed_scene_seed)
                                    : Rng::substream(episode_seed, 0x7363656eULL).next_u64();
    return reset_full(scene_seed, drift, cfg_.noise, episode_seed);
  }

  // Scene generation rejects layouts where no mutually reachable start and
  // target pair is found after 100 placement attempts.
  std::vector<float> reset_full(uint64_t scene_seed, const DriftSpec& drift,
                                const NoiseSpec& noise, uint64_t episode_seed) {
    for (int id : drift.disabled)
      if (id == kNav2dEndAction) throw std::invalid_argument("Nav2dEnv: cannot disable End");
    drift_ = drift;
    noise_ = noise;
    noise_.validate();
    rng_ = Rng::substream(episode_seed, 0x6e617632ULL);

    Rng scene_rng = Rng::substream(scene_seed, 0x726f6f6dULL);
    while (true) {
      generate_obstacles(scene_rng);
      build_occupancy();
      if (place_start_and_target(scene_rng)) break;
    }

    steps_ = 0;
    done_ = false;
    collided_ = false;
    disabled_uses_ = 0;
    path_length_ = 0.0;
    start_distance_ = geodesic(x_, y_);
    return observation();
  }

  // Episode on a fixed, caller-supplied scene (scenario replay and tests).
  std::vector<float> reset_scene(std::vector<Rect> obstacles, double x, double y, double heading,
                                 double target_x, double target_y, const DriftSpec& drift,
                                 const NoiseSpec& noise, uint64_t episode_seed) {
    for (int id : drift.disabled)
      if (id == kNav2dEndAction) throw std::invalid_argument("Nav2dEnv: cannot disable End");
    drift_ = drift;
    noise_ = noise;
    noise_.validate();
    rng_ = Rng::substream(episode_seed, 0x6e617632ULL);
    obstacles_ = std::move(obstacles);
    tx_ = target_x;
    ty_ = target_y;
    x_ = start_x_ = x;
    y_ = start_y_ = y;
    heading_ = start_heading_ = wrap_deg(heading);
    build_occupancy();
    compute_distance_field();
    steps_ = 0;
    done_ = false;
    collided_ = false;
    disabled_uses_ = 0;
    path_length_ = 0.0;
    start_distance_ = geodesic(x_, y_);
    return observation();
  }

  StepResult step(int action) override {
    if (done_) throw std::logic_error("Nav2dEnv::step: episode already finished");
    if (action < 0 || action >= 16) throw std::invalid_argument("Nav2dEnv::step: bad action");
    ++steps_;

    const NavAction& act = nav2d_actions()[action];
    const double px = x_, py = y_, ph = heading_;
    const double prev_geo = geodesic(x_, y_);

    StepResult r;
    collided_ = false;
    double applied_translation = 0.0, applied_rotation = 0.0;

    if (drift_.is_disabled(action)) {
      // Dead actuator: no pose change, no drift, no noise. The step still
      // counts and is charged the step penalty.
      r.disabled_action = true;
      ++disabled_uses_;
    } else if (act.kind == NavAction::Kind::move) {
      double total = act.value + drift_.d_m;
      if (noise_.enabled && noise_.sigma_d > 0.0)
        total += rng_.normal_truncated(0.0, noise_.sigma_d, 3.0);
      const double hr = heading_ * M_PI / 180.0;
      double ux = std::sin(hr), uy = std::cos(hr);
      double want = total;
      if (want < 0.0) {
        ux = -ux;
        uy = -uy;
        want = -want;
      }
      const double allowed = max_travel(x_, y_, ux, uy, want);
      if (allowed < want - 1e-12) collided_ = true;
      x_ += ux * allowed;
      y_ += uy * allowed;
      applied_translation = total < 0.0 ? -allowed : allowed;
      path_length_ += allowed;
    } else if (act.kind == NavAction::Kind::rotate) {
      double total = act.value + drift_.d_r;
      if (noise_.enabled && noise_.sigma_theta > 0.0)
        total += rng_.normal_truncated(0.0, noise_.sigma_theta, 3.0);
      heading_ = wrap_deg(heading_ + total);
      applied_rotation = total;
    } else {
      r.success = euclid_to_target() <= cfg_.success_radius;
      done_ = true;
    }

    if (!done_ && steps_ >= cfg_.max_steps) done_ = true;
    r.done = done_;
    r.collision = collided_;
    r.reward = shaped_reward(prev_geo, geodesic(x_, y_), r.success);
    r.obs = observation();
    if (act.kind != NavAction::Kind::end) {
      const double hr = ph * M_PI / 180.0;
      const double dx = x_ - px, dy = y_ - py;
      r.state_change = {static_cast<float>(dx * std::sin(hr) + dy * std::cos(hr)),
                        static_cast<float>(dx * std::cos(hr) - dy * std::sin(hr)),
                        static_cast<float>(wrap_deg(heading_ - ph) * M_PI / 180.0)};
      r.applied = {static_cast<float>(applied_translation), static_cast<float>(applied_rotation)};
    }
    return r;
  }

  bool episode_active() const override { return !done_; }
  double start_distance() const override { return start_distance_; }
  double current_distance() const override { return geodesic(x_, y_); }
  double shortest_path() const override { return start_distance_; }
  double path_length() const override { return path_length_; }
  int steps() const override { return steps_; }
  int disabled_use_count() const override { return disabled_uses_; }

  std::vector<float> state_vector() const override {
    return {static_cast<float>(x_), static_cast<float>(y_), static_cast<float>(heading_),
            static_cast<float>(tx_), static_cast<float>(ty_)};
  }

  // Scene description: room size, obstacle rectangles, start pose, target.
  std::string scene_text() const {
    std::ostringstream os;
    os << "room " << cfg_.room << "\n";
    for (const Rect& o : obstacles_)
      os << "obstacle " << o.x0 << " " << o.y0 << " " << o.x1 << " " << o.y1 << "\n";
    os << "start " << start_x_ << " " << start_y_ << " " << start_heading_ << "\n";
    os << "target " << tx_ << " " << ty_ << "\n";
    return os.str();
  }

  std::string save_state() const override {
    using detail::dbl_to_hex;
    std::ostringstream os;
    os << "nav2d " << obstacles_.size();
    for (const Rect& o : obstacles_)
      os << " " << dbl_to_hex(o.x0) << " " << dbl_to_hex(o.y0) << " " << dbl_to_hex(o.x1) << " "
         << dbl_to_hex(o.y1);
    for (double v : {x_, y_, heading_, tx_, ty_, start_x_, start_y_, start_heading_,
                     start_distance_, path_length_, drift_.d_m, drift_.d_r, noise_.sigma_d,
                     noise_.sigma_theta})
      os << " " << dbl_to_hex(v);
    os << " " << (noise_.enabled ? 1 : 0) << " " << steps_ << " " << (done_ ? 1 : 0) << " "
       << (collided_ ? 1 : 0) << " " << disabled_uses_;
    os << " " << drift_.disabled.size();
    for (int a : drift_.disabled) os << " " << a;
    for (uint64_t w : rng_.state()) os << " " << w;
    return os.str();
  }

  void load_state(const std::string& s) override {
    std::istringstream is(s);
    std::string tag, h;
    size_t n_obs = 0;
    is >> tag >> n_obs;
    if (tag != "nav2d") throw std::invalid_argument("Nav2dEnv::load_state: bad tag");
    obstacles_.resize(n_obs);
    for (Rect& o : obstacles_)
      for (double* v : {&o.x0, &o.y0, &o.x1, &o.y1}) {
        is >> h;
        *v = detail::hex_to_dbl(h);
      }
    for (double* v : {&x_, &y_, &heading_, &tx_, &ty_, &start_x_, &start_y_, &start_heading_,
                      &start_distance_, &path_length_, &drift_.d_m, &drift_.d_r, &noise_.sigma_d,
                      &noise_.sigma_theta}) {
      is >> h;
      *v = detail::hex_to_dbl(h);
    }
    int noise_on = 0, done_flag = 0, coll = 0;
    is >> noise_on >> steps_ >> done_flag >> coll >> disabled_uses_;
    noise_.enabled = noise_on != 0;
    done_ = done_flag != 0;
    collided_ = coll != 0;
    size_t n_dis = 0;
    is >> n_dis;
    drift_.disabled.resize(n_dis);
    for (int& a : drift_.disabled) is >> a;
    std::array<uint64_t, 4> st{};
    for (auto& w : st) is >> w;
    rng_.set_state(st);
    if (!is) throw std::invalid_argument("Nav2dEnv::load_state: truncated state");
    build_occupancy();
    compute_distance_field();
  }

  const std::vector<Rect>& obstacles() const { return obstacles_; }
  double euclid_to_target() const { return std::hypot(tx_ - x_, ty_ - y_); }
  double heading() const { return heading_; }
  double x() const { return x_; }
  double y() const { return y_; }

  // Geodesic distance to target from a world position, via the 8-connected
  // free-space grid at grid_res.
  double geodesic(double x, double y) const {
    const int n = grid_n();
    int cx = cell_of(x), cy = cell_of(y);
    double best = field_[cy * n + cx];
    if (std::isfinite(best)) return best;
    // Contact positions can sit in a cell whose center is inside the inflated
    // margin; fall back to the nearest finite neighbor.
    for (int r = 1; r <= 2 && !std::isfinite(best); ++r)
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int nx = std::clamp(cx + dx, 0, n - 1), ny = std::clamp(cy + dy, 0, n - 1);
          best = std::min(best, field_[ny * n + nx]);
        }
    return std::isfinite(best) ? best : std::hypot(tx_ - x, ty_ - y);
  }

 private:
  int grid_n() const { return static_cast<int>(std::round(cfg_.room / cfg_.grid_res)); }
  int cell_of(double v) const {
    return std::clamp(static_cast<int>(v / cfg_.grid_res), 0, grid_n() - 1);
  }
  double cell_center(int c) const { return (c + 0.5) * cfg_.grid_res; }

  void generate_obstacles(Rng& rng) {
    obstacles_.clear();
    const int count = cfg_.min_obstacles +
                      static_cast<int>(rng.below(cfg_.max_obstacles - cfg_.min_obstacles + 1));
    for (int i = 0; i < count; ++i) {
      const double w = rng.uniform(cfg_.obstacle_min_side, cfg_.obstacle_max_side);
      const double h = rng.uniform(cfg_.obstacle_min_side, cfg_.obstacle_max_side);
      const double x0 = rng.uniform(0.0, cfg_.room - w);
      const double y0 = rng.uniform(0.0, cfg_.room - h);
      obstacles_.push_back({x0, y0, x0 + w, y0 + h});
    }
  }

  bool position_free(double x, double y) const {
    const double ra = cfg_.agent_radius;
    if (x < ra || y < ra || x > cfg_.room - ra || y > cfg_.room - ra) return false;
    for (const Rect& o : obstacles_)
      if (o.contains(x, y, ra)) return false;
    return true;
  }

  void build_occupancy() {
    const int n = grid_n();
    free_.assign(n * n, 0);
    for (int cy = 0; cy < n; ++cy)
      for (int cx = 0; cx < n; ++cx)
        free_[cy * n + cx] = position_free(cell_center(cx), cell_center(cy)) ? 1 : 0;
  }

  bool place_start_and_target(Rng& rng) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      double sx, sy, tx, ty;
      if (!sample_free(rng, sx, sy) || !sample_free(rng, tx, ty)) continue;
      if (std::hypot(tx - sx, ty - sy) < cfg_.min_start_target_dist) continue;
      tx_ = tx;
      ty_ = ty;
      compute_distance_field();
      const int n = grid_n();
      if (!std::isfinite(field_[cell_of(sy) * n + cell_of(sx)])) continue;
      x_ = start_x_ = sx;
      y_ = start_y_ = sy;
      heading_ = start_heading_ = wrap_deg(rng.uniform(-180.0, 180.0));
      return true;
    }
    return false;
  }

  bool sample_free(Rng& rng, double& x, double& y) {
    for (int i = 0; i < 200; ++i) {
      x = rng.uniform(cfg_.agent_radius, cfg_.room - cfg_.agent_radius);
      y = rng.uniform(cfg_.agent_radius, cfg_.room - cfg_.agent_radius);
      const int n = grid_n();
      if (position_free(x, y) && free_[cell_of(y) * n + cell_of(x)]) return true;
    }
    return false;
  }

  // Dijkstra from the target cell over free cells, 8-connected.
  void compute_distance_field() {
    const int n = grid_n();
    const double inf = std::numeric_limits<double>::infinity();
    field_.assign(n * n, inf);
    using QE = std::pair<double, int>;
    std::priority_queue<QE, std::vector<QE>, std::greater<>> pq;
    const int t = cell_of(ty_) * n + cell_of(tx_);
    if (!free_[t]) {
      // Target cell center may sit inside the inflated margin even though the
      // continuous position is valid; seed from the nearest free cell.
      int best = -1;
      double bd = inf;
      for (int cy = 0; cy < n; ++cy)
        for (int cx = 0; cx < n; ++cx)
          if (free_[cy * n + cx]) {
            const double d = std::hypot(cell_center(cx) - tx_, cell_center(cy) - ty_);
            if (d < bd) {
              bd = d;
              best = cy * n + cx;
            }
          }
      if (best < 0) return;
      field_[best] = 0.0;
      pq.push({0.0, best});
    } else {
      field_[t] = 0.0;
      pq.push({0.0, t});
    }
    const double straight = cfg_.grid_res, diag = cfg_.grid_res * std::sqrt(2.0);
    while (!pq.empty()) {
      auto [d, c] = pq.top();
      pq.pop();
      if (d > field_[c]) continue;
      const int cx = c % n, cy = c / n;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = cx + dx, ny = cy + dy;
          if (nx < 0 || ny < 0 || nx >= n || ny >= n) continue;
          const int nc = ny * n + nx;
          if (!free_[nc]) continue;
          const double nd = d + ((dx != 0 && dy != 0) ? diag : straight);
          if (nd < field_[nc]) {
            field_[nc] = nd;
            pq.push({nd, nc});
          }
        }
    }
  }

  // Maximum collision-free travel from (x,y) along unit (ux,uy), capped at
  // `want`. Obstacles are inflated by the agent radius; walls likewise.
  double max_travel(double x, double y, double ux, double uy, double want) const {
    double allowed = want;
    const double ra = cfg_.agent_radius;
    auto limit_axis = [&](double pos, double dir, double lo, double hi) {
      if (dir > 1e-12)
        allowed = std::min(allowed, (hi - pos) / dir);
      else if (dir < -1e-12)
        allowed = std::min(allowed, (lo - pos) / dir);
    };
    limit_axis(x, ux, ra, cfg_.room - ra);
    limit_axis(y, uy, ra, cfg_.room - ra);
    for (const Rect& o : obstacles_) {
      // Slab test against the inflated rectangle.
      const double x0 = o.x0 - ra, x1 = o.x1 + ra, y0 = o.y0 - ra, y1 = o.y1 + ra;
      double t0 = 0.0, t1 = allowed;
      bool miss = false;
      auto slab = [&](double p, double d, double lo, double hi) {
        if (std::abs(d) < 1e-12) {
          if (p < lo || p > hi) miss = true;
          return;
        }
        double e0 = (lo - p) / d, e1 = (hi - p) / d;
        if (e0 > e1) std::swap(e0, e1);
        t0 = std::max(t0, e0);
        t1 = std::min(t1, e1);
      };
      slab(x, ux, x0, x1);
      slab(y, uy, y0, y1);
      // t1 must be strictly positive: touching the face at t=0 while moving
      // away is not a hit.
      if (!miss && t0 <= t1 && t1 > 1e-12 && t0 <= allowed)
        allowed = std::min(allowed, std::max(0.0, t0));
    }
    return std::max(0.0, allowed);
  }

  double ray_distance(double angle_deg) const {
    const double r = angle_deg * M_PI / 180.0;
    const double ux = std::sin(r), uy = std::cos(r);
    double best = 2.0 * cfg_.room;
    auto wall = [&](double pos, double dir, double lo, double hi) {
      if (dir > 1e-12)
        best = std::min(best, (hi - pos) / dir);
      else if (dir < -1e-12)
        best = std::min(best, (lo - pos) / dir);
    };
    wall(x_, ux, 0.0, cfg_.room);
    wall(y_, uy, 0.0, cfg_.room);
    for (const Rect& o : obstacles_) {
      double t0 = 0.0, t1 = best;
      bool miss = false;
      auto slab = [&](double p, double d, double lo, double hi) {
        if (std::abs(d) < 1e-12) {
          if (p < lo || p > hi) miss = true;
          return;
        }
        double e0 = (lo - p) / d, e1 = (hi - p) / d;
        if (e0 > e1) std::swap(e0, e1);
        t0 = std::max(t0, e0);
        t1 = std::min(t1, e1);
      };
      slab(x_, ux, o.x0, o.x1);
      slab(y_, uy, o.y0, o.y1);
      if (!miss && t0 <= t1 && t1 >= 0.0 && t0 >= 0.0) best = std::min(best, t0);
    }
    return std::max(0.0, best);
  }

  std::vector<float> observation() const {
    std::vector<float> o;
    o.reserve(2 + cfg_.rays + 1);
    o.push_back(static_cast<float>(euclid_to_target()));
    const double bearing = std::atan2(tx_ - x_, ty_ - y_) * 180.0 / M_PI;
    o.push_back(static_cast<float>(wrap_deg(bearing - heading_)));
    for (int k = 0; k < cfg_.rays; ++k)
      o.push_back(static_cast<float>(ray_distance(heading_ + k * 360.0 / cfg_.rays)));
    o.push_back(collided_ ? 1.0f : 0.0f);
    return o;
  }

  Nav2dConfig cfg_;
  DriftSpec drift_;
  NoiseSpec noise_;
  Rng rng_;
  std::vector<Rect> obstacles_;
  std::vector<uint8_t> free_;
  std::vector<double> field_;
  double x_ = 0, y_ = 0, heading_ = 0, tx_ = 0, ty_ = 0;
  double start_x_ = 0, start_y_ = 0, start_heading_ = 0;
  double start_distance_ = 0, path_length_ = 0;
  int steps_ = 0, disabled_uses_ = 0;
  bool done_ = true, collided_ = false;
};

}  // namespace aap::sim
