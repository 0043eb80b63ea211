#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "aap/sim/drift.hpp"

namespace aap::sim {

// Wraps an angle in degrees to (-180, 180].
inline double wrap_deg(double a) { return a - 360.0 * std::ceil((a - 180.0) / 360.0); }

// Rotation-drift matrix applied to a commanded acceleration (degrees).
inline std::array<double, 2> apply_drift_rotation(const std::array<double, 2>& mag, double dr_deg) {
  const double r = dr_deg * M_PI / 180.0;
  const double c = std::cos(r), s = std::sin(r);
  return {c * mag[0] + s * mag[1], -s * mag[0] + c * mag[1]};
}

// Shared shaping: step penalty, success bonus, change in distance to target.
inline double shaped_reward(double prev_distance, double distance, bool success) {
  return -0.01 + (success ? 10.0 : 0.0) + (prev_distance - distance);
}

// Static description a policy needs to consume an environment's observations
// without holding an instance (PPO replays stored observations).
struct TaskInfo {
  TaskKind task{};
  int obs_dim = 0;
  int goal_offset = 0;  // goal signal is obs[goal_offset, goal_offset+goal_dim)
  int goal_dim = 0;
  int action_count = 0;
  int end_action = -1;  // index of End, or -1 when the task has none
  int state_change_dim = 0;
  std::vector<float> obs_scale;  // per-component normalization divisors
};

struct StepResult {
  std::vector<float> obs;
  double reward = 0.0;
  bool done = false;
  bool success = false;
  bool collision = false;
  bool disabled_action = false;
  // Ground-truth agent state-change caused by the executed action; empty for
  // End (no actuation to model).
  std::vector<float> state_change;
  // Actuation after drift, for trace export: particle -> applied acceleration,
  // nav2d -> (translation, rotation) actually applied.
  std::vector<float> applied;
};

class Env {
 public:
  virtual ~Env() = default;

  virtual TaskInfo info() const = 0;
  virtual std::vector<float> reset(const DriftSpec& drift, uint64_t episode_seed) = 0;
  virtual StepResult step(int action) = 0;
  virtual bool episode_active() const = 0;

  // Episode accounting for the metrics harness (task-relevant entity).
  virtual double start_distance() const = 0;    // d_start
  virtual double current_distance() const = 0;  // d_termination once done
  virtual double shortest_path() const = 0;     // L_n
  virtual double path_length() const = 0;       // P_n so far
  virtual int steps() const = 0;
  virtual int disabled_use_count() const = 0;

  // Ground-truth state for traces.
  virtual std::vector<float> state_vector() const = 0;

  // Exact state round-trip for training resume.
  virtual std::string save_state() const = 0;
  virtual void load_state(const std::string& s) = 0;
};

// Particle action table: 3 acceleration magnitudes toward 4 axis directions.
inline const std::array<std::array<double, 2>, 12>& particle_actions() {
  static const std::array<std::array<double, 2>, 12> table = {{
      {0.2, 0.0},
      {0.5, 0.0},
      {0.8, 0.0},
      {-0.2, 0.0},
      {-0.5, 0.0},
      {-0.8, 0.0},
      {0.0, 0.2},
      {0.0, 0.5},
      {0.0, 0.8},
      {0.0, -0.2},
      {0.0, -0.5},
      {0.0, -0.8},
  }};
  return table;
}

// Nav2d action table: Move(d) in meters, Rotate(theta) in degrees clockwise,
// and End. 16 actions total.
struct NavAction {
  enum class Kind { move, rotate, end };
  Kind kind = Kind::end;
  double value = 0.0;
};

inline const std::array<NavAction, 16>& nav2d_actions() {
  using K = NavAction::Kind;
  static const std::array<NavAction, 16> table = {{
      {K::move, 0.05},
      {K::move, 0.15},
      {K::move, 0.25},
      {K::rotate, 0.0},
      {K::rotate, 30.0},
      {K::rotate, -30.0},
      {K::rotate, 60.0},
      {K::rotate, -60.0},
      {K::rotate, 90.0},
      {K::rotate, -90.0},
      {K::rotate, 120.0},
      {K::rotate, -120.0},
      {K::rotate, 150.0},
      {K::rotate, -150.0},
      {K::rotate, 180.0},
      {K::end, 0.0},
  }};
  return table;
}

inline constexpr int kNav2dEndAction = 15;

// Clockwise (right) rotations are the positive angles below 180.
inline std::vector<int> disabled_set(DisabledSide side) {
  std::vector<int> out;
  if (side == DisabledSide::none) return out;
  const auto& table = nav2d_actions();
  for (int i = 0; i < static_cast<int>(table.size()); ++i) {
    if (table[i].kind != NavAction::Kind::rotate) continue;
    const double v = table[i].value;
    if (side == DisabledSide::right && v >= 30.0 && v <= 150.0) out.push_back(i);
    if (side == DisabledSide::left && v <= -30.0 && v >= -150.0) out.push_back(i);
  }
  return out;
}

namespace detail {

// Exact double round-trips for environment state serialization.
inline std::string dbl_to_hex(double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(bits));
  return buf;
}

inline double hex_to_dbl(const std::string& s) {
  const uint64_t bits = std::stoull(s, nullptr, 16);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace detail
}  // namespace aap::sim
