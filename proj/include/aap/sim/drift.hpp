#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "aap/core/rng.hpp"

namespace aap::sim {

enum class TaskKind { particle_pointnav, particle_objectpush, nav2d_pointnav };

inline bool is_particle(TaskKind t) { return t != TaskKind::nav2d_pointnav; }

// Episode-fixed action perturbation: extra translation on Move, extra
// rotation on Rotate (nav2d) or a rotation of the commanded acceleration
// (particle), plus an optional set of dead actions.
struct DriftSpec {
  double d_m = 0.0;  // meters
  double d_r = 0.0;  // degrees
  std::vector<int> disabled;

  bool is_disabled(int action) const {
    return std::find(disabled.begin(), disabled.end(), action) != disabled.end();
  }
};

struct DriftCell {
  double d_m = 0.0;
  double d_r = 0.0;
  bool seen = false;  // inside the training ranges
};

struct DriftRegime {
  enum class Mode { train, eval };
  Mode mode = Mode::train;
  TaskKind task = TaskKind::nav2d_pointnav;

  // Training half-ranges: d_m ~ U(-p, p), d_r ~ U(-q, q).
  double p = 0.05;
  double q = 15.0;

  // Evaluation value lists; empty means the task defaults below.
  std::vector<double> eval_dm;
  std::vector<double> eval_dr;

  static DriftRegime train_default(TaskKind task) {
    DriftRegime r;
    r.mode = Mode::train;
    r.task = task;
    if (is_particle(task)) {
      r.p = 0.0;    // particle tasks have no movement drift
      r.q = 90.0;
    }
    return r;
  }

  static DriftRegime eval_default(TaskKind task) {
    DriftRegime r = train_default(task);
    r.mode = Mode::eval;
    return r;
  }

  std::vector<double> eval_dm_values() const {
    if (!eval_dm.empty()) return eval_dm;
    if (is_particle(task)) return {};
    return {-0.05, 0.05, -0.1, 0.1, 0.2, 0.4};
  }

  std::vector<double> eval_dr_values() const {
    if (!eval_dr.empty()) return eval_dr;
    if (is_particle(task)) return {-120.0, 120.0, -135.0, 135.0, -150.0, 150.0, 180.0};
    return {-15.0, 15.0, -30.0, 30.0, -45.0, 45.0, -90.0, 90.0, -135.0, 135.0, 180.0};
  }

  bool seen_in_training(double dm, double dr) const {
    return std::abs(dm) <= p + 1e-12 && std::abs(dr) <= q + 1e-12;
  }
};

inline DriftSpec sample_train(const DriftRegime& r, Rng& rng) {
  if (r.mode != DriftRegime::Mode::train)
    throw std::logic_error("sample_train: regime is not in train mode");
  DriftSpec d;
  d.d_m = r.p > 0.0 ? rng.uniform(-r.p, r.p) : 0.0;
  d.d_r = r.q > 0.0 ? rng.uniform(-r.q, r.q) : 0.0;
  return d;
}

// Evaluation drift cells. The headline sweep varies one drift family at a
// time (the other held at zero); `full` crosses both lists.
inline std::vector<DriftCell> eval_grid(const DriftRegime& r, bool full = false) {
  if (r.mode != DriftRegime::Mode::eval)
    throw std::logic_error("eval_grid: regime is not in eval mode");
  const auto dms = r.eval_dm_values();
  const auto drs = r.eval_dr_values();
  std::vector<DriftCell> cells;
  if (full && !dms.empty()) {
    for (double dm : dms)
      for (double dr : drs) cells.push_back({dm, dr, r.seen_in_training(dm, dr)});
    return cells;
  }
  for (double dm : dms) cells.push_back({dm, 0.0, r.seen_in_training(dm, 0.0)});
  for (double dr : drs) cells.push_back({0.0, dr, r.seen_in_training(0.0, dr)});
  return cells;
}

enum class DisabledSide { none, left, right };

}  // namespace aap::sim
