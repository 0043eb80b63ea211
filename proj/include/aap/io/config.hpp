#pragma once

#include <charconv>
#include <functional>
#include <map>
#include <memory>
#include <sstream>

#include "aap/policy/policy.hpp"
#include "aap/sim/nav2d.hpp"
#include "aap/sim/particle.hpp"
#include "aap/train/trainer.hpp"

namespace aap::io {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The run configuration: a flat, sectioned key=value file. Parsing is strict
// (unknown sections or keys are errors) and the resolved effective config can
// be re-serialized canonically; its hash ties checkpoints to their config.
struct RunConfig {
  sim::TaskKind task = sim::TaskKind::particle_pointnav;
  policy::Variant variant = policy::Variant::aap;
  std::vector<uint64_t> seeds = {1};
  std::string out = "runs/out";

  policy::NetDims net;
  train::TrainConfig train;

  double drift_train_dm = 0.0;
  double drift_train_dr = 90.0;
  std::vector<double> eval_dm, eval_dr;  // empty -> task defaults
  bool full_grid = false;
  sim::DisabledSide disable = sim::DisabledSide::none;

  sim::NoiseSpec noise;

  int env_max_steps = 128;
  double success_radius = 0.1;
  int rays = 12;
  double agent_radius = 0.15;
  double room = 5.0;
  int64_t scene_seed = -1;

  int eval_episodes = 100;
  uint64_t eval_seed = 9000;

  static const char* task_name(sim::TaskKind t) {
    switch (t) {
      case sim::TaskKind::particle_pointnav: return "particle-pointnav";
      case sim::TaskKind::particle_objectpush: return "particle-objectpush";
      case sim::TaskKind::nav2d_pointnav: return "nav2d-pointnav";
    }
    return "?";
  }

  // Task-dependent defaults, applied before user overrides.
  void apply_task_defaults() {
    net = policy::NetDims::defaults(task);
    if (sim::is_particle(task)) {
      train.total_steps = 2'000'000;
      train.rollout_len = 200;
      train.lr = 1e-3;
      drift_train_dm = 0.0;
      drift_train_dr = 90.0;
      noise.enabled = false;
      env_max_steps = 128;
      success_radius = 0.1;
    } else {
      train.total_steps = 5'000'000;
      train.rollout_len = 128;
      train.lr = 3e-4;
      drift_train_dm = 0.05;
      drift_train_dr = 15.0;
      noise.enabled = true;
      env_max_steps = 500;
      success_radius = 0.2;
    }
  }

  sim::DriftRegime train_regime() const {
    sim::DriftRegime r = sim::DriftRegime::train_default(task);
    r.p = drift_train_dm;
    r.q = drift_train_dr;
    return r;
  }

  sim::DriftRegime eval_regime() const {
    sim::DriftRegime r = train_regime();
    r.mode = sim::DriftRegime::Mode::eval;
    r.eval_dm = eval_dm;
    r.eval_dr = eval_dr;
    return r;
  }

  std::vector<int> disabled_actions() const {
    if (disable == sim::DisabledSide::none) return {};
    if (sim::is_particle(task))
      throw ConfigError("config: drift.disable applies to the nav2d task only");
    return sim::disabled_set(disable);
  }

  std::function<std::unique_ptr<sim::Env>()> env_factory() const {
    if (sim::is_particle(task)) {
      sim::ParticleConfig pc;
      pc.object_push = task == sim::TaskKind::particle_objectpush;
      pc.max_steps = env_max_steps;
      pc.success_radius = success_radius;
      return [pc] { return std::make_unique<sim::ParticleEnv>(pc); };
    }
    sim::Nav2dConfig nc;
    nc.max_steps = env_max_steps;
    nc.success_radius = success_radius;
    nc.rays = rays;
    nc.agent_radius = agent_radius;
    nc.room = room;
    nc.noise = noise;
    nc.fixed_scene_seed = scene_seed;
    return [nc] { return std::make_unique<sim::Nav2dEnv>(nc); };
  }

  sim::TaskInfo task_info() const { return probe_env()->info(); }

  std::unique_ptr<sim::Env> probe_env() const { return env_factory()(); }

  std::unique_ptr<policy::Policy> make_policy(uint64_t param_seed) const {
    return std::make_unique<policy::Policy>(variant, task_info(), net, param_seed);
  }

  static RunConfig parse(const std::string& text);
  std::string effective_text() const;
};

namespace detail_cfg {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

inline std::vector<double> split_doubles(const std::string& s, const std::string& where) {
  std::vector<double> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (...) {
      throw ConfigError("config: bad number '" + tok + "' in " + where);
    }
  }
  return out;
}

}  // namespace detail_cfg

inline std::string RunConfig::effective_text() const {
  using detail_cfg::fmt;
  std::ostringstream os;
  os << "task = " << task_name(task) << "\n";
  os << "policy = " << policy::variant_name(variant) << "\n";
  os << "seeds = ";
  for (size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
  os << "\n";
  os << "out = " << out << "\n";
  os << "\n[net]\n";
  os << "state_repr = " << net.state_repr << "\n";
  os << "goal_embed = " << net.goal_embed << "\n";
  os << "change_proj = " << net.change_proj << "\n";
  os << "memory = " << net.memory << "\n";
  os << "belief = " << net.belief << "\n";
  os << "tf_layers = " << net.tf_layers << "\n";
  os << "tf_heads = " << net.tf_heads << "\n";
  os << "fwd_hidden = " << net.fwd_hidden << "\n";
  os << "\n[train]\n";
  os << "total_steps = " << train.total_steps << "\n";
  os << "rollout_len = " << train.rollout_len << "\n";
  os << "num_envs = " << train.num_envs << "\n";
  os << "epochs = " << train.ppo.epochs << "\n";
  os << "minibatches = " << train.ppo.minibatches << "\n";
  os << "lr = " << fmt(train.lr) << "\n";
  os << "gamma = " << fmt(train.gamma) << "\n";
  os << "gae_lambda = " << fmt(train.gae_lambda) << "\n";
  os << "clip = " << fmt(train.ppo.clip) << "\n";
  os << "value_coef = " << fmt(train.ppo.value_coef) << "\n";
  os << "entropy_coef = " << fmt(train.ppo.entropy_coef) << "\n";
  os << "forward_coef = " << fmt(train.ppo.forward_coef) << "\n";
  os << "max_grad_norm = " << fmt(train.ppo.max_grad_norm) << "\n";
  os << "checkpoint_every = " << train.checkpoint_every << "\n";
  os << "workers = " << train.workers << "\n";
  os << "\n[drift]\n";
  os << "train_dm = " << fmt(drift_train_dm) << "\n";
  os << "train_dr = " << fmt(drift_train_dr) << "\n";
  os << "eval_dm = " << detail_cfg::join(eval_dm) << "\n";
  os << "eval_dr = " << detail_cfg::join(eval_dr) << "\n";
  os << "full_grid = " << (full_grid ? "true" : "false") << "\n";
  os << "disable = "
     << (disable == sim::DisabledSide::none ? "none"
                                            : disable == sim::DisabledSide::left ? "left" : "right")
     << "\n";
  os << "\n[noise]\n";
  os << "enabled = " << (noise.enabled ? "true" : "false") << "\n";
  os << "sigma_d = " << fmt(noise.sigma_d) << "\n";
  os << "sigma_theta = " << fmt(noise.sigma_theta) << "\n";
  os << "\n[env]\n";
  os << "max_steps = " << env_max_steps << "\n";
  os << "success_radius = " << fmt(success_radius) << "\n";
  os << "rays = " << rays << "\n";
  os << "agent_radius = " << fmt(agent_radius) << "\n";
  os << "room = " << fmt(room) << "\n";
  os << "scene_seed = " << scene_seed << "\n";
  os << "\n[eval]\n";
  os << "episodes_per_cell = " << eval_episodes << "\n";
  os << "eval_seed = " << eval_seed << "\n";
  return os.str();
}

inline RunConfig RunConfig::parse(const std::string& text) {
  // First pass: collect (section, key, value) triples with strict syntax.
  struct Item {
    std::string section, key, value;
    int line;
  };
  std::vector<Item> items;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(lineno) +
                                                ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    items.push_back({section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno});
  }

  // Task first, then defaults, then the remaining overrides in file order.
  RunConfig cfg;
  bool task_found = false;
  for (const Item& it : items)
    if (it.section.empty() && it.key == "task") {
      const std::string& v = it.value;
      if (v == "particle-pointnav")
        cfg.task = sim::TaskKind::particle_pointnav;
      else if (v == "particle-objectpush")
        cfg.task = sim::TaskKind::particle_objectpush;
      else if (v == "nav2d-pointnav")
        cfg.task = sim::TaskKind::nav2d_pointnav;
      else
        throw ConfigError("config: unknown task '" + v + "'");
      task_found = true;
    }
  if (!task_found) throw ConfigError("config: missing required field 'task'");
  cfg.apply_task_defaults();

  using Setter = std::function<void(RunConfig&, const std::string&)>;
  auto num = [](auto RunConfig::* field) {
    return Setter([field](RunConfig& c, const std::string& v) {
      try {
        using T = std::decay_t<decltype(c.*field)>;
        if constexpr (std::is_floating_point_v<T>)
          c.*field = std::stod(v);
        else
          c.*field = static_cast<T>(std::stoll(v));
      } catch (...) {
        throw ConfigError("config: bad numeric value '" + v + "'");
      }
    });
  };
  auto boolean = [](auto RunConfig::* field) {
    return Setter([field](RunConfig& c, const std::string& v) {
      if (v == "true" || v == "1")
        c.*field = true;
      else if (v == "false" || v == "0")
        c.*field = false;
      else
        throw ConfigError("config: expected true/false, got '" + v + "'");
    });
  };

  std::map<std::string, Setter> setters;
  setters["/task"] = [](RunConfig&, const std::string&) {};  // handled above
  setters["/policy"] = [](RunConfig& c, const std::string& v) {
    auto var = policy::variant_from_name(v);
    if (!var) throw ConfigError("config: unknown policy '" + v + "'");
    c.variant = *var;
  };
  setters["/seeds"] = [](RunConfig& c, const std::string& v) {
    c.seeds.clear();
    std::istringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ','))
      try {
        c.seeds.push_back(std::stoull(tok));
      } catch (...) {
        throw ConfigError("config: bad seed '" + tok + "'");
      }
    if (c.seeds.empty()) throw ConfigError("config: seeds is empty");
  };
  setters["/out"] = [](RunConfig& c, const std::string& v) { c.out = v; };

  auto net_field = [&](const char* name, int64_t policy::NetDims::* f) {
    setters[std::string("net/") + name] = [f](RunConfig& c, const std::string& v) {
      try {
        c.net.*f = std::stoll(v);
      } catch (...) {
        throw ConfigError("config: bad numeric value '" + v + "'");
      }
    };
  };
  net_field("state_repr", &policy::NetDims::state_repr);
  net_field("goal_embed", &policy::NetDims::goal_embed);
  net_field("change_proj", &policy::NetDims::change_proj);
  net_field("memory", &policy::NetDims::memory);
  net_field("belief", &policy::NetDims::belief);
  net_field("tf_layers", &policy::NetDims::tf_layers);
  net_field("tf_heads", &policy::NetDims::tf_heads);
  net_field("fwd_hidden", &policy::NetDims::fwd_hidden);

  auto train_field = [&](const char* name, auto train::TrainConfig::* f) {
    setters[std::string("train/") + name] = [f](RunConfig& c, const std::string& v) {
      try {
        using T = std::decay_t<decltype(c.train.*f)>;
        if constexpr (std::is_floating_point_v<T>)
          c.train.*f = std::stod(v);
        else
          c.train.*f = static_cast<T>(std::stoll(v));
      } catch (...) {
        throw ConfigError("config: bad numeric value '" + v + "'");
      }
    };
  };
  train_field("total_steps", &train::TrainConfig::total_steps);
  train_field("rollout_len", &train::TrainConfig::rollout_len);
  train_field("num_envs", &train::TrainConfig::num_envs);
  train_field("lr", &train::TrainConfig::lr);
  train_field("gamma", &train::TrainConfig::gamma);
  train_field("gae_lambda", &train::TrainConfig::gae_lambda);
  train_field("checkpoint_every", &train::TrainConfig::checkpoint_every);
  train_field("workers", &train::TrainConfig::workers);
  auto ppo_field = [&](const char* name, auto train::PpoConfig::* f) {
    setters[std::string("train/") + name] = [f](RunConfig& c, const std::string& v) {
      try {
        using T = std::decay_t<decltype(c.train.ppo.*f)>;
        if constexpr (std::is_floating_point_v<T>)
          c.train.ppo.*f = std::stod(v);
        else
          c.train.ppo.*f = static_cast<T>(std::stoll(v));
      } catch (...) {
        throw ConfigError("config: bad numeric value '" + v + "'");
      }
    };
  };
  ppo_field("epochs", &train::PpoConfig::epochs);
  ppo_field("minibatches", &train::PpoConfig::minibatches);
  ppo_field("clip", &train::PpoConfig::clip);
  ppo_field("value_coef", &train::PpoConfig::value_coef);
  ppo_field("entropy_coef", &train::PpoConfig::entropy_coef);
  ppo_field("forward_coef", &train::PpoConfig::forward_coef);
  ppo_field("max_grad_norm", &train::PpoConfig::max_grad_norm);

  setters["drift/train_dm"] = num(&RunConfig::drift_train_dm);
  setters["drift/train_dr"] = num(&RunConfig::drift_train_dr);
  setters["drift/eval_dm"] = [](RunConfig& c, const std::string& v) {
    c.eval_dm = detail_cfg::split_doubles(v, "drift.eval_dm");
  };
  setters["drift/eval_dr"] = [](RunConfig& c, const std::string& v) {
    c.eval_dr = detail_cfg::split_doubles(v, "drift.eval_dr");
  };
  setters["drift/full_grid"] = boolean(&RunConfig::full_grid);
  setters["drift/disable"] = [](RunConfig& c, const std::string& v) {
    if (v == "none")
      c.disable = sim::DisabledSide::none;
    else if (v == "left")
      c.disable = sim::DisabledSide::left;
    else if (v == "right")
      c.disable = sim::DisabledSide::right;
    else
      throw ConfigError("config: drift.disable must be none/left/right, got '" + v + "'");
  };

  setters["noise/enabled"] = [](RunConfig& c, const std::string& v) {
    if (v == "true" || v == "1")
      c.noise.enabled = true;
    else if (v == "false" || v == "0")
      c.noise.enabled = false;
    else
      throw ConfigError("config: expected true/false, got '" + v + "'");
  };
  setters["noise/sigma_d"] = [](RunConfig& c, const std::string& v) {
    try {
      c.noise.sigma_d = std::stod(v);
    } catch (...) {
      throw ConfigError("config: bad numeric value '" + v + "'");
    }
  };
  setters["noise/sigma_theta"] = [](RunConfig& c, const std::string& v) {
    try {
      c.noise.sigma_theta = std::stod(v);
    } catch (...) {
      throw ConfigError("config: bad numeric value '" + v + "'");
    }
  };

  setters["env/max_steps"] = num(&RunConfig::env_max_steps);
  setters["env/success_radius"] = num(&RunConfig::success_radius);
  setters["env/rays"] = num(&RunConfig::rays);
  setters["env/agent_radius"] = num(&RunConfig::agent_radius);
  setters["env/room"] = num(&RunConfig::room);
  setters["env/scene_seed"] = num(&RunConfig::scene_seed);

  setters["eval/episodes_per_cell"] = num(&RunConfig::eval_episodes);
  setters["eval/eval_seed"] = num(&RunConfig::eval_seed);

  for (const Item& it : items) {
    const std::string full = it.section + "/" + it.key;
    auto found = setters.find(full);
    if (found == setters.end())
      throw ConfigError("config line " + std::to_string(it.line) + ": unknown key '" +
                        (it.section.empty() ? it.key : it.section + "." + it.key) + "'");
    try {
      found->second(cfg, it.value);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (field '" +
                        (it.section.empty() ? it.key : it.section + "." + it.key) + "', line " +
                        std::to_string(it.line) + ")");
    }
  }

  cfg.train.validate();
  cfg.noise.validate();
  if (cfg.eval_episodes <= 0) throw ConfigError("config: eval.episodes_per_cell must be positive");
  (void)cfg.disabled_actions();  // validates disable vs task
  return cfg;
}

}  // namespace aap::io
