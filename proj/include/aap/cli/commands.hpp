#pragma once

#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "aap/cli/plot.hpp"
#include "aap/eval/harness.hpp"
#include "aap/io/config.hpp"

namespace aap::cli {

namespace fs = std::filesystem;

// Output root override for batch runs: relative output paths are placed
// under $AAP_OUT_ROOT when it is set.
inline std::string resolve_out(const std::string& out) {
  const char* root = std::getenv("AAP_OUT_ROOT");
  if (!root || *root == '\0' || fs::path(out).is_absolute()) return out;
  return (fs::path(root) / out).string();
}

inline io::RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io::ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return io::RunConfig::parse(ss.str());
}

struct TrainArgs {
  std::string config_path;
  std::vector<uint64_t> seed_override;
  std::string out_override;
  int workers_override = 0;
  bool dry_run = false;
};

inline int cmd_train(const TrainArgs& args, std::ostream& err = std::cerr) {
  try {
    io::RunConfig cfg = load_config_file(args.config_path);
    if (!args.seed_override.empty()) cfg.seeds = args.seed_override;
    if (!args.out_override.empty()) cfg.out = args.out_override;
    if (args.workers_override > 0) cfg.train.workers = args.workers_override;
    if (args.dry_run) {
      std::cout << cfg.effective_text();
      return 0;
    }
    const std::string out_root = resolve_out(cfg.out);
    for (uint64_t seed : cfg.seeds) {
      io::RunConfig run_cfg = cfg;
      run_cfg.seeds = {seed};
      run_cfg.train.seed = seed;
      const std::string dir = out_root + "/seed_" + std::to_string(seed);
      auto pol = run_cfg.make_policy(seed);
      train::Collector col(*pol, run_cfg.env_factory(), run_cfg.train.num_envs,
                           run_cfg.train_regime(), run_cfg.disabled_actions(), seed,
                           run_cfg.train.workers);
      train::Trainer tr(*pol, col, run_cfg.train, dir, run_cfg.effective_text());
      // Resume from the newest checkpoint when one exists.
      std::string latest;
      if (fs::exists(dir))
        for (const auto& e : fs::directory_iterator(dir)) {
          const std::string n = e.path().filename().string();
          if (n.rfind("ckpt_", 0) == 0 && n.find("final") == std::string::npos &&
              (latest.empty() || n > fs::path(latest).filename().string()))
            latest = e.path().string();
        }
      if (!latest.empty()) {
        io::CheckpointReader r(latest);
        tr.restore(r);
        err << "resuming seed " << seed << " from " << latest << " (step " << tr.steps_done()
            << ")\n";
      }
      tr.run();
      err << "seed " << seed << " finished at step " << tr.steps_done() << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << "\n";
    return 1;
  }
}

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string config_path;  // optional; embedded config used when empty
  std::string out;
  sim::DisabledSide disable = sim::DisabledSide::none;
  bool has_drift_cell = false;
  double cell_dm = 0.0, cell_dr = 0.0;
  bool full_grid = false;
  int episodes_override = 0;
  bool force = false;
  bool trace = false;
};

inline std::string record_to_json(const eval::EpisodeRecord& r) {
  nlohmann::json j{{"success", r.success},
                   {"path_length", r.path_length},
                   {"shortest_path", r.shortest_path},
                   {"start_distance", r.start_distance},
                   {"final_distance", r.final_distance},
                   {"steps", r.steps},
                   {"reward", r.total_reward},
                   {"disabled_uses", r.disabled_uses},
                   {"drift_dm", r.drift_dm},
                   {"drift_dr", r.drift_dr},
                   {"seed", r.seed}};
  return j.dump();
}

inline int cmd_eval(const EvalArgs& args, std::ostream& err = std::cerr) {
  try {
    if (args.checkpoints.empty()) throw std::runtime_error("eval: no checkpoints given");
    if (args.out.empty()) throw std::runtime_error("eval: missing --out");
    const std::string out_dir = resolve_out(args.out);
    fs::create_directories(out_dir);

    std::vector<std::vector<eval::CellMetrics>> per_seed;
    std::ofstream records(out_dir + "/records.jsonl", std::ios::trunc);
    std::ofstream trace_file;
    if (args.trace) trace_file.open(out_dir + "/trace.jsonl", std::ios::trunc);

    std::vector<sim::DriftCell> cells;
    for (size_t ci = 0; ci < args.checkpoints.size(); ++ci) {
      io::CheckpointReader reader(args.checkpoints[ci]);
      io::RunConfig cfg = args.config_path.empty()
                              ? io::RunConfig::parse(reader.config_text())
                              : load_config_file(args.config_path);
      if (!args.config_path.empty() &&
          Rng::hash64(cfg.effective_text()) != reader.config_hash() && !args.force)
        throw std::runtime_error(
            "eval: checkpoint config hash does not match --config (use --force to override)");
      if (args.disable != sim::DisabledSide::none) cfg.disable = args.disable;
      if (args.full_grid) cfg.full_grid = true;
      if (args.episodes_override > 0) cfg.eval_episodes = args.episodes_override;

      auto pol = cfg.make_policy(/*param seed irrelevant, overwritten*/ 0);
      train::load_params(reader, pol->params(), "param.");

      if (ci == 0) {
        if (args.has_drift_cell) {
          auto regime = cfg.eval_regime();
          cells = {{args.cell_dm, args.cell_dr,
                    regime.seen_in_training(args.cell_dm, args.cell_dr)}};
        } else {
          cells = sim::eval_grid(cfg.eval_regime(), cfg.full_grid);
        }
      }

      eval::EvalOptions opt;
      opt.episodes_per_cell = cfg.eval_episodes;
      opt.seed = cfg.eval_seed;
      opt.disabled = cfg.disabled_actions();
      opt.factory = cfg.env_factory();
      if (args.trace)
        opt.trace = [&](const sim::DriftCell& cell, int ep, int step, int action,
                        const sim::StepResult& sr, const std::vector<float>& state) {
          if (ep != 0) return;  // one traced episode per cell keeps files sane
          nlohmann::json j{{"dm", cell.d_m},       {"dr", cell.d_r}, {"episode", ep},
                           {"step", step},         {"action", action}, {"reward", sr.reward},
                           {"applied", sr.applied}, {"state", state}};
          trace_file << j.dump() << "\n";
        };

      auto [metrics, recs] = eval::run_grid(*pol, cells, opt);
      per_seed.push_back(std::move(metrics));
      for (const auto& r : recs) records << record_to_json(r) << "\n";
      err << "evaluated " << args.checkpoints[ci] << " over " << cells.size() << " cells\n";
    }

    eval::MetricsSummary summary = eval::summarize(per_seed);
    std::ofstream sum(out_dir + "/summary.tsv", std::ios::trunc);
    sum << eval::summary_to_tsv(summary);
    return 0;
  } catch (const std::exception& e) {
    err << "eval: " << e.what() << "\n";
    return 1;
  }
}

struct SweepArgs {
  std::string config_path;
  std::string out_override;
  int workers_override = 0;
};

inline int cmd_sweep(const SweepArgs& args, std::ostream& err = std::cerr) {
  TrainArgs ta;
  ta.config_path = args.config_path;
  ta.out_override = args.out_override;
  ta.workers_override = args.workers_override;
  if (int rc = cmd_train(ta, err)) return rc;
  try {
    io::RunConfig cfg = load_config_file(args.config_path);
    if (!args.out_override.empty()) cfg.out = args.out_override;
    EvalArgs ea;
    for (uint64_t seed : cfg.seeds)
      ea.checkpoints.push_back(resolve_out(cfg.out) + "/seed_" + std::to_string(seed) +
                               "/ckpt_final.aap");
    ea.out = cfg.out + "/eval";
    return cmd_eval(ea, err);
  } catch (const std::exception& e) {
    err << "sweep: " << e.what() << "\n";
    return 1;
  }
}

struct PlotArgs {
  std::vector<std::string> summaries;
  std::string out;
};

inline int cmd_plot(const PlotArgs& args, std::ostream& err = std::cerr) {
  try {
    if (args.summaries.empty()) throw std::runtime_error("plot: no summary files");
    if (args.out.empty()) throw std::runtime_error("plot: missing --out");
    const std::string out_dir = resolve_out(args.out);
    fs::create_directories(out_dir);

    std::vector<std::pair<std::string, eval::MetricsSummary>> inputs;
    for (const std::string& path : args.summaries) {
      std::ifstream in(path);
      if (!in) throw std::runtime_error("plot: cannot open " + path);
      std::stringstream ss;
      ss << in.rdbuf();
      inputs.emplace_back(fs::path(path).parent_path().filename().string() + "/" +
                              fs::path(path).stem().string(),
                          eval::summary_from_tsv(ss.str()));
    }
    // all summaries must share the drift grid
    for (const auto& [name, s] : inputs) {
      if (s.rows.size() != inputs[0].second.rows.size())
        throw std::runtime_error("plot: summaries have different drift grids");
      for (size_t i = 0; i < s.rows.size(); ++i)
        if (s.rows[i].dm != inputs[0].second.rows[i].dm ||
            s.rows[i].dr != inputs[0].second.rows[i].dr)
          throw std::runtime_error("plot: summaries have different drift grids");
    }

    auto make_series = [&](bool rotation_axis) {
      std::vector<PlotSeries> out;
      for (const auto& [name, s] : inputs) {
        PlotSeries ps;
        ps.label = name;
        for (const auto& r : s.rows) {
          const bool is_rot = r.dm == 0.0;
          if (is_rot != rotation_axis) continue;
          ps.x.push_back(rotation_axis ? r.dr : r.dm);
          ps.mean.push_back(r.mean[0]);
          ps.stddev.push_back(r.stddev[0]);
        }
        if (!ps.x.empty()) out.push_back(std::move(ps));
      }
      return out;
    };

    int written = 0;
    auto rot = make_series(true);
    if (!rot.empty()) {
      std::ofstream f(out_dir + "/sr_vs_rotation_drift.svg", std::ios::trunc);
      f << svg_chart("success rate vs rotation drift", "rotation drift (degrees)", rot);
      ++written;
    }
    auto mov = make_series(false);
    if (!mov.empty()) {
      std::ofstream f(out_dir + "/sr_vs_movement_drift.svg", std::ios::trunc);
      f << svg_chart("success rate vs movement drift", "movement drift (meters)", mov);
      ++written;
    }
    if (written == 0) throw std::runtime_error("plot: no plottable cells in the summaries");

    // verbatim copy of the input tables, concatenated with their labels
    std::ofstream table(out_dir + "/summary_table.tsv", std::ios::trunc);
    for (const auto& [name, s] : inputs) {
      table << "# " << name << "\n";
      table << eval::summary_to_tsv(s);
    }
    return 0;
  } catch (const std::exception& e) {
    err << "plot: " << e.what() << "\n";
    return 1;
  }
}

inline int cmd_inspect(const std::string& path, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  try {
    io::CheckpointReader r(path);
    out << "checkpoint: " << path << "\n";
    out << "steps: " << r.steps() << "\n";
    out << "config_hash: " << std::hex << r.config_hash() << std::dec << "\n";
    int64_t total = 0;
    for (const std::string& name : r.array_names()) {
      const auto& shape = r.array_shape(name);
      out << "  " << name << " [";
      int64_t n = 1;
      for (size_t i = 0; i < shape.size(); ++i) {
        out << (i ? "x" : "") << shape[i];
        n *= shape[i];
      }
      out << "] (" << n << ")\n";
      if (name.rfind("param.", 0) == 0) total += n;
    }
    out << "parameters: " << total << "\n";
    out << "resume state: " << (r.has_kv("collector") ? "yes" : "no") << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "inspect-checkpoint: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace aap::cli
