#include <CLI11.hpp>

#include "aap/cli/commands.hpp"

// Command-line entry points for batch experiments: train, eval, sweep
// (train + eval grid), plot, inspect-checkpoint.
int main(int argc, char** argv) {
  CLI::App app{"action-adaptive policy experiments"};
  app.require_subcommand(1);

  aap::cli::TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train policies, one run per seed");
  train->add_option("--config", train_args.config_path, "run configuration file")->required();
  train->add_option("--seed", train_args.seed_override, "override the config's seed list");
  train->add_option("--out", train_args.out_override, "override the output directory");
  train->add_option("--workers", train_args.workers_override, "parallel environment workers");
  train->add_flag("--dry-run", train_args.dry_run,
                  "validate the config and print the resolved effective config");

  aap::cli::EvalArgs eval_args;
  std::string disable_str = "none";
  std::string drift_cell;
  CLI::App* eval = app.add_subcommand("eval", "drift-sweep evaluation of checkpoints");
  eval->add_option("--ckpt", eval_args.checkpoints, "checkpoint file(s), one per training seed")
      ->required();
  eval->add_option("--config", eval_args.config_path,
                   "config override (defaults to the checkpoint's embedded config)");
  eval->add_option("--out", eval_args.out, "output directory")->required();
  eval->add_option("--disable", disable_str, "disable a rotation side: left or right");
  eval->add_option("--drift-cell", drift_cell, "evaluate one drift cell only, as dm,dr");
  eval->add_flag("--full-grid", eval_args.full_grid, "full movement x rotation cross product");
  eval->add_option("--episodes", eval_args.episodes_override, "episodes per drift cell");
  eval->add_flag("--force", eval_args.force, "evaluate even if the config hash mismatches");
  eval->add_flag("--trace", eval_args.trace, "write a per-step trace of one episode per cell");

  aap::cli::SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand("sweep", "train every seed, then evaluate the grid");
  sweep->add_option("--config", sweep_args.config_path, "run configuration file")->required();
  sweep->add_option("--out", sweep_args.out_override, "override the output directory");
  sweep->add_option("--workers", sweep_args.workers_override, "parallel environment workers");

  aap::cli::PlotArgs plot_args;
  CLI::App* plot = app.add_subcommand("plot", "success-rate-vs-drift charts from summaries");
  plot->add_option("--summary", plot_args.summaries, "summary.tsv files to overlay")->required();
  plot->add_option("--out", plot_args.out, "output directory")->required();

  std::string inspect_path;
  CLI::App* inspect = app.add_subcommand("inspect-checkpoint", "print a checkpoint manifest");
  inspect->add_option("path", inspect_path, "checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) return aap::cli::cmd_train(train_args);
  if (eval->parsed()) {
    if (disable_str == "left")
      eval_args.disable = aap::sim::DisabledSide::left;
    else if (disable_str == "right")
      eval_args.disable = aap::sim::DisabledSide::right;
    else if (disable_str != "none") {
      std::cerr << "eval: --disable must be left, right or none\n";
      return 1;
    }
    if (!drift_cell.empty()) {
      const size_t comma = drift_cell.find(',');
      if (comma == std::string::npos) {
        std::cerr << "eval: --drift-cell expects dm,dr\n";
        return 1;
      }
      try {
        eval_args.cell_dm = std::stod(drift_cell.substr(0, comma));
        eval_args.cell_dr = std::stod(drift_cell.substr(comma + 1));
      } catch (...) {
        std::cerr << "eval: --drift-cell expects numbers as dm,dr\n";
        return 1;
      }
      eval_args.has_drift_cell = true;
    }
    return aap::cli::cmd_eval(eval_args);
  }
  if (sweep->parsed()) return aap::cli::cmd_sweep(sweep_args);
  if (plot->parsed()) return aap::cli::cmd_plot(plot_args);
  if (inspect->parsed()) return aap::cli::cmd_inspect(inspect_path);
  return 1;
}
