#include "gnnbd/experiment.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

struct CliOverrides {
  std::string config_path;
  std::vector<std::string> datasets;  // name=prefix or bare prefix
  std::string model;
  std::string strategy;
  std::string seed;
  std::string repeats;
  std::string out;
  std::string parallel;
  bool export_orders = false;
};

void add_common_options(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_path, "flat key = value config file");
  cmd->add_option("--dataset", o.datasets,
                  "dataset as name=prefix (loader reads prefix.content / prefix.cites); repeatable");
  cmd->add_option("--model", o.model, "gcn, gat, or both");
  cmd->add_option("--strategy", o.strategy, "mias, lias, or both");
  cmd->add_option("--seed", o.seed, "base seed (repeat k uses seed + k)");
  cmd->add_option("--repeats", o.repeats, "number of repeats");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--parallel", o.parallel, "worker threads for per-node explanation loops");
}

gnnbd::ExperimentConfig build_config(const CliOverrides& o) {
  gnnbd::ExperimentConfig config;
  if (!o.config_path.empty()) config = gnnbd::parse_config_file(o.config_path);
  for (const std::string& spec : o.datasets) {
    size_t eq = spec.find('=');
    std::string name, prefix;
    if (eq == std::string::npos) {
      prefix = spec;
      name = std::filesystem::path(spec).filename().string();
      if (name.empty()) throw gnnbd::ConfigError("cannot derive a dataset name from: " + spec);
    } else {
      name = spec.substr(0, eq);
      prefix = spec.substr(eq + 1);
    }
    gnnbd::apply_config_entry(config, "experiment.datasets", name);
    gnnbd::apply_config_entry(config, "dataset." + name + ".prefix", prefix);
  }
  if (!o.model.empty()) {
    gnnbd::apply_config_entry(config, "experiment.models",
                              o.model == "both" ? std::string("gcn gat") : o.model);
  }
  if (!o.strategy.empty()) gnnbd::apply_config_entry(config, "experiment.strategy", o.strategy);
  if (!o.seed.empty()) gnnbd::apply_config_entry(config, "experiment.seed", o.seed);
  if (!o.repeats.empty()) gnnbd::apply_config_entry(config, "experiment.repeats", o.repeats);
  if (!o.out.empty()) gnnbd::apply_config_entry(config, "experiment.out", o.out);
  if (!o.parallel.empty()) gnnbd::apply_config_entry(config, "experiment.parallel", o.parallel);
  if (o.export_orders) gnnbd::apply_config_entry(config, "experiment.export_orders", "true");
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feature-trigger backdoor attacks on GNN node classifiers"};
  app.require_subcommand(1);

  CliOverrides o;
  CLI::App* train_clean = app.add_subcommand("train-clean", "train clean models, save checkpoints");
  CLI::App* attack = app.add_subcommand("attack", "run the attack pipeline once per cell");
  CLI::App* explain = app.add_subcommand("explain", "attack pipeline plus recall/histogram CSVs");
  CLI::App* experiment = app.add_subcommand("experiment", "full repeated grid into report.json");
  for (CLI::App* cmd : {train_clean, attack, explain, experiment}) add_common_options(cmd, o);
  explain->add_flag("--export-orders", o.export_orders,
                    "also write per-node feature-importance orders as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    gnnbd::ExperimentConfig config = build_config(o);
    if (train_clean->parsed()) {
      gnnbd::cmd_train_clean(config);
    } else if (attack->parsed()) {
      gnnbd::cmd_attack(config);
    } else if (explain->parsed()) {
      gnnbd::cmd_explain(config);
    } else {
      gnnbd::cmd_experiment(config);
    }
    return 0;
  } catch (const gnnbd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const gnnbd::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const gnnbd::TrainError& e) {
    std::cerr << "training/explanation error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
