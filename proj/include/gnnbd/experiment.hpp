#pragma once

#include "gnnbd/backdoor.hpp"
#include "gnnbd/metrics.hpp"
#include "gnnbd/synthetic.hpp"

#include <string>
#include <vector>

namespace gnnbd {

struct DatasetRef {
  std::string name;
  std::string prefix;  // loader reads prefix + ".content" / ".cites"
};

struct ExperimentConfig {
  std::vector<DatasetRef> datasets;
  std::vector<Architecture> models = {Architecture::kGcn, Architecture::kGat};
  std::vector<Strategy> strategies = {Strategy::kMias, Strategy::kLias};
  int repeats = 10;
  uint64_t base_seed = 1;
  int target_label = 0;
  std::string out_dir = "out";
  int parallel = 1;
  Real split_fraction = 0.20;
  int histogram_bins = 10;
  int extension_gamma = 2;
  bool export_orders = false;

  TrainConfig train;          // seed/architecture filled per repeat
  ExplainerConfig explainer;  // seed filled per repeat
  AttackConfig attack;        // strategy/seed filled per cell

  void validate() const;
  /// Deterministic key=value provenance lines of every resolved setting.
  std::vector<std::string> resolved_entries() const;
};

/// Flat `section.key = value` text. '#' starts a comment. Unknown keys are
/// configuration errors.
ExperimentConfig parse_config_file(const std::string& path);
/// Apply one key=value entry (also used for CLI overrides).
void apply_config_entry(ExperimentConfig& config, const std::string& key, const std::string& value);

// per-repeat seed derivation (repeat seed = base + k per the experiment
// protocol; stage seeds are mixed from it)
uint64_t repeat_seed(const ExperimentConfig& config, int repeat);
uint64_t stage_seed(uint64_t repeat_seed, uint64_t stage_tag);

inline constexpr uint64_t kSplitStage = 1;
inline constexpr uint64_t kInitStage = 2;
inline constexpr uint64_t kSampleStage = 3;
inline constexpr uint64_t kExplainStage = 4;

struct StrategyOutcome {
  Strategy strategy = Strategy::kMias;
  Real asr = 0.0;
  Real cad = 0.0;
  std::vector<RecallRecord> records;           // mask length n
  std::vector<RecallRecord> extended_records;  // mask length gamma*n
  TrainedModel backdoored;
  PoisonedTrainSet poisoned_train;
  PoisonedTestSet poisoned_test;
  PredictedMasks predicted;
};

struct ModelRepeatOutcome {
  uint64_t seed = 0;
  Real clean_accuracy = 0.0;
  TrainedModel clean;
  DataSplit data_split;
  std::vector<StrategyOutcome> strategies;
};

/// One (dataset graph, model, repeat) pipeline pass: split, clean training,
/// clean explanations shared across strategies, then per-strategy poisoning,
/// backdoored retraining, ASR/CAD, and the mask-recall records at n and
/// gamma*n.
ModelRepeatOutcome run_model_repeat(const CitationGraph& graph, const ExperimentConfig& config,
                                    Architecture architecture, int repeat);

// CLI commands. All emit files under config.out_dir; failures surface as
// the exception types mapped to exit codes by the CLI.
void cmd_train_clean(const ExperimentConfig& config);
void cmd_attack(const ExperimentConfig& config);
void cmd_explain(const ExperimentConfig& config);
void cmd_experiment(const ExperimentConfig& config);

}  // namespace gnnbd
