#pragma once

#include "gnnbd/explainer.hpp"
#include "gnnbd/graph.hpp"
#include "gnnbd/models.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gnnbd {

/// Poison sampling or trigger setup impossible for this dataset/config
/// combination (CLI exit code 2).
struct AttackSetupError : ConfigError {
  using ConfigError::ConfigError;
};

struct AttackConfig {
  Strategy strategy = Strategy::kMias;
  int target_label = 0;
  Real poison_rate = 0.10;
  int trigger_size = 0;  // 0 resolves to floor(0.05 * d)
  Real trigger_value = 1.0;
  int epochs = 100;  // backdoored retraining epochs
  uint64_t seed = 0; // poison sampling seed
};

/// floor(0.05 * d) unless the config pins an explicit size.
int resolve_trigger_size(const AttackConfig& config, int num_features);

struct PoisonedTrainSet {
  std::vector<int> nodes;               // sorted, original label != target
  std::vector<RowVector> rows;          // triggered feature rows
  std::vector<FeatureMask> trigger_masks;
  int target_label = 0;
};

struct PoisonedTestSet {
  std::vector<int> nodes;               // all test nodes with label != target
  std::vector<RowVector> rows;          // triggered feature rows
  std::vector<FeatureMask> target_masks;
  std::vector<FeatureImportanceOrder> clean_orders;  // retained for extended-mask analysis
  int target_label = 0;
};

/// Seeded uniform sample of round(poison_rate * |train|) train nodes whose
/// label differs from the target label.
std::vector<int> sample_poison_nodes(const DataSplit& split, const std::vector<int>& labels,
                                     const AttackConfig& config);

/// Write the trigger value into the n strategy-selected positions.
RowVector inject_trigger(const RowVector& row, const FeatureImportanceOrder& order,
                         const AttackConfig& config);

/// Orders from the clean model for a node batch, optionally fanned out
/// over `parallel` worker threads (records are slot-indexed, so the result
/// does not depend on scheduling).
std::vector<FeatureImportanceOrder> compute_clean_orders(
    const TrainedModel& model, const CitationGraph& graph, const std::vector<int>& nodes,
    const std::vector<int>& labels, const ExplainerConfig& config, int parallel = 1);

/// Poisoned training set: sampled nodes explained under the clean model
/// with their true labels, triggered per strategy, relabeled to the
/// target. cached_orders (when given) must align with
/// sample_poison_nodes(...) output.
PoisonedTrainSet build_poisoned_train(const CitationGraph& graph, const DataSplit& split,
                                      const TrainedModel& clean_model, const AttackConfig& config,
                                      const ExplainerConfig& explain_config, int parallel = 1,
                                      const std::vector<FeatureImportanceOrder>* cached_orders = nullptr);

/// Poisoned testing set plus target masks over every test node whose label
/// differs from the target.
PoisonedTestSet build_poisoned_test(const CitationGraph& graph, const DataSplit& split,
                                    const TrainedModel& clean_model, const AttackConfig& config,
                                    const ExplainerConfig& explain_config, int parallel = 1,
                                    const std::vector<FeatureImportanceOrder>* cached_orders = nullptr);

/// Retrain from the clean parameters on the combined objective: NLL of all
/// train nodes on the clean graph plus NLL of the poisoned nodes (target
/// label) on the graph with every sampled row triggered simultaneously.
TrainedModel train_backdoored(const CitationGraph& graph, const DataSplit& split,
                              const TrainedModel& clean_model, const PoisonedTrainSet& poisoned,
                              const AttackConfig& config);

struct PredictedMasks {
  std::vector<FeatureMask> masks;
  std::vector<FeatureImportanceOrder> orders;
};

/// Explain each poisoned test node on its single-node-poisoned graph under
/// the backdoored model with the target label; mask = top-n positions.
PredictedMasks generate_predicted_masks(const TrainedModel& backdoored, const CitationGraph& graph,
                                        const PoisonedTestSet& poisoned, const AttackConfig& config,
                                        const ExplainerConfig& explain_config, int parallel = 1);

/// CSV rows: node_id, original_label, strategy, trigger_positions
/// (semicolon-separated), preceded by `# key = value` provenance lines.
void write_poisoned_train_csv(const std::string& path, const CitationGraph& graph,
                              const PoisonedTrainSet& poisoned, Strategy strategy,
                              const std::vector<std::string>& provenance);

}  // namespace gnnbd
