#pragma once

#include "gnnbd/models.hpp"

#include <string>
#include <vector>

namespace gnnbd {

enum class Strategy { kMias, kLias };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct ExplainerConfig {
  int steps = 100;
  Real mask_learning_rate = 0.01;
  Real lambda_size = 0.1;
  Real lambda_entropy = 0.1;
  Real init_scale = 0.1;  // stddev of the mask-parameter init
  uint64_t seed = 0;
};

/// Descending feature-importance permutation for one node, plus the
/// learned sigmoid(mask) scores in that order. Ties break toward the
/// lower feature index.
struct FeatureImportanceOrder {
  std::vector<int> order;
  std::vector<Real> scores;
  Real initial_objective = 0.0;
  Real final_objective = 0.0;
};

struct FeatureMask {
  std::vector<uint8_t> bits;

  int size() const { return static_cast<int>(bits.size()); }
  int popcount() const;
};

/// GNNExplainer-style feature mask optimization. Only the target node's
/// own feature row is masked: x_v ⊙ sigmoid(m). Minimizes
///   NLL(model at v, label) + λ_size mean(p) + λ_ent mean(H(p))
/// by Adam for `steps` steps, where p = sigmoid(m). When row_override is
/// given it replaces the node's feature row (the single-node-poisoned
/// graph used for predicted masks). Deterministic per (model, graph,
/// node, label, config); the per-node RNG seed is mix_seed(config.seed,
/// node).
FeatureImportanceOrder explain_node(const TrainedModel& model, const CitationGraph& graph,
                                    const std::vector<std::vector<int>>& neighbors, int node,
                                    int label, const ExplainerConfig& config,
                                    const RowVector* row_override = nullptr);

/// Convenience overload computing the neighbor lists itself.
FeatureImportanceOrder explain_node(const TrainedModel& model, const CitationGraph& graph,
                                    int node, int label, const ExplainerConfig& config,
                                    const RowVector* row_override = nullptr);

/// Indices sorted by descending score, ties toward the lower index.
std::vector<int> descending_order(const std::vector<Real>& scores);

/// MIAS marks the first n order positions, LIAS the last n.
FeatureMask get_trigger_mask(const FeatureImportanceOrder& order, int n, Strategy s);

/// Top-n positions regardless of strategy; equals the MIAS trigger mask.
FeatureMask get_top_mask(const FeatureImportanceOrder& order, int n);

/// CSV rows: node_id, rank, feature_index, score. Provenance lines are
/// written first as `# key = value` comments.
void write_orders_csv(const std::string& path, const std::vector<int>& nodes,
                      const std::vector<FeatureImportanceOrder>& orders,
                      const std::vector<std::string>& provenance);

}  // namespace gnnbd
