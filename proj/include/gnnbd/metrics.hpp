#pragma once

#include "gnnbd/backdoor.hpp"

#include <utility>
#include <vector>

namespace gnnbd {

struct RecallRecord {
  int node = 0;
  Strategy strategy = Strategy::kMias;
  int mask_len = 0;     // n or gamma*n
  Real recall = 0.0;    // in {0, 1/mask_len, ..., 1}
  bool success = false; // predicted class == target label
};

struct SuccessReport {
  Real asr = 0.0;
  std::vector<uint8_t> flags;  // one per poisoned test node
};

/// Predict every poisoned test node on its single-node-poisoned graph;
/// ASR = fraction classified as the target label.
SuccessReport attack_success_rate(const TrainedModel& backdoored, const CitationGraph& graph,
                                  const PoisonedTestSet& poisoned);

/// accuracy(clean) - accuracy(backdoored) on untouched test nodes.
Real clean_accuracy_drop(const TrainedModel& clean_model, const TrainedModel& backdoored,
                         const CitationGraph& graph, const std::vector<int>& test_nodes);

/// TP / (TP + FN) of the two equal-weight masks = |intersection| / n_bits.
Real recall_score(const FeatureMask& target, const FeatureMask& predicted);

/// Partition by the success flag: (S, U).
std::pair<std::vector<RecallRecord>, std::vector<RecallRecord>> split_su(
    const std::vector<RecallRecord>& records);

struct Histogram {
  std::vector<Real> edges;  // bins + 1 entries over [0, 1]
  std::vector<int> counts;  // right-inclusive last bin
};

Histogram histogram(const std::vector<Real>& values, int bins = 10);

/// Recompute recall with masks widened to gamma*n from the retained
/// per-node orders: target from the clean order under the strategy,
/// predicted as the backdoored order's top gamma*n.
std::vector<RecallRecord> extended_mask_analysis(
    const std::vector<FeatureImportanceOrder>& clean_orders,
    const std::vector<FeatureImportanceOrder>& backdoored_orders, const std::vector<int>& nodes,
    const std::vector<uint8_t>& success_flags, Strategy strategy, int n, int gamma = 2);

Real mean_of(const std::vector<Real>& values);
/// Unbiased sample standard deviation; 0 for fewer than two values.
Real sample_sd(const std::vector<Real>& values);

/// Aggregated attack outcome for one (dataset, model, strategy) cell.
struct AttackReport {
  std::vector<Real> asr_per_repeat;
  std::vector<Real> cad_per_repeat;
  Real asr_mean = 0.0, asr_sd = 0.0;
  Real cad_mean = 0.0, cad_sd = 0.0;
  std::vector<RecallRecord> recall_records;    // mask length n, pooled over repeats
  std::vector<RecallRecord> extended_records;  // mask length gamma*n
  Histogram recall_histogram;

  void finalize(int histogram_bins);
};

}  // namespace gnnbd
