#include "gnnbd/metrics.hpp"

#include "gnnbd/node_forward.hpp"

#include <algorithm>
#include <cmath>

namespace gnnbd {

SuccessReport attack_success_rate(const TrainedModel& backdoored, const CitationGraph& graph,
                                  const PoisonedTestSet& poisoned) {
  if (poisoned.nodes.empty()) {
    throw std::invalid_argument("attack_success_rate: empty poisoned test set");
  }
  const auto neighbors = adjacency_lists(graph.edges, graph.num_nodes);
  SuccessReport report;
  report.flags.resize(poisoned.nodes.size());
  int hits = 0;
  for (size_t i = 0; i < poisoned.nodes.size(); ++i) {
    NodeForward forward(backdoored, graph, neighbors, poisoned.nodes[i]);
    const bool hit = forward.predict(poisoned.rows[i]) == poisoned.target_label;
    report.flags[i] = hit ? 1 : 0;
    if (hit) ++hits;
  }
  report.asr = static_cast<Real>(hits) / static_cast<Real>(poisoned.nodes.size());
  return report;
}

Real clean_accuracy_drop(const TrainedModel& clean_model, const TrainedModel& backdoored,
                         const CitationGraph& graph, const std::vector<int>& test_nodes) {
  return accuracy(clean_model, graph, test_nodes, graph.labels) -
         accuracy(backdoored, graph, test_nodes, graph.labels);
}

Real recall_score(const FeatureMask& target, const FeatureMask& predicted) {
  if (target.size() != predicted.size()) {
    throw std::invalid_argument("recall_score: mask lengths differ");
  }
  const int bits = target.popcount();
  if (bits == 0) throw std::invalid_argument("recall_score: target mask has no bits");
  if (predicted.popcount() != bits) {
    throw std::invalid_argument("recall_score: masks carry different bit counts");
  }
  int tp = 0;
  for (int c = 0; c < target.size(); ++c) {
    if (target.bits[static_cast<size_t>(c)] && predicted.bits[static_cast<size_t>(c)]) ++tp;
  }
  return static_cast<Real>(tp) / static_cast<Real>(bits);
}

std::pair<std::vector<RecallRecord>, std::vector<RecallRecord>> split_su(
    const std::vector<RecallRecord>& records) {
  std::pair<std::vector<RecallRecord>, std::vector<RecallRecord>> out;
  for (const RecallRecord& r : records) {
    (r.success ? out.first : out.second).push_back(r);
  }
  return out;
}

Histogram histogram(const std::vector<Real>& values, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram: need at least one bin");
  Histogram h;
  h.edges.resize(static_cast<size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) {
    h.edges[static_cast<size_t>(b)] = static_cast<Real>(b) / static_cast<Real>(bins);
  }
  h.counts.assign(static_cast<size_t>(bins), 0);
  for (Real v : values) {
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("histogram: value outside [0, 1]");
    int b = std::min(static_cast<int>(std::floor(v * bins)), bins - 1);
    ++h.counts[static_cast<size_t>(b)];
  }
  return h;
}

std::vector<RecallRecord> extended_mask_analysis(
    const std::vector<FeatureImportanceOrder>& clean_orders,
    const std::vector<FeatureImportanceOrder>& backdoored_orders, const std::vector<int>& nodes,
    const std::vector<uint8_t>& success_flags, Strategy strategy, int n, int gamma) {
  if (clean_orders.size() != backdoored_orders.size() || clean_orders.size() != nodes.size() ||
      clean_orders.size() != success_flags.size()) {
    throw std::invalid_argument("extended_mask_analysis: input lengths differ");
  }
  if (gamma < 1) throw std::invalid_argument("extended_mask_analysis: gamma must be >= 1");
  const int wide = gamma * n;
  std::vector<RecallRecord> records;
  records.reserve(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (wide > static_cast<int>(clean_orders[i].order.size())) {
      throw std::invalid_argument("extended_mask_analysis: gamma*n exceeds feature count");
    }
    FeatureMask target = get_trigger_mask(clean_orders[i], wide, strategy);
    FeatureMask predicted = get_top_mask(backdoored_orders[i], wide);
    records.push_back(RecallRecord{nodes[i], strategy, wide, recall_score(target, predicted),
                                   success_flags[i] != 0});
  }
  return records;
}

Real mean_of(const std::vector<Real>& values) {
  if (values.empty()) return 0.0;
  Real total = 0.0;
  for (Real v : values) total += v;
  return total / static_cast<Real>(values.size());
}

Real sample_sd(const std::vector<Real>& values) {
  if (values.size() < 2) return 0.0;
  const Real mu = mean_of(values);
  Real ss = 0.0;
  for (Real v : values) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<Real>(values.size() - 1));
}

void AttackReport::finalize(int histogram_bins) {
  asr_mean = mean_of(asr_per_repeat);
  asr_sd = sample_sd(asr_per_repeat);
  cad_mean = mean_of(cad_per_repeat);
  cad_sd = sample_sd(cad_per_repeat);
  std::vector<Real> values;
  values.reserve(recall_records.size());
  for (const RecallRecord& r : recall_records) values.push_back(r.recall);
  recall_histogram = histogram(values, histogram_bins);
}

}  // namespace gnnbd
