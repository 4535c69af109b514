#include "gnnbd/backdoor.hpp"

#include "gnnbd/node_forward.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

namespace gnnbd {

namespace {

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int count = std::min(workers, n);
  pool.reserve(static_cast<size_t>(count));
  for (int w = 0; w < count; ++w) pool.emplace_back(run);
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

int resolve_trigger_size(const AttackConfig& config, int num_features) {
  int n = config.trigger_size > 0
              ? config.trigger_size
              : static_cast<int>(std::floor(0.05 * static_cast<Real>(num_features)));
  if (n < 1 || n >= num_features) {
    throw AttackSetupError("trigger size " + std::to_string(n) + " out of range for d = " +
                           std::to_string(num_features));
  }
  return n;
}

std::vector<int> sample_poison_nodes(const DataSplit& split, const std::vector<int>& labels,
                                     const AttackConfig& config) {
  if (config.poison_rate <= 0.0 || config.poison_rate >= 1.0) {
    throw AttackSetupError("poison rate must be in (0, 1)");
  }
  const int want = static_cast<int>(
      std::lround(config.poison_rate * static_cast<Real>(split.train.size())));
  if (want < 1) throw AttackSetupError("poison sample size rounds to zero");
  std::vector<int> eligible;
  for (int v : split.train) {
    if (labels[static_cast<size_t>(v)] != config.target_label) eligible.push_back(v);
  }
  if (static_cast<int>(eligible.size()) < want) {
    throw AttackSetupError("only " + std::to_string(eligible.size()) +
                           " train nodes avoid the target label; need " + std::to_string(want));
  }
  Rng rng(config.seed);
  for (int i = static_cast<int>(eligible.size()) - 1; i > 0; --i) {
    std::swap(eligible[static_cast<size_t>(i)], eligible[static_cast<size_t>(rng.uniform_int(i + 1))]);
  }
  std::vector<int> picked(eligible.begin(), eligible.begin() + want);
  std::sort(picked.begin(), picked.end());
  return picked;
}

RowVector inject_trigger(const RowVector& row, const FeatureImportanceOrder& order,
                         const AttackConfig& config) {
  const int d = static_cast<int>(row.size());
  FeatureMask positions = get_trigger_mask(order, resolve_trigger_size(config, d), config.strategy);
  RowVector out = row;
  for (int c = 0; c < d; ++c) {
    if (positions.bits[static_cast<size_t>(c)]) out(c) = config.trigger_value;
  }
  return out;
}

std::vector<FeatureImportanceOrder> compute_clean_orders(
    const TrainedModel& model, const CitationGraph& graph, const std::vector<int>& nodes,
    const std::vector<int>& labels, const ExplainerConfig& config, int parallel) {
  const auto neighbors = adjacency_lists(graph.edges, graph.num_nodes);
  std::vector<FeatureImportanceOrder> orders(nodes.size());
  parallel_for(static_cast<int>(nodes.size()), parallel, [&](int i) {
    const int v = nodes[static_cast<size_t>(i)];
    orders[static_cast<size_t>(i)] =
        explain_node(model, graph, neighbors, v, labels[static_cast<size_t>(v)], config);
  });
  return orders;
}

PoisonedTrainSet build_poisoned_train(const CitationGraph& graph, const DataSplit& split,
                                      const TrainedModel& clean_model, const AttackConfig& config,
                                      const ExplainerConfig& explain_config, int parallel,
                                      const std::vector<FeatureImportanceOrder>* cached_orders) {
  PoisonedTrainSet out;
  out.target_label = config.target_label;
  out.nodes = sample_poison_nodes(split, graph.labels, config);
  const std::vector<FeatureImportanceOrder>& orders =
      cached_orders ? *cached_orders
                    : compute_clean_orders(clean_model, graph, out.nodes, graph.labels,
                                           explain_config, parallel);
  if (orders.size() != out.nodes.size()) {
    throw std::invalid_argument("build_poisoned_train: cached orders misaligned");
  }
  const int n = resolve_trigger_size(config, graph.num_features);
  for (size_t i = 0; i < out.nodes.size(); ++i) {
    out.rows.push_back(inject_trigger(graph.feature_row(out.nodes[i]), orders[i], config));
    out.trigger_masks.push_back(get_trigger_mask(orders[i], n, config.strategy));
  }
  return out;
}

PoisonedTestSet build_poisoned_test(const CitationGraph& graph, const DataSplit& split,
                                    const TrainedModel& clean_model, const AttackConfig& config,
                                    const ExplainerConfig& explain_config, int parallel,
                                    const std::vector<FeatureImportanceOrder>* cached_orders) {
  PoisonedTestSet out;
  out.target_label = config.target_label;
  for (int v : split.test) {
    if (graph.labels[static_cast<size_t>(v)] != config.target_label) out.nodes.push_back(v);
  }
  if (out.nodes.empty()) throw AttackSetupError("no test nodes avoid the target label");
  out.clean_orders = cached_orders ? *cached_orders
                                   : compute_clean_orders(clean_model, graph, out.nodes,
                                                          graph.labels, explain_config, parallel);
  if (out.clean_orders.size() != out.nodes.size()) {
    throw std::invalid_argument("build_poisoned_test: cached orders misaligned");
  }
  const int n = resolve_trigger_size(config, graph.num_features);
  for (size_t i = 0; i < out.nodes.size(); ++i) {
    out.rows.push_back(inject_trigger(graph.feature_row(out.nodes[i]), out.clean_orders[i], config));
    out.target_masks.push_back(get_trigger_mask(out.clean_orders[i], n, config.strategy));
  }
  return out;
}

TrainedModel train_backdoored(const CitationGraph& graph, const DataSplit& split,
                              const TrainedModel& clean_model, const PoisonedTrainSet& poisoned,
                              const AttackConfig& config) {
  TrainedModel model = clean_model;  // retraining starts from the clean parameters
  model.loss_trace.clear();
  if (config.epochs == 0) return model;

  SparseMatrix poisoned_features =
      replace_feature_rows(graph.features, poisoned.nodes, poisoned.rows);
  std::vector<int> poisoned_labels = graph.labels;
  for (int v : poisoned.nodes) poisoned_labels[static_cast<size_t>(v)] = poisoned.target_label;

  std::vector<ad::Param*> params = model.params();
  ad::Adam adam(params, ad::AdamConfig{.learning_rate = model.config.learning_rate});
  GatStructure structure;
  if (model.architecture == Architecture::kGat) {
    structure = GatStructure::build(graph.edges, graph.num_nodes);
  }
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (ad::Param* p : params) p->zero_grad();
    ad::Tape tape;
    auto logits_of = [&](const SparseMatrix& x) {
      return model.architecture == Architecture::kGcn
                 ? gcn_logits(tape, model.gcn, graph.adjacency, x)
                 : gat_logits(tape, model.gat, structure, x);
    };
    ad::Var loss = ad::log_softmax_nll(logits_of(graph.features), graph.labels, split.train);
    if (!poisoned.nodes.empty()) {
      loss = ad::add(loss, ad::log_softmax_nll(logits_of(poisoned_features), poisoned_labels,
                                               poisoned.nodes));
    }
    const Real value = loss.value()(0, 0);
    if (!std::isfinite(value)) {
      throw TrainError("backdoored training diverged at epoch " + std::to_string(epoch));
    }
    tape.backward(loss);
    adam.step();
    model.loss_trace.push_back(value);
  }
  return model;
}

PredictedMasks generate_predicted_masks(const TrainedModel& backdoored, const CitationGraph& graph,
                                        const PoisonedTestSet& poisoned, const AttackConfig& config,
                                        const ExplainerConfig& explain_config, int parallel) {
  const auto neighbors = adjacency_lists(graph.edges, graph.num_nodes);
  const int n = resolve_trigger_size(config, graph.num_features);
  PredictedMasks out;
  out.masks.resize(poisoned.nodes.size());
  out.orders.resize(poisoned.nodes.size());
  parallel_for(static_cast<int>(poisoned.nodes.size()), parallel, [&](int i) {
    const size_t k = static_cast<size_t>(i);
    out.orders[k] = explain_node(backdoored, graph, neighbors, poisoned.nodes[k],
                                 poisoned.target_label, explain_config, &poisoned.rows[k]);
    out.masks[k] = get_top_mask(out.orders[k], n);
  });
  return out;
}

void write_poisoned_train_csv(const std::string& path, const CitationGraph& graph,
                              const PoisonedTrainSet& poisoned, Strategy strategy,
                              const std::vector<std::string>& provenance) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const std::string& line : provenance) out << "# " << line << "\n";
  out << "node_id,original_label,strategy,trigger_positions\n";
  for (size_t i = 0; i < poisoned.nodes.size(); ++i) {
    out << poisoned.nodes[i] << "," << graph.labels[static_cast<size_t>(poisoned.nodes[i])] << ","
        << strategy_name(strategy) << ",";
    bool first = true;
    const FeatureMask& mask = poisoned.trigger_masks[i];
    for (int c = 0; c < mask.size(); ++c) {
      if (!mask.bits[static_cast<size_t>(c)]) continue;
      if (!first) out << ";";
      out << c;
      first = false;
    }
    out << "\n";
  }
}

}  // namespace gnnbd
