#include "gnnbd/explainer.hpp"

#include "gnnbd/node_forward.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace gnnbd {

std::string strategy_name(Strategy s) { return s == Strategy::kMias ? "mias" : "lias"; }

Strategy strategy_from_name(const std::string& name) {
  if (name == "mias" || name == "MIAS") return Strategy::kMias;
  if (name == "lias" || name == "LIAS") return Strategy::kLias;
  throw ConfigError("unknown strategy: " + name);
}

int FeatureMask::popcount() const {
  int c = 0;
  for (uint8_t b : bits) c += b ? 1 : 0;
  return c;
}

FeatureImportanceOrder explain_node(const TrainedModel& model, const CitationGraph& graph,
                                    const std::vector<std::vector<int>>& neighbors, int node,
                                    int label, const ExplainerConfig& config,
                                    const RowVector* row_override) {
  if (label < 0 || label >= graph.num_classes) {
    throw std::invalid_argument("explain_node: label out of range");
  }
  if (config.steps < 1) throw std::invalid_argument("explain_node: steps must be >= 1");
  const int d = graph.num_features;

  NodeForward forward(model, graph, neighbors, node);
  Matrix row = row_override ? Matrix(*row_override) : Matrix(forward.base_row());
  if (row.cols() != d) throw DimensionError("explain_node: row override has wrong length");

  Rng rng(mix_seed(config.seed, static_cast<uint64_t>(node)));
  ad::Param mask(Matrix(1, d));
  for (int c = 0; c < d; ++c) mask.value(0, c) = rng.normal(0.0, config.init_scale);

  ad::Adam adam({&mask}, ad::AdamConfig{.learning_rate = config.mask_learning_rate});
  FeatureImportanceOrder result;
  for (int step = 0; step < config.steps; ++step) {
    mask.zero_grad();
    ad::Tape tape;
    ad::Var m = tape.leaf(mask);
    ad::Var p = ad::sigmoid(m);
    ad::Var masked_row = ad::mul(tape.constant(row), p);
    ad::Var logits = forward.logits(tape, masked_row);
    ad::Var nll = ad::log_softmax_nll(logits, {label}, {0});
    ad::Var objective =
        ad::add(nll, ad::add(ad::scale(ad::mean_all(p), config.lambda_size),
                             ad::scale(ad::mean_all(ad::bernoulli_entropy(p)), config.lambda_entropy)));
    const Real value = objective.value()(0, 0);
    if (!std::isfinite(value)) {
      throw TrainError("explanation diverged at node " + std::to_string(node));
    }
    if (step == 0) result.initial_objective = value;
    result.final_objective = value;
    tape.backward(objective);
    adam.step();
  }

  std::vector<Real> scores(static_cast<size_t>(d));
  for (int c = 0; c < d; ++c) scores[static_cast<size_t>(c)] = 1.0 / (1.0 + std::exp(-mask.value(0, c)));
  result.order = descending_order(scores);
  result.scores.resize(static_cast<size_t>(d));
  for (int r = 0; r < d; ++r) {
    result.scores[static_cast<size_t>(r)] = scores[static_cast<size_t>(result.order[static_cast<size_t>(r)])];
  }
  return result;
}

FeatureImportanceOrder explain_node(const TrainedModel& model, const CitationGraph& graph, int node,
                                    int label, const ExplainerConfig& config,
                                    const RowVector* row_override) {
  return explain_node(model, graph, adjacency_lists(graph.edges, graph.num_nodes), node, label,
                      config, row_override);
}

std::vector<int> descending_order(const std::vector<Real>& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores](int a, int b) {
    const Real sa = scores[static_cast<size_t>(a)];
    const Real sb = scores[static_cast<size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  });
  return order;
}

namespace {

FeatureMask mask_from_positions(const FeatureImportanceOrder& order, int first, int count) {
  FeatureMask mask;
  mask.bits.assign(order.order.size(), 0);
  for (int i = first; i < first + count; ++i) {
    mask.bits[static_cast<size_t>(order.order[static_cast<size_t>(i)])] = 1;
  }
  return mask;
}

}  // namespace

FeatureMask get_trigger_mask(const FeatureImportanceOrder& order, int n, Strategy s) {
  const int d = static_cast<int>(order.order.size());
  if (n < 1 || n > d) throw std::invalid_argument("get_trigger_mask: n must be in [1, d]");
  return s == Strategy::kMias ? mask_from_positions(order, 0, n)
                              : mask_from_positions(order, d - n, n);
}

FeatureMask get_top_mask(const FeatureImportanceOrder& order, int n) {
  const int d = static_cast<int>(order.order.size());
  if (n < 1 || n > d) throw std::invalid_argument("get_top_mask: n must be in [1, d]");
  return mask_from_positions(order, 0, n);
}

void write_orders_csv(const std::string& path, const std::vector<int>& nodes,
                      const std::vector<FeatureImportanceOrder>& orders,
                      const std::vector<std::string>& provenance) {
  if (nodes.size() != orders.size()) {
    throw std::invalid_argument("write_orders_csv: nodes and orders length mismatch");
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  for (const std::string& line : provenance) out << "# " << line << "\n";
  out << "node_id,rank,feature_index,score\n";
  out.precision(17);
  for (size_t i = 0; i < nodes.size(); ++i) {
    const FeatureImportanceOrder& o = orders[i];
    for (size_t r = 0; r < o.order.size(); ++r) {
      out << nodes[i] << "," << r << "," << o.order[r] << "," << o.scores[r] << "\n";
    }
  }
}

}  // namespace gnnbd
