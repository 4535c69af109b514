#include "gnnbd/models.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace gnnbd {

namespace {

using json = nlohmann::ordered_json;

constexpr Real kAttentionSlope = 0.2;

Matrix glorot(Rng& rng, int rows, int cols, int fan_in, int fan_out) {
  const Real s = std::sqrt(6.0 / static_cast<Real>(fan_in + fan_out));
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-s, s);
  }
  return m;
}

GatModel::Head init_gat_head(Rng& rng, int in_dim, int out_dim) {
  GatModel::Head head;
  head.w = ad::Param(glorot(rng, in_dim, out_dim, in_dim, out_dim));
  // The attention vector scores concat(W z_v, W z_u), length 2*out_dim,
  // stored as its source/destination halves.
  head.attn_src = ad::Param(glorot(rng, out_dim, 1, 2 * out_dim, 1));
  head.attn_dst = ad::Param(glorot(rng, out_dim, 1, 2 * out_dim, 1));
  return head;
}

ad::Var attention_coefficients(ad::Tape& tape, ad::Var h, GatModel::Head& head,
                               const GatStructure& g) {
  ad::Var s_src = ad::matmul(h, tape.leaf(head.attn_src));
  ad::Var s_dst = ad::matmul(h, tape.leaf(head.attn_dst));
  ad::Var e = ad::leaky_relu(
      ad::add(ad::gather_rows(s_src, g.src), ad::gather_rows(s_dst, g.dst)), kAttentionSlope);
  return ad::segment_softmax(e, g.segments);
}

json matrix_to_json(const Matrix& m) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(arr)}};
}

Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != m.size()) {
    throw DataError("checkpoint: matrix data length mismatch");
  }
  size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[k++].get<Real>();
  }
  return m;
}

}  // namespace

std::string architecture_name(Architecture a) {
  return a == Architecture::kGcn ? "gcn" : "gat";
}

Architecture architecture_from_name(const std::string& name) {
  if (name == "gcn" || name == "GCN") return Architecture::kGcn;
  if (name == "gat" || name == "GAT") return Architecture::kGat;
  throw ConfigError("unknown architecture: " + name);
}

GatStructure GatStructure::build(const std::vector<std::pair<int, int>>& edges, int num_nodes) {
  std::vector<std::vector<int>> in_neighbors(static_cast<size_t>(num_nodes));
  for (int v = 0; v < num_nodes; ++v) in_neighbors[static_cast<size_t>(v)].push_back(v);
  for (const auto& [u, v] : edges) {
    in_neighbors[static_cast<size_t>(u)].push_back(v);
    in_neighbors[static_cast<size_t>(v)].push_back(u);
  }
  GatStructure g;
  g.segments.offsets.push_back(0);
  for (int v = 0; v < num_nodes; ++v) {
    auto& nbrs = in_neighbors[static_cast<size_t>(v)];
    std::sort(nbrs.begin(), nbrs.end());
    for (int u : nbrs) {
      g.src.push_back(u);
      g.dst.push_back(v);
    }
    g.segments.offsets.push_back(static_cast<int>(g.src.size()));
  }
  return g;
}

std::vector<ad::Param*> TrainedModel::params() {
  std::vector<ad::Param*> out;
  if (architecture == Architecture::kGcn) {
    out = {&gcn.w1, &gcn.w2};
  } else {
    for (auto& head : gat.layer1) {
      out.push_back(&head.w);
      out.push_back(&head.attn_src);
      out.push_back(&head.attn_dst);
    }
    out.push_back(&gat.layer2.w);
    out.push_back(&gat.layer2.attn_src);
    out.push_back(&gat.layer2.attn_dst);
  }
  return out;
}

std::vector<const ad::Param*> TrainedModel::params() const {
  auto mutable_params = const_cast<TrainedModel*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

TrainedModel init_model(const TrainConfig& config, int num_features, int num_classes) {
  TrainedModel model;
  model.architecture = config.architecture;
  model.config = config;
  Rng rng(config.seed);
  if (config.architecture == Architecture::kGcn) {
    model.gcn.w1 = ad::Param(glorot(rng, num_features, config.hidden, num_features, config.hidden));
    model.gcn.w2 = ad::Param(glorot(rng, config.hidden, num_classes, config.hidden, num_classes));
  } else {
    for (int p = 0; p < config.heads; ++p) {
      model.gat.layer1.push_back(init_gat_head(rng, num_features, config.head_dim));
    }
    model.gat.layer2 = init_gat_head(rng, config.heads * config.head_dim, num_classes);
  }
  return model;
}

ad::Var gcn_logits(ad::Tape& tape, GcnModel& model, const SparseMatrix& adj, const SparseMatrix& x) {
  ad::Var h = ad::relu(ad::spmm(adj, ad::spmm(x, tape.leaf(model.w1))));
  return ad::spmm(adj, ad::matmul(h, tape.leaf(model.w2)));
}

ad::Var gat_logits(ad::Tape& tape, GatModel& model, const GatStructure& structure,
                   const SparseMatrix& x, GatDiagnostics* diagnostics) {
  const int n = structure.segments.count();
  std::vector<ad::Var> head_outputs;
  head_outputs.reserve(model.layer1.size());
  for (auto& head : model.layer1) {
    ad::Var h = ad::spmm(x, tape.leaf(head.w));
    ad::Var alpha = attention_coefficients(tape, h, head, structure);
    if (diagnostics) diagnostics->layer1_attention.push_back(alpha.value());
    ad::Var messages = ad::col_broadcast_mul(ad::gather_rows(h, structure.src), alpha);
    head_outputs.push_back(ad::scatter_sum(messages, structure.dst, n));
  }
  ad::Var z1 = ad::elu(ad::hconcat(head_outputs));
  ad::Var h2 = ad::matmul(z1, tape.leaf(model.layer2.w));
  ad::Var alpha2 = attention_coefficients(tape, h2, model.layer2, structure);
  if (diagnostics) diagnostics->layer2_attention = alpha2.value();
  ad::Var messages2 = ad::col_broadcast_mul(ad::gather_rows(h2, structure.src), alpha2);
  return ad::scatter_sum(messages2, structure.dst, n);
}

Matrix forward_log_probs(const TrainedModel& model, const CitationGraph& graph,
                         const SparseMatrix* x_override) {
  const SparseMatrix& x = x_override ? *x_override : graph.features;
  ad::Tape tape;
  TrainedModel& m = const_cast<TrainedModel&>(model);  // leaf() copies values; no mutation happens
  ad::Var logits = model.architecture == Architecture::kGcn
                       ? gcn_logits(tape, m.gcn, graph.adjacency, x)
                       : gat_logits(tape, m.gat, GatStructure::build(graph.edges, graph.num_nodes), x);
  return ad::log_softmax_rows(logits.value());
}

TrainedModel train(const CitationGraph& graph, const std::vector<int>& train_nodes,
                   const std::vector<int>& labels, const TrainConfig& config) {
  if (train_nodes.empty()) throw std::invalid_argument("train: empty train node set");
  TrainedModel model = init_model(config, graph.num_features, graph.num_classes);
  std::vector<ad::Param*> params = model.params();
  ad::Adam adam(params, ad::AdamConfig{.learning_rate = config.learning_rate});
  GatStructure structure;
  if (config.architecture == Architecture::kGat) {
    structure = GatStructure::build(graph.edges, graph.num_nodes);
  }
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (ad::Param* p : params) p->zero_grad();
    ad::Tape tape;
    ad::Var logits = config.architecture == Architecture::kGcn
                         ? gcn_logits(tape, model.gcn, graph.adjacency, graph.features)
                         : gat_logits(tape, model.gat, structure, graph.features);
    ad::Var loss = ad::log_softmax_nll(logits, labels, train_nodes);
    const Real value = loss.value()(0, 0);
    if (!std::isfinite(value)) {
      throw TrainError("training diverged at epoch " + std::to_string(epoch));
    }
    tape.backward(loss);
    adam.step();
    model.loss_trace.push_back(value);
  }
  return model;
}

Real accuracy(const TrainedModel& model, const CitationGraph& graph, const std::vector<int>& nodes,
              const std::vector<int>& labels) {
  if (nodes.empty()) throw std::invalid_argument("accuracy: empty node set");
  Matrix log_probs = forward_log_probs(model, graph);
  int correct = 0;
  for (int v : nodes) {
    if (argmax_row(log_probs.row(v)) == labels[static_cast<size_t>(v)]) ++correct;
  }
  return static_cast<Real>(correct) / static_cast<Real>(nodes.size());
}

int argmax_row(const RowVector& row) {
  int best = 0;
  for (int c = 1; c < row.size(); ++c) {
    if (row(c) > row(best)) best = c;  // ties keep the lowest index
  }
  return best;
}

void save_checkpoint(const TrainedModel& model, const std::string& path) {
  json j;
  j["format"] = "gnnbd-checkpoint";
  j["version"] = 1;
  j["architecture"] = architecture_name(model.architecture);
  j["config"] = {
      {"epochs", model.config.epochs},       {"learning_rate", model.config.learning_rate},
      {"seed", model.config.seed},           {"hidden", model.config.hidden},
      {"heads", model.config.heads},         {"head_dim", model.config.head_dim},
  };
  j["loss_trace"] = model.loss_trace;
  json params = json::object();
  if (model.architecture == Architecture::kGcn) {
    params["w1"] = matrix_to_json(model.gcn.w1.value);
    params["w2"] = matrix_to_json(model.gcn.w2.value);
  } else {
    for (size_t p = 0; p < model.gat.layer1.size(); ++p) {
      const auto& head = model.gat.layer1[p];
      const std::string prefix = "layer1." + std::to_string(p) + ".";
      params[prefix + "w"] = matrix_to_json(head.w.value);
      params[prefix + "attn_src"] = matrix_to_json(head.attn_src.value);
      params[prefix + "attn_dst"] = matrix_to_json(head.attn_dst.value);
    }
    params["layer2.w"] = matrix_to_json(model.gat.layer2.w.value);
    params["layer2.attn_src"] = matrix_to_json(model.gat.layer2.attn_src.value);
    params["layer2.attn_dst"] = matrix_to_json(model.gat.layer2.attn_dst.value);
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << j.dump(2) << "\n";
}

TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("checkpoint parse failure: " + std::string(e.what()));
  }
  if (j.value("format", "") != "gnnbd-checkpoint") {
    throw DataError("not a gnnbd checkpoint: " + path);
  }
  TrainedModel model;
  model.architecture = architecture_from_name(j.at("architecture").get<std::string>());
  const json& c = j.at("config");
  model.config.epochs = c.at("epochs").get<int>();
  model.config.learning_rate = c.at("learning_rate").get<Real>();
  model.config.seed = c.at("seed").get<uint64_t>();
  model.config.hidden = c.at("hidden").get<int>();
  model.config.heads = c.at("heads").get<int>();
  model.config.head_dim = c.at("head_dim").get<int>();
  model.config.architecture = model.architecture;
  model.loss_trace = j.at("loss_trace").get<std::vector<Real>>();
  const json& params = j.at("params");
  if (model.architecture == Architecture::kGcn) {
    model.gcn.w1 = ad::Param(matrix_from_json(params.at("w1")));
    model.gcn.w2 = ad::Param(matrix_from_json(params.at("w2")));
  } else {
    for (int p = 0; p < model.config.heads; ++p) {
      GatModel::Head head;
      const std::string prefix = "layer1." + std::to_string(p) + ".";
      head.w = ad::Param(matrix_from_json(params.at(prefix + "w")));
      head.attn_src = ad::Param(matrix_from_json(params.at(prefix + "attn_src")));
      head.attn_dst = ad::Param(matrix_from_json(params.at(prefix + "attn_dst")));
      model.gat.layer1.push_back(std::move(head));
    }
    model.gat.layer2.w = ad::Param(matrix_from_json(params.at("layer2.w")));
    model.gat.layer2.attn_src = ad::Param(matrix_from_json(params.at("layer2.attn_src")));
    model.gat.layer2.attn_dst = ad::Param(matrix_from_json(params.at("layer2.attn_dst")));
  }
  return model;
}

}  // namespace gnnbd
