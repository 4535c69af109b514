#pragma once

#include "gnnbd/autodiff.hpp"
#include "gnnbd/graph.hpp"

#include <string>
#include <vector>

namespace gnnbd {

enum class Architecture { kGcn, kGat };

std::string architecture_name(Architecture a);
Architecture architecture_from_name(const std::string& name);

struct TrainConfig {
  int epochs = 200;
  Real learning_rate = 0.005;
  uint64_t seed = 1;
  Architecture architecture = Architecture::kGcn;
  int hidden = 16;    // GCN hidden width
  int heads = 8;      // GAT layer-1 head count
  int head_dim = 8;   // GAT per-head width
};

struct GcnModel {
  ad::Param w1;  // d x hidden
  ad::Param w2;  // hidden x C
};

struct GatModel {
  struct Head {
    ad::Param w;         // in x out
    ad::Param attn_src;  // out x 1
    ad::Param attn_dst;  // out x 1
  };
  std::vector<Head> layer1;  // concatenated
  Head layer2;               // single averaged head, out = C
};

/// Directed edge list with self-loops for attention aggregation, rows
/// sorted by (dst, src); segments group the edges of each destination.
struct GatStructure {
  std::vector<int> src, dst;
  ad::Segments segments;

  static GatStructure build(const std::vector<std::pair<int, int>>& edges, int num_nodes);
};

struct TrainedModel {
  Architecture architecture = Architecture::kGcn;
  TrainConfig config;
  GcnModel gcn;
  GatModel gat;
  std::vector<Real> loss_trace;

  std::vector<ad::Param*> params();
  std::vector<const ad::Param*> params() const;
};

/// Seeded Glorot-uniform initialization for the configured architecture.
TrainedModel init_model(const TrainConfig& config, int num_features, int num_classes);

// Tape-level forwards producing logits (N x C). The attention diagnostics
// hook exposes normalized coefficients for testing.
ad::Var gcn_logits(ad::Tape& tape, GcnModel& model, const SparseMatrix& adj, const SparseMatrix& x);

struct GatDiagnostics {
  std::vector<Matrix> layer1_attention;  // per head, E x 1
  Matrix layer2_attention;
};
ad::Var gat_logits(ad::Tape& tape, GatModel& model, const GatStructure& structure,
                   const SparseMatrix& x, GatDiagnostics* diagnostics = nullptr);

/// Full-graph forward; rows of exp(result) sum to 1. Pass x_override to
/// predict on a graph with replaced feature rows.
Matrix forward_log_probs(const TrainedModel& model, const CitationGraph& graph,
                         const SparseMatrix* x_override = nullptr);

/// Full-batch Adam training of mean NLL over train_nodes. Throws
/// TrainError if the loss leaves the finite range.
TrainedModel train(const CitationGraph& graph, const std::vector<int>& train_nodes,
                   const std::vector<int>& labels, const TrainConfig& config);

/// Fraction of argmax predictions (ties to the lowest class index)
/// matching labels over the given nodes.
Real accuracy(const TrainedModel& model, const CitationGraph& graph, const std::vector<int>& nodes,
              const std::vector<int>& labels);

int argmax_row(const RowVector& row);

// Lossless JSON checkpoint round-trip.
void save_checkpoint(const TrainedModel& model, const std::string& path);
TrainedModel load_checkpoint(const std::string& path);

}  // namespace gnnbd
