#pragma once

#include "gnnbd/models.hpp"

#include <vector>

namespace gnnbd {

/// Sorted neighbor lists (without self-loops) from an undirected edge list.
std::vector<std::vector<int>> adjacency_lists(const std::vector<std::pair<int, int>>& edges,
                                              int num_nodes);

/// Logits at a single node as a differentiable function of that node's own
/// feature row. Everything that does not depend on the row is cached at
/// construction over the node's 2-hop closed neighborhood, which is exact
/// for the two-layer models. One instance serves many evaluations with
/// different rows (mask-optimization steps, trigger predictions).
class NodeForward {
 public:
  /// neighbors: precomputed adjacency_lists(graph.edges, graph.num_nodes);
  /// shared across the many per-node instances built on one graph.
  NodeForward(const TrainedModel& model, const CitationGraph& graph,
              const std::vector<std::vector<int>>& neighbors, int node);

  /// feature_row is 1 x d; returns logits 1 x C on the caller's tape.
  ad::Var logits(ad::Tape& tape, ad::Var feature_row) const;

  /// Argmax class (ties to the lowest index) when the node's row is
  /// replaced by `row` and all other rows keep their graph values.
  int predict(const RowVector& row) const;

  const RowVector& base_row() const { return base_row_; }

 private:
  void build_gcn(const CitationGraph& graph);
  void build_gat(const CitationGraph& graph, const std::vector<std::vector<int>>& neighbors);

  const TrainedModel* model_;
  int node_ = 0;
  RowVector base_row_;  // the graph's current row for this node

  // shared subgraph data
  std::vector<int> hop2_;  // sorted global ids, 2-hop closed neighborhood
  std::vector<int> hop1_;  // sorted global ids, 1-hop closed neighborhood

  // GCN cache
  Matrix gcn_premix_;      // adj_sub * (X_sub * W1), |S| x hidden
  Matrix gcn_adj_col_;     // column of adj_sub at the node, |S| x 1
  SparseMatrix gcn_adj_row_;  // row of adj_sub at the node, 1 x |S|

  // GAT cache
  struct GatHeadCache {
    Matrix h;            // X_sub * W, |S| x out
    Matrix edge_base;    // E x 1 scores with node-dependent parts zeroed
    Matrix message_base; // E x out, rows with src == node zeroed
  };
  std::vector<GatHeadCache> gat_layer1_;
  std::vector<int> gat_src_;      // edge source, index into hop2_
  std::vector<int> gat_dst_;      // edge destination, index into hop1_
  Matrix gat_inc_src_, gat_inc_dst_;  // E x 1 indicators of node involvement
  ad::Segments gat_segments_;
  Matrix gat_ones_;  // |hop1_| x 1
  int node_in_hop1_ = 0;
};

}  // namespace gnnbd
