#include "gnnbd/node_forward.hpp"

#include <algorithm>
#include <unordered_map>

namespace gnnbd {

namespace {

constexpr Real kAttentionSlope = 0.2;

std::vector<int> local_index_of(const std::vector<int>& sorted_ids, int num_nodes) {
  std::vector<int> loc(static_cast<size_t>(num_nodes), -1);
  for (size_t i = 0; i < sorted_ids.size(); ++i) {
    loc[static_cast<size_t>(sorted_ids[i])] = static_cast<int>(i);
  }
  return loc;
}

SparseMatrix extract_rows(const SparseMatrix& m, const std::vector<int>& rows) {
  std::vector<Eigen::Triplet<Real>> triplets;
  for (size_t r = 0; r < rows.size(); ++r) {
    for (SparseMatrix::InnerIterator it(m, rows[r]); it; ++it) {
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
    }
  }
  SparseMatrix out(static_cast<int>(rows.size()), m.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  out.makeCompressed();
  return out;
}

}  // namespace

std::vector<std::vector<int>> adjacency_lists(const std::vector<std::pair<int, int>>& edges,
                                              int num_nodes) {
  std::vector<std::vector<int>> adj(static_cast<size_t>(num_nodes));
  for (const auto& [u, v] : edges) {
    adj[static_cast<size_t>(u)].push_back(v);
    adj[static_cast<size_t>(v)].push_back(u);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());
  return adj;
}

NodeForward::NodeForward(const TrainedModel& model, const CitationGraph& graph,
                         const std::vector<std::vector<int>>& neighbors, int node)
    : model_(&model), node_(node) {
  if (node < 0 || node >= graph.num_nodes) {
    throw std::invalid_argument("NodeForward: node out of range");
  }
  base_row_ = graph.feature_row(node);

  hop1_ = neighbors[static_cast<size_t>(node)];
  hop1_.push_back(node);
  std::sort(hop1_.begin(), hop1_.end());
  std::vector<char> seen(static_cast<size_t>(graph.num_nodes), 0);
  for (int u : hop1_) seen[static_cast<size_t>(u)] = 1;
  hop2_ = hop1_;
  for (int u : hop1_) {
    for (int w : neighbors[static_cast<size_t>(u)]) {
      if (!seen[static_cast<size_t>(w)]) {
        seen[static_cast<size_t>(w)] = 1;
        hop2_.push_back(w);
      }
    }
  }
  std::sort(hop2_.begin(), hop2_.end());

  if (model.architecture == Architecture::kGcn) {
    build_gcn(graph);
  } else {
    build_gat(graph, neighbors);
  }
}

void NodeForward::build_gcn(const CitationGraph& graph) {
  const std::vector<int> loc = local_index_of(hop2_, graph.num_nodes);
  const int s = static_cast<int>(hop2_.size());

  // induced submatrix of the normalized adjacency over the 2-hop set
  std::vector<Eigen::Triplet<Real>> triplets;
  for (int r = 0; r < s; ++r) {
    for (SparseMatrix::InnerIterator it(graph.adjacency, hop2_[static_cast<size_t>(r)]); it; ++it) {
      int c = loc[static_cast<size_t>(it.col())];
      if (c >= 0) triplets.emplace_back(r, c, it.value());
    }
  }
  SparseMatrix adj_sub(s, s);
  adj_sub.setFromTriplets(triplets.begin(), triplets.end());
  adj_sub.makeCompressed();

  const int v_loc = loc[static_cast<size_t>(node_)];
  SparseMatrix x_sub = extract_rows(graph.features, hop2_);
  gcn_premix_ = adj_sub * Matrix(x_sub * model_->gcn.w1.value);
  // the normalized adjacency is symmetric, so column v equals row v
  gcn_adj_col_ = Matrix::Zero(s, 1);
  for (SparseMatrix::InnerIterator it(adj_sub, v_loc); it; ++it) {
    gcn_adj_col_(it.col(), 0) = it.value();
  }
  gcn_adj_row_ = SparseMatrix(adj_sub.row(v_loc));
}

void NodeForward::build_gat(const CitationGraph& graph,
                            const std::vector<std::vector<int>>& adj) {
  const std::vector<int> loc2 = local_index_of(hop2_, graph.num_nodes);

  // edge list (src -> dst) over destinations in the closed 1-hop set,
  // sorted by (dst, src) like GatStructure
  gat_segments_.offsets.push_back(0);
  for (size_t d = 0; d < hop1_.size(); ++d) {
    const int u = hop1_[d];
    std::vector<int> nbrs = adj[static_cast<size_t>(u)];
    nbrs.push_back(u);
    std::sort(nbrs.begin(), nbrs.end());
    for (int w : nbrs) {
      gat_src_.push_back(loc2[static_cast<size_t>(w)]);
      gat_dst_.push_back(static_cast<int>(d));
    }
    gat_segments_.offsets.push_back(static_cast<int>(gat_src_.size()));
  }
  const int num_edges = static_cast<int>(gat_src_.size());
  const int v_loc2 = loc2[static_cast<size_t>(node_)];
  node_in_hop1_ = static_cast<int>(
      std::lower_bound(hop1_.begin(), hop1_.end(), node_) - hop1_.begin());

  gat_inc_src_ = Matrix::Zero(num_edges, 1);
  gat_inc_dst_ = Matrix::Zero(num_edges, 1);
  for (int k = 0; k < num_edges; ++k) {
    if (gat_src_[static_cast<size_t>(k)] == v_loc2) gat_inc_src_(k, 0) = 1.0;
    if (hop1_[static_cast<size_t>(gat_dst_[static_cast<size_t>(k)])] == node_) gat_inc_dst_(k, 0) = 1.0;
  }
  gat_ones_ = Matrix::Ones(static_cast<int>(hop1_.size()), 1);

  SparseMatrix x_sub = extract_rows(graph.features, hop2_);
  for (const auto& head : model_->gat.layer1) {
    GatHeadCache cache;
    cache.h = Matrix(x_sub * head.w.value);
    Matrix s_src = cache.h * head.attn_src.value;
    Matrix s_dst = cache.h * head.attn_dst.value;
    cache.edge_base = Matrix::Zero(num_edges, 1);
    cache.message_base = Matrix::Zero(num_edges, cache.h.cols());
    for (int k = 0; k < num_edges; ++k) {
      const int src = gat_src_[static_cast<size_t>(k)];
      const int dst2 = loc2[static_cast<size_t>(hop1_[static_cast<size_t>(gat_dst_[static_cast<size_t>(k)])])];
      if (src != v_loc2) {
        cache.edge_base(k, 0) += s_src(src, 0);
        cache.message_base.row(k) = cache.h.row(src);
      }
      if (dst2 != v_loc2) cache.edge_base(k, 0) += s_dst(dst2, 0);
    }
    gat_layer1_.push_back(std::move(cache));
  }
}

ad::Var NodeForward::logits(ad::Tape& tape, ad::Var feature_row) const {
  if (feature_row.rows() != 1 || feature_row.cols() != base_row_.size()) {
    throw DimensionError("NodeForward::logits: feature row must be 1 x d");
  }
  if (model_->architecture == Architecture::kGcn) {
    const GcnModel& m = model_->gcn;
    ad::Var delta = ad::sub(feature_row, tape.constant(base_row_));
    ad::Var shift = ad::matmul_right_const(delta, m.w1.value);           // 1 x hidden
    ad::Var pre = ad::add(tape.constant(gcn_premix_),
                          ad::matmul_left_const(gcn_adj_col_, shift));   // |S| x hidden
    ad::Var h1 = ad::relu(pre);
    ad::Var pooled = ad::spmm(gcn_adj_row_, h1);                         // 1 x hidden
    return ad::matmul_right_const(pooled, m.w2.value);                   // 1 x C
  }

  const GatModel& m = model_->gat;
  std::vector<ad::Var> head_outputs;
  head_outputs.reserve(gat_layer1_.size());
  const int n1 = static_cast<int>(hop1_.size());
  for (size_t p = 0; p < gat_layer1_.size(); ++p) {
    const GatHeadCache& cache = gat_layer1_[p];
    const GatModel::Head& head = m.layer1[p];
    ad::Var h_v = ad::matmul_right_const(feature_row, head.w.value);     // 1 x out
    ad::Var s_v_src = ad::matmul_right_const(h_v, head.attn_src.value);  // 1 x 1
    ad::Var s_v_dst = ad::matmul_right_const(h_v, head.attn_dst.value);
    ad::Var e = ad::add(ad::add(tape.constant(cache.edge_base),
                                ad::matmul_left_const(gat_inc_src_, s_v_src)),
                        ad::matmul_left_const(gat_inc_dst_, s_v_dst));
    ad::Var alpha = ad::segment_softmax(ad::leaky_relu(e, kAttentionSlope), gat_segments_);
    ad::Var messages = ad::add(tape.constant(cache.message_base),
                               ad::matmul_left_const(gat_inc_src_, h_v));
    head_outputs.push_back(
        ad::scatter_sum(ad::col_broadcast_mul(messages, alpha), gat_dst_, n1));
  }
  ad::Var z1 = ad::elu(ad::hconcat(head_outputs));                       // |S1| x heads*out
  ad::Var h2 = ad::matmul_right_const(z1, m.layer2.w.value);             // |S1| x C
  ad::Var s2_src = ad::matmul_right_const(h2, m.layer2.attn_src.value);  // |S1| x 1
  ad::Var h2_v = ad::gather_rows(h2, {node_in_hop1_});
  ad::Var s2_dst = ad::matmul_right_const(h2_v, m.layer2.attn_dst.value);  // 1 x 1
  ad::Var e2 = ad::leaky_relu(ad::add(s2_src, ad::matmul_left_const(gat_ones_, s2_dst)),
                              kAttentionSlope);
  ad::Segments whole;
  whole.offsets = {0, n1};
  ad::Var alpha2 = ad::segment_softmax(e2, whole);
  return ad::matmul(ad::transpose(alpha2), h2);                          // 1 x C
}

int NodeForward::predict(const RowVector& row) const {
  ad::Tape tape;
  ad::Var out = logits(tape, tape.constant(row));
  return argmax_row(out.value().row(0));
}

}  // namespace gnnbd
