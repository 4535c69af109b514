#include "gnnbd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace gnnbd {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

RowVector CitationGraph::feature_row(int node) const {
  RowVector row = RowVector::Zero(num_features);
  for (SparseMatrix::InnerIterator it(features, node); it; ++it) {
    row(it.col()) = it.value();
  }
  return row;
}

CitationGraph load_citation_dataset(const std::string& content_path, const std::string& cites_path) {
  std::ifstream content(content_path);
  if (!content) throw DataError("cannot open content file: " + content_path);

  CitationGraph g;
  std::unordered_map<std::string, int> node_index;
  std::unordered_map<std::string, int> class_index;
  std::vector<Eigen::Triplet<Real>> feature_triplets;

  std::string line;
  int line_no = 0;
  while (std::getline(content, line)) {
    ++line_no;
    std::vector<std::string> toks = tokenize(line);
    if (toks.empty()) continue;
    if (g.num_features == 0) {
      if (toks.size() < 3) {
        throw DataError(content_path + ":" + std::to_string(line_no) +
                        ": expected <id> <features...> <class>, got " + std::to_string(toks.size()) +
                        " tokens");
      }
      g.num_features = static_cast<int>(toks.size()) - 2;
    } else if (static_cast<int>(toks.size()) != g.num_features + 2) {
      throw DataError(content_path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(g.num_features + 2) + " tokens, got " + std::to_string(toks.size()));
    }
    if (node_index.count(toks.front())) {
      throw DataError(content_path + ":" + std::to_string(line_no) + ": duplicate node id " + toks.front());
    }
    const int node = static_cast<int>(g.node_ids.size());
    node_index.emplace(toks.front(), node);
    g.node_ids.push_back(toks.front());

    for (int f = 0; f < g.num_features; ++f) {
      const std::string& tok = toks[static_cast<size_t>(f) + 1];
      Real value;
      try {
        size_t pos = 0;
        value = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw DataError(content_path + ":" + std::to_string(line_no) + ": feature token '" + tok +
                        "' is not a number");
      }
      if (value != 0.0 && value != 1.0) {
        throw DataError(content_path + ":" + std::to_string(line_no) + ": feature value " + tok +
                        " outside {0,1}");
      }
      if (value == 1.0) feature_triplets.emplace_back(node, f, 1.0);
    }

    const std::string& cls = toks.back();
    auto it = class_index.find(cls);
    int cls_id;
    if (it == class_index.end()) {
      cls_id = static_cast<int>(g.class_names.size());
      class_index.emplace(cls, cls_id);
      g.class_names.push_back(cls);
    } else {
      cls_id = it->second;
    }
    g.labels.push_back(cls_id);
  }
  g.num_nodes = static_cast<int>(g.node_ids.size());
  g.num_classes = static_cast<int>(g.class_names.size());
  if (g.num_nodes == 0) throw DataError(content_path + ": no nodes");

  g.features.resize(g.num_nodes, g.num_features);
  g.features.setFromTriplets(feature_triplets.begin(), feature_triplets.end());
  g.features.makeCompressed();

  std::ifstream cites(cites_path);
  if (!cites) throw DataError("cannot open cites file: " + cites_path);
  std::set<std::pair<int, int>> edge_set;
  line_no = 0;
  while (std::getline(cites, line)) {
    ++line_no;
    std::vector<std::string> toks = tokenize(line);
    if (toks.empty()) continue;
    if (toks.size() != 2) {
      throw DataError(cites_path + ":" + std::to_string(line_no) + ": expected <cited_id> <citing_id>");
    }
    auto a = node_index.find(toks[0]);
    auto b = node_index.find(toks[1]);
    if (a == node_index.end() || b == node_index.end()) {
      ++g.skipped_cite_lines;
      continue;
    }
    if (a->second == b->second) {
      ++g.dropped_self_loops;
      continue;
    }
    std::pair<int, int> e{std::min(a->second, b->second), std::max(a->second, b->second)};
    if (!edge_set.insert(e).second) ++g.collapsed_duplicates;
  }
  g.edges.assign(edge_set.begin(), edge_set.end());
  g.adjacency = normalize_adjacency(g.edges, g.num_nodes);
  return g;
}

SparseMatrix normalize_adjacency(const std::vector<std::pair<int, int>>& edges, int num_nodes) {
  std::vector<Real> degree(static_cast<size_t>(num_nodes), 1.0);  // self-loop
  for (const auto& [u, v] : edges) {
    if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes) {
      throw std::invalid_argument("normalize_adjacency: edge endpoint out of range");
    }
    degree[static_cast<size_t>(u)] += 1.0;
    degree[static_cast<size_t>(v)] += 1.0;
  }
  std::vector<Eigen::Triplet<Real>> triplets;
  triplets.reserve(edges.size() * 2 + static_cast<size_t>(num_nodes));
  for (int v = 0; v < num_nodes; ++v) {
    triplets.emplace_back(v, v, 1.0 / degree[static_cast<size_t>(v)]);
  }
  for (const auto& [u, v] : edges) {
    Real w = 1.0 / std::sqrt(degree[static_cast<size_t>(u)] * degree[static_cast<size_t>(v)]);
    triplets.emplace_back(u, v, w);
    triplets.emplace_back(v, u, w);
  }
  SparseMatrix adj(num_nodes, num_nodes);
  adj.setFromTriplets(triplets.begin(), triplets.end());
  adj.makeCompressed();
  return adj;
}

DataSplit split(const CitationGraph& graph, Real fraction, uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0) {
    throw std::invalid_argument("split: fraction must be in (0, 1)");
  }
  const int n = graph.num_nodes;
  const int train_size = static_cast<int>(std::lround(fraction * n));
  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(rng.uniform_int(i + 1))]);
  }
  DataSplit s;
  s.seed = seed;
  s.train.assign(perm.begin(), perm.begin() + train_size);
  s.test.assign(perm.begin() + train_size, perm.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

SparseMatrix replace_feature_rows(const SparseMatrix& features, const std::vector<int>& nodes,
                                  const std::vector<RowVector>& rows) {
  if (nodes.size() != rows.size()) {
    throw std::invalid_argument("replace_feature_rows: nodes and rows length mismatch");
  }
  std::vector<char> replaced(static_cast<size_t>(features.rows()), 0);
  for (int v : nodes) replaced[static_cast<size_t>(v)] = 1;

  std::vector<Eigen::Triplet<Real>> triplets;
  triplets.reserve(static_cast<size_t>(features.nonZeros()) + nodes.size() * 8);
  for (int r = 0; r < features.rows(); ++r) {
    if (replaced[static_cast<size_t>(r)]) continue;
    for (SparseMatrix::InnerIterator it(features, r); it; ++it) {
      triplets.emplace_back(r, static_cast<int>(it.col()), it.value());
    }
  }
  for (size_t k = 0; k < nodes.size(); ++k) {
    const RowVector& row = rows[k];
    if (row.size() != features.cols()) {
      throw DimensionError("replace_feature_rows: row length differs from feature dimension");
    }
    for (int c = 0; c < row.size(); ++c) {
      if (row(c) != 0.0) triplets.emplace_back(nodes[k], c, row(c));
    }
  }
  SparseMatrix out(features.rows(), features.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  out.makeCompressed();
  return out;
}

}  // namespace gnnbd
