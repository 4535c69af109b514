#pragma once

#include "gnnbd/common.hpp"

#include <string>
#include <utility>
#include <vector>

namespace gnnbd {

/// A citation network with binary bag-of-words node features. Immutable
/// once built; safe to share across threads.
struct CitationGraph {
  int num_nodes = 0;
  int num_features = 0;
  int num_classes = 0;

  SparseMatrix features;          // N x d, entries in {0, 1}
  std::vector<int> labels;        // class index per node
  std::vector<std::pair<int, int>> edges;  // undirected, deduplicated, first < second
  SparseMatrix adjacency;         // normalized: D^-1/2 (A + I) D^-1/2

  std::vector<std::string> node_ids;     // original id tokens, index = node
  std::vector<std::string> class_names;  // index = class

  // load diagnostics
  int skipped_cite_lines = 0;   // cites lines referencing unknown ids
  int dropped_self_loops = 0;   // self-loops present in the cites file
  int collapsed_duplicates = 0;

  RowVector feature_row(int node) const;
};

struct DataSplit {
  std::vector<int> train;  // sorted
  std::vector<int> test;   // sorted
  uint64_t seed = 0;
};

/// Parse `<node_id> <f_1> ... <f_d> <class_name>` content lines plus
/// `<cited_id> <citing_id>` cites lines. Node ids and class names are
/// remapped to dense indices in first-appearance order; edges are made
/// undirected and deduplicated; cites lines with unknown ids are skipped
/// and counted.
CitationGraph load_citation_dataset(const std::string& content_path, const std::string& cites_path);

/// Symmetric normalization with self-loops: entry (v,u) = 1/sqrt(d_v d_u)
/// where degrees count A + I.
SparseMatrix normalize_adjacency(const std::vector<std::pair<int, int>>& edges, int num_nodes);

/// Seeded uniform sample of round(fraction * N) train nodes, remainder test.
DataSplit split(const CitationGraph& graph, Real fraction, uint64_t seed);

/// Rebuild the feature matrix with some rows replaced (triggered nodes).
SparseMatrix replace_feature_rows(const SparseMatrix& features, const std::vector<int>& nodes,
                                  const std::vector<RowVector>& rows);

}  // namespace gnnbd
