#pragma once

// Shared helpers for the unit suites: finite-difference oracle, toy graph
// construction, and an independent per-edge GAT forward used as a
// reference implementation.

#include "gnnbd/graph.hpp"
#include "gnnbd/models.hpp"
#include "gnnbd/node_forward.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace testsup {

using gnnbd::CitationGraph;
using gnnbd::Matrix;
using gnnbd::Real;
using gnnbd::RowVector;

inline Matrix random_matrix(gnnbd::Rng& rng, int rows, int cols, Real lo = -1.0, Real hi = 1.0) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(lo, hi);
  }
  return m;
}

/// Central finite differences of a scalar function at x.
inline Matrix numeric_gradient(const std::function<Real(const Matrix&)>& f, Matrix x,
                               Real step = 1e-4) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const Real keep = x(r, c);
      x(r, c) = keep + step;
      const Real hi = f(x);
      x(r, c) = keep - step;
      const Real lo = f(x);
      x(r, c) = keep;
      g(r, c) = (hi - lo) / (2.0 * step);
    }
  }
  return g;
}

/// Relative error below tol wherever the analytic entry is above the floor.
inline bool gradients_match(const Matrix& analytic, const Matrix& numeric, Real rel_tol = 1e-3,
                            Real floor = 1e-6) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) return false;
  for (Eigen::Index r = 0; r < analytic.rows(); ++r) {
    for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
      const Real a = analytic(r, c);
      const Real n = numeric(r, c);
      if (std::abs(a) <= floor) continue;
      if (std::abs(a - n) / std::max(std::abs(a), std::abs(n)) >= rel_tol) return false;
    }
  }
  return true;
}

/// Toy graph assembled in memory (no files).
inline CitationGraph toy_graph(int num_classes, const Matrix& features,
                               const std::vector<int>& labels,
                               const std::vector<std::pair<int, int>>& edges) {
  CitationGraph g;
  g.num_nodes = static_cast<int>(features.rows());
  g.num_features = static_cast<int>(features.cols());
  g.num_classes = num_classes;
  std::vector<Eigen::Triplet<Real>> triplets;
  for (int r = 0; r < g.num_nodes; ++r) {
    for (int c = 0; c < g.num_features; ++c) {
      if (features(r, c) != 0.0) triplets.emplace_back(r, c, features(r, c));
    }
  }
  g.features.resize(g.num_nodes, g.num_features);
  g.features.setFromTriplets(triplets.begin(), triplets.end());
  g.features.makeCompressed();
  g.labels = labels;
  g.edges = edges;
  g.adjacency = gnnbd::normalize_adjacency(edges, g.num_nodes);
  for (int v = 0; v < g.num_nodes; ++v) g.node_ids.push_back("n" + std::to_string(v));
  for (int c = 0; c < num_classes; ++c) g.class_names.push_back("c" + std::to_string(c));
  return g;
}

/// Random binary-featured toy graph with random edges.
inline CitationGraph random_toy_graph(gnnbd::Rng& rng, int nodes, int features, int classes,
                                      Real edge_prob = 0.35, Real feature_prob = 0.4) {
  Matrix x(nodes, features);
  for (int r = 0; r < nodes; ++r) {
    for (int c = 0; c < features; ++c) x(r, c) = rng.uniform() < feature_prob ? 1.0 : 0.0;
  }
  std::vector<int> labels;
  for (int r = 0; r < nodes; ++r) labels.push_back(rng.uniform_int(classes));
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < nodes; ++u) {
    for (int v = u + 1; v < nodes; ++v) {
      if (rng.uniform() < edge_prob) edges.emplace_back(u, v);
    }
  }
  return toy_graph(classes, x, labels, edges);
}

/// Per-edge loop reference for the two-layer GAT forward: per-head scores
/// e_vu = leaky(a_src . W z_u + a_dst . W z_v), softmax over each closed
/// in-neighborhood, layer-1 head concatenation + ELU, single averaged
/// layer-2 head. Straight dense loops, independent of the tape engine.
inline Matrix naive_gat_logits(const gnnbd::TrainedModel& model, const CitationGraph& g) {
  const Real slope = 0.2;
  const int n = g.num_nodes;
  Matrix x(n, g.num_features);
  x.setZero();
  for (int r = 0; r < n; ++r) x.row(r) = g.feature_row(r);
  std::vector<std::vector<int>> nbrs(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v) nbrs[static_cast<size_t>(v)].push_back(v);
  for (auto [u, v] : g.edges) {
    nbrs[static_cast<size_t>(u)].push_back(v);
    nbrs[static_cast<size_t>(v)].push_back(u);
  }

  auto head_pass = [&](const Matrix& input, const gnnbd::GatModel::Head& head) {
    Matrix h = input * head.w.value;
    Matrix out = Matrix::Zero(n, h.cols());
    for (int v = 0; v < n; ++v) {
      const auto& in_set = nbrs[static_cast<size_t>(v)];
      std::vector<Real> scores;
      Real mx = -1e300;
      for (int u : in_set) {
        Real e = (h.row(u) * head.attn_src.value)(0, 0) + (h.row(v) * head.attn_dst.value)(0, 0);
        e = e > 0 ? e : slope * e;
        scores.push_back(e);
        mx = std::max(mx, e);
      }
      Real z = 0;
      for (Real& e : scores) {
        e = std::exp(e - mx);
        z += e;
      }
      for (size_t k = 0; k < in_set.size(); ++k) {
        out.row(v) += (scores[k] / z) * h.row(in_set[k]);
      }
    }
    return out;
  };

  Matrix z1(n, static_cast<Eigen::Index>(model.gat.layer1.size()) * model.config.head_dim);
  for (size_t p = 0; p < model.gat.layer1.size(); ++p) {
    z1.middleCols(static_cast<Eigen::Index>(p) * model.config.head_dim, model.config.head_dim) =
        head_pass(x, model.gat.layer1[p]);
  }
  for (Eigen::Index r = 0; r < z1.rows(); ++r) {
    for (Eigen::Index c = 0; c < z1.cols(); ++c) {
      if (z1(r, c) <= 0) z1(r, c) = std::exp(z1(r, c)) - 1.0;
    }
  }
  return head_pass(z1, model.gat.layer2);
}

}  // namespace testsup
