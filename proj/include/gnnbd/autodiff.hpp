#pragma once

#include "gnnbd/common.hpp"

#include <functional>
#include <vector>

namespace gnnbd::ad {

class Tape;
struct OpBuilder;

/// Trainable tensor. Gradients accumulate across backward passes until
/// zero_grad(); adam_step requires grad to be populated (zero_grad or a
/// backward pass that reached the parameter).
struct Param {
  Matrix value;
  Matrix grad;  // empty until first use

  Param() = default;
  explicit Param(Matrix v) : value(std::move(v)) {}

  bool has_grad() const { return grad.rows() == value.rows() && grad.cols() == value.cols(); }
  void zero_grad() { grad = Matrix::Zero(value.rows(), value.cols()); }
};

/// Handle to a node on a Tape. Valid for the lifetime of its tape.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  const Matrix& grad() const;  // empty unless backward reached this node
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  friend class Tape;
  friend struct OpBuilder;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Contiguous grouping of the rows of an E x k matrix: segment s covers
/// rows [offsets[s], offsets[s+1]). Every row belongs to exactly one
/// segment and segments must be non-empty.
struct Segments {
  std::vector<int> offsets;

  int count() const { return static_cast<int>(offsets.size()) - 1; }
  void validate(int total_rows) const;
};

/// One reverse-mode computation record. Nodes are appended in topological
/// order; backward() walks them in reverse. Node gradients start from zero
/// on every backward call; Param gradients accumulate across calls.
class Tape {
 public:
  Var constant(Matrix value);
  Var leaf(Param& p);

  void backward(const Var& loss);

  int size() const { return static_cast<int>(nodes_.size()); }

  // node access for operation closures
  const Matrix& value_of(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  bool wants_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
  void accumulate(int id, const Matrix& g);

 private:
  friend class Var;
  friend struct OpBuilder;

  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(Tape&, const Matrix&)> backprop;  // receives this node's grad
  };

  Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }

  std::vector<Node> nodes_;
};

// Differentiable operations. All of them are deterministic and check
// operand shapes, throwing DimensionError on mismatch.

Var matmul(Var a, Var b);
// Const-operand products: the constant side is captured by pointer (no
// gradient flows to it, caller keeps it alive until the tape is done).
Var matmul_left_const(const Matrix& a, Var b);
Var matmul_right_const(Var a, const Matrix& b);
/// s is constant; no gradient flows to it. Caller keeps s alive until the
/// tape is done.
Var spmm(const SparseMatrix& s, Var d);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, Real s);

Var relu(Var x);
Var leaky_relu(Var x, Real slope);
Var sigmoid(Var x);
Var elu(Var x);

/// Softmax within each segment of an E x 1 score vector, max-subtracted.
Var segment_softmax(Var scores, const Segments& segments);

/// Mean negative log-likelihood over the selected rows. labels holds one
/// class index per logits row; gradient flows only through selected rows.
Var log_softmax_nll(Var logits, const std::vector<int>& labels, const std::vector<int>& rows);

Var gather_rows(Var a, std::vector<int> idx);
/// out.row(idx[k]) += a.row(k); inverse of gather_rows.
Var scatter_sum(Var a, std::vector<int> idx, int out_rows);
/// a is E x k, weights is E x 1; scales row i of a by weights(i).
Var col_broadcast_mul(Var a, Var weights);
Var hconcat(const std::vector<Var>& parts);
Var transpose(Var a);
Var mean_all(Var a);
/// Elementwise -p log p - (1-p) log(1-p), p clamped to [1e-12, 1 - 1e-12].
Var bernoulli_entropy(Var p);

/// Row-wise log-softmax of a plain matrix (max-subtracted). Pure helper for
/// turning logits into log-probabilities outside the tape.
Matrix log_softmax_rows(const Matrix& logits);

struct AdamConfig {
  Real learning_rate = 0.005;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real epsilon = 1e-8;
};

/// Adam with bias correction over a fixed parameter set.
class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig config);

  /// One update from the currently populated gradients. Throws if any
  /// parameter's gradient is missing.
  void step();

  long steps_taken() const { return t_; }

 private:
  std::vector<Param*> params_;
  std::vector<Matrix> m_, v_;
  AdamConfig config_;
  long t_ = 0;
};

}  // namespace gnnbd::ad
