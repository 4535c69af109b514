#include "gnnbd/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace gnnbd::ad {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

}  // namespace

const Matrix& Var::value() const { return tape_->node(id_).value; }
const Matrix& Var::grad() const { return tape_->node(id_).grad; }

void Segments::validate(int total_rows) const {
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != total_rows) {
    throw std::invalid_argument("segments: offsets must start at 0 and end at the row count");
  }
  for (size_t i = 0; i + 1 < offsets.size(); ++i) {
    if (offsets[i + 1] <= offsets[i]) {
      throw std::invalid_argument("segments: empty or decreasing segment at index " + std::to_string(i));
    }
  }
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, size() - 1);
}

Var Tape::leaf(Param& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = true;
  Param* pp = &p;
  n.backprop = [pp](Tape&, const Matrix& g) {
    if (!pp->has_grad()) pp->zero_grad();
    pp->grad += g;
  };
  nodes_.push_back(std::move(n));
  return Var(this, size() - 1);
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = node(id);
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& loss) {
  if (loss.tape_ != this) throw std::invalid_argument("backward: loss from another tape");
  if (node(loss.id_).value.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(node(loss.id_).value));
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);
  accumulate(loss.id_, Matrix::Ones(1, 1));
  for (int i = loss.id_; i >= 0; --i) {
    Node& n = node(i);
    if (n.grad.size() == 0 || !n.backprop) continue;
    n.backprop(*this, n.grad);
  }
}

// Shared plumbing for defining an op: record inputs, forward value, and a
// backward that receives the output gradient and distributes it.
struct OpBuilder {
  static Var make(Tape& t, const std::vector<Var>& inputs, Matrix value,
                  std::function<void(Tape&, const Matrix&, const std::vector<int>&)> back) {
    Tape::Node n;
    n.value = std::move(value);
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (const Var& v : inputs) {
      if (v.tape_ != &t) throw std::invalid_argument("op: operands must live on one tape");
      ids.push_back(v.id_);
      n.requires_grad = n.requires_grad || t.node(v.id_).requires_grad;
    }
    if (n.requires_grad && back) {
      n.backprop = [back = std::move(back), ids](Tape& tape, const Matrix& g) { back(tape, g, ids); };
    }
    t.nodes_.push_back(std::move(n));
    return Var(&t, t.size() - 1);
  }

  static Tape& tape_of(Var v) { return *v.tape_; }
  static const Matrix& value_of(Var v) { return v.tape_->node(v.id_).value; }
  static bool needs_grad(Var v) { return v.tape_->node(v.id_).requires_grad; }
};

namespace {

Tape& tape_of(Var a) { return OpBuilder::tape_of(a); }

Var unary_elementwise(Var x, Matrix value, Matrix dvalue) {
  return OpBuilder::make(
      tape_of(x), {x}, std::move(value),
      [d = std::move(dvalue)](Tape& t, const Matrix& g, const std::vector<int>& in) {
        t.accumulate(in[0], g.cwiseProduct(d));
      });
}

}  // namespace

Var matmul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(av) + " * " + shape_str(bv));
  }
  return OpBuilder::make(tape_of(a), {a, b}, av * bv,
                         [](Tape& t, const Matrix& g, const std::vector<int>& in) {
                           const Matrix& av = t.value_of(in[0]);
                           const Matrix& bv = t.value_of(in[1]);
                           if (t.wants_grad(in[0])) t.accumulate(in[0], g * bv.transpose());
                           if (t.wants_grad(in[1])) t.accumulate(in[1], av.transpose() * g);
                         });
}

Var matmul_left_const(const Matrix& a, Var b) {
  const Matrix& bv = b.value();
  if (a.cols() != bv.rows()) {
    throw DimensionError("matmul_left_const: inner dimensions differ, " + shape_str(a) + " * " +
                         shape_str(bv));
  }
  const Matrix* ap = &a;
  return OpBuilder::make(tape_of(b), {b}, a * bv,
                         [ap](Tape& t, const Matrix& g, const std::vector<int>& in) {
                           t.accumulate(in[0], ap->transpose() * g);
                         });
}

Var matmul_right_const(Var a, const Matrix& b) {
  const Matrix& av = a.value();
  if (av.cols() != b.rows()) {
    throw DimensionError("matmul_right_const: inner dimensions differ, " + shape_str(av) + " * " +
                         shape_str(b));
  }
  const Matrix* bp = &b;
  return OpBuilder::make(tape_of(a), {a}, av * b,
                         [bp](Tape& t, const Matrix& g, const std::vector<int>& in) {
                           t.accumulate(in[0], g * bp->transpose());
                         });
}

Var spmm(const SparseMatrix& s, Var d) {
  const Matrix& dv = d.value();
  if (s.cols() != dv.rows()) {
    throw DimensionError("spmm: inner dimensions differ, " + std::to_string(s.rows()) + "x" +
                         std::to_string(s.cols()) + " * " + shape_str(dv));
  }
  const SparseMatrix* sp = &s;
  return OpBuilder::make(tape_of(d), {d}, Matrix(s * dv),
                         [sp](Tape& t, const Matrix& g, const std::vector<int>& in) {
                           t.accumulate(in[0], Matrix(sp->transpose() * g));
                         });
}

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  return OpBuilder::make(tape_of(a), {a, b}, a.value() + b.value(),
                         [](Tape& t, const Matrix& g, const std::vector<int>& in) {
                           t.accumulate(in[0], g);
                           t.accumulate(in[1], g);
                         });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  return OpBuilder::make(tape_of(a), {a, b}, a.value() - b.value(),
                         [](Tape& t, const Matrix& g, const std::vector<int>& in) {
                           t.accumulate(in[0], g);
                           t.accumulate(in[1], -g);
                         });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a.value(), b.value());
  return OpBuilder::make(tape_of(a), {a, b}, a.value().cwiseProduct(b.value()),
                         [](Tape& t, const Matrix& g, const std::vector<int>& in) {
                           if (t.wants_grad(in[0]))
                             t.accumulate(in[0], g.cwiseProduct(t.value_of(in[1])));
                           if (t.wants_grad(in[1]))
                             t.accumulate(in[1], g.cwiseProduct(t.value_of(in[0])));
                         });
}

Var scale(Var a, Real s) {
  return OpBuilder::make(tape_of(a), {a}, a.value() * s,
                         [s](Tape& t, const Matrix& g, const std::vector<int>& in) {
                           t.accumulate(in[0], g * s);
                         });
}

Var relu(Var x) {
  const Matrix& v = x.value();
  // subgradient 0 at the kink
  Matrix d = v.unaryExpr([](Real a) { return a > 0.0 ? 1.0 : 0.0; });
  return unary_elementwise(x, v.cwiseMax(0.0), std::move(d));
}

Var leaky_relu(Var x, Real slope) {
  const Matrix& v = x.value();
  Matrix out = v.unaryExpr([slope](Real a) { return a > 0.0 ? a : slope * a; });
  Matrix d = v.unaryExpr([slope](Real a) { return a > 0.0 ? 1.0 : slope; });
  return unary_elementwise(x, std::move(out), std::move(d));
}

Var sigmoid(Var x) {
  Matrix s = x.value().unaryExpr([](Real a) { return 1.0 / (1.0 + std::exp(-a)); });
  Matrix d = s.unaryExpr([](Real a) { return a * (1.0 - a); });
  return unary_elementwise(x, std::move(s), std::move(d));
}

Var elu(Var x) {
  const Matrix& v = x.value();
  Matrix out = v.unaryExpr([](Real a) { return a > 0.0 ? a : std::exp(a) - 1.0; });
  Matrix d = v.unaryExpr([](Real a) { return a > 0.0 ? 1.0 : std::exp(a); });
  return unary_elementwise(x, std::move(out), std::move(d));
}

Var segment_softmax(Var scores, const Segments& segments) {
  const Matrix& v = scores.value();
  if (v.cols() != 1) throw DimensionError("segment_softmax: scores must be E x 1");
  segments.validate(static_cast<int>(v.rows()));
  Matrix out(v.rows(), 1);
  for (int s = 0; s < segments.count(); ++s) {
    int lo = segments.offsets[static_cast<size_t>(s)];
    int hi = segments.offsets[static_cast<size_t>(s) + 1];
    Real mx = v.col(0).segment(lo, hi - lo).maxCoeff();
    Eigen::ArrayXd e = (v.col(0).segment(lo, hi - lo).array() - mx).exp();
    out.col(0).segment(lo, hi - lo) = (e / e.sum()).matrix();
  }
  Segments segs = segments;
  Matrix y = out;
  return OpBuilder::make(tape_of(scores), {scores}, std::move(out),
                         [segs, y = std::move(y)](Tape& t, const Matrix& g, const std::vector<int>& in) {
                           // d x_i = y_i (g_i - sum_j g_j y_j) within each segment
                           Matrix dx(y.rows(), 1);
                           for (int s = 0; s < segs.count(); ++s) {
                             int lo = segs.offsets[static_cast<size_t>(s)];
                             int len = segs.offsets[static_cast<size_t>(s) + 1] - lo;
                             auto yseg = y.col(0).segment(lo, len).array();
                             auto gseg = g.col(0).segment(lo, len).array();
                             Real dot = (gseg * yseg).sum();
                             dx.col(0).segment(lo, len) = (yseg * (gseg - dot)).matrix();
                           }
                           t.accumulate(in[0], dx);
                         });
}

Var log_softmax_nll(Var logits, const std::vector<int>& labels, const std::vector<int>& rows) {
  const Matrix& v = logits.value();
  const int n_rows = static_cast<int>(v.rows());
  const int n_classes = static_cast<int>(v.cols());
  if (rows.empty()) throw std::invalid_argument("log_softmax_nll: empty row subset");
  if (static_cast<int>(labels.size()) != n_rows) {
    throw DimensionError("log_softmax_nll: need one label per logits row");
  }
  for (int r : rows) {
    if (r < 0 || r >= n_rows) throw std::invalid_argument("log_softmax_nll: row index out of range");
    if (labels[static_cast<size_t>(r)] < 0 || labels[static_cast<size_t>(r)] >= n_classes) {
      throw std::invalid_argument("log_softmax_nll: label out of range at row " + std::to_string(r));
    }
  }
  Real total = 0.0;
  for (int r : rows) {
    Real mx = v.row(r).maxCoeff();
    Real lse = mx + std::log((v.row(r).array() - mx).exp().sum());
    total += lse - v(r, labels[static_cast<size_t>(r)]);
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<Real>(rows.size());
  return OpBuilder::make(
      tape_of(logits), {logits}, out,
      [labels, rows](Tape& t, const Matrix& g, const std::vector<int>& in) {
        const Matrix& v = t.value_of(in[0]);
        Matrix dx = Matrix::Zero(v.rows(), v.cols());
        const Real w = g(0, 0) / static_cast<Real>(rows.size());
        for (int r : rows) {
          Real mx = v.row(r).maxCoeff();
          Eigen::ArrayXd e = (v.row(r).array() - mx).exp();
          dx.row(r) = (e / e.sum()).matrix().transpose() * w;
          dx(r, labels[static_cast<size_t>(r)]) -= w;
        }
        t.accumulate(in[0], dx);
      });
}

Var gather_rows(Var a, std::vector<int> idx) {
  const Matrix& v = a.value();
  Matrix out(static_cast<Eigen::Index>(idx.size()), v.cols());
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= v.rows()) throw std::invalid_argument("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(k)) = v.row(idx[k]);
  }
  return OpBuilder::make(tape_of(a), {a}, std::move(out),
                         [idx = std::move(idx)](Tape& t, const Matrix& g, const std::vector<int>& in) {
                           const Matrix& v = t.value_of(in[0]);
                           Matrix dx = Matrix::Zero(v.rows(), v.cols());
                           for (size_t k = 0; k < idx.size(); ++k) {
                             dx.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
                           }
                           t.accumulate(in[0], dx);
                         });
}

Var scatter_sum(Var a, std::vector<int> idx, int out_rows) {
  const Matrix& v = a.value();
  if (static_cast<Eigen::Index>(idx.size()) != v.rows()) {
    throw DimensionError("scatter_sum: need one target row per input row");
  }
  Matrix out = Matrix::Zero(out_rows, v.cols());
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= out_rows) throw std::invalid_argument("scatter_sum: index out of range");
    out.row(idx[k]) += v.row(static_cast<Eigen::Index>(k));
  }
  return OpBuilder::make(tape_of(a), {a}, std::move(out),
                         [idx = std::move(idx)](Tape& t, const Matrix& g, const std::vector<int>& in) {
                           Matrix dx(static_cast<Eigen::Index>(idx.size()), g.cols());
                           for (size_t k = 0; k < idx.size(); ++k) {
                             dx.row(static_cast<Eigen::Index>(k)) = g.row(idx[k]);
                           }
                           t.accumulate(in[0], dx);
                         });
}

Var col_broadcast_mul(Var a, Var weights) {
  const Matrix& av = a.value();
  const Matrix& wv = weights.value();
  if (wv.cols() != 1 || wv.rows() != av.rows()) {
    throw DimensionError("col_broadcast_mul: weights must be " + std::to_string(av.rows()) + "x1");
  }
  Matrix out = (av.array().colwise() * wv.col(0).array()).matrix();
  return OpBuilder::make(tape_of(a), {a, weights}, std::move(out),
                         [](Tape& t, const Matrix& g, const std::vector<int>& in) {
                           const Matrix& av = t.value_of(in[0]);
                           const Matrix& wv = t.value_of(in[1]);
                           if (t.wants_grad(in[0])) {
                             t.accumulate(in[0], (g.array().colwise() * wv.col(0).array()).matrix());
                           }
                           if (t.wants_grad(in[1])) {
                             t.accumulate(in[1], Matrix(g.cwiseProduct(av).rowwise().sum()));
                           }
                         });
}

Var hconcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("hconcat: no operands");
  Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw DimensionError("hconcat: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> widths;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    widths.push_back(p.cols());
    at += p.cols();
  }
  return OpBuilder::make(tape_of(parts[0]), parts, std::move(out),
                         [widths](Tape& t, const Matrix& g, const std::vector<int>& in) {
                           Eigen::Index at = 0;
                           for (size_t k = 0; k < in.size(); ++k) {
                             t.accumulate(in[k], g.middleCols(at, widths[k]));
                             at += widths[k];
                           }
                         });
}

Var transpose(Var a) {
  return OpBuilder::make(tape_of(a), {a}, a.value().transpose(),
                         [](Tape& t, const Matrix& g, const std::vector<int>& in) {
                           t.accumulate(in[0], g.transpose());
                         });
}

Var mean_all(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().mean();
  const Real inv = 1.0 / static_cast<Real>(a.value().size());
  return OpBuilder::make(tape_of(a), {a}, std::move(out),
                         [inv](Tape& t, const Matrix& g, const std::vector<int>& in) {
                           const Matrix& v = t.value_of(in[0]);
                           t.accumulate(in[0], Matrix::Constant(v.rows(), v.cols(), g(0, 0) * inv));
                         });
}

Var bernoulli_entropy(Var p) {
  constexpr Real kEps = 1e-12;
  Eigen::ArrayXXd q = p.value().array().max(kEps).min(1.0 - kEps);
  Matrix out = (-q * q.log() - (1.0 - q) * (1.0 - q).log()).matrix();
  Matrix d = ((1.0 - q) / q).log().matrix();
  return unary_elementwise(p, std::move(out), std::move(d));
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Real mx = logits.row(r).maxCoeff();
    Real lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

Adam::Adam(std::vector<Param*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Param* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  for (Param* p : params_) {
    if (!p->has_grad()) throw std::invalid_argument("adam_step: gradient missing for a parameter");
  }
  ++t_;
  const Real bc1 = 1.0 - std::pow(config_.beta1, static_cast<Real>(t_));
  const Real bc2 = 1.0 - std::pow(config_.beta2, static_cast<Real>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
    Eigen::ArrayXXd m_hat = m_[i].array() / bc1;
    Eigen::ArrayXXd v_hat = v_[i].array() / bc2;
    p.value.array() -= config_.learning_rate * m_hat / (v_hat.sqrt() + config_.epsilon);
  }
}

}  // namespace gnnbd::ad
